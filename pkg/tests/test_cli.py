"""End-to-end command-line pipeline: index, retrieve, eval, compare."""

import json
from pathlib import Path

import pytest

from trieval.cli import INDEX_FILES, main

CORPUS = [
    {"doc_id": "d1", "text": "binary search tree insertion lookup balanced node"},
    {"doc_id": "d2", "text": "quick sort partition pivot array recursion swap"},
    {"doc_id": "d3", "text": "hash map bucket collision chaining probe slot"},
    {"doc_id": "d4", "text": "graph shortest path priority queue weighted edge"},
    {"doc_id": "d5", "text": "dynamic programming memoization subproblem optimal substructure"},
]

QUERIES = [
    {"query_id": "q1", "text": "balanced tree lookup", "instr_id": "algo"},
    {"query_id": "q2", "text": "pivot partition recursion", "instr_id": "algo"},
    {"query_id": "q3", "text": "zzz yyy xxx"},  # out-of-vocabulary tokens only
]

QRELS = "q1 0 d1 1\nq2 0 d2 1\nq3 0 d3 1\n"


def write_workspace(root: Path, num_docids=3, seed=7) -> Path:
    (root / "corpus.jsonl").write_text(
        "".join(json.dumps(d) + "\n" for d in CORPUS), encoding="utf-8"
    )
    (root / "instructions.jsonl").write_text(
        '{"instr_id": "algo", "text": "retrieve algorithm descriptions"}\n',
        encoding="utf-8",
    )
    (root / "queries.jsonl").write_text(
        "".join(json.dumps(q) + "\n" for q in QUERIES), encoding="utf-8"
    )
    (root / "qrels.txt").write_text(QRELS, encoding="utf-8")
    config = root / "trieval.ini"
    config.write_text(
        f"""[paths]
corpus = {root / 'corpus.jsonl'}
instructions = {root / 'instructions.jsonl'}
queries = {root / 'queries.jsonl'}
qrels = {root / 'qrels.txt'}
output_dir = {root / 'out'}

[querygen]
queries_per_doc = 4
seed = {seed}

[decoder]
strategy = reverse-annealing
num_docids = {num_docids}
seed = {seed}
""",
        encoding="utf-8",
    )
    return config


def run_cli(*argv) -> int:
    return main(list(argv))


class TestIndex:
    def test_creates_exactly_the_four_artifacts(self, tmp_path):
        config = write_workspace(tmp_path)
        assert run_cli("--config", str(config), "index") == 0
        out = tmp_path / "out"
        assert sorted(p.name for p in out.iterdir()) == sorted(INDEX_FILES)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["n"] == 5
        assert manifest["conflict_rate"] == 0.0
        assert "config_hash" in manifest

    def test_rerun_is_byte_identical(self, tmp_path):
        config = write_workspace(tmp_path)
        assert run_cli("--config", str(config), "index") == 0
        first = {
            name: (tmp_path / "out" / name).read_bytes() for name in INDEX_FILES
        }
        assert run_cli("--config", str(config), "index") == 0
        second = {
            name: (tmp_path / "out" / name).read_bytes() for name in INDEX_FILES
        }
        assert first == second

    def test_missing_corpus_exits_2(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        (tmp_path / "corpus.jsonl").unlink()
        assert run_cli("--config", str(config), "index") == 2
        err = capsys.readouterr().err
        assert err.startswith("trieval: error:")
        assert "corpus.jsonl" in err

    def test_config_via_environment(self, tmp_path, monkeypatch):
        config = write_workspace(tmp_path)
        monkeypatch.setenv("TRIEVAL_CONFIG", str(config))
        assert run_cli("index") == 0
        assert (tmp_path / "out" / "manifest.json").exists()


class TestRetrieve:
    @pytest.fixture()
    def indexed(self, tmp_path):
        config = write_workspace(tmp_path)
        assert run_cli("--config", str(config), "index") == 0
        return config, tmp_path

    def test_three_distinct_docids_per_query(self, indexed):
        config, root = indexed
        run_path = root / "out" / "run.trec"
        assert (
            run_cli(
                "--config", str(config),
                "retrieve", "--index-dir", str(root / "out"), "--out", str(run_path),
            )
            == 0
        )
        lines = run_path.read_text().splitlines()
        by_query = {}
        for line in lines:
            query_id, _, doc_id, rank, score, tag = line.split()
            by_query.setdefault(query_id, []).append(doc_id)
        assert set(by_query) == {"q1", "q2", "q3"}
        for docs in by_query.values():
            assert len(docs) == 3
            assert len(set(docs)) == 3

    def test_unknown_token_query_still_retrieves(self, indexed):
        # q3 encodes to UNK-only tokens; the bigram prior carries the decode
        config, root = indexed
        run_path = root / "out" / "run.trec"
        run_cli(
            "--config", str(config),
            "retrieve", "--index-dir", str(root / "out"), "--out", str(run_path),
        )
        q3 = [l for l in run_path.read_text().splitlines() if l.startswith("q3 ")]
        assert len(q3) == 3

    def test_fixed_seed_identical_bytes(self, indexed):
        config, root = indexed
        a = root / "a.trec"
        b = root / "b.trec"
        for out in (a, b):
            run_cli(
                "--config", str(config),
                "retrieve", "--index-dir", str(root / "out"), "--out", str(out),
            )
        assert a.read_bytes() == b.read_bytes()
        aux_a = root / "a.docids.jsonl"
        aux_b = root / "b.docids.jsonl"
        assert aux_a.read_bytes() == aux_b.read_bytes()

    def test_threads_do_not_change_output(self, indexed):
        # per-query seeding makes parallel decoding order-independent
        config, root = indexed
        serial = root / "serial.trec"
        threaded = root / "threaded.trec"
        run_cli(
            "--config", str(config), "--threads", "1",
            "retrieve", "--index-dir", str(root / "out"), "--out", str(serial),
        )
        run_cli(
            "--config", str(config), "--threads", "4",
            "retrieve", "--index-dir", str(root / "out"), "--out", str(threaded),
        )
        assert serial.read_bytes() == threaded.read_bytes()

    def test_auxiliary_file_carries_paths_and_logprobs(self, indexed):
        config, root = indexed
        run_path = root / "out" / "run.trec"
        run_cli(
            "--config", str(config),
            "retrieve", "--index-dir", str(root / "out"), "--out", str(run_path),
        )
        rows = [
            json.loads(line)
            for line in (root / "out" / "run.docids.jsonl").read_text().splitlines()
        ]
        assert len(rows) == 9
        for row in rows:
            assert row["docid"]
            assert row["logprob"] <= 0.0
            assert row["decoder"] == "reverse-annealing"


class TestEvalAndCompare:
    @pytest.fixture()
    def run_file(self, tmp_path):
        config = write_workspace(tmp_path)
        run_cli("--config", str(config), "index")
        run_path = tmp_path / "out" / "run.trec"
        run_cli(
            "--config", str(config),
            "retrieve", "--index-dir", str(tmp_path / "out"), "--out", str(run_path),
        )
        return config, tmp_path, run_path

    def test_eval_writes_report_and_figure(self, run_file, capsys):
        config, root, run_path = run_file
        out = root / "report"
        code = run_cli(
            "--config", str(config),
            "eval", "--run", str(run_path), "--qrels", str(root / "qrels.txt"),
            "--out", str(out),
        )
        assert code == 0
        rows = [
            json.loads(line)
            for line in (out / "eval_report.jsonl").read_text().splitlines()
        ]
        assert rows[-1]["query_id"] == "_mean_"
        assert (out / "eval_report.png").stat().st_size > 0
        assert "acc@1=" in capsys.readouterr().out

    def test_compare_decoders_outputs(self, run_file):
        # default strategy list: all four decoders over the same index
        config, root, _ = run_file
        out = root / "cmp"
        code = run_cli(
            "--config", str(config),
            "compare-decoders", "--index-dir", str(root / "out"),
            "--out", str(out),
        )
        assert code == 0
        table = (out / "comparison.txt").read_text()
        rows = [
            json.loads(line)
            for line in (out / "comparison.jsonl").read_text().splitlines()
        ]
        expected = ["reverse-annealing", "greedy", "nucleus", "beam"]
        assert [r["decoder"] for r in rows] == expected
        for name in expected:
            assert name in table
        for row in rows:
            assert 0.0 <= row["acc_at_1"] <= 1.0
        assert (out / "comparison.png").stat().st_size > 0

    def test_unknown_strategy_rejected(self, run_file, capsys):
        config, root, _ = run_file
        code = run_cli(
            "--config", str(config),
            "compare-decoders", "--index-dir", str(root / "out"),
            "--strategies", "greedy,warp-drive",
            "--out", str(root / "cmp2"),
        )
        assert code == 2
        assert "warp-drive" in capsys.readouterr().err


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        assert run_cli("retrieve") == 1  # missing required --index-dir
        assert "trieval: error:" in capsys.readouterr().err

    def test_unknown_command_is_1(self, capsys):
        assert run_cli("frobnicate") == 1

    def test_data_error_is_2_with_prefix(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        (tmp_path / "qrels.txt").write_text("q1 0 d1 not-a-number\n")
        run_cli("--config", str(config), "index")
        run_path = tmp_path / "out" / "run.trec"
        run_cli(
            "--config", str(config),
            "retrieve", "--index-dir", str(tmp_path / "out"), "--out", str(run_path),
        )
        code = run_cli(
            "--config", str(config),
            "eval", "--run", str(run_path), "--qrels", str(tmp_path / "qrels.txt"),
            "--out", str(tmp_path / "rep"),
        )
        assert code == 2
        err = capsys.readouterr().err
        assert err.splitlines()[-1].startswith("trieval: error:")


class TestDeterminism:
    def test_index_retrieve_eval_byte_identical(self, tmp_path):
        # the full pipeline twice with the identical config, comparing
        # every produced artifact byte for byte
        root = tmp_path
        config = write_workspace(root)

        def pipeline():
            run_cli("--config", str(config), "index")
            run_path = root / "out" / "run.trec"
            run_cli(
                "--config", str(config),
                "retrieve", "--index-dir", str(root / "out"), "--out", str(run_path),
            )
            run_cli(
                "--config", str(config),
                "eval", "--run", str(run_path), "--qrels", str(root / "qrels.txt"),
                "--out", str(root / "report"),
            )
            return {
                str(path.relative_to(root)): path.read_bytes()
                for folder in ("out", "report")
                for path in sorted((root / folder).rglob("*"))
                if path.is_file()
            }

        first = pipeline()
        second = pipeline()
        assert first.keys() == second.keys()
        for key in first:
            assert first[key] == second[key], f"artifact differs: {key}"
