"""Word-level tokenization and the shared docid/query vocabulary.

Reserved ids are fixed: BOS=0, EOS=1, UNK=2.  Docid tokens are added
before query tokens, so UNK can only ever surface on the query side.
Token sequences are plain tuples of ids; they never contain BOS and
carry at most one EOS, terminally.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .errors import IntegrityError

BOS = 0
EOS = 1
UNK = 2
RESERVED_TOKENS = ("<bos>", "<eos>", "<unk>")

TokenSeq = tuple[int, ...]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation.

    Punctuation inside alphanumeric runs survives, so terms like
    "pd3.1" or "utf-8" stay intact; purely non-alphanumeric tokens
    are dropped.
    """
    tokens: list[str] = []
    for raw in text.lower().split():
        start = 0
        end = len(raw)
        while start < end and not raw[start].isalnum():
            start += 1
        while end > start and not raw[end - 1].isalnum():
            end -= 1
        if end > start:
            tokens.append(raw[start:end])
    return tokens


class Vocabulary:
    """Immutable token <-> id mapping with reserved control tokens."""

    def __init__(self, corpus_tokens: Sequence[str]):
        tokens = list(RESERVED_TOKENS)
        seen = set(tokens)
        for tok in corpus_tokens:
            if tok in seen:
                raise IntegrityError(f"duplicate vocabulary token {tok!r}")
            seen.add(tok)
            tokens.append(tok)
        self.tokens: tuple[str, ...] = tuple(tokens)
        self._ids: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id_of(self, token: str) -> int:
        """Id of a token, UNK when absent."""
        return self._ids.get(token, UNK)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise IntegrityError(f"token id {token_id} out of range (|V|={len(self)})")
        return self.tokens[token_id]

    def encode(self, tokens: Iterable[str]) -> TokenSeq:
        """Map tokens to ids; unknown tokens become UNK."""
        return tuple(self._ids.get(t, UNK) for t in tokens)

    def decode(self, seq: Sequence[int]) -> list[str]:
        """Map ids back to tokens, dropping a terminal EOS."""
        out: list[str] = []
        for pos, token_id in enumerate(seq):
            if token_id == EOS:
                if pos != len(seq) - 1:
                    raise IntegrityError("EOS in non-terminal position")
                break
            out.append(self.token_of(token_id))
        return out

    def save(self, path: str) -> None:
        """One token per line, reserved tokens on lines 1-3."""
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.tokens:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        if tuple(tokens[:3]) != RESERVED_TOKENS:
            raise IntegrityError(
                f"{path}: expected reserved tokens {RESERVED_TOKENS} on lines 1-3"
            )
        return cls(tokens[3:])


def build_vocabulary(
    docids: Iterable[Sequence[str]], queries: Iterable[Sequence[str]]
) -> Vocabulary:
    """Distinct tokens in first-occurrence order, docid tokens first."""
    ordered: list[str] = []
    seen: set[str] = set(RESERVED_TOKENS)
    for token_lists in (docids, queries):
        for tokens in token_lists:
            for tok in tokens:
                if tok not in seen:
                    seen.add(tok)
                    ordered.append(tok)
    return Vocabulary(ordered)


def validate_token_seq(seq: Sequence[int], size: int) -> None:
    """Enforce TokenSeq invariants: ids in range, no BOS, EOS only terminal."""
    for pos, token_id in enumerate(seq):
        if not 0 <= token_id < size:
            raise IntegrityError(f"token id {token_id} out of range (|V|={size})")
        if token_id == BOS:
            raise IntegrityError("BOS may not appear in a token sequence")
        if token_id == EOS and pos != len(seq) - 1:
            raise IntegrityError("EOS in non-terminal position")
