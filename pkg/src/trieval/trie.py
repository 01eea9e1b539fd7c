"""Prefix tree over encoded docids with leaf removal.

Every root-to-leaf path spells encode(docid) + EOS for exactly one
document.  Removal marks a leaf dead and eagerly prunes ancestors with
no live descendants, so `valid_next` stays O(children) with no subtree
scans.  A static path -> doc_id table survives removals, which keeps
`lookup_doc` valid for dead leaves.

The shared base trie is never mutated during decoding: each decoding
session works on a private copy obtained from `session()`.
"""

from __future__ import annotations

from typing import Iterator, Mapping

from .docid import Docid, DocidAssignment
from .errors import ContractError, IntegrityError
from .vocab import EOS, TokenSeq, Vocabulary, validate_token_seq


class _Node:
    __slots__ = ("children", "live")

    def __init__(self):
        self.children: dict[int, _Node] = {}
        self.live: int = 0

    def copy(self) -> "_Node":
        dup = _Node()
        dup.live = self.live
        dup.children = {tok: child.copy() for tok, child in self.children.items()}
        return dup


class DocidTrie:
    def __init__(self):
        self._root = _Node()
        self._doc_by_path: dict[TokenSeq, str] = {}

    @property
    def live_leaf_count(self) -> int:
        return self._root.live

    def insert(self, path: TokenSeq, doc_id: str) -> None:
        """Add an EOS-terminated docid path for one document."""
        path = tuple(path)
        if not path or path[-1] != EOS:
            raise IntegrityError(f"docid path for {doc_id!r} must end with EOS")
        if path in self._doc_by_path:
            raise IntegrityError(
                f"duplicate docid path for {doc_id!r} "
                f"(already assigned to {self._doc_by_path[path]!r})"
            )
        node = self._root
        node.live += 1
        for token in path:
            node = node.children.setdefault(token, _Node())
            node.live += 1
        self._doc_by_path[path] = doc_id

    def _walk(self, prefix: TokenSeq) -> _Node | None:
        node = self._root
        for token in prefix:
            node = node.children.get(token)
            if node is None:
                return None
        return node

    def valid_next(self, prefix: TokenSeq) -> set[int]:
        """Token ids extending a live prefix along at least one live leaf."""
        if EOS in prefix:
            raise ContractError("prefix may not contain EOS")
        node = self._walk(tuple(prefix))
        if node is None or not node.children:
            raise ContractError(f"prefix {tuple(prefix)} is not live in the trie")
        return set(node.children)

    def remove_leaf(self, path: TokenSeq) -> None:
        """Mark a live leaf dead and prune emptied ancestors."""
        path = tuple(path)
        nodes = [self._root]
        for token in path:
            child = nodes[-1].children.get(token)
            if child is None:
                raise ContractError(f"path {path} is not a live leaf")
            nodes.append(child)
        if path not in self._doc_by_path or nodes[-1].children:
            raise ContractError(f"path {path} is not a leaf")
        for depth in range(len(path), 0, -1):
            nodes[depth].live -= 1
            if nodes[depth].live == 0:
                del nodes[depth - 1].children[path[depth - 1]]
        self._root.live -= 1

    def lookup_doc(self, path: TokenSeq) -> str:
        """Backing doc_id of a leaf path, live or dead."""
        doc_id = self._doc_by_path.get(tuple(path))
        if doc_id is None:
            raise ContractError(f"path {tuple(path)} is not a leaf")
        return doc_id

    def is_live(self, path: TokenSeq) -> bool:
        path = tuple(path)
        return path in self._doc_by_path and self._walk(path) is not None

    def all_leaves(self) -> dict[TokenSeq, str]:
        """Every leaf ever inserted, dead or alive."""
        return dict(self._doc_by_path)

    def live_leaves(self) -> Iterator[tuple[TokenSeq, str]]:
        stack: list[tuple[_Node, TokenSeq]] = [(self._root, ())]
        while stack:
            node, prefix = stack.pop()
            if not node.children and prefix:
                yield prefix, self._doc_by_path[prefix]
                continue
            for token in sorted(node.children, reverse=True):
                stack.append((node.children[token], prefix + (token,)))

    def session(self) -> "DocidTrie":
        """Private mutable view for one decoding session."""
        dup = DocidTrie()
        dup._root = self._root.copy()
        dup._doc_by_path = self._doc_by_path  # static, shared
        return dup

    def dump_debug(self, vocab: Vocabulary) -> list[str]:
        """Sorted `docid<TAB>doc_id` lines over live leaves."""
        lines = [
            f"{' '.join(vocab.decode(path))}\t{doc_id}"
            for path, doc_id in self.live_leaves()
        ]
        return sorted(lines)


def build_trie(
    assignment: DocidAssignment | Mapping[str, Docid], vocab: Vocabulary
) -> DocidTrie:
    """Encode every assigned docid into a fresh trie."""
    docids = assignment.docids if isinstance(assignment, DocidAssignment) else assignment
    trie = DocidTrie()
    for doc_id, docid in docids.items():
        missing = [t for t in docid.terms if t not in vocab]
        if missing:
            raise IntegrityError(
                f"docid terms not in vocabulary for {doc_id!r}: {missing}"
            )
        path = vocab.encode(docid.terms) + (EOS,)
        validate_token_seq(path, len(vocab))
        trie.insert(path, doc_id)
    return trie
