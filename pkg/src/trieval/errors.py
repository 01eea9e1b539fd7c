"""Exception hierarchy shared across the package.

The CLI maps any TrievalError to exit code 2 (data/integrity failure);
everything else is a programming error and propagates.
"""


class TrievalError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TrievalError):
    """A file's content does not match its declared format."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class IntegrityError(TrievalError):
    """Well-formed input violates a cross-record consistency rule."""


class ContractError(TrievalError):
    """A caller violated an operation's precondition."""


class DegenerateDocumentError(TrievalError):
    """A document has no usable content for the requested operation."""
