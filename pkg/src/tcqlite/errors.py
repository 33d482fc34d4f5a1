"""Exception types shared across the package."""


class TcqError(Exception):
    """Base class for all tcqlite errors."""


class UnknownName(TcqError):
    """A name is used but not declared (strict validation mode only)."""


class FragmentViolation(TcqError):
    """An axiom falls outside the fragment a component accepts."""


class EmptySequence(TcqError):
    """A temporal knowledge base must carry at least one ABox."""


class InconsistentKB(TcqError):
    """Raised by query answering on an inconsistent KB in strict mode."""


class InconsistentInstantiation(TcqError):
    """The instantiation of a CQ set is inconsistent with the ontology."""


class IndexOutOfRange(TcqError):
    """A time index lies outside the admissible range."""


class UnboundVariable(TcqError):
    """An FO formula was evaluated with a free variable left unbound."""


class NotSeparated(TcqError):
    """The propositional abstraction mixes past and future operators."""


class UnsupportedShape(TcqError):
    """A concept expression lies outside the supported reduction grammar."""


class ParseError(TcqError):
    def __init__(self, line: int, col: int, expected: str):
        self.line = line
        self.col = col
        self.expected = expected
        super().__init__(f"line {line}, col {col}: expected {expected}")


class BoundsTooLarge(TcqError):
    """The requested brute-force enumeration exceeds the configured cap."""


class ResourceLimit(TcqError):
    """A configurable search cap was hit; the verdict is unknown."""
