"""Exception hierarchy shared by all gatorview modules."""


class GatorError(Exception):
    """Base class for every error raised by gatorview."""


class TypeGraphError(GatorError):
    """Malformed type graph (duplicate names, cyclic supertypes, bad layers)."""


class UnknownTypeError(GatorError):
    def __init__(self, name, kind="node"):
        self.name = name
        super().__init__(f"unknown {kind} type: {name!r}")


class TypeMismatchError(GatorError):
    """An element does not conform to the type it is required to have."""


class DuplicateIdError(GatorError):
    def __init__(self, ident):
        self.ident = ident
        super().__init__(f"id already in use: {ident}")


class UnknownElementError(GatorError):
    def __init__(self, ident, kind="node"):
        self.ident = ident
        super().__init__(f"no such {kind}: {ident}")


class GraphBusyError(GatorError):
    """A change was submitted while maintenance holds the graph."""


class PatternError(GatorError):
    """A pattern violates its structural invariants."""


class NetworkError(GatorError):
    """A view network failed validation."""


class OwnershipError(GatorError):
    """A view node was dispatched to a module that did not create it."""


class LoopLimitError(GatorError):
    """Maintenance exceeded its iteration budget."""


class MarkerMismatchError(GatorError):
    """Two maintenance runs disagree on the resulting view layer."""

    def __init__(self, message, diff=None):
        self.diff = diff or {}
        super().__init__(message)


class ParseError(GatorError):
    def __init__(self, source, message, line=None, column=None):
        self.source = str(source)
        self.line = line
        self.column = column
        where = self.source
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")
