"""Exception hierarchy shared by every module of the package."""


class StochStabError(Exception):
    """Base class for all package errors."""


class UnknownCatalogId(StochStabError, KeyError):
    pass


class InvalidParams(StochStabError, ValueError):
    pass


class OutOfDomain(StochStabError, ValueError):
    pass


class CriticalPoint(StochStabError, ValueError):
    """Raised when a derivative-based quantity is requested on the critical set."""


class NoiseExceedsMargin(StochStabError, ValueError):
    pass


class CriticalOrbitStuck(StochStabError, RuntimeError):
    """The redraw budget was exhausted while trying to move an orbit off the critical set."""


class HypothesisViolated(StochStabError, ValueError):
    pass


class DeltaMismatch(StochStabError, ValueError):
    pass


class InsufficientHorizon(StochStabError, ValueError):
    pass


class DomainMismatch(StochStabError, ValueError):
    pass


class NotOneDimensional(StochStabError, ValueError):
    pass


class NotHyperbolicTime(StochStabError, ValueError):
    pass


class BranchNotFound(StochStabError, RuntimeError):
    pass


class NoRootFound(StochStabError, RuntimeError):
    pass


class ContractionViolated(StochStabError, RuntimeError):
    pass


class MaxItersExceeded(StochStabError, RuntimeError):
    pass


class ParseError(StochStabError, ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ValidationError(StochStabError, ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
