"""Exception hierarchy shared by the library, simulator and CLI."""


class DsstError(Exception):
    """Base class for every error raised on purpose by this package."""


class GraphError(DsstError, ValueError):
    """Malformed edge list or a query that needs a connected graph."""


class BudgetExceeded(DsstError):
    """A combinatorial enumeration would exceed the configured budget."""


class CertificationError(DsstError):
    """A compression matrix failed the sparse-detectability certificate.

    ``witness`` is the erased sensor subset (0-based node ids) and
    ``eigenvalue`` the unstable mode that became undetectable.
    """

    def __init__(self, message, witness=None, eigenvalue=None):
        super().__init__(message)
        self.witness = witness
        self.eigenvalue = eigenvalue


class DecoderRankError(DsstError):
    """Per-support least squares cannot identify the state.

    Raised with the offending support ``K`` (0-based node ids).
    """

    def __init__(self, message, support):
        super().__init__(message)
        self.support = tuple(support)


class AttackPlanError(DsstError, ValueError):
    """Attack plan inconsistent with the threat model."""


class WarmupError(DsstError):
    """A measurement window is not full yet."""


class ScenarioError(DsstError):
    """One or more scenario validators failed; ``failures`` names them."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class ConfigError(DsstError):
    """Invalid scenario configuration, located by field path and line."""

    def __init__(self, message, path=None, line=None):
        where = []
        if path:
            where.append(f"field '{path}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.path = path
        self.line = line
