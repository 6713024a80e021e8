"""Exception hierarchy shared by every chemolab module."""


class ChemolabError(Exception):
    """Base class for all library errors."""


class InvalidParams(ChemolabError, ValueError):
    pass


class RejectedRegime(InvalidParams):
    """chi*mu <= 0: the finite-time blow-up regime is not simulated."""


class NonPositiveInput(ChemolabError, ValueError):
    pass


class IncompatibleData(ChemolabError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(
            f"{v['field']} at x={v['x']:g}: |{v['value']:.6g} - {v['expected']:.6g}| > {v['tol']:g}"
            for v in self.violations
        )
        super().__init__(f"initial data incompatible with boundary data: {lines}")


class NonPositiveInitialDensity(ChemolabError, ValueError):
    pass


class MissingBetaSignals(ChemolabError, ValueError):
    pass


class InvalidGamma(ChemolabError, ValueError):
    pass


class GridMismatch(ChemolabError, ValueError):
    pass


class DomainError(ChemolabError, ValueError):
    pass


class ConfigError(ChemolabError, ValueError):
    """Raised for unparsable or invalid scenario files.

    ``field`` is the dotted path of the offending key, ``line`` the source line
    when the parser reports one.
    """

    def __init__(self, message, *, field=None, line=None, path=None):
        self.field = field
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class StepFailure(ChemolabError):
    """A step produced an unacceptable state. The attempted state is kept."""

    def __init__(self, message, *, state=None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


class PositivityLost(StepFailure):
    pass


class StepUnstable(StepFailure):
    pass


class RunFailed(ChemolabError):
    """A run inside a study ended without completing."""

    def __init__(self, message, *, status=None):
        super().__init__(message)
        self.status = status
