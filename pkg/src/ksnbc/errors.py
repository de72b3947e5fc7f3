"""Exception types shared across the package."""


class KsnbcError(Exception):
    """Base class for all package errors."""


class ValidationError(KsnbcError):
    """Parameter or config validation failed.

    Carries a list of (code, message) violations so callers can report
    every problem at once.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{code}: {msg}" for code, msg in self.violations))


class NonFiniteFieldError(KsnbcError):
    """A field contains NaN or Inf."""


class NoConvergenceError(KsnbcError):
    """Linear solver hit its iteration cap."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"linear solve did not converge: {report.iterations} iterations, "
            f"residual {report.residual:.3e}"
        )


class NegativityFailure(KsnbcError):
    def __init__(self, t, min_u):
        self.t = t
        self.min_u = min_u
        super().__init__(f"min u = {min_u:.3e} below tolerance at t = {t:.6g}")


class SolverFailure(KsnbcError):
    def __init__(self, t, detail=""):
        self.t = t
        super().__init__(f"solver failure at t = {t:.6g}: {detail}")


class InsufficientSamplesError(KsnbcError):
    """Not enough monitor samples for a fit."""


class ConfigError(KsnbcError):
    """Config file could not be parsed or validated."""
