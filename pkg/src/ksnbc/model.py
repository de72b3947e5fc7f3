"""PDE parameters, validation, and boundedness-regime classification.

The classifier compares a parameter set against the known sufficient
conditions for global boundedness of the chemotaxis system with logistic
damping and power-law boundary influx. All operations are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import KsnbcError, ValidationError

GUARANTEED_BOUNDED = "GuaranteedBounded"
BORDERLINE_BOUNDED = "BorderlineBounded"
NO_GUARANTEE = "NoGuarantee"


class DegenerateDenominator(KsnbcError):
    """chi <= -2 makes the large-damping threshold formula degenerate."""


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the chemotaxis system.

    chi: chemosensitivity; a: growth rate; mu: quadratic damping;
    alpha/beta: signal production/decay; tau selects quasi-static (0) or
    evolving (1) signal; p: boundary flux exponent; dim: analysis dimension.
    """

    chi: float
    a: float
    mu: float
    alpha: float
    beta: float
    tau: int
    p: float
    dim: int
    exploration: bool = False


@dataclass(frozen=True)
class NbcParams:
    """Scalar problem U_t = lap U - mu U^Q with boundary influx U^P."""

    mu: float
    Q: float
    P: float

    @property
    def critical_P(self):
        return (self.Q + 1.0) / 2.0


@dataclass(frozen=True)
class RegimeClassification:
    verdict: str
    citation: str
    thresholds: dict = field(default_factory=dict)
    note: str = ""


_FIELDS = ("chi", "a", "mu", "alpha", "beta", "tau", "p", "dim")


def validate(raw, exploration: bool = False) -> ModelParams:
    """Validate a raw parameter record (mapping or ModelParams).

    With exploration=True, mu=0 and p in [3/2, 3) are accepted so sweeps
    can probe beyond the guaranteed region.
    """
    if isinstance(raw, ModelParams):
        rec = {k: getattr(raw, k) for k in _FIELDS}
        exploration = exploration or raw.exploration
    else:
        rec = dict(raw)
        exploration = exploration or bool(rec.pop("exploration", False))
    unknown = set(rec) - set(_FIELDS)
    if unknown:
        raise ValidationError([("UnknownKey", f"unknown parameter {k}") for k in sorted(unknown)])
    missing = set(_FIELDS) - set(rec)
    if missing:
        raise ValidationError([("MissingKey", f"missing parameter {k}") for k in sorted(missing)])

    violations = []
    for name in ("a", "alpha", "beta"):
        if not rec[name] > 0:
            violations.append(("NonPositiveRate", f"{name} must be > 0, got {rec[name]}"))
    if rec["mu"] < 0:
        violations.append(("NonPositiveRate", f"mu must be >= 0, got {rec['mu']}"))
    elif rec["mu"] == 0 and not exploration:
        violations.append(("NonPositiveRate", "mu = 0 requires the exploration flag"))
    if not rec["p"] > 1:
        violations.append(("BadExponent", f"p must be > 1, got {rec['p']}"))
    elif rec["p"] >= 1.5 and not exploration:
        violations.append(("BadExponent", f"p = {rec['p']} >= 3/2 requires the exploration flag"))
    elif rec["p"] >= 3:
        violations.append(("BadExponent", f"p must be < 3, got {rec['p']}"))
    if rec["tau"] not in (0, 1):
        violations.append(("BadTau", f"tau must be 0 or 1, got {rec['tau']}"))
    if rec["dim"] not in (1, 2, 3):
        violations.append(("BadDimension", f"dim must be 1, 2 or 3, got {rec['dim']}"))
    if violations:
        raise ValidationError(violations)
    return ModelParams(
        chi=float(rec["chi"]),
        a=float(rec["a"]),
        mu=float(rec["mu"]),
        alpha=float(rec["alpha"]),
        beta=float(rec["beta"]),
        tau=int(rec["tau"]),
        p=float(rec["p"]),
        dim=int(rec["dim"]),
        exploration=exploration,
    )


def validate_nbc(raw) -> NbcParams:
    rec = dict(raw) if not isinstance(raw, NbcParams) else {
        "mu": raw.mu, "Q": raw.Q, "P": raw.P
    }
    violations = []
    if not rec.get("mu", 0) > 0:
        violations.append(("NonPositiveRate", f"mu must be > 0, got {rec.get('mu')}"))
    for name in ("Q", "P"):
        if not rec.get(name, 0) > 1:
            violations.append(("BadExponent", f"{name} must be > 1, got {rec.get(name)}"))
    if violations:
        raise ValidationError(violations)
    return NbcParams(mu=float(rec["mu"]), Q=float(rec["Q"]), P=float(rec["P"]))


def mu_critical_pe(n: int, chi: float, alpha: float) -> float:
    """Damping threshold (n-2)/n * chi * alpha for the quasi-static system."""
    if n < 2:
        raise ValidationError([("BadDimension", f"threshold defined for n >= 2, got {n}")])
    return (n - 2) / n * chi * alpha


def mu0_3d(chi: float, a: float, alpha: float) -> float:
    """Explicit large-damping threshold for the 3D evolving-signal system.

    max{1/3, 2(a+1)/(2+chi), 3(chi/(2+chi) + 7 alpha^2 + (chi^2+2)/2)}.
    """
    if chi <= -2:
        raise DegenerateDenominator(f"chi must be > -2, got {chi}")
    return max(
        1.0 / 3.0,
        2.0 * (a + 1.0) / (2.0 + chi),
        3.0 * (chi / (2.0 + chi) + 7.0 * alpha**2 + (chi**2 + 2.0) / 2.0),
    )


def classify_regime(params: ModelParams) -> RegimeClassification:
    """Compare validated parameters against the boundedness theorems.

    GuaranteedBounded only when a theorem's hypotheses all hold;
    BorderlineBounded for the quasi-static equality case mu = (n-2)/n chi
    alpha with n >= 3 and p < 1 + 1/n; NoGuarantee otherwise, reporting the
    nearest threshold.
    """
    n, p, mu = params.dim, params.p, params.mu
    thresholds = {"p_critical": 1.5}

    if n == 1:
        return RegimeClassification(
            NO_GUARANTEE, "none", thresholds,
            note="1D grids are a testing device; the theory assumes n >= 2",
        )

    if params.tau == 0:
        mu_crit = mu_critical_pe(n, params.chi, params.alpha)
        thresholds["mu_critical"] = mu_crit
        if mu > mu_crit and mu > 0 and 1 < p < 1.5:
            return RegimeClassification(
                GUARANTEED_BOUNDED, "quasi-static boundedness theorem", thresholds
            )
        p_borderline = 1.0 + 1.0 / n
        thresholds["p_borderline"] = p_borderline
        if mu == mu_crit and n >= 3 and 1 < p < p_borderline:
            return RegimeClassification(
                BORDERLINE_BOUNDED,
                "quasi-static boundedness theorem, equality branch",
                thresholds,
            )
        if p >= 1.5:
            note = f"p = {p} >= critical 3/2"
        else:
            note = f"mu = {mu} <= threshold {mu_crit}"
        return RegimeClassification(NO_GUARANTEE, "none", thresholds, note=note)

    # evolving signal (tau = 1)
    if n == 2:
        if mu > 0 and 1 < p < 1.5:
            return RegimeClassification(
                GUARANTEED_BOUNDED, "2D evolving-signal boundedness theorem", thresholds
            )
        note = f"p = {p} >= 3/2" if p >= 1.5 else "mu must be > 0"
        return RegimeClassification(NO_GUARANTEE, "none", thresholds, note=note)
    if n == 3:
        thresholds["p_critical_3d"] = 1.4
        mu0 = mu0_3d(params.chi, params.a, params.alpha)
        thresholds["mu0"] = mu0
        if mu > mu0 and 1 < p < 1.4:
            return RegimeClassification(
                GUARANTEED_BOUNDED, "3D evolving-signal boundedness theorem", thresholds
            )
        if p >= 1.4:
            note = f"p = {p} >= 7/5"
        else:
            note = f"mu = {mu} <= mu0 = {mu0}"
        return RegimeClassification(NO_GUARANTEE, "none", thresholds, note=note)
    return RegimeClassification(
        NO_GUARANTEE, "none", thresholds, note=f"no boundedness result for n = {n}, tau = 1"
    )
