"""Scalar model: coefficients, the nonlinearity G and derived quantities.

The spatially homogeneous system

    u' = −a11·u + a12·v,        v' = −a22·v + G(u)

has basic reproduction number R0 = a12·G′(0)/(a11·a22). When R0 > 1 there is
a unique positive equilibrium (u*, v*) with G(u*)/u* = a11·a22/a12 and
v* = (a11/a12)·u*, and the linearization at 0 has a positive eigenvalue
rho1 with a positive eigenvector (delta1, delta2). The lower fronts in
``mxm_frontlab.envelopes`` are built from a scaled copy of that eigenvector.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from mxm_frontlab.errors import SolverAbort, ValidationError
from mxm_frontlab.registry import G_FAMILIES
from mxm_frontlab.types import ArrayLike, FloatArray, JSONLike

logger = logging.getLogger(__name__)

U_MAX = 1e12
MAX_HALVINGS = 60

# --------------------------------------------------------------------------- #
# Parameters
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class ModelParams:
    """Positive coefficients of the two-species free-boundary system."""

    d1: float = 1.0
    d2: float = 1.0
    a11: float = 1.0
    a12: float = 1.0
    a22: float = 1.0
    mu: float = 1.0
    rho_flux: float = 1.0
    h0: float = 20.0

    def errors(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        for name in ("d1", "d2", "a11", "a12", "a22", "mu", "rho_flux", "h0"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                out.append((name, f"must be a positive number, got {value!r}"))
        return out

    def validate(self) -> "ModelParams":
        errs = self.errors()
        if errs:
            raise ValidationError("invalid model parameters", errs)
        return self

    def to_json(self) -> dict[str, JSONLike]:
        return dict(asdict(self))


# --------------------------------------------------------------------------- #
# Nonlinearity G
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class GFunction:
    """Infection-rate nonlinearity with its derivative."""

    family: str
    params: Mapping[str, Any]
    fn: Callable[[FloatArray], FloatArray] = field(repr=False, compare=False)
    dfn: Callable[[FloatArray], FloatArray] = field(repr=False, compare=False)
    gprime0: float = 0.0

    def __call__(self, z: ArrayLike) -> FloatArray:
        return self.fn(np.asarray(z, dtype=np.float64))

    def derivative(self, z: ArrayLike) -> FloatArray:
        return self.dfn(np.asarray(z, dtype=np.float64))

    def to_json(self) -> dict[str, JSONLike]:
        params: dict[str, JSONLike] = {
            k: v for k, v in self.params.items() if isinstance(v, (int, float, str))
        }
        return {"family": self.family, "params": params, "Gprime0": self.gprime0}


def build_monod(b: float) -> GFunction:
    """G(u) = b·u/(1+u)."""
    bb = float(b)
    if not bb > 0:
        raise ValidationError(f"monod G needs b > 0, got {bb}")
    return GFunction(
        "monod",
        {"b": bb},
        lambda z: bb * z / (1.0 + z),
        lambda z: bb / (1.0 + z) ** 2,
        bb,
    )


def build_linear_capped(b: float, cap: float) -> GFunction:
    """G(u) = b·u/sqrt(1 + (b·u/cap)²): slope b at 0, saturating at ``cap``."""
    bb, cc = float(b), float(cap)
    if not (bb > 0 and cc > 0):
        raise ValidationError(f"linear_capped G needs b > 0 and cap > 0, got {bb}, {cc}")
    return GFunction(
        "linear_capped",
        {"b": bb, "cap": cc},
        lambda z: bb * z / np.sqrt(1.0 + (bb * z / cc) ** 2),
        lambda z: bb / (1.0 + (bb * z / cc) ** 2) ** 1.5,
        bb,
    )


def build_custom(
    G: Callable[[FloatArray], FloatArray],
    Gprime: Callable[[FloatArray], FloatArray],
    Gprime0: float | None = None,
) -> GFunction:
    """User-supplied G; only reachable from Python, not from config files."""
    g0 = float(Gprime(np.zeros(1))[0]) if Gprime0 is None else float(Gprime0)
    return GFunction("custom", {}, G, Gprime, g0)


G_FAMILIES.register("monod", build_monod, "b·u/(1+u)")
G_FAMILIES.register("linear_capped", build_linear_capped, "b·u/sqrt(1+(b·u/cap)^2)")
G_FAMILIES.register("custom", build_custom, "callable pair (Python API only)")


def make_G(family: str, **params: Any) -> GFunction:
    try:
        builder = G_FAMILIES.resolve(family)
    except KeyError as exc:
        raise ValidationError(
            f"unknown G family '{family}' "
            f"(registered: {', '.join(G_FAMILIES.list_registered())})"
        ) from exc
    try:
        return builder(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for G '{family}': {exc}") from exc


@dataclass(frozen=True, slots=True)
class GReport:
    g0_ok: bool
    g1_ok: bool
    g2_ok: bool
    far_ratio: float
    messages: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.g0_ok and self.g1_ok and self.g2_ok


def validate_G(G: GFunction, params: ModelParams, n: int = 200) -> GReport:
    """Sampled checks: G(0)=0, G increasing, G(z)/z decreasing with small limit."""
    z = np.logspace(-6.0, 6.0, n)
    gz = G(z)
    msgs: list[str] = []

    g0_ok = float(G(np.zeros(1))[0]) == 0.0
    if not g0_ok:
        msgs.append("G(0) must be 0")

    g1_ok = bool(np.all(np.diff(gz) > 0.0) and np.all(G.derivative(z) > 0.0))
    if not g1_ok:
        msgs.append("G must be strictly increasing")

    ratio = gz / z
    far_ratio = float(ratio[-1])
    kappa = params.a11 * params.a22 / params.a12
    g2_ok = bool(np.all(np.diff(ratio) < 0.0)) and far_ratio < kappa
    if not g2_ok:
        msgs.append(
            f"G(z)/z must decrease strictly with limit below a11·a22/a12 = {kappa:.6g} "
            f"(value at z=1e6: {far_ratio:.6g})"
        )
    return GReport(g0_ok, g1_ok, g2_ok, far_ratio, tuple(msgs))


# --------------------------------------------------------------------------- #
# Derived quantities
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class Equilibrium:
    R0: float
    u_star: float | None = None
    v_star: float | None = None

    @property
    def exists(self) -> bool:
        return self.u_star is not None and self.v_star is not None

    def to_json(self) -> dict[str, JSONLike]:
        return {"R0": self.R0, "u_star": self.u_star, "v_star": self.v_star}


@dataclass(frozen=True, slots=True)
class LinearizedEigenpair:
    rho1: float
    delta1: float
    delta2: float
    rho_lin: float
    halvings: int
    eigen_residual: float

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "rho1": self.rho1,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "rho_lin": self.rho_lin,
            "halvings": self.halvings,
            "eigen_residual": self.eigen_residual,
        }


def basic_reproduction_number(params: ModelParams, G: GFunction) -> float:
    return params.a12 * G.gprime0 / (params.a11 * params.a22)


def positive_equilibrium(params: ModelParams, G: GFunction) -> Equilibrium:
    """Unique positive root of G(u)/u = a11·a22/a12 when R0 > 1.

    Raises
    ------
    ValidationError
        No sign change below U_MAX (G violates the decreasing-ratio condition).
    SolverAbort
        The root does not meet the 1e-10 residual.
    """
    R0 = basic_reproduction_number(params, G)
    if R0 <= 1.0:
        return Equilibrium(R0)

    kappa = params.a11 * params.a22 / params.a12

    def f(u: float) -> float:
        return float(G(u)) / u - kappa

    lo, hi = 1e-12, 1.0
    while f(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > U_MAX:
            raise ValidationError(
                f"G(u)/u stays above a11·a22/a12 = {kappa:.6g} up to u = {U_MAX:g}; "
                "G violates the decreasing-ratio condition"
            )
    u_star = float(brentq(f, lo, hi, xtol=1e-15, rtol=4.5e-16, maxiter=500))
    residual = abs(f(u_star))
    if residual >= 1e-10:
        raise SolverAbort(
            "equilibrium root did not converge", {"u_star": u_star, "residual": residual}
        )
    v_star = params.a11 / params.a12 * u_star
    logger.debug("equilibrium R0=%.6g u*=%.12g v*=%.12g", R0, u_star, v_star)
    return Equilibrium(R0, u_star, v_star)


def _rho_lin(rho1: float, d1: float, d2: float) -> float:
    return min(rho1 * d1 / (d1 + d2), rho1 * d2 / (2.0 * (d1 + d2)))


def _eigen_inequalities_hold(
    params: ModelParams, G: GFunction, d1: float, d2: float, rho_lin: float
) -> bool:
    if -params.a11 * d1 + params.a12 * d2 < rho_lin * (d1 + d2) * (1.0 - 1e-12):
        return False
    s = np.logspace(-6.0, 0.0, 200)
    lhs = G(s * d1) - params.a22 * s * d2
    return bool(np.all(lhs >= s * rho_lin * (d1 + d2)))


def linearized_eigenpair(
    params: ModelParams, G: GFunction, equilibrium: Equilibrium | None = None
) -> LinearizedEigenpair:
    """Positive eigenpair of A = [[−a11, a12], [G′(0), −a22]], scaled small.

    The eigenvector is halved until it lies below (u*, v*) and both
    sub-solution inequalities hold on a log-spaced s-grid in (0, 1].
    """
    eq = equilibrium or positive_equilibrium(params, G)
    if not eq.exists or eq.R0 <= 1.0:
        raise ValidationError(f"R0 = {eq.R0:.6g} <= 1: no positive eigenvalue")
    assert eq.u_star is not None and eq.v_star is not None

    a11, a12, a22, gp = params.a11, params.a12, params.a22, G.gprime0
    rho1 = 0.5 * (-(a11 + a22) + math.sqrt((a11 - a22) ** 2 + 4.0 * a12 * gp))
    d1 = eq.u_star
    d2 = (rho1 + a11) * d1 / a12
    rho_lin = _rho_lin(rho1, d1, d2)

    for halvings in range(MAX_HALVINGS + 1):
        if (
            d1 < eq.u_star
            and d2 < eq.v_star
            and _eigen_inequalities_hold(params, G, d1, d2, rho_lin)
        ):
            res = max(
                abs(-a11 * d1 + a12 * d2 - rho1 * d1),
                abs(gp * d1 - a22 * d2 - rho1 * d2),
            )
            return LinearizedEigenpair(rho1, d1, d2, rho_lin, halvings, res)
        d1 *= 0.5
        d2 *= 0.5
    raise SolverAbort(
        f"eigenvector scaling failed after {MAX_HALVINGS} halvings",
        {"rho1": rho1, "rho_lin": rho_lin},
    )


__all__ = [
    "Equilibrium",
    "GFunction",
    "GReport",
    "LinearizedEigenpair",
    "ModelParams",
    "basic_reproduction_number",
    "build_custom",
    "build_linear_capped",
    "build_monod",
    "linearized_eigenpair",
    "make_G",
    "positive_equilibrium",
    "validate_G",
]
