"""Semi-wave profiles and the finite spreading speed.

For c > 0 the profile pair (φ1, φ2) on (−∞, 0] solves

    (κ1 − c∂x)φ1 = d1·∫J1(x−y)φ1(y)dy + a12·∫K(x−y)φ2(y)dy,      κ1 = d1 + a11
    (κ2 − c∂x)φ2 = d2·∫J2(x−y)φ2(y)dy + G(φ1),                  κ2 = d2 + a22

with φ(−∞) = (u*, v*) and φ(0) = 0, and the speed c0 is the root of

    c = μ∫∫J1(x−y)φ1(x) dy dx + μ·ρ∫∫J2(x−y)φ2(x) dy dx     (x < 0 < y).

The domain is truncated to [−L, 0] with φ held at the equilibrium beyond −L.
Inverting (κ − c∂x) with a one-sided difference gives the recurrence

    φ[k] = a·φ[k+1] + b·R[k],   a = (c/dx)/(κ + c/dx),  b = 1/(κ + c/dx)

swept from φ(0) = 0 into the bulk. The profile is the fixed point of that
sweep, reached by damped iteration; the speed is bracketed with brentq.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from mxm_frontlab.errors import SolverAbort, ValidationError
from mxm_frontlab.kernels import Kernel, check_conditions, sample_row
from mxm_frontlab.model import Equilibrium, GFunction, ModelParams, positive_equilibrium
from mxm_frontlab.quadrature import ConvMethod, trapezoid_weights, uniform_convolve
from mxm_frontlab.simulator import KernelSet
from mxm_frontlab.types import FloatArray, JSONLike

logger = logging.getLogger(__name__)

TAIL_LIMIT = 1e-6

# --------------------------------------------------------------------------- #
# Configuration
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class SemiWaveConfig:
    L_trunc: float = 200.0
    n: int = 2001
    fix_tol: float = 1e-8
    c_bracket: tuple[float, float] = (1e-4, 50.0)
    max_iter: int = 20000
    damping: float = 0.5
    ramp_width: float = 1.0
    conv_method: ConvMethod = "auto"

    def errors(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        if not self.L_trunc > 0:
            out.append(("L_trunc", f"must be positive, got {self.L_trunc}"))
        if self.n < 3:
            out.append(("n", f"needs at least 3 nodes, got {self.n}"))
        if not self.fix_tol > 0:
            out.append(("fix_tol", "must be positive"))
        lo, hi = self.c_bracket
        if not 0 < lo < hi:
            out.append(("c_bracket", f"needs 0 < c_lo < c_hi, got {self.c_bracket}"))
        if self.max_iter < 1:
            out.append(("max_iter", "must be a positive integer"))
        if not 0 < self.damping <= 1:
            out.append(("damping", f"must lie in (0, 1], got {self.damping}"))
        if not self.ramp_width > 0:
            out.append(("ramp_width", "must be positive"))
        return out

    def validate(self, kernels: KernelSet | None = None) -> "SemiWaveConfig":
        errs = self.errors()
        if kernels is not None and not errs:
            half = 0.5 * self.L_trunc
            for name, kernel in (("J1", kernels.J1), ("J2", kernels.J2)):
                tail = float(kernel.tail_mass(half))
                if tail >= TAIL_LIMIT:
                    errs.append(
                        ("L_trunc", f"tail_mass({name}, L_trunc/2) = {tail:.3g} >= {TAIL_LIMIT:g}; "
                         "increase L_trunc")
                    )
        if errs:
            raise ValidationError("invalid semi-wave config", errs)
        return self

    @property
    def grid(self) -> FloatArray:
        return np.linspace(-self.L_trunc, 0.0, self.n)


# --------------------------------------------------------------------------- #
# Results
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class Profiles:
    c: float
    x: FloatArray
    phi1: FloatArray
    phi2: FloatArray
    residual: float = 0.0
    iterations: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True, slots=True)
class SemiWaveSolution:
    c0: float
    x: FloatArray
    phi1: FloatArray
    phi2: FloatArray
    profile_residual: float
    speed_residual: float
    iterations: int
    evaluations: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "c0": self.c0,
            "profile_residual": self.profile_residual,
            "speed_residual": self.speed_residual,
            "iterations": self.iterations,
            "L_trunc": float(-self.x[0]),
            "n": int(self.x.size),
        }


# --------------------------------------------------------------------------- #
# Preconditions
# --------------------------------------------------------------------------- #


def require_finite_moment(kernels: KernelSet) -> None:
    """Reject kernels without a finite first moment before any iteration."""
    failed: list[tuple[str, str]] = []
    for name, kernel in (("J1", kernels.J1), ("J2", kernels.J2)):
        if not check_conditions(kernel).satisfies_J1:
            failed.append((f"kernels.{name}", f"{kernel.spec.family} has infinite first moment"))
    if failed:
        raise ValidationError(
            "semi-wave exists iff both J1 and J2 have a finite first moment", failed
        )


def _equilibrium(params: ModelParams, G: GFunction) -> tuple[float, float]:
    eq: Equilibrium = positive_equilibrium(params, G)
    if not eq.exists:
        raise ValidationError(f"R0 = {eq.R0:.6g} <= 1: no positive equilibrium, no semi-wave")
    assert eq.u_star is not None and eq.v_star is not None
    return eq.u_star, eq.v_star


# --------------------------------------------------------------------------- #
# Profile solve
# --------------------------------------------------------------------------- #


class _ProfileOperator:
    """The sweep map φ ↦ T(φ) for one speed on one grid."""

    def __init__(
        self,
        c: float,
        params: ModelParams,
        G: GFunction,
        kernels: KernelSet,
        config: SemiWaveConfig,
    ) -> None:
        self.c = c
        self.params = params
        self.G = G
        self.kernels = kernels
        self.method = config.conv_method
        self.x = config.grid
        self.dx = float(self.x[1] - self.x[0])
        self.w = trapezoid_weights(self.x)
        n = self.x.size
        self.rows = {
            name: sample_row(k, self.dx, n)
            for name, k in (("J1", kernels.J1), ("J2", kernels.J2), ("K", kernels.K))
        }
        # ∫_{−∞}^{−L} J(x−y) dy = T(x + L)
        far = self.x - self.x[0]
        self.far = {
            "J1": kernels.J1.tail_mass(far),
            "J2": kernels.J2.tail_mass(far),
            "K": kernels.K.tail_mass(far),
        }

    def _conv(self, name: str, phi: FloatArray) -> FloatArray:
        inner = uniform_convolve(self.rows[name], phi * self.w, self.method)
        return inner + phi[0] * self.far[name]

    def _sweep(self, kappa: float, rhs: FloatArray) -> FloatArray:
        r = self.c / self.dx
        a = r / (kappa + r)
        b = 1.0 / (kappa + r)
        rev = rhs[::-1].copy()
        rev[0] = 0.0
        out = lfilter([b], [1.0, -a], rev)
        return np.asarray(out[::-1], dtype=np.float64)

    def apply(
        self, phi1: FloatArray, phi2: FloatArray, ends: tuple[float, float]
    ) -> tuple[FloatArray, FloatArray]:
        p = self.params
        r1 = p.d1 * self._conv("J1", phi1) + p.a12 * self._conv("K", phi2)
        r2 = p.d2 * self._conv("J2", phi2) + self.G(phi1)
        n1 = self._sweep(p.d1 + p.a11, r1)
        n2 = self._sweep(p.d2 + p.a22, r2)
        n1[0], n2[0] = ends
        n1[-1] = n2[-1] = 0.0
        return n1, n2


def solve_profile(
    c: float,
    params: ModelParams,
    G: GFunction,
    kernels: KernelSet,
    config: SemiWaveConfig,
) -> Profiles:
    """Damped fixed-point iteration of the sweep map from the ramp guess.

    Raises
    ------
    ValidationError
        c ≤ 0, or a kernel without finite first moment.
    SolverAbort
        No convergence within ``max_iter``; diagnostics carry the history.
    """
    if not c > 0:
        raise ValidationError(f"speed c must be positive, got {c}")
    require_finite_moment(kernels)
    config.validate(kernels)
    u_star, v_star = _equilibrium(params, G)

    op = _ProfileOperator(c, params, G, kernels, config)
    ramp = np.minimum(1.0, -op.x / config.ramp_width)
    phi1, phi2 = u_star * ramp, v_star * ramp
    theta = config.damping
    history: list[float] = []

    for it in range(1, config.max_iter + 1):
        t1, t2 = op.apply(phi1, phi2, (u_star, v_star))
        new1 = (1.0 - theta) * phi1 + theta * t1
        new2 = (1.0 - theta) * phi2 + theta * t2
        change = max(float(np.max(np.abs(new1 - phi1))), float(np.max(np.abs(new2 - phi2))))
        history.append(change)
        phi1, phi2 = new1, new2
        if not math.isfinite(change):
            break
        if change < config.fix_tol:
            t1, t2 = op.apply(phi1, phi2, (u_star, v_star))
            residual = max(float(np.max(np.abs(t1 - phi1))), float(np.max(np.abs(t2 - phi2))))
            logger.debug("profile c=%.8g converged in %d iterations", c, it)
            return Profiles(c, op.x, phi1, phi2, residual, it, tuple(history))

    raise SolverAbort(
        f"semi-wave profile did not converge for c={c:.6g} within {config.max_iter} iterations",
        {"c": c, "history": history[-50:], "last_change": history[-1] if history else None},
    )


# --------------------------------------------------------------------------- #
# Speed
# --------------------------------------------------------------------------- #


def speed_mismatch(
    c: float, profiles: Profiles, params: ModelParams, kernels: KernelSet
) -> float:
    """c minus the front flux generated by the profiles.

    Inner integrals are exact tail masses; beyond −L the profile is taken
    constant at its value there, which contributes φ(−L)·∫_L^∞(y−L)J(y)dy.
    """
    x = profiles.x
    w = trapezoid_weights(x)
    L = float(-x[0])

    def flux(kernel: Kernel, phi: FloatArray) -> float:
        near = float(np.dot(w * phi, kernel.tail_mass(-x)))
        far = float(phi[0]) * kernel.tail_integral(L) if phi[0] != 0.0 else 0.0
        return near + far

    return c - params.mu * flux(kernels.J1, profiles.phi1) - params.mu * params.rho_flux * flux(
        kernels.J2, profiles.phi2
    )


def solve_speed(
    params: ModelParams,
    G: GFunction,
    kernels: KernelSet,
    config: SemiWaveConfig,
) -> SemiWaveSolution:
    """Root of c ↦ speed_mismatch(c, solve_profile(c)) inside ``c_bracket``."""
    require_finite_moment(kernels)
    config.validate(kernels)
    cache: dict[float, Profiles] = {}
    evaluated: list[tuple[float, float]] = []

    def f(c: float) -> float:
        prof = solve_profile(c, params, G, kernels, config)
        cache[c] = prof
        m = speed_mismatch(c, prof, params, kernels)
        evaluated.append((c, m))
        logger.info("semi-wave c=%.10g mismatch=%.4g (%d iterations)", c, m, prof.iterations)
        return m

    lo, hi = config.c_bracket
    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0:
        raise SolverAbort(
            "speed mismatch has no sign change in c_bracket; widen the bracket",
            {"c_bracket": [lo, hi], "mismatch": [f_lo, f_hi]},
        )
    if f_lo == 0.0:
        c0 = lo
    elif f_hi == 0.0:
        c0 = hi
    else:
        c0 = float(brentq(f, lo, hi, xtol=0.01 * config.fix_tol, maxiter=200))

    prof = cache.get(c0) or solve_profile(c0, params, G, kernels, config)
    speed_res = abs(speed_mismatch(c0, prof, params, kernels))
    solution = SemiWaveSolution(
        c0=c0,
        x=prof.x,
        phi1=prof.phi1,
        phi2=prof.phi2,
        profile_residual=prof.residual,
        speed_residual=speed_res,
        iterations=prof.iterations,
        evaluations=tuple(evaluated),
    )
    logger.info("semi-wave speed c0=%.10g (speed residual %.3g)", c0, speed_res)
    return solution


__all__ = [
    "Profiles",
    "SemiWaveConfig",
    "SemiWaveSolution",
    "require_finite_moment",
    "solve_profile",
    "solve_speed",
    "speed_mismatch",
]
