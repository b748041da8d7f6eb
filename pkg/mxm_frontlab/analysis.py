"""Post-processing of trajectories: dichotomy verdicts and front-rate fits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import linregress

from mxm_frontlab.errors import ValidationError
from mxm_frontlab.model import Equilibrium
from mxm_frontlab.simulator import Trajectory
from mxm_frontlab.types import FloatArray, JSONLike

logger = logging.getLogger(__name__)

MIN_SAMPLES = 10

# --------------------------------------------------------------------------- #
# Dichotomy
# --------------------------------------------------------------------------- #


class VerdictKind(str, Enum):
    SPREADING = "spreading"
    VANISHING = "vanishing"
    UNDECIDED = "undecided"


@dataclass(frozen=True, slots=True)
class Thresholds:
    spread_threshold: float = 200.0
    vanish_threshold: float = 1e-8
    stall_tol: float = 1e-10
    stall_steps: int = 1000
    center_tol: float = 0.1


@dataclass(frozen=True, slots=True)
class DichotomyVerdict:
    kind: VerdictKind
    evidence: dict[str, JSONLike] = field(default_factory=dict)

    def to_json(self) -> dict[str, JSONLike]:
        return {"kind": self.kind.value, "evidence": dict(self.evidence)}


def _center_values(trajectory: Trajectory) -> tuple[float, float] | None:
    if trajectory.final is not None:
        x, u, v = trajectory.final.x, trajectory.final.u, trajectory.final.v
    elif trajectory.snapshots:
        snap = trajectory.snapshots[-1]
        x, u, v = snap.x, snap.u, snap.v
    else:
        return None
    i = int(np.argmin(np.abs(x - 0.5 * (x[0] + x[-1]))))
    return float(u[i]), float(v[i])


def classify(
    trajectory: Trajectory,
    thresholds: Thresholds | None = None,
    equilibrium: Equilibrium | None = None,
) -> DichotomyVerdict:
    """Spreading, vanishing or undecided at the end of the run.

    Spreading needs h − g above ``spread_threshold`` and the center values
    within ``center_tol`` of (u*, v*). Vanishing needs the field maximum
    below ``vanish_threshold`` with the interval stalled.
    """
    th = thresholds or Thresholds()
    width = trajectory.h - trajectory.g
    lag = min(th.stall_steps, width.size - 1)
    growth = float(width[-1] - width[-1 - lag]) if lag > 0 else 0.0

    if trajectory.umax is not None and trajectory.vmax is not None:
        field_max = max(float(trajectory.umax[-1]), float(trajectory.vmax[-1]))
    else:
        field_max = math.nan

    center = _center_values(trajectory)
    deviation: float | None = None
    if center is not None and equilibrium is not None and equilibrium.exists:
        assert equilibrium.u_star is not None and equilibrium.v_star is not None
        deviation = max(
            abs(center[0] - equilibrium.u_star) / equilibrium.u_star,
            abs(center[1] - equilibrium.v_star) / equilibrium.v_star,
        )

    evidence: dict[str, JSONLike] = {
        "field_max": field_max,
        "interval_growth": growth,
        "interval_length": float(width[-1]),
        "center_u": center[0] if center else None,
        "center_v": center[1] if center else None,
        "center_deviation": deviation,
        "t_end": trajectory.T,
    }

    stalled = lag >= th.stall_steps and growth < th.stall_tol
    if field_max < th.vanish_threshold and stalled:
        kind = VerdictKind.VANISHING
    elif (
        float(width[-1]) > th.spread_threshold
        and deviation is not None
        and deviation < th.center_tol
    ):
        kind = VerdictKind.SPREADING
    else:
        kind = VerdictKind.UNDECIDED
    logger.info("verdict %s at t=%.6g", kind.value, trajectory.T)
    return DichotomyVerdict(kind, evidence)


# --------------------------------------------------------------------------- #
# Rate fits
# --------------------------------------------------------------------------- #


class RateLaw(str, Enum):
    POWER = "power"
    T_LOG_T = "t_log_t"
    LINEAR = "linear"


@dataclass(frozen=True, slots=True)
class RateFit:
    law: RateLaw
    coefficient: float
    exponent: float | None
    rms_residual: float
    window: tuple[float, float]
    samples: int
    sharp_constant_estimate: float | None = None
    super_linear: bool | None = None
    competing: "RateFit | None" = None

    def predict(self, t: FloatArray) -> FloatArray:
        if self.law is RateLaw.POWER:
            assert self.exponent is not None
            return self.coefficient * t**self.exponent
        if self.law is RateLaw.T_LOG_T:
            return self.coefficient * t * np.log(t)
        return self.coefficient * t

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "law": self.law.value,
            "coefficient": self.coefficient,
            "exponent": self.exponent,
            "rms_residual": self.rms_residual,
            "window": list(self.window),
            "samples": self.samples,
            "sharp_constant_estimate": self.sharp_constant_estimate,
            "super_linear": self.super_linear,
            "competing": self.competing.to_json() if self.competing else None,
        }


def _window_samples(
    trajectory: Trajectory, window: tuple[float, float] | None
) -> tuple[FloatArray, FloatArray, tuple[float, float]]:
    T = trajectory.T
    lo, hi = window if window is not None else (0.5 * T, T)
    if not lo < hi:
        raise ValidationError(f"window must satisfy t_lo < t_hi, got ({lo}, {hi})")
    if lo < 0.5 * hi:
        raise ValidationError(f"tail-only window requires t_lo >= t_hi/2, got ({lo}, {hi})")
    if hi > T * (1.0 + 1e-12) or lo < float(trajectory.times[0]):
        raise ValidationError(f"window ({lo}, {hi}) leaves the trajectory range [0, {T}]")
    t = trajectory.times
    mask = (t >= lo) & (t <= hi) & (t > 0.0)
    if int(mask.sum()) < MIN_SAMPLES:
        raise ValidationError(
            f"degenerate window ({lo}, {hi}): {int(mask.sum())} samples, need {MIN_SAMPLES}"
        )
    return t[mask], trajectory.h[mask], (float(lo), float(hi))


def _relative_rms(fit: FloatArray, h: FloatArray) -> float:
    return float(np.sqrt(np.mean(((fit - h) / h) ** 2)))


def fit_power(
    trajectory: Trajectory,
    window: tuple[float, float] | None = None,
    alpha: float | None = None,
) -> RateFit:
    """Least-squares line through (ln t, ln h); the slope is the exponent.

    With ``alpha`` the median of h/t^{1/(α−1)} over the window is reported
    as ``sharp_constant_estimate``.
    """
    t, h, win = _window_samples(trajectory, window)
    if np.any(h <= 0.0):
        raise ValidationError("power fit needs h > 0 on the window")
    reg = linregress(np.log(t), np.log(h))
    p = float(reg.slope)
    coef = math.exp(float(reg.intercept))
    sharp = None
    if alpha is not None and 1.0 < alpha < 2.0:
        sharp = float(np.median(h / t ** (1.0 / (alpha - 1.0))))
    return RateFit(
        RateLaw.POWER, coef, p, _relative_rms(coef * t**p, h), win, int(t.size), sharp
    )


def fit_tlnt(trajectory: Trajectory, window: tuple[float, float] | None = None) -> RateFit:
    """Least squares of h against t·ln t through the origin, with the power fit as rival."""
    t, h, win = _window_samples(trajectory, window)
    if float(t.min()) <= math.e:
        raise ValidationError("t ln t fit needs t > e on the window")
    s = t * np.log(t)
    coef = float(np.dot(s, h) / np.dot(s, s))
    rival = fit_power(trajectory, window)
    return RateFit(
        RateLaw.T_LOG_T, coef, None, _relative_rms(coef * s, h), win, int(t.size), competing=rival
    )


def fit_linear_speed(
    trajectory: Trajectory, window: tuple[float, float] | None = None
) -> RateFit:
    """Mean of h/t over the window; flags growth of h/t between the outer quarters."""
    t, h, win = _window_samples(trajectory, window)
    ratio = h / t
    coef = float(ratio.mean())
    q = max(1, ratio.size // 4)
    first, last = float(ratio[:q].mean()), float(ratio[-q:].mean())
    super_linear = last > 1.05 * first
    return RateFit(
        RateLaw.LINEAR, coef, 1.0, _relative_rms(coef * t, h), win, int(t.size),
        super_linear=super_linear,
    )


@dataclass(frozen=True, slots=True)
class TheoryRate:
    law: RateLaw
    exponent: float | None

    def to_json(self) -> dict[str, JSONLike]:
        return {"law": self.law.value, "exponent": self.exponent}


def theory_rate(alpha: float) -> TheoryRate:
    """Expected front law for a power-law tail exponent α ∈ (1, 2]."""
    if 1.0 < alpha < 2.0:
        return TheoryRate(RateLaw.POWER, 1.0 / (alpha - 1.0))
    if alpha == 2.0:
        return TheoryRate(RateLaw.T_LOG_T, None)
    raise ValidationError(
        f"alpha = {alpha} is outside (1, 2]: for alpha > 2 the spreading speed is finite "
        "(use the semi-wave speed); alpha <= 1 is not integrable"
    )


@dataclass(frozen=True, slots=True)
class LawSelection:
    law: str
    power: RateFit
    t_log_t: RateFit

    def to_json(self) -> dict[str, JSONLike]:
        return {"law": self.law, "power": self.power.to_json(), "t_log_t": self.t_log_t.to_json()}


def select_law(
    trajectory: Trajectory,
    window: tuple[float, float] | None = None,
    rms_tie: float = 0.05,
) -> LawSelection:
    """Pick the power or t ln t law by relative rms; ties within ``rms_tie`` are inconclusive."""
    power = fit_power(trajectory, window)
    tlnt = fit_tlnt(trajectory, window)
    rp, rt = power.rms_residual, tlnt.rms_residual
    scale = max(rp, rt)
    if scale == 0.0 or abs(rp - rt) / scale < rms_tie:
        law = "inconclusive"
    else:
        law = RateLaw.POWER.value if rp < rt else RateLaw.T_LOG_T.value
    return LawSelection(law, power, tlnt)


# --------------------------------------------------------------------------- #
# Run invariants
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class InvariantReport:
    monotone_fronts: bool
    nonnegative: bool
    symmetric: bool | None
    comparison_bound: bool | None
    details: dict[str, JSONLike] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (
            self.monotone_fronts
            and self.nonnegative
            and self.symmetric is not False
            and self.comparison_bound is not False
        )

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "monotone_fronts": self.monotone_fronts,
            "nonnegative": self.nonnegative,
            "symmetric": self.symmetric,
            "comparison_bound": self.comparison_bound,
            "ok": self.ok,
            "details": dict(self.details),
        }


def check_invariants(
    trajectory: Trajectory,
    equilibrium: Equilibrium | None = None,
    M: float | None = None,
    *,
    symmetric_data: bool = True,
    sym_tol: float = 1e-10,
) -> InvariantReport:
    """Front monotonicity, nonnegativity, symmetry and the comparison bound."""
    dh = np.diff(trajectory.h)
    dg = np.diff(trajectory.g)
    monotone = bool(np.all(dh >= 0.0) and np.all(dg <= 0.0))

    nonneg = all(
        bool(np.all(s.u >= 0.0) and np.all(s.v >= 0.0)) for s in trajectory.snapshots
    )
    details: dict[str, JSONLike] = {}

    symmetric: bool | None = None
    if symmetric_data:
        front_gap = np.abs(trajectory.h + trajectory.g) / (1.0 + np.abs(trajectory.h))
        field_gap = 0.0
        for s in trajectory.snapshots:
            if np.allclose(s.x, -s.x[::-1], rtol=0.0, atol=1e-9 * (1.0 + abs(s.x[-1]))):
                field_gap = max(
                    field_gap,
                    float(np.max(np.abs(s.u - s.u[::-1]))),
                    float(np.max(np.abs(s.v - s.v[::-1]))),
                )
        details["front_asymmetry"] = float(front_gap.max())
        details["field_asymmetry"] = field_gap
        symmetric = float(front_gap.max()) <= sym_tol and field_gap <= sym_tol * (
            1.0 + float(np.max(np.abs(trajectory.h)))
        )

    comparison: bool | None = None
    if M is not None and equilibrium is not None and equilibrium.exists:
        assert equilibrium.u_star is not None and equilibrium.v_star is not None
        if trajectory.umax is not None and trajectory.vmax is not None:
            slack = 1.0 + 1e-12
            comparison = bool(
                np.all(trajectory.umax <= M * equilibrium.u_star * slack)
                and np.all(trajectory.vmax <= M * equilibrium.v_star * slack)
            )
            details["max_u_ratio"] = float(trajectory.umax.max() / equilibrium.u_star)
            details["max_v_ratio"] = float(trajectory.vmax.max() / equilibrium.v_star)

    return InvariantReport(monotone, nonneg, symmetric, comparison, details)


__all__ = [
    "DichotomyVerdict",
    "InvariantReport",
    "LawSelection",
    "RateFit",
    "RateLaw",
    "TheoryRate",
    "Thresholds",
    "VerdictKind",
    "check_invariants",
    "classify",
    "fit_linear_speed",
    "fit_power",
    "fit_tlnt",
    "select_law",
    "theory_rate",
]
