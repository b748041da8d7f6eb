"""Compactly supported sub-eigenfunction profiles.

A profile ψ on [−1, 1] rescaled to φ(x) = ψ(x/L) is a principal
sub-eigenfunction of the nonlocal operator on [−L, L] when

    ∫_{−L}^{L} J(x − y) φ(y) dy ≥ (1 − ε) φ(x)    for |x| < L.

Families
--------
power          ψ = (1 − |z|)^λ,                                  λ ≥ 1
power_kink     ψ = (1 − |z|)^{λ−1} ψ₁,  ψ₁ = 1 − |z| for |z| ≤ η,
               1 − η beyond;                                      λ ≥ 2, η ∈ [4/5, 1]
capped         ψ = min{1, ((1−|z|)η₁)^{λ−1}} ψ₁,
               ψ₁ = min{1, (1−|z|)η₁} for |z| ≤ η₂, min{1, (1−η₂)η₁} beyond;
                                                                  λ ≥ 2, η₁ > 1, η₂ ∈ (4/5, 1)
custom         sampled ψ on [−1, 1], linearly interpolated
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mxm_frontlab.errors import ValidationError
from mxm_frontlab.kernels import Kernel, sample_row
from mxm_frontlab.quadrature import ConvMethod, trapezoid_weights, uniform_convolve
from mxm_frontlab.types import ArrayLike, FloatArray, JSONLike

logger = logging.getLogger(__name__)

CONVEXITY_TOL = 1e-12


class ProfileFamily(str, Enum):
    POWER = "power"
    POWER_KINK = "power_kink"
    CAPPED = "capped"
    CUSTOM = "custom"


@dataclass(frozen=True, slots=True)
class ProfileSpec:
    family: ProfileFamily
    L: float
    lam: float = 2.0
    eta: float = 0.9
    eta1: float = 4.0
    eta2: float = 0.9
    samples: tuple[tuple[float, ...], tuple[float, ...]] | None = field(
        default=None, repr=False
    )

    def errors(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        if not self.L > 0:
            out.append(("L", f"must be positive, got {self.L}"))
        fam = self.family
        if fam is ProfileFamily.POWER and self.lam < 1:
            out.append(("lam", f"power family needs lambda >= 1, got {self.lam}"))
        if fam is ProfileFamily.POWER_KINK:
            if self.lam < 2:
                out.append(("lam", f"power_kink family needs lambda >= 2, got {self.lam}"))
            if not 0.8 <= self.eta <= 1.0:
                out.append(("eta", f"power_kink needs eta in [4/5, 1], got {self.eta}"))
        if fam is ProfileFamily.CAPPED:
            if self.lam < 2:
                out.append(("lam", f"capped family needs lambda >= 2, got {self.lam}"))
            if not self.eta1 > 1:
                out.append(("eta1", f"capped needs eta1 > 1, got {self.eta1}"))
            if not 0.8 < self.eta2 < 1.0:
                out.append(("eta2", f"capped needs eta2 in (4/5, 1), got {self.eta2}"))
        if fam is ProfileFamily.CUSTOM:
            if self.samples is None:
                out.append(("samples", "custom family needs sampled psi"))
            else:
                zs, ps = (np.asarray(a, dtype=np.float64) for a in self.samples)
                if zs.shape != ps.shape or zs.size < 3:
                    out.append(("samples", "z and psi must match with >= 3 points"))
                elif zs[0] != -1.0 or zs[-1] != 1.0 or np.any(np.diff(zs) <= 0):
                    out.append(("samples", "z must increase from -1 to 1"))
                elif np.any(ps[1:-1] <= 0) or np.any(ps < 0):
                    out.append(("samples", "psi must be positive inside (-1, 1)"))
        return out

    def validate(self) -> "ProfileSpec":
        errs = self.errors()
        if errs:
            raise ValidationError(f"invalid {self.family.value} profile", errs)
        return self

    @property
    def lipschitz(self) -> float | None:
        """Bound on |ψ′| for the closed-form families."""
        if self.family in (ProfileFamily.POWER, ProfileFamily.POWER_KINK):
            return self.lam
        if self.family is ProfileFamily.CAPPED:
            return self.lam * self.eta1
        return None

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "family": self.family.value,
            "L": self.L,
            "lambda": self.lam,
            "eta": self.eta,
            "eta1": self.eta1,
            "eta2": self.eta2,
        }


def psi(spec: ProfileSpec, z: ArrayLike) -> FloatArray:
    """Reference profile on [−1, 1]; zero outside."""
    az = np.abs(np.asarray(z, dtype=np.float64))
    r = np.clip(1.0 - az, 0.0, 1.0)
    fam = spec.family
    if fam is ProfileFamily.POWER:
        out = r**spec.lam
    elif fam is ProfileFamily.POWER_KINK:
        kink = np.where(az <= spec.eta, r, 1.0 - spec.eta)
        out = r ** (spec.lam - 1.0) * kink
    elif fam is ProfileFamily.CAPPED:
        e1, e2 = spec.eta1, spec.eta2
        inner = np.minimum(1.0, r * e1)
        kink = np.where(az <= e2, inner, min(1.0, (1.0 - e2) * e1))
        out = np.minimum(1.0, (r * e1) ** (spec.lam - 1.0)) * kink
    else:
        assert spec.samples is not None
        zs, ps = (np.asarray(a, dtype=np.float64) for a in spec.samples)
        out = np.interp(np.asarray(z, dtype=np.float64), zs, ps)
    return np.where(az < 1.0, out, 0.0)


@dataclass(frozen=True, slots=True)
class Profile:
    spec: ProfileSpec
    x: FloatArray
    phi: FloatArray


def _symmetric_unit_grid(n: int) -> FloatArray:
    """Odd-sized grid on [−1, 1] with z[i] = −z[n−1−i] exactly."""
    m = n // 2 + 1
    half = np.linspace(0.0, 1.0, m)
    return np.concatenate([-half[:0:-1], half])


def build_profile(spec: ProfileSpec, n: int = 4097) -> Profile:
    """Sample φ(x) = ψ(x/L) on a symmetric uniform grid over [−L, L]."""
    spec.validate()
    z = _symmetric_unit_grid(n)
    return Profile(spec, spec.L * z, psi(spec, z))


# --------------------------------------------------------------------------- #
# Verification
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class SubEigReport:
    epsilon: float
    min_ratio: float
    passed: bool
    worst_x: float
    grid_n: int
    L: float

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "epsilon": self.epsilon,
            "min_ratio": self.min_ratio,
            "pass": self.passed,
            "worst_x": self.worst_x,
            "grid_n": self.grid_n,
            "L": self.L,
        }


def integral_ratio(
    kernel: Kernel, profile: Profile, method: ConvMethod = "auto"
) -> FloatArray:
    """(∫Jφ)(x)/φ(x) on the profile grid; NaN where φ(x) = 0."""
    x, phi = profile.x, profile.phi
    dx = float(x[1] - x[0])
    row = sample_row(kernel, dx, x.size)
    integral = uniform_convolve(row, phi * trapezoid_weights(x), method)
    ratio = np.full(x.size, np.nan)
    pos = phi > 0.0
    ratio[pos] = integral[pos] / phi[pos]
    return ratio


def verify_subeigen(
    kernel: Kernel,
    spec: ProfileSpec,
    epsilon: float,
    grid_n: int = 4097,
    method: ConvMethod = "auto",
) -> SubEigReport:
    """Check ∫Jφ ≥ (1 − ε)φ on the sample grid by trapezoid quadrature."""
    if grid_n < 512:
        raise ValidationError(f"grid_n must be >= 512, got {grid_n}")
    if not 0.0 <= epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1), got {epsilon}")
    profile = build_profile(spec, grid_n)
    ratio = integral_ratio(kernel, profile, method)
    k = int(np.nanargmin(ratio))
    min_ratio = float(ratio[k])
    report = SubEigReport(
        epsilon=epsilon,
        min_ratio=min_ratio,
        passed=min_ratio >= 1.0 - epsilon,
        worst_x=float(profile.x[k]),
        grid_n=profile.x.size,
        L=spec.L,
    )
    logger.debug("sub-eigen L=%g min_ratio=%.6g at x=%.6g", spec.L, min_ratio, report.worst_x)
    return report


def minimal_scale(
    kernel: Kernel,
    template: ProfileSpec,
    epsilon: float,
    L_grid: Sequence[float],
    grid_n: int = 4097,
) -> tuple[float | None, list[SubEigReport]]:
    """First L in the increasing grid whose verification passes."""
    values = [float(v) for v in L_grid]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError("L_grid must be strictly increasing")
    reports: list[SubEigReport] = []
    for L in values:
        spec = ProfileSpec(
            template.family, L, template.lam, template.eta, template.eta1,
            template.eta2, template.samples,
        )
        rep = verify_subeigen(kernel, spec, epsilon, grid_n)
        reports.append(rep)
        if rep.passed:
            logger.info("minimal passing L = %g (min ratio %.6g)", L, rep.min_ratio)
            return L, reports
    return None, reports


def check_convexity(spec: ProfileSpec, region: tuple[float, float], n: int = 2001) -> bool:
    """Second differences of ψ on ``region`` ⊂ [−1, 1] are ≥ −1e−12."""
    lo, hi = region
    if not -1.0 <= lo < hi <= 1.0:
        raise ValidationError(f"region must lie inside [-1, 1], got {region}")
    z = np.linspace(lo, hi, n)
    second = np.diff(psi(spec, z), 2)
    return bool(np.all(second >= -CONVEXITY_TOL))


def convexity_region(spec: ProfileSpec) -> tuple[float, float]:
    """Part of [0, 1] on which the family is convex (beyond the cap for ``capped``)."""
    if spec.family is ProfileFamily.CAPPED:
        return (max(0.0, 1.0 - 1.0 / spec.eta1), 1.0)
    return (0.0, 1.0)


def max_slope(spec: ProfileSpec, n: int = 20001) -> float:
    """Largest finite-difference slope of ψ on [−1, 1]."""
    z = np.linspace(-1.0, 1.0, n)
    return float(np.max(np.abs(np.diff(psi(spec, z)) / np.diff(z))))


__all__ = [
    "Profile",
    "ProfileFamily",
    "ProfileSpec",
    "SubEigReport",
    "build_profile",
    "check_convexity",
    "convexity_region",
    "integral_ratio",
    "max_slope",
    "minimal_scale",
    "psi",
    "verify_subeigen",
]
