"""Dispersal kernels for mxm-frontlab.

A kernel is an even, nonnegative, unit-mass density on the real line. The
three kernels of the model (J1 for the first species, J2 for the second,
K for the cross-infection term) are all built through ``normalize`` from a
declarative ``KernelSpec``.

Every kernel exposes the same capability surface (``Kernel`` protocol):

    density(x)          J(x), evaluated on |x| so evenness is exact
    tail_mass(a)        ∫_a^∞ J(y) dy, closed form where one exists
    tail_integral(a)    ∫_a^∞ (y − a) J(y) dy  (finite first moment only)
    first_moment()      ∫_0^∞ y J(y) dy, or +inf
    scale               characteristic length used for quadrature grading
    support_radius      half-width of the support, None when unbounded

Families
--------
power_law(alpha, s)     c / (s + |x|^alpha), alpha > 1
compact(a, shape)       triangle (1 − |x|/a)_+ or raised cosine on [−a, a]
gaussian(sigma)
laplace(b)
table(x, y)             samples on x ≥ 0 (x[0] = 0), mirrored, piecewise
                        linear, zero beyond the last sample

Power-law normalization and tails use the regularized incomplete beta
function: with t = y^α/(s + y^α),

    ∫_a^∞ dy/(s + y^α) = (s^{1/α−1}/α) · B(1/α, 1−1/α) · I_{s/(s+a^α)}(1−1/α, 1/α)

so tail_mass(a) = ½ · I_{s/(s+a^α)}(1−1/α, 1/α) for every α > 1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol, runtime_checkable

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.special import betainc, erfc
from scipy.stats import linregress

from mxm_frontlab.errors import ValidationError
from mxm_frontlab.registry import KERNEL_FAMILIES
from mxm_frontlab.types import ArrayLike, FloatArray, JSONLike

logger = logging.getLogger(__name__)

# --------------------------------------------------------------------------- #
# Specs and protocol
# --------------------------------------------------------------------------- #


class KernelFamily(str, Enum):
    """Built-in kernel families."""

    POWER_LAW = "power_law"
    COMPACT = "compact"
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    TABLE = "table"


class CompactShape(str, Enum):
    TRIANGLE = "triangle"
    COSINE = "cosine"


@dataclass(frozen=True, slots=True)
class KernelSpec:
    """Declarative kernel description: a family name plus its parameters."""

    family: str
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def power_law(cls, alpha: float, s: float = 1.0) -> "KernelSpec":
        return cls("power_law", {"alpha": alpha, "s": s})

    @classmethod
    def compact(cls, a: float = 1.0, shape: str = "triangle") -> "KernelSpec":
        return cls("compact", {"a": a, "shape": shape})

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "KernelSpec":
        return cls("gaussian", {"sigma": sigma})

    @classmethod
    def laplace(cls, b: float = 1.0) -> "KernelSpec":
        return cls("laplace", {"b": b})

    @classmethod
    def table(cls, x: Sequence[float], y: Sequence[float]) -> "KernelSpec":
        return cls("table", {"x": list(x), "y": list(y)})

    def to_json(self) -> dict[str, JSONLike]:
        params: dict[str, JSONLike] = {}
        for k, v in self.params.items():
            params[k] = [float(e) for e in v] if isinstance(v, (list, tuple)) else v
        return {"family": self.family, "params": params}


@runtime_checkable
class Kernel(Protocol):
    """Capability surface shared by all normalized kernels."""

    spec: KernelSpec
    normalization: float

    @property
    def scale(self) -> float: ...

    @property
    def support_radius(self) -> float | None: ...

    def density(self, x: ArrayLike) -> FloatArray: ...

    def tail_mass(self, a: ArrayLike) -> FloatArray: ...

    def tail_integral(self, a: float) -> float: ...

    def first_moment(self) -> float: ...


def _arr(x: ArrayLike) -> FloatArray:
    return np.abs(np.asarray(x, dtype=np.float64))


# --------------------------------------------------------------------------- #
# Families
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class PowerLawKernel:
    alpha: float
    s: float
    spec: KernelSpec
    normalization: float

    @property
    def scale(self) -> float:
        return self.s ** (1.0 / self.alpha)

    @property
    def support_radius(self) -> float | None:
        return None

    def density(self, x: ArrayLike) -> FloatArray:
        ax = _arr(x)
        return self.normalization / (self.s + ax**self.alpha)

    def tail_mass(self, a: ArrayLike) -> FloatArray:
        aa = _arr(a)
        q = self.s / (self.s + aa**self.alpha)
        return 0.5 * betainc(1.0 - 1.0 / self.alpha, 1.0 / self.alpha, q)

    def first_moment(self) -> float:
        a = self.alpha
        if a <= 2.0:
            return math.inf
        return (
            self.normalization
            * self.s ** (2.0 / a - 1.0)
            * math.pi
            / (a * math.sin(2.0 * math.pi / a))
        )

    def tail_integral(self, a: float) -> float:
        m1 = self.first_moment()
        if not math.isfinite(m1):
            raise ValidationError(
                f"power_law kernel with alpha={self.alpha} has no finite first moment"
            )
        al = self.alpha
        q = self.s / (self.s + abs(a) ** al)
        upper_moment = m1 * float(betainc(1.0 - 2.0 / al, 2.0 / al, q))
        return max(0.0, upper_moment - abs(a) * float(self.tail_mass(a)))


@dataclass(frozen=True, slots=True)
class TriangleKernel:
    a: float
    spec: KernelSpec
    normalization: float

    @property
    def scale(self) -> float:
        return self.a

    @property
    def support_radius(self) -> float | None:
        return self.a

    def density(self, x: ArrayLike) -> FloatArray:
        return self.normalization * np.clip(1.0 - _arr(x) / self.a, 0.0, None)

    def tail_mass(self, a: ArrayLike) -> FloatArray:
        r = np.clip(self.a - _arr(a), 0.0, None)
        return r * r / (2.0 * self.a * self.a)

    def first_moment(self) -> float:
        return self.a / 6.0

    def tail_integral(self, a: float) -> float:
        r = max(0.0, self.a - abs(a))
        return r**3 / (6.0 * self.a * self.a)


@dataclass(frozen=True, slots=True)
class CosineKernel:
    a: float
    spec: KernelSpec
    normalization: float

    @property
    def scale(self) -> float:
        return self.a

    @property
    def support_radius(self) -> float | None:
        return self.a

    def density(self, x: ArrayLike) -> FloatArray:
        ax = _arr(x)
        raw = 0.5 * (1.0 + np.cos(np.pi * np.minimum(ax, self.a) / self.a))
        return self.normalization * np.where(ax <= self.a, raw, 0.0)

    def tail_mass(self, a: ArrayLike) -> FloatArray:
        z = np.minimum(_arr(a), self.a)
        val = 0.5 * (self.a - z) - self.a / (2.0 * np.pi) * np.sin(np.pi * z / self.a)
        return np.clip(self.normalization * val, 0.0, 0.5)

    def first_moment(self) -> float:
        return self.a * (0.25 - 1.0 / np.pi**2)

    def tail_integral(self, a: float) -> float:
        z = min(abs(a), self.a)
        val = 0.25 * (self.a - z) ** 2 - self.a**2 / (2.0 * np.pi**2) * (
            1.0 + math.cos(math.pi * z / self.a)
        )
        return max(0.0, self.normalization * val)


@dataclass(frozen=True, slots=True)
class GaussianKernel:
    sigma: float
    spec: KernelSpec
    normalization: float

    @property
    def scale(self) -> float:
        return self.sigma

    @property
    def support_radius(self) -> float | None:
        return None

    def density(self, x: ArrayLike) -> FloatArray:
        ax = _arr(x)
        return self.normalization * np.exp(-0.5 * (ax / self.sigma) ** 2)

    def tail_mass(self, a: ArrayLike) -> FloatArray:
        return 0.5 * erfc(_arr(a) / (self.sigma * math.sqrt(2.0)))

    def first_moment(self) -> float:
        return self.sigma / math.sqrt(2.0 * math.pi)

    def tail_integral(self, a: float) -> float:
        z = abs(a)
        return max(
            0.0,
            self.sigma**2 * float(self.density(z)) - z * float(self.tail_mass(z)),
        )


@dataclass(frozen=True, slots=True)
class LaplaceKernel:
    b: float
    spec: KernelSpec
    normalization: float

    @property
    def scale(self) -> float:
        return self.b

    @property
    def support_radius(self) -> float | None:
        return None

    def density(self, x: ArrayLike) -> FloatArray:
        return self.normalization * np.exp(-_arr(x) / self.b)

    def tail_mass(self, a: ArrayLike) -> FloatArray:
        return 0.5 * np.exp(-_arr(a) / self.b)

    def first_moment(self) -> float:
        return 0.5 * self.b

    def tail_integral(self, a: float) -> float:
        return 0.5 * self.b * math.exp(-abs(a) / self.b)


@dataclass(frozen=True, slots=True)
class TableKernel:
    """Piecewise-linear density from samples on [0, X]; zero mass beyond X."""

    xs: FloatArray
    ys: FloatArray
    spec: KernelSpec
    normalization: float
    _cum: FloatArray

    @property
    def scale(self) -> float:
        return float(self.xs[-1]) / 4.0

    @property
    def support_radius(self) -> float | None:
        return float(self.xs[-1])

    def density(self, x: ArrayLike) -> FloatArray:
        return self.normalization * np.interp(_arr(x), self.xs, self.ys, right=0.0)

    def _partial_mass(self, z: FloatArray) -> FloatArray:
        """∫_0^z of the raw samples, exact for the linear interpolant."""
        z = np.minimum(z, self.xs[-1])
        k = np.clip(np.searchsorted(self.xs, z, side="right") - 1, 0, self.xs.size - 2)
        h = self.xs[k + 1] - self.xs[k]
        d = z - self.xs[k]
        slope = (self.ys[k + 1] - self.ys[k]) / h
        return self._cum[k] + self.ys[k] * d + 0.5 * slope * d * d

    def tail_mass(self, a: ArrayLike) -> FloatArray:
        return np.clip(0.5 - self.normalization * self._partial_mass(_arr(a)), 0.0, 0.5)

    def first_moment(self) -> float:
        x0, x1 = self.xs[:-1], self.xs[1:]
        f0, f1 = self.ys[:-1], self.ys[1:]
        h = x1 - x0
        raw = np.sum(h / 6.0 * (f0 * (2 * x0 + x1) + f1 * (x0 + 2 * x1)))
        return float(self.normalization * raw)

    def tail_integral(self, a: float) -> float:
        z = abs(a)
        end = float(self.xs[-1])
        if z >= end:
            return 0.0
        inner = self.xs[(self.xs > z) & (self.xs < end)]
        val, _ = quad(
            lambda y: float(self.tail_mass(y)),
            z,
            end,
            points=inner[:50] if inner.size else None,
            limit=200,
        )
        return max(0.0, float(val))


# --------------------------------------------------------------------------- #
# Builders (registered in KERNEL_FAMILIES)
# --------------------------------------------------------------------------- #


def _positive(name: str, value: object) -> float:
    try:
        v = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a number, got {value!r}") from exc
    if not math.isfinite(v) or v <= 0.0:
        raise ValidationError(f"{name} must be positive, got {v}")
    return v


def build_power_law(alpha: float, s: float = 1.0) -> PowerLawKernel:
    al = float(alpha)
    if not al > 1.0:
        raise ValidationError(
            f"power_law kernel with alpha={al} is not integrable (requires alpha > 1)"
        )
    sc = _positive("s", s)
    c = al * math.sin(math.pi / al) / (2.0 * math.pi * sc ** (1.0 / al - 1.0))
    return PowerLawKernel(al, sc, KernelSpec.power_law(al, sc), c)


def build_compact(a: float = 1.0, shape: str = "triangle") -> TriangleKernel | CosineKernel:
    half = _positive("a", a)
    try:
        kind = CompactShape(shape)
    except ValueError as exc:
        raise ValidationError(
            f"unknown compact shape '{shape}' (expected triangle or cosine)"
        ) from exc
    spec = KernelSpec.compact(half, kind.value)
    if kind is CompactShape.TRIANGLE:
        return TriangleKernel(half, spec, 1.0 / half)
    return CosineKernel(half, spec, 1.0 / half)


def build_gaussian(sigma: float = 1.0) -> GaussianKernel:
    sd = _positive("sigma", sigma)
    return GaussianKernel(sd, KernelSpec.gaussian(sd), 1.0 / (sd * math.sqrt(2 * math.pi)))


def build_laplace(b: float = 1.0) -> LaplaceKernel:
    bb = _positive("b", b)
    return LaplaceKernel(bb, KernelSpec.laplace(bb), 1.0 / (2.0 * bb))


def build_table(x: Sequence[float], y: Sequence[float]) -> TableKernel:
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValidationError("table kernel needs matching 1-D x/y with >= 2 samples")
    if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
        raise ValidationError("table kernel x must start at 0 and increase strictly")
    if np.any(ys < 0):
        raise ValidationError("table kernel has negative density samples")
    if ys[0] <= 0:
        raise ValidationError("table kernel must be strictly positive at 0")
    h = np.diff(xs)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (ys[:-1] + ys[1:]))])
    raw_mass = 2.0 * trapezoid(ys, xs)
    spec = KernelSpec.table(xs.tolist(), ys.tolist())
    return TableKernel(xs, ys, spec, 1.0 / float(raw_mass), cum)


KERNEL_FAMILIES.register("power_law", build_power_law, "c/(s+|x|^alpha), alpha > 1")
KERNEL_FAMILIES.register("compact", build_compact, "triangle / raised cosine on [-a, a]")
KERNEL_FAMILIES.register("gaussian", build_gaussian, "normal density, std sigma")
KERNEL_FAMILIES.register("laplace", build_laplace, "exp(-|x|/b)/(2b)")
KERNEL_FAMILIES.register("table", build_table, "sampled density on x >= 0, mirrored")

# --------------------------------------------------------------------------- #
# Operations
# --------------------------------------------------------------------------- #


def normalize(spec: KernelSpec) -> Kernel:
    """Build the unit-mass kernel described by ``spec``.

    Raises
    ------
    ValidationError
        Unknown family, bad parameters, or a non-integrable shape.
    """
    try:
        builder = KERNEL_FAMILIES.resolve(spec.family)
    except KeyError as exc:
        raise ValidationError(
            f"unknown kernel family '{spec.family}' "
            f"(registered: {', '.join(KERNEL_FAMILIES.list_registered())})"
        ) from exc
    try:
        kernel = builder(**dict(spec.params))
    except TypeError as exc:
        raise ValidationError(f"bad parameters for kernel '{spec.family}': {exc}") from exc
    if not isinstance(kernel, Kernel):
        raise ValidationError(f"builder for '{spec.family}' did not return a Kernel")
    return kernel


def tail_mass(kernel: Kernel, a: ArrayLike) -> FloatArray:
    """∫_a^∞ J(y) dy for a ≥ 0."""
    return kernel.tail_mass(a)


def sample_row(kernel: Kernel, dx: float, n: int) -> FloatArray:
    """Kernel values at lags m·dx for m = 0..n-1, cut at the support radius."""
    m = n
    radius = kernel.support_radius
    if radius is not None:
        m = min(n, int(math.ceil(radius / dx)) + 1)
    return kernel.density(np.arange(m, dtype=np.float64) * dx)


@dataclass(frozen=True, slots=True)
class KernelReport:
    satisfies_J: bool
    first_moment: float
    satisfies_J1: bool
    tail_exponent_estimate: float | None
    dominance_constant: float | None
    K1: float | None
    K2: float | None
    mass_defect: float

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "satisfies_J": self.satisfies_J,
            "first_moment": self.first_moment if math.isfinite(self.first_moment) else "inf",
            "satisfies_J1": self.satisfies_J1,
            "tail_exponent_estimate": self.tail_exponent_estimate,
            "dominance_constant": self.dominance_constant,
            "K1": self.K1,
            "K2": self.K2,
            "mass_defect": self.mass_defect,
        }


def _mass_defect(kernel: Kernel) -> float:
    """|∫_ℝ J − 1| using quadrature near the origin and the analytic tail."""
    if isinstance(kernel, TableKernel):
        inner = kernel.normalization * float(trapezoid(kernel.ys, kernel.xs))
        return abs(2.0 * inner - 1.0)
    radius = kernel.support_radius
    r = radius if radius is not None else kernel.scale
    inner, _ = quad(
        lambda y: float(kernel.density(y)), 0.0, r, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return abs(2.0 * (inner + float(kernel.tail_mass(r))) - 1.0)


def _power_bounds(kernel: PowerLawKernel) -> tuple[float, float]:
    # max(1, |x|^α)·J(x) falls on [0, 1] and rises towards c beyond 1
    c, s = kernel.normalization, kernel.s
    return c / (s + 1.0), c * max(1.0, 1.0 / s)


def _tail_exponent(kernel: Kernel) -> float | None:
    xs = np.logspace(4.0, 6.0, 50)
    js = kernel.density(xs)
    if np.any(js <= 0.0):
        return None
    fit = linregress(np.log(xs), np.log(js))
    return float(-fit.slope)


def check_conditions(kernel: Kernel, other: Kernel | None = None) -> KernelReport:
    """Check evenness/positivity/mass, the first moment and the power-law bounds.

    When ``other`` is given the report also carries the constant C with
    other ≤ C·kernel (see ``dominance``).
    """
    xs = np.concatenate([np.linspace(0.0, 10.0 * kernel.scale, 1001), np.logspace(1, 6, 200)])
    vals = kernel.density(xs)
    even = bool(np.array_equal(vals, kernel.density(-xs)))
    defect = _mass_defect(kernel)
    satisfies_J = even and bool(np.all(vals >= 0.0)) and float(vals[0]) > 0.0 and defect < 1e-8

    m1 = kernel.first_moment()
    K1 = K2 = None
    if isinstance(kernel, PowerLawKernel):
        K1, K2 = _power_bounds(kernel)

    dom = dominance(kernel, other) if other is not None else None
    report = KernelReport(
        satisfies_J=satisfies_J,
        first_moment=m1,
        satisfies_J1=math.isfinite(m1),
        tail_exponent_estimate=_tail_exponent(kernel),
        dominance_constant=dom,
        K1=K1,
        K2=K2,
        mass_defect=defect,
    )
    logger.debug("kernel %s: %s", kernel.spec.family, report)
    return report


# --------------------------------------------------------------------------- #
# Dominance
# --------------------------------------------------------------------------- #


def _ratio_may_be_bounded(dom: Kernel, other: Kernel) -> bool:
    """Family-level verdict on sup other/dom < ∞; False means it diverges."""
    r_dom, r_other = dom.support_radius, other.support_radius
    if r_dom is not None:
        return r_other is not None and r_other <= r_dom
    if isinstance(dom, PowerLawKernel):
        return not (isinstance(other, PowerLawKernel) and other.alpha < dom.alpha)
    if isinstance(dom, GaussianKernel):
        if isinstance(other, (PowerLawKernel, LaplaceKernel)):
            return False
        if isinstance(other, GaussianKernel):
            return other.sigma <= dom.sigma
        return True
    if isinstance(dom, LaplaceKernel):
        if isinstance(other, PowerLawKernel):
            return False
        if isinstance(other, LaplaceKernel):
            return other.b <= dom.b
    return True


def _dominance_grid(dom: Kernel, n: int) -> FloatArray:
    radius = dom.support_radius
    if radius is not None:
        return np.linspace(0.0, radius, n, endpoint=False)
    return np.concatenate([np.linspace(0.0, 10.0 * dom.scale, n), np.logspace(1, 6, n)])


def _grid_sup(dom: Kernel, other: Kernel, grid: FloatArray) -> float | None:
    jd = dom.density(grid)
    jo = other.density(grid)
    if np.any((jd <= 0.0) & (jo > 0.0)):
        return None
    mask = jd > 0.0
    if not np.any(mask):
        return None
    return float(np.max(jo[mask] / jd[mask]))


def dominance(
    J_dom: Kernel, J_other: Kernel, grid: FloatArray | None = None, n: int = 2000
) -> float | None:
    """Smallest C on the grid with J_other ≤ C·J_dom, or None if unbounded.

    The grid supremum is re-evaluated at twice the resolution; growth of
    more than 10% signals a ratio blowing up where J_dom vanishes.
    """
    if J_dom is J_other or J_dom.spec == J_other.spec:
        return 1.0
    if not _ratio_may_be_bounded(J_dom, J_other):
        return None
    if grid is not None:
        g1 = np.unique(np.abs(np.asarray(grid, dtype=np.float64)))
        g2 = np.sort(np.concatenate([g1, 0.5 * (g1[:-1] + g1[1:])]))
    else:
        g1 = _dominance_grid(J_dom, n)
        g2 = _dominance_grid(J_dom, 2 * n)
    s1 = _grid_sup(J_dom, J_other, g1)
    s2 = _grid_sup(J_dom, J_other, g2)
    if s1 is None or s2 is None or s2 > 1.1 * s1:
        return None
    return max(s1, s2)


__all__ = [
    "CompactShape",
    "CosineKernel",
    "GaussianKernel",
    "Kernel",
    "KernelFamily",
    "KernelReport",
    "KernelSpec",
    "LaplaceKernel",
    "PowerLawKernel",
    "TableKernel",
    "TriangleKernel",
    "check_conditions",
    "dominance",
    "normalize",
    "sample_row",
    "tail_mass",
]
