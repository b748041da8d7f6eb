"""Explicit lower and upper envelopes for the free-boundary system.

Lower envelopes are even field pairs supported on [−h̲(t), h̲(t)] built from
the small eigenvector (δ1, δ2) of the linearization; upper envelopes are the
constant pair (M·u*, M·v*) on [−h̄(t), h̄(t)]. Each case fixes the front law:

=============================  ===================================
case                           front
=============================  ===================================
lower_J2dom_alpha_in_1_2       h̲ = (C1·t + σ)^{1/(α−1)}
lower_J1dom_alpha_in_1_2       same, kinked factor moved to u̲
lower_J2dom_alpha_2            h̲ = C1·(t + σ)·ln(t + σ)
lower_J1dom_alpha_2            same, kinked factor moved to u̲
upper_power                    h̄ = (C·t + σ)^{1/(α−1)}
upper_tlnt                     h̄ = (C·t + σ)·ln(C·t + σ)
=============================  ===================================

``residual_check`` evaluates both sides of the defining inequalities on a
sample set, with composite Gauss–Legendre panels for every integral and
closed-form time derivatives. ``search_constants`` walks log-grids of the
free constants until a candidate passes.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from mxm_frontlab.analysis import DichotomyVerdict, VerdictKind
from mxm_frontlab.errors import ValidationError
from mxm_frontlab.kernels import Kernel, PowerLawKernel, dominance
from mxm_frontlab.model import (
    GFunction,
    ModelParams,
    linearized_eigenpair,
    positive_equilibrium,
)
from mxm_frontlab.quadrature import gauss_panels, graded_breaks
from mxm_frontlab.simulator import KernelSet, StopReason, Trajectory
from mxm_frontlab.types import ArrayLike, FloatArray, JSONLike

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
KINK_TOL = 1e-9
GAUSS_ORDER = 12

# --------------------------------------------------------------------------- #
# Cases and specs
# --------------------------------------------------------------------------- #


class EnvelopeCase(str, Enum):
    LOWER_J2DOM_ALPHA_IN_1_2 = "lower_J2dom_alpha_in_1_2"
    LOWER_J2DOM_ALPHA_2 = "lower_J2dom_alpha_2"
    UPPER_POWER = "upper_power"
    UPPER_TLNT = "upper_tlnt"
    LOWER_J1DOM_ALPHA_IN_1_2 = "lower_J1dom_alpha_in_1_2"
    LOWER_J1DOM_ALPHA_2 = "lower_J1dom_alpha_2"

    @property
    def is_upper(self) -> bool:
        return self in (EnvelopeCase.UPPER_POWER, EnvelopeCase.UPPER_TLNT)

    @property
    def is_lower(self) -> bool:
        return not self.is_upper

    @property
    def critical(self) -> bool:
        """Cases built for α = 2."""
        return self in (
            EnvelopeCase.LOWER_J2DOM_ALPHA_2,
            EnvelopeCase.LOWER_J1DOM_ALPHA_2,
            EnvelopeCase.UPPER_TLNT,
        )

    @property
    def j1_dominant(self) -> bool:
        return self in (EnvelopeCase.LOWER_J1DOM_ALPHA_IN_1_2, EnvelopeCase.LOWER_J1DOM_ALPHA_2)


@dataclass(frozen=True, slots=True)
class EnvelopeSpec:
    """One envelope with all constants fixed.

    Lower cases use C1, C2, σ, λ (and C3, β when α = 2) with the eigenvector
    (delta1, delta2). Upper cases use C, σ, M and the equilibrium.
    """

    case: EnvelopeCase
    alpha: float
    sigma: float
    C1: float = 0.0
    C2: float = 0.0
    C3: float = 0.0
    lam: float = 2.0
    beta: float = 0.4
    delta1: float = 0.0
    delta2: float = 0.0
    C: float = 0.0
    M: float = 1.01
    u_star: float = 0.0
    v_star: float = 0.0

    def errors(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        case = self.case
        if case.critical:
            if abs(self.alpha - 2.0) > 1e-12:
                out.append(("alpha", f"{case.value} needs alpha = 2, got {self.alpha}"))
            if not self.sigma > 1.0:
                out.append(("sigma", f"{case.value} needs sigma > 1, got {self.sigma}"))
        else:
            if not 1.0 < self.alpha < 2.0:
                out.append(("alpha", f"{case.value} needs alpha in (1, 2), got {self.alpha}"))
            if not self.sigma > 0.0:
                out.append(("sigma", f"must be positive, got {self.sigma}"))
        if case.is_lower:
            for name in ("C1", "C2", "delta1", "delta2"):
                if not getattr(self, name) > 0.0:
                    out.append((name, "must be positive"))
            if case.critical:
                if not 0.0 < self.beta < 0.5:
                    out.append(("beta", f"must lie in (0, 1/2), got {self.beta}"))
                if self.beta > 0 and not self.lam > 1.0 / self.beta:
                    out.append(("lam", f"needs lambda > 1/beta, got {self.lam}"))
                if not self.C3 > 0.0:
                    out.append(("C3", "must be positive"))
            elif self.lam < 2.0:
                out.append(("lam", f"needs lambda >= 2, got {self.lam}"))
        else:
            if not self.C > 0.0:
                out.append(("C", "must be positive"))
            if not self.M > 1.0:
                out.append(("M", f"must exceed 1, got {self.M}"))
            if not (self.u_star > 0.0 and self.v_star > 0.0):
                out.append(("equilibrium", "upper envelope needs a positive equilibrium"))
        return out

    def validate(self) -> "EnvelopeSpec":
        errs = self.errors()
        if errs:
            raise ValidationError(f"invalid {self.case.value} envelope", errs)
        return self

    def to_json(self) -> dict[str, JSONLike]:
        out: dict[str, JSONLike] = {"case": self.case.value, "alpha": self.alpha, "sigma": self.sigma}
        if self.case.is_lower:
            out.update(C1=self.C1, C2=self.C2, lam=self.lam, delta1=self.delta1, delta2=self.delta2)
            if self.case.critical:
                out.update(C3=self.C3, beta=self.beta)
        else:
            out.update(C=self.C, M=self.M, u_star=self.u_star, v_star=self.v_star)
        return out


# --------------------------------------------------------------------------- #
# Fronts
# --------------------------------------------------------------------------- #


def front(spec: EnvelopeSpec, t: float) -> float:
    """h̲(t) or h̄(t)."""
    case, a = spec.case, spec.alpha
    if case.is_upper:
        base = spec.C * t + spec.sigma
        return base * math.log(base) if case.critical else base ** (1.0 / (a - 1.0))
    if case.critical:
        tau = t + spec.sigma
        return spec.C1 * tau * math.log(tau)
    return (spec.C1 * t + spec.sigma) ** (1.0 / (a - 1.0))


def front_rate(spec: EnvelopeSpec, t: float) -> float:
    """Closed-form time derivative of ``front``."""
    case, a = spec.case, spec.alpha
    if case.is_upper:
        base = spec.C * t + spec.sigma
        if case.critical:
            return spec.C * (math.log(base) + 1.0)
        return spec.C / (a - 1.0) * base ** ((2.0 - a) / (a - 1.0))
    if case.critical:
        return spec.C1 * (math.log(t + spec.sigma) + 1.0)
    return spec.C1 / (a - 1.0) * (spec.C1 * t + spec.sigma) ** ((2.0 - a) / (a - 1.0))


# --------------------------------------------------------------------------- #
# Lower profiles
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class _LowerFields:
    u: FloatArray
    v: FloatArray
    u_t: FloatArray
    v_t: FloatArray
    kinks: tuple[float, ...]


# (plain, plain_t, kinked, kinked_t, kinks) in units of the eigenvector
type _Pieces = tuple[FloatArray, FloatArray, FloatArray, FloatArray, tuple[float, ...]]


def _subcritical(spec: EnvelopeSpec, ax: FloatArray, t: float) -> _Pieces:
    a, lam = spec.alpha, spec.lam
    h = front(spec, t)
    hp = front_rate(spec, t)
    q = np.clip((h - ax) / h, 0.0, 1.0)
    q_t = ax * hp / (h * h)

    plain = q**lam
    plain_t = lam * q ** (lam - 1.0) * q_t

    e = spec.C2 * h ** (1.0 - a)
    psi1 = h / (e + 1.0)
    Q = e / (e + 1.0)
    Q_t = spec.C2 * (1.0 - a) * h ** (-a) * hp / (e + 1.0) ** 2
    inside = ax <= psi1
    kinked = np.where(inside, plain, Q * q ** (lam - 1.0))
    kinked_t = np.where(
        inside, plain_t, Q_t * q ** (lam - 1.0) + Q * (lam - 1.0) * q ** (lam - 2.0) * q_t
    )
    return plain, plain_t, kinked, kinked_t, (psi1,)


def _critical(spec: EnvelopeSpec, ax: FloatArray, t: float) -> _Pieces:
    lam, beta = spec.lam, spec.beta
    tau = t + spec.sigma
    h = front(spec, t)
    hp = front_rate(spec, t)
    tb = tau**beta
    gap = np.maximum(h - ax, 0.0)
    p = gap / tb
    p_t = hp / tb - beta * gap / (tau * tb)

    plain_raw = p**lam
    plain = np.minimum(1.0, plain_raw)
    plain_t = np.where(plain_raw < 1.0, lam * p ** (lam - 1.0) * p_t, 0.0)

    den = spec.C2 / tau + 1.0
    num = h - spec.C3 * math.log(tau)
    psi2 = num / den
    psi2_t = ((hp - spec.C3 / tau) * den + num * spec.C2 / (tau * tau)) / (den * den)
    P = (h - psi2) / tb
    P_t = (hp - psi2_t) / tb - beta * (h - psi2) / (tau * tb)

    inside = ax <= psi2
    raw = np.where(inside, plain_raw, P * p ** (lam - 1.0))
    raw_t = np.where(
        inside,
        lam * p ** (lam - 1.0) * p_t,
        P_t * p ** (lam - 1.0) + P * (lam - 1.0) * p ** (lam - 2.0) * p_t,
    )
    kinked = np.minimum(1.0, raw)
    kinked_t = np.where(raw < 1.0, raw_t, 0.0)

    kinks = [psi2, h - tb]
    if P > 0.0:
        # P·p^{λ−1} = 1 outside psi2
        kinks.append(h - tb * P ** (-1.0 / (lam - 1.0)))
    return plain, plain_t, kinked, kinked_t, tuple(k for k in kinks if 0.0 < k < h)


def _lower_fields(spec: EnvelopeSpec, x: ArrayLike, t: float) -> _LowerFields:
    ax = np.abs(np.asarray(x, dtype=np.float64))
    build = _critical if spec.case.critical else _subcritical
    plain, plain_t, kinked, kinked_t, kinks = build(spec, ax, t)
    d1, d2 = spec.delta1, spec.delta2
    if spec.case.j1_dominant:
        return _LowerFields(kinked * d1, plain * d2, kinked_t * d1, plain_t * d2, kinks)
    return _LowerFields(plain * d1, kinked * d2, plain_t * d1, kinked_t * d2, kinks)


def kink_points(spec: EnvelopeSpec, t: float) -> tuple[float, ...]:
    """|x| positions where the lower profiles have time-derivative jumps."""
    if spec.case.is_upper:
        return ()
    return _lower_fields(spec, np.zeros(1), t).kinks


def eval_lower(
    spec: EnvelopeSpec, x: ArrayLike, t: float
) -> tuple[FloatArray, FloatArray, float, float]:
    """(u̲, v̲, g̲, h̲) at time t for |x| ≤ h̲(t)."""
    if not spec.case.is_lower:
        raise ValidationError(f"{spec.case.value} is not a lower envelope")
    h = front(spec, t)
    xa = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(xa) > h * (1.0 + 1e-12)):
        raise ValidationError(f"x outside [-h, h] with h = {h:.6g} at t = {t:g}")
    f = _lower_fields(spec, xa, t)
    return f.u, f.v, -h, h


def eval_upper(spec: EnvelopeSpec, t: float) -> tuple[float, float, float]:
    """(ū, v̄, h̄) at time t."""
    if not spec.case.is_upper:
        raise ValidationError(f"{spec.case.value} is not an upper envelope")
    return spec.M * spec.u_star, spec.M * spec.v_star, front(spec, t)


# --------------------------------------------------------------------------- #
# Residual check
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class SampleGrid:
    T_check: float = 200.0
    n_t: int = 64
    n_x: int = 128

    def errors(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        if not self.T_check > 0:
            out.append(("T_check", "must be positive"))
        if self.n_t < 2:
            out.append(("n_t", "needs at least 2 sample times"))
        if self.n_x < 2:
            out.append(("n_x", "needs at least 2 sample points"))
        return out

    @property
    def times(self) -> FloatArray:
        """t = 0 plus log-spaced times in [T_check·1e−3, T_check]."""
        hi = math.log10(self.T_check)
        return np.concatenate([[0.0], np.logspace(hi - 3.0, hi, self.n_t - 1)])


@dataclass(frozen=True, slots=True)
class ResidualReport:
    boundary_residual: float
    pde_residuals: tuple[float, float]
    passed: bool
    samples: int
    skipped: int
    worst: dict[str, float] = field(default_factory=dict)

    @property
    def score(self) -> float:
        """Smallest residual; larger is less violated."""
        return min(self.boundary_residual, *self.pde_residuals)

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "boundary_residual": self.boundary_residual,
            "pde_residuals": list(self.pde_residuals),
            "pass": self.passed,
            "samples": self.samples,
            "skipped": self.skipped,
            "worst": dict(self.worst),
        }


def _panel_scale(kernels: KernelSet) -> float:
    return min(kernels.J1.scale, kernels.J2.scale, kernels.K.scale)


def _support_points(kernels: KernelSet, x: float) -> list[float]:
    pts: list[float] = []
    for k in (kernels.J1, kernels.J2, kernels.K):
        r = k.support_radius
        if r is not None:
            pts.extend((x - r, x + r))
    return pts


def _tail_area(kernel: Kernel, A: float, scale: float) -> float:
    """∫_0^A tail_mass(s) ds."""
    nodes, w = gauss_panels(graded_breaks(0.0, A, [0.0], scale), GAUSS_ORDER)
    return float(np.dot(w, kernel.tail_mass(nodes)))


class _ResidualEvaluator:
    def __init__(
        self, spec: EnvelopeSpec, params: ModelParams, G: GFunction, kernels: KernelSet
    ) -> None:
        self.spec = spec
        self.params = params
        self.G = G
        self.kernels = kernels
        self.scale = _panel_scale(kernels)

    # lower -------------------------------------------------------------- #

    def _lower_panels(
        self, h: float, anchor: float, kinks: Sequence[float]
    ) -> tuple[FloatArray, FloatArray]:
        extra = [s * k for k in kinks for s in (-1.0, 1.0)]
        extra += _support_points(self.kernels, anchor)
        breaks = graded_breaks(-h, h, [anchor, -h, 0.0, h], self.scale, extra=extra)
        return gauss_panels(breaks, GAUSS_ORDER)

    def lower_boundary(self, t: float) -> float:
        p, k, spec = self.params, self.kernels, self.spec
        h = front(spec, t)
        kinks = kink_points(spec, t)
        nodes, w = self._lower_panels(h, h, kinks)
        f = _lower_fields(spec, nodes, t)
        flux = p.mu * float(
            np.dot(w, f.u * k.J1.tail_mass(h - nodes))
            + p.rho_flux * np.dot(w, f.v * k.J2.tail_mass(h - nodes))
        )
        return flux - front_rate(spec, t)

    def lower_fields(self, x: float, t: float, kinks: Sequence[float]) -> tuple[float, float]:
        p, k, spec = self.params, self.kernels, self.spec
        h = front(spec, t)
        nodes, w = self._lower_panels(h, x, kinks)
        f = _lower_fields(spec, nodes, t)
        i1 = float(np.dot(w, k.J1.density(x - nodes) * f.u))
        ik = float(np.dot(w, k.K.density(x - nodes) * f.v))
        i2 = float(np.dot(w, k.J2.density(x - nodes) * f.v))
        here = _lower_fields(spec, np.array([x]), t)
        u, v = float(here.u[0]), float(here.v[0])
        r1 = p.d1 * i1 - (p.d1 + p.a11) * u + p.a12 * ik - float(here.u_t[0])
        r2 = p.d2 * i2 - (p.d2 + p.a22) * v + float(self.G(u)) - float(here.v_t[0])
        return r1, r2

    # upper -------------------------------------------------------------- #

    def upper_boundary(self, t: float) -> float:
        p, k, spec = self.params, self.kernels, self.spec
        h = front(spec, t)
        flux = p.mu * spec.M * (
            spec.u_star * _tail_area(k.J1, 2.0 * h, k.J1.scale)
            + p.rho_flux * spec.v_star * _tail_area(k.J2, 2.0 * h, k.J2.scale)
        )
        return front_rate(spec, t) - flux

    def upper_fields(self, x: float, t: float) -> tuple[float, float]:
        p, k, spec = self.params, self.kernels, self.spec
        h = front(spec, t)
        ub, vb = spec.M * spec.u_star, spec.M * spec.v_star

        def mass(kernel: Kernel) -> float:
            return 1.0 - float(kernel.tail_mass(h - x)) - float(kernel.tail_mass(h + x))

        r1 = (p.d1 + p.a11) * ub - p.d1 * ub * mass(k.J1) - p.a12 * vb * mass(k.K)
        r2 = (p.d2 + p.a22) * vb - p.d2 * vb * mass(k.J2) - float(self.G(ub))
        return r1, r2


def residual_check(
    spec: EnvelopeSpec,
    params: ModelParams,
    G: GFunction,
    kernels: KernelSet,
    sample: SampleGrid | None = None,
) -> ResidualReport:
    """Signed minima of the defining inequalities over the sample set.

    Lower cases report flux − h̲′ and RHS − LHS of both field inequalities;
    upper cases report h̄′ − flux and LHS − RHS. Fields are even, so x is
    sampled on [0, h(t)]. Points within 1e−9·h of a kink are skipped.
    """
    spec.validate()
    grid = sample or SampleGrid()
    ev = _ResidualEvaluator(spec, params, G, kernels)
    b_min = r1_min = r2_min = math.inf
    worst: dict[str, float] = {}
    samples = skipped = 0

    for t in grid.times:
        t = float(t)
        h = front(spec, t)
        b = ev.lower_boundary(t) if spec.case.is_lower else ev.upper_boundary(t)
        if b < b_min:
            b_min = b
            worst["boundary_t"] = t
        kinks = kink_points(spec, t)
        for x in np.linspace(0.0, h, grid.n_x):
            x = float(x)
            if any(abs(x - kp) <= KINK_TOL * max(1.0, h) for kp in kinks):
                skipped += 1
                continue
            samples += 1
            if spec.case.is_lower:
                r1, r2 = ev.lower_fields(x, t, kinks)
            else:
                r1, r2 = ev.upper_fields(x, t)
            if r1 < r1_min:
                r1_min = r1
                worst["u_t"], worst["u_x"] = t, x
            if r2 < r2_min:
                r2_min = r2
                worst["v_t"], worst["v_x"] = t, x

    passed = min(b_min, r1_min, r2_min) >= -RESIDUAL_TOL
    report = ResidualReport(b_min, (r1_min, r2_min), passed, samples, skipped, worst)
    logger.debug("residual check %s: %s", spec.case.value, report)
    return report


# --------------------------------------------------------------------------- #
# Constant search
# --------------------------------------------------------------------------- #


def log_grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n))


@dataclass(frozen=True, slots=True)
class EnvelopeSearch:
    """Search ranges and sample sets; candidates pass ``coarse`` before ``sample``."""

    sample: SampleGrid = SampleGrid()
    coarse: SampleGrid = SampleGrid(200.0, 8, 16)
    C1: tuple[float, ...] = log_grid(1e-4, 1.0, 9)
    C2: tuple[float, ...] = log_grid(1e-2, 1e2, 5)
    C3: tuple[float, ...] = log_grid(1e-1, 1e2, 4)
    sigma: tuple[float, ...] = log_grid(10**0.5, 1e3, 6)
    C: tuple[float, ...] = log_grid(1e-2, 1e3, 11)
    upper_sigma: tuple[float, ...] = log_grid(1.0, 1e6, 7)
    lam: float = 2.0
    lam_critical: float = 3.0
    beta: float = 0.4


@dataclass(frozen=True, slots=True)
class SearchResult:
    spec: EnvelopeSpec | None
    report: ResidualReport | None
    best: EnvelopeSpec | None = None
    best_report: ResidualReport | None = None
    reason: str = ""
    tried: int = 0

    @property
    def found(self) -> bool:
        return self.spec is not None

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "found": self.found,
            "spec": self.spec.to_json() if self.spec else None,
            "report": self.report.to_json() if self.report else None,
            "best": self.best.to_json() if self.best else None,
            "best_report": self.best_report.to_json() if self.best_report else None,
            "reason": self.reason,
            "tried": self.tried,
        }


def _dominating(case: EnvelopeCase, kernels: KernelSet) -> tuple[Kernel, Kernel] | None:
    if case.is_upper:
        for dom, other in ((kernels.J2, kernels.J1), (kernels.J1, kernels.J2)):
            if isinstance(dom, PowerLawKernel) and dominance(dom, other) is not None:
                return dom, other
        return None
    return (kernels.J1, kernels.J2) if case.j1_dominant else (kernels.J2, kernels.J1)


def case_compatibility(case: EnvelopeCase, kernels: KernelSet) -> tuple[float | None, str]:
    """(alpha, "") if the case fits the kernels, else (None, reason)."""
    pair = _dominating(case, kernels)
    if pair is None:
        return None, "no power-law kernel dominates the other"
    dom, other = pair
    if not isinstance(dom, PowerLawKernel):
        return None, f"dominating kernel is {dom.spec.family}, not power_law"
    alpha = dom.alpha
    if case.critical and abs(alpha - 2.0) > 1e-12:
        return None, f"{case.value} needs alpha = 2 but the dominating kernel has alpha = {alpha}"
    if not case.critical and not 1.0 < alpha < 2.0:
        return None, f"{case.value} needs alpha in (1, 2) but the dominating kernel has alpha = {alpha}"
    if dominance(dom, other) is None:
        return None, "the dominating kernel does not bound the other kernel"
    return alpha, ""


def _candidates(
    case: EnvelopeCase, base: EnvelopeSpec, search: EnvelopeSearch, h0: float
) -> Iterator[EnvelopeSpec]:
    if case.is_upper:
        for sigma in search.upper_sigma:
            if case.critical and sigma <= 1.0:
                continue
            for C in search.C:
                spec = replace(base, sigma=sigma, C=C)
                if front(spec, 0.0) >= h0:
                    yield spec
        return
    if case.critical:
        for sigma in search.sigma:
            for C1 in reversed(search.C1):
                for C2 in search.C2:
                    for C3 in search.C3:
                        yield replace(
                            base, sigma=sigma, C1=C1, C2=C2, C3=C3,
                            lam=search.lam_critical, beta=search.beta,
                        )
        return
    for sigma in search.sigma:
        for C1 in reversed(search.C1):
            for C2 in search.C2:
                yield replace(base, sigma=sigma, C1=C1, C2=C2, lam=search.lam)


def search_constants(
    case: EnvelopeCase,
    params: ModelParams,
    G: GFunction,
    kernels: KernelSet,
    search: EnvelopeSearch | None = None,
    *,
    M: float = 1.01,
) -> SearchResult:
    """First candidate on the configured log-grids that passes ``residual_check``.

    Lower cases prefer small σ and large C1; upper cases prefer small σ and
    small C. Returns a result with ``spec=None`` and the least-violated
    candidate when the grids are exhausted, or a reason when the case does
    not fit the kernels.

    Upper cases need a power-law kernel that dominates the other one. A
    power law may dominate a gaussian, laplace or compact kernel, but a
    light-tailed kernel is never taken as the dominating one, so a set with
    no power-law member gets no upper case.
    """
    cfg = search or EnvelopeSearch()
    alpha, reason = case_compatibility(case, kernels)
    if alpha is None:
        logger.info("envelope case %s skipped: %s", case.value, reason)
        return SearchResult(None, None, reason=reason)

    eq = positive_equilibrium(params, G)
    if not eq.exists:
        return SearchResult(None, None, reason=f"R0 = {eq.R0:.6g} <= 1: no envelope")
    assert eq.u_star is not None and eq.v_star is not None
    if case.is_lower:
        pair = linearized_eigenpair(params, G, eq)
        base = EnvelopeSpec(case, alpha, 1.0, delta1=pair.delta1, delta2=pair.delta2)
    else:
        base = EnvelopeSpec(case, alpha, 1.0, M=M, u_star=eq.u_star, v_star=eq.v_star)

    best: EnvelopeSpec | None = None
    best_report: ResidualReport | None = None
    tried = 0
    for cand in _candidates(case, base, cfg, params.h0):
        tried += 1
        if cand.errors():
            continue
        coarse = residual_check(cand, params, G, kernels, cfg.coarse)
        if best_report is None or coarse.score > best_report.score:
            best, best_report = cand, coarse
        if not coarse.passed:
            continue
        logger.info("envelope candidate %s passed coarse check", cand.to_json())
        full = residual_check(cand, params, G, kernels, cfg.sample)
        if full.passed:
            logger.info("envelope %s accepted after %d candidates", case.value, tried)
            return SearchResult(cand, full, cand, full, tried=tried)
        if full.score > best_report.score:
            best, best_report = cand, full

    logger.info("envelope search %s exhausted %d candidates", case.value, tried)
    return SearchResult(None, None, best, best_report, "search grid exhausted", tried)


# --------------------------------------------------------------------------- #
# Comparison with simulated fronts
# --------------------------------------------------------------------------- #


def front_curves(
    lower: EnvelopeSpec | None,
    upper: EnvelopeSpec | None,
    times: ArrayLike,
    t0: float = 0.0,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """(t, h̲(t − t0), h̄(t)); NaN where an envelope is absent or t < t0."""
    ts = np.asarray(times, dtype=np.float64)
    lo = np.full(ts.size, np.nan)
    hi = np.full(ts.size, np.nan)
    if lower is not None:
        for i, t in enumerate(ts):
            if t >= t0:
                lo[i] = front(lower, float(t) - t0)
    if upper is not None:
        hi = np.array([front(upper, float(t)) for t in ts])
    return ts, lo, hi


@dataclass(frozen=True, slots=True)
class CompareReport:
    ok: bool
    t0: float | None
    lower_ok: bool | None
    upper_ok: bool | None
    lower_margin: float | None
    upper_margin: float | None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "ok": self.ok,
            "t0": self.t0,
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "lower_margin": self.lower_margin,
            "upper_margin": self.upper_margin,
            "reason": self.reason,
        }


def anchor_time(trajectory: Trajectory, lower: EnvelopeSpec) -> float | None:
    """First snapshot time where the solution dominates the lower data at t = 0."""
    h_lo = front(lower, 0.0)
    for snap in trajectory.snapshots:
        if snap.x[0] > -h_lo or snap.x[-1] < h_lo:
            continue
        inside = np.abs(snap.x) <= h_lo
        u_lo, v_lo, _, _ = eval_lower(lower, snap.x[inside], 0.0)
        if np.all(snap.u[inside] >= u_lo) and np.all(snap.v[inside] >= v_lo):
            return snap.t
    return None


def envelope_compare(
    trajectory: Trajectory,
    lower: EnvelopeSpec | None,
    upper: EnvelopeSpec | None,
    window: tuple[float, float] | None = None,
    verdict: DichotomyVerdict | None = None,
) -> CompareReport:
    """Check h̲(t − t0) ≤ h(t), −g(t) ≤ h̄(t) on the window.

    Either envelope may be omitted for a one-sided check.
    """
    if lower is None and upper is None:
        raise ValidationError("envelope_compare needs at least one envelope")
    not_spreading = (verdict is not None and verdict.kind is not VerdictKind.SPREADING) or (
        trajectory.stop_reason is StopReason.VANISHED
    )
    if not_spreading:
        return CompareReport(
            False, None, None, None, None, None,
            "precondition violated: trajectory is not spreading",
        )

    t = trajectory.times
    lo_t, hi_t = window if window is not None else (float(t[0]), float(t[-1]))
    in_window = (t >= lo_t) & (t <= hi_t)
    reach = np.minimum(trajectory.h, -trajectory.g)
    extent = np.maximum(trajectory.h, -trajectory.g)

    t0: float | None = None
    lower_ok = upper_ok = None
    lower_margin = upper_margin = None
    if lower is not None:
        t0 = anchor_time(trajectory, lower)
        if t0 is None:
            return CompareReport(
                False, None, None, None, None, None,
                "anchoring failed: the trajectory never dominates the lower initial data",
            )
        mask = in_window & (t >= t0)
        if not np.any(mask):
            return CompareReport(False, t0, None, None, None, None, "window ends before anchoring time")
        env = np.array([front(lower, float(s) - t0) for s in t[mask]])
        gap = reach[mask] - env
        lower_margin = float(gap.min())
        lower_ok = lower_margin >= 0.0
    if upper is not None:
        if not np.any(in_window):
            return CompareReport(False, t0, lower_ok, None, lower_margin, None, "empty window")
        env = np.array([front(upper, float(s)) for s in t[in_window]])
        gap = env - extent[in_window]
        upper_margin = float(gap.min())
        upper_ok = upper_margin >= 0.0

    ok = lower_ok is not False and upper_ok is not False
    return CompareReport(ok, t0, lower_ok, upper_ok, lower_margin, upper_margin)


__all__ = [
    "CompareReport",
    "EnvelopeCase",
    "EnvelopeSearch",
    "EnvelopeSpec",
    "ResidualReport",
    "SampleGrid",
    "SearchResult",
    "anchor_time",
    "case_compatibility",
    "envelope_compare",
    "eval_lower",
    "eval_upper",
    "front",
    "front_curves",
    "front_rate",
    "kink_points",
    "log_grid",
    "residual_check",
    "search_constants",
]
