"""Explicit time stepping of the free-boundary system.

On the moving interval [g(t), h(t)]:

    u_t = d1·∫J1(x−y)u dy − d1·u − a11·u + a12·∫K(x−y)v dy
    v_t = d2·∫J2(x−y)v dy − d2·v − a22·v + G(u)
    h′  =  μ ∫_g^h [u(x)·T1(h−x) + ρ·v(x)·T2(h−x)] dx
    g′  = −μ ∫_g^h [u(x)·T1(x−g) + ρ·v(x)·T2(x−g)] dx

with u = v = 0 at x = g, h and T the kernel tail mass.

Grid
----
Interior nodes are the multiples k·dx strictly inside (g, h); the two
boundary nodes sit at the exact real positions g and h and carry the
Dirichlet zeros. Trapezoid weights on this node set integrate the partial
cells next to the fronts. When a front passes a new multiple of dx the node
is added with value 0.

Interior–interior integrals are discrete convolutions against kernel
samples J(m·dx), cached per run and grown on demand.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mxm_frontlab.errors import SolverAbort, ValidationError
from mxm_frontlab.kernels import Kernel, sample_row
from mxm_frontlab.model import Equilibrium, GFunction, ModelParams
from mxm_frontlab.quadrature import ConvMethod, trapezoid_weights, uniform_convolve
from mxm_frontlab.types import FloatArray, JSONLike

logger = logging.getLogger(__name__)

NODE_TOL = 1e-9

# --------------------------------------------------------------------------- #
# Configuration and state
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class SimConfig:
    dx: float = 0.25
    dt: float = 0.02
    T: float = 2000.0
    snapshot_every: int = 5000
    vanish_threshold: float = 1e-8
    spread_threshold: float = 200.0
    stall_steps: int = 1000
    stall_tol: float = 1e-10
    neg_tol: float = 1e-14
    conv_method: ConvMethod = "auto"
    max_length: float | None = None
    log_every: int = 10000

    def errors(self, params: ModelParams | None = None) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        for name in ("dx", "dt", "T", "vanish_threshold", "spread_threshold", "stall_tol"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0):
                out.append((name, f"must be positive, got {value!r}"))
        for name in ("snapshot_every", "stall_steps", "log_every"):
            if int(getattr(self, name)) < 1:
                out.append((name, "must be a positive integer"))
        if self.conv_method not in ("auto", "direct", "fft"):
            out.append(("conv_method", f"must be auto, direct or fft, got {self.conv_method!r}"))
        if self.max_length is not None and self.max_length <= 0:
            out.append(("max_length", "must be positive when set"))
        if params is not None and self.dt > 0:
            if self.dt * (params.d1 + params.a11) >= 1.0:
                out.append(
                    ("dt", "stability bound dt·(d1 + a11) < 1 violated "
                     f"({self.dt}·{params.d1 + params.a11} >= 1)")
                )
            if self.dt * (params.d2 + params.a22) >= 1.0:
                out.append(
                    ("dt", "stability bound dt·(d2 + a22) < 1 violated "
                     f"({self.dt}·{params.d2 + params.a22} >= 1)")
                )
            if self.dx > params.h0:
                out.append(("dx", f"must not exceed h0 = {params.h0}"))
        return out

    def validate(self, params: ModelParams | None = None) -> "SimConfig":
        errs = self.errors(params)
        if errs:
            raise ValidationError("invalid simulation config", errs)
        return self


@dataclass(frozen=True, slots=True)
class KernelSet:
    J1: Kernel
    J2: Kernel
    K: Kernel

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "J1": self.J1.spec.to_json(),
            "J2": self.J2.spec.to_json(),
            "K": self.K.spec.to_json(),
        }


type FieldFn = Callable[[FloatArray], FloatArray]


@dataclass(frozen=True, slots=True)
class InitProfile:
    """Initial data; default u0 = A(1 − (x/h0)²), v0 = B(1 − (x/h0)²)."""

    A: float = 1.0
    B: float = 1.0
    u0: FieldFn | None = field(default=None, compare=False)
    v0: FieldFn | None = field(default=None, compare=False)

    def values(self, x: FloatArray, h0: float) -> tuple[FloatArray, FloatArray]:
        bump = 1.0 - (x / h0) ** 2
        u = self.u0(x) if self.u0 is not None else self.A * bump
        v = self.v0(x) if self.v0 is not None else self.B * bump
        return np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)


@dataclass(frozen=True, slots=True)
class FieldState:
    """Fields on the nodes g, k_lo·dx, ..., k_hi·dx, h (boundary values 0)."""

    step: int
    t: float
    g: float
    h: float
    dx: float
    k_lo: int
    u: FloatArray
    v: FloatArray

    @property
    def n_interior(self) -> int:
        return self.u.size - 2

    @property
    def x(self) -> FloatArray:
        inner = (self.k_lo + np.arange(self.n_interior, dtype=np.float64)) * self.dx
        return np.concatenate([[self.g], inner, [self.h]])

    @property
    def weights(self) -> FloatArray:
        return trapezoid_weights(self.x)


def _interior_range(g: float, h: float, dx: float) -> tuple[int, int]:
    k_lo = math.ceil(g / dx + NODE_TOL)
    k_hi = math.floor(h / dx - NODE_TOL)
    return k_lo, k_hi


def comparison_bound(eq: Equilibrium, u0max: float, v0max: float) -> float:
    """M with M·u* ≥ ‖u0‖∞, M·v* ≥ ‖v0‖∞ and M > 1."""
    if not eq.exists:
        raise ValidationError("comparison bound needs a positive equilibrium")
    assert eq.u_star is not None and eq.v_star is not None
    return max(u0max / eq.u_star, v0max / eq.v_star, 1.0) * 1.01


# --------------------------------------------------------------------------- #
# Operations on a state
# --------------------------------------------------------------------------- #


def initialize(
    params: ModelParams, G: GFunction, init: InitProfile, config: SimConfig
) -> FieldState:
    """Sample the initial data on [−h0, h0]; reject data that is not positive inside."""
    _ = G
    config.validate(params)
    h0, dx = params.h0, config.dx
    k_lo, k_hi = _interior_range(-h0, h0, dx)
    inner = np.arange(k_lo, k_hi + 1, dtype=np.float64) * dx
    u_in, v_in = init.values(inner, h0)
    u_b, v_b = init.values(np.array([-h0, h0]), h0)

    problems: list[tuple[str, str]] = []
    if not (np.all(np.isfinite(u_in)) and np.all(np.isfinite(v_in))):
        problems.append(("init", "initial data must be finite"))
    elif np.any(u_in <= 0.0) or np.any(v_in <= 0.0):
        problems.append(("init", "u0 and v0 must be positive on (-h0, h0)"))
    scale = max(1.0, float(np.max(np.abs(u_in), initial=0.0)), float(np.max(np.abs(v_in), initial=0.0)))
    if np.any(np.abs(u_b) > 1e-12 * scale) or np.any(np.abs(v_b) > 1e-12 * scale):
        problems.append(("init", "u0 and v0 must vanish at x = ±h0"))
    if problems:
        raise ValidationError("initial data rejected", problems)

    u = np.concatenate([[0.0], u_in, [0.0]])
    v = np.concatenate([[0.0], v_in, [0.0]])
    return FieldState(0, 0.0, -h0, h0, dx, k_lo, u, v)


class FreeBoundarySolver:
    """Stepper bound to one (params, G, kernels, config) tuple.

    Holds the kernel sample rows so they are computed once per run.
    """

    def __init__(
        self,
        params: ModelParams,
        G: GFunction,
        kernels: KernelSet,
        config: SimConfig,
    ) -> None:
        self.params = params.validate()
        self.G = G
        self.kernels = kernels
        self.config = config.validate(params)
        self._rows: dict[int, FloatArray] = {}

    # ------------------------------------------------------------------ #
    # Kernel rows
    # ------------------------------------------------------------------ #

    def _row(self, kernel: Kernel, n: int) -> FloatArray:
        key = id(kernel)
        row = self._rows.get(key)
        complete = kernel.support_radius is not None
        if row is None or (row.size < n and not complete):
            cap = max(n, 2 * (row.size if row is not None else 0), 1024)
            row = sample_row(kernel, self.config.dx, cap)
            self._rows[key] = row
        return row

    # ------------------------------------------------------------------ #
    # Quadratures
    # ------------------------------------------------------------------ #

    def convolve(self, kernel: Kernel, w: FloatArray, state: FieldState) -> FloatArray:
        """∫_g^h J(x−y) w(y) dy at every node of ``state``."""
        row = self._row(kernel, max(state.n_interior, 1))
        return _convolve_with_row(kernel, row, w, state, self.config.conv_method)

    def boundary_flux(self, state: FieldState) -> tuple[float, float]:
        """(g′, h′) from exact tail masses; g′ ≤ 0 ≤ h′."""
        return boundary_flux(state, self.params, self.kernels)

    # ------------------------------------------------------------------ #
    # Time step
    # ------------------------------------------------------------------ #

    def step(self, state: FieldState) -> FieldState:
        """One forward-Euler step of fields and fronts."""
        p, cfg = self.params, self.config
        dt, dx = cfg.dt, cfg.dx
        t_new = (state.step + 1) * dt
        if state.n_interior <= 0:
            return FieldState(state.step + 1, t_new, state.g, state.h, dx, state.k_lo, state.u, state.v)

        k = self.kernels
        u, v = state.u, state.v
        cj1 = self.convolve(k.J1, u, state)[1:-1]
        ck = self.convolve(k.K, v, state)[1:-1]
        cj2 = self.convolve(k.J2, v, state)[1:-1]
        ui, vi = u[1:-1], v[1:-1]

        du = p.d1 * cj1 - (p.d1 + p.a11) * ui + p.a12 * ck
        dv = p.d2 * cj2 - (p.d2 + p.a22) * vi + self.G(ui)
        un = ui + dt * du
        vn = vi + dt * dv

        if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn))):
            raise SolverAbort(
                "non-finite field values", {"t": t_new, "step": state.step + 1}
            )
        scale = max(1.0, float(np.max(ui, initial=0.0)), float(np.max(vi, initial=0.0)))
        worst = min(float(un.min()), float(vn.min()))
        if worst < -cfg.neg_tol * scale:
            node = int(np.argmin(np.minimum(un, vn)))
            raise SolverAbort(
                "negative field beyond roundoff tolerance",
                {
                    "t": t_new,
                    "min_value": worst,
                    "x": float(state.x[1 + node]),
                    "dt": dt,
                },
            )
        np.maximum(un, 0.0, out=un)
        np.maximum(vn, 0.0, out=vn)

        gprime, hprime = self.boundary_flux(state)
        g_new = state.g + dt * gprime
        h_new = state.h + dt * hprime

        k_lo_old = state.k_lo
        k_hi_old = state.k_lo + state.n_interior - 1
        k_lo, k_hi = _interior_range(g_new, h_new, dx)
        k_lo = min(k_lo, k_lo_old)
        k_hi = max(k_hi, k_hi_old)
        left = np.zeros(k_lo_old - k_lo)
        right = np.zeros(k_hi - k_hi_old)
        u_next = np.concatenate([[0.0], left, un, right, [0.0]])
        v_next = np.concatenate([[0.0], left, vn, right, [0.0]])
        return FieldState(state.step + 1, t_new, g_new, h_new, dx, k_lo, u_next, v_next)

    # ------------------------------------------------------------------ #
    # Run loop
    # ------------------------------------------------------------------ #

    def run(self, init: InitProfile) -> "Trajectory":
        cfg = self.config
        state = initialize(self.params, self.G, init, cfg)
        n_steps = int(round(cfg.T / cfg.dt))

        times = [0.0]
        gs = [state.g]
        hs = [state.h]
        umax = [float(state.u.max())]
        vmax = [float(state.v.max())]
        snapshots = [Snapshot.of(state)]
        stop = StopReason.HORIZON

        while state.step < n_steps:
            state = self.step(state)
            times.append(state.t)
            gs.append(state.g)
            hs.append(state.h)
            umax.append(float(state.u.max()))
            vmax.append(float(state.v.max()))
            if state.step % cfg.snapshot_every == 0:
                snapshots.append(Snapshot.of(state))
            if state.step % cfg.log_every == 0:
                logger.info(
                    "t=%.4g g=%.6g h=%.6g max(u,v)=(%.4g, %.4g) nodes=%d",
                    state.t, state.g, state.h, umax[-1], vmax[-1], state.u.size,
                )

            width = state.h - state.g
            if (
                max(umax[-1], vmax[-1]) < cfg.vanish_threshold
                and state.step >= cfg.stall_steps
                and width - (hs[-1 - cfg.stall_steps] - gs[-1 - cfg.stall_steps]) < cfg.stall_tol
            ):
                stop = StopReason.VANISHED
                break
            if cfg.max_length is not None and width > cfg.max_length:
                stop = StopReason.LENGTH_CAP
                break

        if snapshots[-1].t != state.t:
            snapshots.append(Snapshot.of(state))
        logger.info("run stopped (%s) at t=%.6g after %d steps", stop.value, state.t, state.step)
        return Trajectory(
            times=np.asarray(times),
            g=np.asarray(gs),
            h=np.asarray(hs),
            umax=np.asarray(umax),
            vmax=np.asarray(vmax),
            snapshots=tuple(snapshots),
            stop_reason=stop,
            final=state,
            dt=cfg.dt,
            stall_steps=cfg.stall_steps,
        )


# --------------------------------------------------------------------------- #
# Trajectory
# --------------------------------------------------------------------------- #


class StopReason(str, Enum):
    HORIZON = "horizon"
    VANISHED = "vanished"
    LENGTH_CAP = "length_cap"


@dataclass(frozen=True, slots=True)
class Snapshot:
    t: float
    x: FloatArray
    u: FloatArray
    v: FloatArray

    @classmethod
    def of(cls, state: FieldState) -> "Snapshot":
        return cls(state.t, state.x, state.u.copy(), state.v.copy())


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Front time series with sparse field snapshots.

    ``final`` is None for trajectories read back from CSV (fronts only).
    """

    times: FloatArray
    g: FloatArray
    h: FloatArray
    umax: FloatArray | None = None
    vmax: FloatArray | None = None
    snapshots: tuple[Snapshot, ...] = ()
    stop_reason: StopReason = StopReason.HORIZON
    final: FieldState | None = None
    dt: float | None = None
    stall_steps: int = 1000

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def to_json(self) -> dict[str, JSONLike]:
        return {
            "t_end": self.T,
            "g_end": float(self.g[-1]),
            "h_end": float(self.h[-1]),
            "samples": int(self.times.size),
            "snapshots": len(self.snapshots),
            "stop_reason": self.stop_reason.value,
        }


# --------------------------------------------------------------------------- #
# Functional API
# --------------------------------------------------------------------------- #


def _convolve_with_row(
    kernel: Kernel, row: FloatArray, w: FloatArray, state: FieldState, method: ConvMethod
) -> FloatArray:
    out = np.zeros(w.size, dtype=np.float64)
    if state.n_interior <= 0:
        return out
    x = state.x
    ww = w[1:-1] * trapezoid_weights(x)[1:-1]
    out[1:-1] = uniform_convolve(row, ww, method)
    out[0] = float(np.dot(kernel.density(x[0] - x[1:-1]), ww))
    out[-1] = float(np.dot(kernel.density(x[-1] - x[1:-1]), ww))
    return out


def convolve(
    kernel: Kernel, w: FloatArray, state: FieldState, method: ConvMethod = "auto"
) -> FloatArray:
    """Trapezoid quadrature of ∫_g^h J(x−y)w(y)dy at every node."""
    row = sample_row(kernel, state.dx, max(state.n_interior, 1))
    return _convolve_with_row(kernel, row, w, state, method)


def boundary_flux(
    state: FieldState, params: ModelParams, kernels: KernelSet
) -> tuple[float, float]:
    if state.n_interior <= 0:
        return 0.0, 0.0
    x = state.x
    w = trapezoid_weights(x)[1:-1]
    xi = x[1:-1]
    u = state.u[1:-1] * w
    v = state.v[1:-1] * w
    hprime = params.mu * float(
        np.dot(u, kernels.J1.tail_mass(state.h - xi))
        + params.rho_flux * np.dot(v, kernels.J2.tail_mass(state.h - xi))
    )
    gprime = -params.mu * float(
        np.dot(u, kernels.J1.tail_mass(xi - state.g))
        + params.rho_flux * np.dot(v, kernels.J2.tail_mass(xi - state.g))
    )
    return gprime, hprime


def step(
    state: FieldState,
    params: ModelParams,
    G: GFunction,
    kernels: KernelSet,
    config: SimConfig,
) -> FieldState:
    return FreeBoundarySolver(params, G, kernels, config).step(state)


def run(
    params: ModelParams,
    G: GFunction,
    kernels: KernelSet,
    init: InitProfile,
    config: SimConfig,
) -> Trajectory:
    return FreeBoundarySolver(params, G, kernels, config).run(init)


__all__ = [
    "FieldState",
    "FreeBoundarySolver",
    "InitProfile",
    "KernelSet",
    "SimConfig",
    "Snapshot",
    "StopReason",
    "Trajectory",
    "boundary_flux",
    "comparison_bound",
    "convolve",
    "initialize",
    "run",
    "step",
]
