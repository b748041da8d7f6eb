"""
Tests for mxm_frontlab.simulator.

Quadrature checks use hand-built states and scipy quadrature as the oracle;
full runs are kept small except where marked slow.
"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest
from scipy.integrate import quad

from mxm_frontlab.errors import SolverAbort, ValidationError
from mxm_frontlab.kernels import Kernel, KernelSpec, normalize
from mxm_frontlab.model import Equilibrium, GFunction, ModelParams, build_monod
from mxm_frontlab.simulator import (
    FieldState,
    FreeBoundarySolver,
    InitProfile,
    KernelSet,
    SimConfig,
    StopReason,
    Trajectory,
    boundary_flux,
    comparison_bound,
    convolve,
    initialize,
    run,
    step,
)
from mxm_frontlab.types import FloatArray


def _same(spec: KernelSpec) -> KernelSet:
    k = normalize(spec)
    return KernelSet(k, k, k)


type Field = Callable[[FloatArray], FloatArray]


def _zero(x: FloatArray) -> FloatArray:
    return np.zeros_like(x)


def _state(g: float, h: float, dx: float, fu: Field, fv: Field = _zero) -> FieldState:
    k_lo = math.ceil(g / dx + 1e-9)
    k_hi = math.floor(h / dx - 1e-9)
    inner = np.arange(k_lo, k_hi + 1, dtype=np.float64) * dx
    u = np.concatenate([[0.0], fu(inner), [0.0]])
    v = np.concatenate([[0.0], fv(inner), [0.0]])
    return FieldState(0, 0.0, g, h, dx, k_lo, u, v)


# --------------------------------------------------------------------------- #
# SimConfig
# --------------------------------------------------------------------------- #


def test_stability_bound_is_checked_against_params(unit_params: ModelParams) -> None:
    errs = SimConfig(dt=0.6).errors(unit_params)
    assert [k for k, _ in errs] == ["dt", "dt"]
    assert "dt·(d1 + a11) < 1" in errs[0][1]


def test_config_errors_are_collected() -> None:
    errs = dict(SimConfig(dx=-1.0, T=0.0, stall_steps=0, conv_method="fast").errors())  # type: ignore[arg-type]
    assert set(errs) == {"dx", "T", "stall_steps", "conv_method"}


def test_dx_may_not_exceed_h0() -> None:
    errs = SimConfig(dx=5.0).errors(ModelParams(h0=2.0))
    assert ("dx", "must not exceed h0 = 2.0") in errs


def test_comparison_bound_has_margin() -> None:
    eq = Equilibrium(2.0, 1.0, 0.5)
    assert comparison_bound(eq, 1.0, 1.0) == pytest.approx(2.02)
    assert comparison_bound(eq, 0.1, 0.1) == pytest.approx(1.01)
    with pytest.raises(ValidationError):
        comparison_bound(Equilibrium(0.5), 1.0, 1.0)


# --------------------------------------------------------------------------- #
# initialize
# --------------------------------------------------------------------------- #


def test_default_profile_grid(monod2: GFunction) -> None:
    p = ModelParams(h0=10.0)
    state = initialize(p, monod2, InitProfile(), SimConfig(dx=0.1))
    assert state.u.size == 201
    assert state.x[0] == -10.0 and state.x[-1] == 10.0
    assert state.u[0] == state.u[-1] == 0.0
    assert state.v[0] == state.v[-1] == 0.0
    assert np.all(state.u[1:-1] > 0.0)
    assert state.u[100] == pytest.approx(1.0)


def test_asymmetric_initial_data_is_accepted(monod2: GFunction) -> None:
    p = ModelParams(h0=4.0)
    init = InitProfile(u0=lambda x: (1.0 - (x / 4.0) ** 2) * (1.0 + 0.5 * x / 4.0))
    state = initialize(p, monod2, init, SimConfig(dx=0.5))
    assert state.u[1] != state.u[-2]


def test_zero_initial_data_is_rejected(monod2: GFunction) -> None:
    init = InitProfile(u0=lambda x: np.zeros_like(x))
    with pytest.raises(ValidationError) as ei:
        initialize(ModelParams(h0=4.0), monod2, init, SimConfig(dx=0.5))
    assert ei.value.errors == [("init", "u0 and v0 must be positive on (-h0, h0)")]


def test_initial_data_must_vanish_at_the_fronts(monod2: GFunction) -> None:
    init = InitProfile(v0=lambda x: np.ones_like(x))
    with pytest.raises(ValidationError, match="rejected"):
        initialize(ModelParams(h0=4.0), monod2, init, SimConfig(dx=0.5))


# --------------------------------------------------------------------------- #
# convolve
# --------------------------------------------------------------------------- #


def test_convolve_zero_field_is_zero() -> None:
    k = normalize(KernelSpec.power_law(1.5))
    state = _state(-3.0, 3.0, 0.25, lambda x: np.zeros_like(x))
    assert np.all(convolve(k, state.u, state) == 0.0)


def test_convolve_unit_field_recovers_full_mass() -> None:
    k = normalize(KernelSpec.compact(1.0))
    state = _state(-3.0, 3.0, 0.1, lambda x: np.ones_like(x))
    out = convolve(k, state.u, state)
    centre = int(np.argmin(np.abs(state.x)))
    assert out[centre] == pytest.approx(1.0, abs=1e-12)


def _conv_oracle(kernel: Kernel, x: float, g: float, h: float) -> float:
    val, _ = quad(
        lambda y: float(kernel.density(x - y)) * (y - g) * (h - y),
        g,
        h,
        epsabs=1e-13,
        limit=200,
    )
    return val


@pytest.mark.parametrize("method", ["direct", "fft"])
def test_convolve_is_second_order_against_quadrature(method: str) -> None:
    k = normalize(KernelSpec.gaussian(1.0))
    g, h = -1.3, 1.7
    errs: list[float] = []
    for dx in (0.1, 0.05, 0.025):
        state = _state(g, h, dx, lambda x: (x - g) * (h - x))
        out = convolve(k, state.u, state, method)  # type: ignore[arg-type]
        x = state.x
        err = max(abs(out[i] - _conv_oracle(k, float(x[i]), g, h)) for i in range(x.size))
        assert err <= dx * dx
        errs.append(err)
    assert errs[2] < errs[0] / 4.0


def test_solver_convolve_matches_functional_form(unit_params: ModelParams, monod2: GFunction) -> None:
    ks = _same(KernelSpec.power_law(2.0))
    state = _state(-4.2, 3.9, 0.25, lambda x: np.cos(x / 3.0) ** 2)
    solver = FreeBoundarySolver(unit_params, monod2, ks, SimConfig(dx=0.25))
    np.testing.assert_allclose(
        solver.convolve(ks.J1, state.u, state), convolve(ks.J1, state.u, state), rtol=1e-13
    )


# --------------------------------------------------------------------------- #
# boundary_flux
# --------------------------------------------------------------------------- #


def test_flux_of_zero_state_is_zero(unit_params: ModelParams, power15: KernelSet) -> None:
    state = _state(-2.0, 2.0, 0.25, lambda x: np.zeros_like(x))
    assert boundary_flux(state, unit_params, power15) == (0.0, 0.0)


def test_flux_is_symmetric_for_symmetric_state(
    unit_params: ModelParams, monod2: GFunction, power15: KernelSet
) -> None:
    state = initialize(unit_params, monod2, InitProfile(), SimConfig())
    gprime, hprime = boundary_flux(state, unit_params, power15)
    assert hprime > 0.0
    assert gprime == pytest.approx(-hprime, rel=1e-12)


def test_flux_of_single_node_bump_matches_tail_integral() -> None:
    p = ModelParams(mu=2.5, rho_flux=0.5)
    k = normalize(KernelSpec.power_law(1.5))
    ks = KernelSet(k, k, k)
    dx, x0, h = 0.25, 0.5, 2.1
    state = _state(-2.1, h, dx, lambda x: np.where(np.isclose(x, x0), 3.0, 0.0))
    _, hprime = boundary_flux(state, p, ks)
    inner, _ = quad(lambda y: float(k.density(y)), 0.0, h - x0, epsabs=1e-14, limit=400)
    tail = 0.5 - inner
    assert hprime == pytest.approx(p.mu * 3.0 * dx * tail, rel=1e-8)


def test_flux_weights_v_by_rho() -> None:
    k = normalize(KernelSpec.laplace(1.0))
    ks = KernelSet(k, k, k)
    state_u = _state(-2.0, 2.0, 0.25, lambda x: 1.0 - (x / 2.0) ** 2)
    state_v = _state(-2.0, 2.0, 0.25, lambda x: np.zeros_like(x), lambda x: 1.0 - (x / 2.0) ** 2)
    p = ModelParams(rho_flux=0.3)
    _, hu = boundary_flux(state_u, p, ks)
    _, hv = boundary_flux(state_v, p, ks)
    assert hv == pytest.approx(0.3 * hu, rel=1e-14)


# --------------------------------------------------------------------------- #
# step
# --------------------------------------------------------------------------- #


def test_zero_state_stays_put(unit_params: ModelParams, monod2: GFunction, triangle: KernelSet) -> None:
    state = _state(-3.0, 3.0, 0.25, lambda x: np.zeros_like(x))
    nxt = step(state, unit_params, monod2, triangle, SimConfig(dx=0.25))
    assert nxt.g == -3.0 and nxt.h == 3.0
    assert np.all(nxt.u == 0.0) and np.all(nxt.v == 0.0)
    assert nxt.step == 1


def test_one_step_keeps_positivity_and_moves_fronts(
    unit_params: ModelParams, monod2: GFunction, power15: KernelSet
) -> None:
    cfg = SimConfig()
    state = initialize(unit_params, monod2, InitProfile(), cfg)
    nxt = step(state, unit_params, monod2, power15, cfg)
    assert nxt.h > state.h and nxt.g < state.g
    assert np.all(nxt.u >= 0.0) and np.all(nxt.v >= 0.0)
    assert nxt.u[0] == nxt.u[-1] == 0.0


def test_front_crossing_a_grid_multiple_adds_zero_node(monod2: GFunction) -> None:
    p = ModelParams(h0=2.0)
    ks = _same(KernelSpec.power_law(1.5))
    cfg = SimConfig(dx=0.5, dt=0.05)
    state = initialize(p, monod2, InitProfile(), cfg)
    nxt = step(state, p, monod2, ks, cfg)
    assert nxt.h > 2.0
    # x = 2.0 was the old front; it is now an interior node holding 0
    assert nxt.u.size == state.u.size + 2
    assert nxt.x[-2] == 2.0 and nxt.u[-2] == 0.0
    assert nxt.x[1] == -2.0 and nxt.u[1] == 0.0


def test_euler_step_is_first_order(monod2: GFunction) -> None:
    p = ModelParams(h0=5.1)
    ks = _same(KernelSpec.gaussian(1.0))

    def gap(dt: float) -> float:
        full_cfg = SimConfig(dx=0.25, dt=dt)
        half_cfg = SimConfig(dx=0.25, dt=dt / 2.0)
        start = initialize(p, monod2, InitProfile(), full_cfg)
        one = FreeBoundarySolver(p, monod2, ks, full_cfg).step(start)
        half = FreeBoundarySolver(p, monod2, ks, half_cfg)
        two = half.step(half.step(start))
        assert one.u.size == two.u.size
        return float(np.max(np.abs(one.u - two.u)))

    ratio = gap(0.04) / gap(0.02)
    assert 3.0 < ratio < 5.0


def test_negativity_beyond_roundoff_aborts(monod2: GFunction) -> None:
    p = ModelParams(h0=3.0)
    ks = _same(KernelSpec.compact(1.0))
    cfg = SimConfig(dx=0.25, dt=0.02)
    state = _state(-3.0, 3.0, 0.25, lambda x: np.where(x > 0, -1.0, 1.0) * 1e-3)
    with pytest.raises(SolverAbort) as ei:
        step(state, p, monod2, ks, cfg)
    assert ei.value.diagnostics["min_value"] < 0  # type: ignore[operator]


# --------------------------------------------------------------------------- #
# run
# --------------------------------------------------------------------------- #


def test_subcritical_run_vanishes_early() -> None:
    # R0 = 1·3.2/(2·2) = 0.8
    p = ModelParams(a11=2.0, a22=2.0, h0=2.0)
    G = build_monod(3.2)
    cfg = SimConfig(dx=0.25, dt=0.1, T=600.0, stall_steps=100, snapshot_every=1000)
    traj = run(p, G, _same(KernelSpec.compact(1.0)), InitProfile(), cfg)
    assert traj.stop_reason is StopReason.VANISHED
    assert traj.T < 600.0
    assert max(traj.umax[-1], traj.vmax[-1]) < 1e-8  # type: ignore[index]


@pytest.fixture(scope="module")
def spreading_run() -> tuple[Trajectory, float]:
    p = ModelParams(h0=20.0)
    G = build_monod(2.0)
    ks = _same(KernelSpec.power_law(1.5))
    cfg = SimConfig(dx=0.5, dt=0.05, T=20.0, snapshot_every=100)
    return run(p, G, ks, InitProfile(), cfg), comparison_bound(Equilibrium(2.0, 1.0, 1.0), 1.0, 1.0)


def test_supercritical_run_spreads(spreading_run: tuple[Trajectory, float]) -> None:
    traj, _ = spreading_run
    assert traj.stop_reason is StopReason.HORIZON
    assert traj.T == pytest.approx(20.0)
    assert traj.h[-1] - traj.g[-1] > 60.0


def test_fronts_are_monotone(spreading_run: tuple[Trajectory, float]) -> None:
    traj, _ = spreading_run
    assert np.all(np.diff(traj.h) >= 0.0)
    assert np.all(np.diff(traj.g) <= 0.0)
    assert traj.h[0] == 20.0 and traj.g[0] == -20.0


def test_symmetry_is_preserved(spreading_run: tuple[Trajectory, float]) -> None:
    traj, _ = spreading_run
    assert np.all(np.abs(traj.h + traj.g) <= 1e-10 * (1.0 + np.abs(traj.h)))
    for snap in traj.snapshots:
        np.testing.assert_allclose(snap.u, snap.u[::-1], atol=1e-10)
        np.testing.assert_allclose(snap.x, -snap.x[::-1], atol=1e-10 * (1.0 + snap.x[-1]))


def test_fields_stay_between_zero_and_comparison_bound(
    spreading_run: tuple[Trajectory, float],
) -> None:
    traj, M = spreading_run
    assert traj.umax is not None and traj.vmax is not None
    assert np.all(traj.umax <= M) and np.all(traj.vmax <= M)
    for snap in traj.snapshots:
        assert np.all(snap.u >= 0.0) and np.all(snap.v >= 0.0)
        assert snap.u[0] == snap.u[-1] == 0.0


def test_snapshots_include_start_and_end(spreading_run: tuple[Trajectory, float]) -> None:
    traj, _ = spreading_run
    assert traj.snapshots[0].t == 0.0
    assert traj.snapshots[-1].t == traj.T
    assert len(traj.snapshots) == 5  # t = 0, 5, 10, 15, 20


def test_replay_is_bit_identical(monod2: GFunction) -> None:
    p = ModelParams(h0=5.0)
    ks = _same(KernelSpec.power_law(1.5))
    cfg = SimConfig(dx=0.5, dt=0.05, T=2.0)
    a = run(p, monod2, ks, InitProfile(), cfg)
    b = run(p, monod2, ks, InitProfile(), cfg)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.g, b.g)
    assert np.array_equal(a.snapshots[-1].u, b.snapshots[-1].u)


def test_length_cap_stops_run(monod2: GFunction) -> None:
    p = ModelParams(h0=5.0, mu=5.0)
    cfg = SimConfig(dx=0.5, dt=0.05, T=50.0, max_length=14.0)
    traj = run(p, monod2, _same(KernelSpec.power_law(1.5)), InitProfile(), cfg)
    assert traj.stop_reason is StopReason.LENGTH_CAP
    assert traj.h[-1] - traj.g[-1] > 14.0


@pytest.mark.slow
def test_refinement_increments_shrink(monod2: GFunction) -> None:
    p = ModelParams(h0=10.0)
    ks = _same(KernelSpec.gaussian(1.0))
    h_end = []
    for dx, dt in ((0.5, 0.04), (0.25, 0.02), (0.125, 0.01)):
        traj = run(p, monod2, ks, InitProfile(), SimConfig(dx=dx, dt=dt, T=2.0))
        h_end.append(float(traj.h[-1]))
    assert abs(h_end[2] - h_end[1]) < abs(h_end[1] - h_end[0])
