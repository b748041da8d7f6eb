from __future__ import annotations

import math

import numpy as np
import pytest

from mxm_frontlab.analysis import (
    RateLaw,
    Thresholds,
    VerdictKind,
    check_invariants,
    classify,
    fit_linear_speed,
    fit_power,
    fit_tlnt,
    select_law,
    theory_rate,
)
from mxm_frontlab.errors import ValidationError
from mxm_frontlab.kernels import KernelSpec, normalize
from mxm_frontlab.model import Equilibrium, ModelParams, build_monod
from mxm_frontlab.simulator import (
    InitProfile,
    KernelSet,
    SimConfig,
    Snapshot,
    Trajectory,
    run,
)

T = np.linspace(1.0, 100.0, 100)
UNIT = Equilibrium(2.0, 1.0, 1.0)


def _fronts(h: np.ndarray, times: np.ndarray = T, **kw: object) -> Trajectory:
    return Trajectory(times, -h, h, **kw)  # type: ignore[arg-type]


def _snap(level: float, half: float = 300.0) -> Snapshot:
    x = np.linspace(-half, half, 61)
    return Snapshot(100.0, x, np.full(61, level), np.full(61, level))


# --------------------------------------------------------------------------- #
# Rate fits
# --------------------------------------------------------------------------- #


def test_power_fit_recovers_square_exactly() -> None:
    fit = fit_power(_fronts(T**2))
    assert fit.law is RateLaw.POWER
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.coefficient == pytest.approx(1.0, rel=1e-10)
    assert fit.window == (50.0, 100.0)
    assert fit.samples == 51


def test_power_fit_recovers_coefficient_and_exponent() -> None:
    fit = fit_power(_fronts(5.0 * T**1.7), alpha=1.5)
    assert fit.exponent == pytest.approx(1.7, abs=1e-12)
    assert fit.coefficient == pytest.approx(5.0, rel=1e-10)
    assert fit.rms_residual < 1e-12
    # median of h / t^2
    assert fit.sharp_constant_estimate == pytest.approx(5.0 * 75.0**-0.3, rel=1e-12)


def test_tlnt_fit_recovers_coefficient() -> None:
    fit = fit_tlnt(_fronts(3.0 * T * np.log(T)))
    assert fit.coefficient == pytest.approx(3.0, rel=1e-12)
    assert fit.competing is not None and fit.competing.law is RateLaw.POWER


def test_tlnt_fit_is_worse_than_power_on_square() -> None:
    traj = _fronts(T**2)
    assert fit_tlnt(traj).rms_residual > fit_power(traj).rms_residual


def test_linear_speed_recovers_slope() -> None:
    fit = fit_linear_speed(_fronts(4.0 * T))
    assert fit.coefficient == pytest.approx(4.0, rel=1e-14)
    assert fit.super_linear is False


def test_growing_ratio_is_flagged_super_linear() -> None:
    assert fit_linear_speed(_fronts(T**2)).super_linear is True


@pytest.mark.parametrize(
    "window,match",
    [
        ((60.0, 50.0), "t_lo < t_hi"),
        ((10.0, 100.0), "tail-only"),
        ((80.0, 120.0), "leaves the trajectory"),
        ((99.0, 100.0), "degenerate window"),
    ],
)
def test_bad_windows_are_rejected(window: tuple[float, float], match: str) -> None:
    with pytest.raises(ValidationError, match=match):
        fit_power(_fronts(T**2), window)


def test_tlnt_fit_needs_t_above_e() -> None:
    times = np.linspace(0.1, 4.0, 200)
    with pytest.raises(ValidationError, match="t > e"):
        fit_tlnt(_fronts(times**2, times), (2.0, 4.0))


def test_power_fit_needs_positive_h() -> None:
    with pytest.raises(ValidationError, match="h > 0"):
        fit_power(_fronts(np.zeros_like(T)))


@pytest.mark.parametrize(
    "h,law",
    [(T**2, "power"), (2.0 * T * np.log(T), "t_log_t")],
    ids=["square", "tlnt"],
)
def test_select_law(h: np.ndarray, law: str) -> None:
    sel = select_law(_fronts(h))
    assert sel.law == law
    assert sel.to_json()["law"] == law


def test_select_law_reports_ties_as_inconclusive() -> None:
    assert select_law(_fronts(T**2), rms_tie=1.5).law == "inconclusive"


def test_theory_rate() -> None:
    assert theory_rate(1.5).exponent == 2.0
    assert theory_rate(1.25).law is RateLaw.POWER
    assert theory_rate(2.0).law is RateLaw.T_LOG_T
    with pytest.raises(ValidationError, match="finite"):
        theory_rate(3.0)
    with pytest.raises(ValidationError):
        theory_rate(1.0)


def test_rate_fit_predict_and_json() -> None:
    fit = fit_power(_fronts(5.0 * T**1.7))
    np.testing.assert_allclose(fit.predict(T), 5.0 * T**1.7, rtol=1e-10)
    data = fit.to_json()
    assert data["law"] == "power" and data["window"] == [50.0, 100.0]


# --------------------------------------------------------------------------- #
# classify
# --------------------------------------------------------------------------- #


def test_wide_interval_at_equilibrium_is_spreading() -> None:
    traj = _fronts(
        3.0 * T, umax=np.ones_like(T), vmax=np.ones_like(T), snapshots=(_snap(1.02),)
    )
    verdict = classify(traj, equilibrium=UNIT)
    assert verdict.kind is VerdictKind.SPREADING
    assert verdict.evidence["center_deviation"] == pytest.approx(0.02)


def test_stalled_interval_with_tiny_fields_is_vanishing() -> None:
    h = np.minimum(T, 30.0)
    tiny = np.full_like(T, 1e-12)
    traj = _fronts(h, umax=tiny, vmax=tiny)
    verdict = classify(traj, Thresholds(stall_steps=10), UNIT)
    assert verdict.kind is VerdictKind.VANISHING
    assert verdict.evidence["interval_growth"] == 0.0


def test_short_history_is_undecided() -> None:
    h = np.full(5, 30.0)
    tiny = np.full(5, 1e-12)
    traj = _fronts(h, np.linspace(0.0, 1.0, 5), umax=tiny, vmax=tiny)
    assert classify(traj, Thresholds(stall_steps=10)).kind is VerdictKind.UNDECIDED


def test_spreading_needs_center_values_near_equilibrium() -> None:
    traj = _fronts(3.0 * T, snapshots=(_snap(0.5),))
    assert classify(traj, equilibrium=UNIT).kind is VerdictKind.UNDECIDED
    assert classify(traj).kind is VerdictKind.UNDECIDED


def test_tiny_horizon_run_is_undecided() -> None:
    k = normalize(KernelSpec.compact(1.0))
    cfg = SimConfig(dx=0.5, dt=0.05, T=1.0)
    traj = run(ModelParams(), build_monod(2.0), KernelSet(k, k, k), InitProfile(), cfg)
    assert classify(traj, equilibrium=UNIT).kind is VerdictKind.UNDECIDED


# --------------------------------------------------------------------------- #
# check_invariants
# --------------------------------------------------------------------------- #


def test_clean_trajectory_satisfies_invariants() -> None:
    traj = _fronts(
        3.0 * T, umax=np.ones_like(T), vmax=np.ones_like(T), snapshots=(_snap(1.0),)
    )
    rep = check_invariants(traj, UNIT, 1.01)
    assert rep.ok
    assert rep.symmetric is True and rep.comparison_bound is True
    assert rep.details["max_u_ratio"] == 1.0


def test_receding_front_breaks_monotonicity() -> None:
    h = 3.0 * T
    h[40] = h[38]
    rep = check_invariants(_fronts(h))
    assert not rep.monotone_fronts and not rep.ok


def test_negative_snapshot_is_reported() -> None:
    rep = check_invariants(_fronts(3.0 * T, snapshots=(_snap(-1e-3),)))
    assert not rep.nonnegative


def test_asymmetric_fronts_are_reported() -> None:
    traj = Trajectory(T, -T, T + 1.0)
    rep = check_invariants(traj)
    assert rep.symmetric is False
    assert check_invariants(traj, symmetric_data=False).symmetric is None


def test_field_above_comparison_bound_is_reported() -> None:
    big = np.full_like(T, 1.5)
    traj = _fronts(3.0 * T, umax=big, vmax=big)
    rep = check_invariants(traj, UNIT, 1.01)
    assert rep.comparison_bound is False
    assert rep.to_json()["ok"] is False


def test_comparison_bound_skipped_without_equilibrium() -> None:
    rep = check_invariants(_fronts(3.0 * T), Equilibrium(0.5), 1.01)
    assert rep.comparison_bound is None
    assert math.isfinite(float(rep.details["front_asymmetry"]))  # type: ignore[arg-type]
