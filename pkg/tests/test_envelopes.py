"""
Tests for mxm_frontlab.envelopes.

Fronts and profiles are checked against hand evaluations; residual checks
use small sample grids. The lower constant search walks a full grid and is
marked slow.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from mxm_frontlab.analysis import DichotomyVerdict, VerdictKind
from mxm_frontlab.envelopes import (
    EnvelopeCase,
    EnvelopeSpec,
    SampleGrid,
    case_compatibility,
    envelope_compare,
    eval_lower,
    eval_upper,
    front,
    front_curves,
    front_rate,
    kink_points,
    residual_check,
    search_constants,
)
from mxm_frontlab.errors import ValidationError
from mxm_frontlab.kernels import KernelSpec, normalize
from mxm_frontlab.model import ModelParams, build_monod
from mxm_frontlab.simulator import KernelSet, Snapshot, StopReason, Trajectory

E = EnvelopeCase

LOWER = EnvelopeSpec(E.LOWER_J2DOM_ALPHA_IN_1_2, 1.5, 4.0, C1=0.3, C2=2.0, delta1=0.5, delta2=0.5)
LOWER_J1 = EnvelopeSpec(E.LOWER_J1DOM_ALPHA_IN_1_2, 1.5, 4.0, C1=0.3, C2=2.0, delta1=0.5, delta2=0.5)
LOWER_CRIT = EnvelopeSpec(
    E.LOWER_J2DOM_ALPHA_2, 2.0, 10.0,
    C1=0.5, C2=1.0, C3=1.0, lam=3.0, beta=0.4, delta1=0.5, delta2=0.5,
)
UPPER = EnvelopeSpec(E.UPPER_POWER, 1.5, 5.0, C=10.0, u_star=1.0, v_star=1.0)
UPPER_TLNT = EnvelopeSpec(E.UPPER_TLNT, 2.0, 3.0, C=2.0, u_star=1.0, v_star=1.0)
SPECS = [LOWER, LOWER_J1, LOWER_CRIT, UPPER, UPPER_TLNT]

SMALL = SampleGrid(200.0, 8, 16)


def _power_set(alpha: float) -> KernelSet:
    k = normalize(KernelSpec.power_law(alpha))
    return KernelSet(k, k, k)


# --------------------------------------------------------------------------- #
# Specs and fronts
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.case.value)
def test_shipped_specs_are_valid(spec: EnvelopeSpec) -> None:
    assert spec.errors() == []
    assert spec.to_json()["case"] == spec.case.value


def test_case_properties() -> None:
    assert E.UPPER_TLNT.is_upper and E.UPPER_TLNT.critical
    assert E.LOWER_J1DOM_ALPHA_2.is_lower and E.LOWER_J1DOM_ALPHA_2.j1_dominant
    assert not E.UPPER_POWER.critical


@pytest.mark.parametrize(
    "spec,keys",
    [
        (
            EnvelopeSpec(
                E.LOWER_J2DOM_ALPHA_2, 1.5, 0.5,
                C1=1.0, C2=1.0, C3=1.0, lam=3.0, delta1=1.0, delta2=1.0,
            ),
            ["alpha", "sigma"],
        ),
        (EnvelopeSpec(E.UPPER_POWER, 2.5, 1.0, C=1.0, u_star=1.0, v_star=1.0), ["alpha"]),
        (EnvelopeSpec(E.UPPER_POWER, 1.5, 1.0, C=1.0, M=1.0), ["M", "equilibrium"]),
        (
            EnvelopeSpec(
                E.LOWER_J2DOM_ALPHA_2, 2.0, 2.0,
                C1=1.0, C2=1.0, C3=1.0, lam=2.0, beta=0.4, delta1=1.0, delta2=1.0,
            ),
            ["lam"],
        ),
        (EnvelopeSpec(E.LOWER_J2DOM_ALPHA_IN_1_2, 1.5, 1.0, C1=1.0, lam=1.5), ["C2", "delta1", "delta2", "lam"]),
    ],
)
def test_spec_errors_name_offending_constants(spec: EnvelopeSpec, keys: list[str]) -> None:
    assert [k for k, _ in spec.errors()] == keys
    with pytest.raises(ValidationError, match="invalid"):
        spec.validate()


def test_fronts_at_time_zero() -> None:
    assert front(LOWER, 0.0) == 16.0
    assert front(UPPER, 0.0) == 25.0
    assert front(LOWER_CRIT, 0.0) == pytest.approx(0.5 * 10.0 * math.log(10.0))
    assert front(UPPER_TLNT, 0.0) == pytest.approx(3.0 * math.log(3.0))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.case.value)
@pytest.mark.parametrize("t", [0.0, 3.0, 150.0])
def test_front_rate_matches_finite_difference(spec: EnvelopeSpec, t: float) -> None:
    eps = 1e-5 * max(1.0, t)
    fd = (front(spec, t + eps) - front(spec, t - eps)) / (2.0 * eps) if t > 0 else (
        front(spec, eps) - front(spec, 0.0)
    ) / eps
    assert front_rate(spec, t) == pytest.approx(fd, rel=1e-4)


# --------------------------------------------------------------------------- #
# Lower and upper evaluation
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize("spec", [LOWER, LOWER_J1, LOWER_CRIT], ids=lambda s: s.case.value)
def test_lower_profiles_vanish_at_the_front(spec: EnvelopeSpec) -> None:
    h = front(spec, 2.0)
    u, v, g, hh = eval_lower(spec, [-h, h], 2.0)
    assert (g, hh) == (-h, h)
    np.testing.assert_array_equal(u, [0.0, 0.0])
    np.testing.assert_array_equal(v, [0.0, 0.0])


@pytest.mark.parametrize("spec", [LOWER, LOWER_J1, LOWER_CRIT], ids=lambda s: s.case.value)
def test_lower_profiles_are_even_and_bounded_by_eigenvector(spec: EnvelopeSpec) -> None:
    h = front(spec, 5.0)
    x = np.linspace(-h, h, 201)
    u, v, _, _ = eval_lower(spec, x, 5.0)
    np.testing.assert_array_equal(u, u[::-1])
    np.testing.assert_array_equal(v, v[::-1])
    assert np.all((u >= 0.0) & (u <= spec.delta1))
    assert np.all((v >= 0.0) & (v <= spec.delta2))


def test_subcritical_kink_is_continuous() -> None:
    t = 1.0
    (psi1,) = kink_points(LOWER, t)
    h = front(LOWER, t)
    assert psi1 == pytest.approx(h / (2.0 * h**-0.5 + 1.0))
    _, v, _, _ = eval_lower(LOWER, [psi1 * (1 - 1e-12), psi1 * (1 + 1e-12)], t)
    assert v[0] == pytest.approx(v[1], rel=1e-9)


def test_j1_dominant_case_moves_the_kink_to_u() -> None:
    h = front(LOWER, 1.0)
    x = np.linspace(-h, h, 101)
    u2, v2, _, _ = eval_lower(LOWER, x, 1.0)
    u1, v1, _, _ = eval_lower(LOWER_J1, x, 1.0)
    np.testing.assert_array_equal(u1, v2)
    np.testing.assert_array_equal(v1, u2)


def test_critical_cap_is_active_at_the_centre() -> None:
    tau = LOWER_CRIT.sigma
    assert front(LOWER_CRIT, 0.0) - tau**LOWER_CRIT.beta > 0.0
    u, v, _, _ = eval_lower(LOWER_CRIT, [0.0], 0.0)
    assert u[0] == LOWER_CRIT.delta1
    assert v[0] == LOWER_CRIT.delta2


def test_eval_lower_rejects_points_beyond_the_front() -> None:
    h = front(LOWER, 0.0)
    with pytest.raises(ValidationError, match="outside"):
        eval_lower(LOWER, [1.01 * h], 0.0)


def test_eval_lower_and_upper_reject_wrong_case() -> None:
    with pytest.raises(ValidationError, match="not a lower envelope"):
        eval_lower(UPPER, [0.0], 0.0)
    with pytest.raises(ValidationError, match="not an upper envelope"):
        eval_upper(LOWER, 0.0)


def test_eval_upper_is_scaled_equilibrium() -> None:
    spec = EnvelopeSpec(E.UPPER_POWER, 1.5, 5.0, C=10.0, M=1.5, u_star=2.0, v_star=3.0)
    assert eval_upper(spec, 1.0) == (3.0, 4.5, 225.0)
    assert kink_points(spec, 1.0) == ()


def test_upper_fields_balance_the_linear_terms() -> None:
    p = ModelParams(a11=2.0, a12=1.0)
    spec = EnvelopeSpec(E.UPPER_POWER, 1.5, 5.0, C=10.0, M=1.3, u_star=1.0, v_star=2.0)
    ub, vb, _ = eval_upper(spec, 0.0)
    assert -p.a11 * ub + p.a12 * vb == pytest.approx(0.0, abs=1e-15)


# --------------------------------------------------------------------------- #
# Residual check
# --------------------------------------------------------------------------- #


def test_sample_grid_times() -> None:
    times = SampleGrid(100.0, 5, 4).times
    assert times[0] == 0.0 and times.size == 5
    assert times[1] == pytest.approx(0.1)
    assert times[-1] == pytest.approx(100.0)


def test_sample_grid_errors() -> None:
    assert [k for k, _ in SampleGrid(0.0, 1, 1).errors()] == ["T_check", "n_t", "n_x"]


def test_upper_power_envelope_passes() -> None:
    rep = residual_check(UPPER, ModelParams(), build_monod(2.0), _power_set(1.5), SMALL)
    assert rep.passed
    assert rep.samples == 8 * 16
    assert min(rep.pde_residuals) >= 0.0
    assert rep.to_json()["pass"] is True


def test_slow_upper_front_fails_at_the_boundary() -> None:
    slow = EnvelopeSpec(E.UPPER_POWER, 1.5, 5.0, C=0.01, u_star=1.0, v_star=1.0)
    rep = residual_check(slow, ModelParams(), build_monod(2.0), _power_set(1.5), SMALL)
    assert not rep.passed
    assert rep.boundary_residual < 0.0
    assert rep.score == rep.boundary_residual


def test_oversized_lower_speed_fails_at_the_boundary() -> None:
    fast = EnvelopeSpec(
        E.LOWER_J2DOM_ALPHA_IN_1_2, 1.5, 4.0, C1=1e3, C2=1.0, delta1=0.5, delta2=0.5
    )
    rep = residual_check(fast, ModelParams(), build_monod(2.0), _power_set(1.5), SampleGrid(10.0, 3, 4))
    assert not rep.passed
    assert rep.boundary_residual < 0.0
    assert "boundary_t" in rep.worst


def test_residual_check_validates_spec() -> None:
    with pytest.raises(ValidationError):
        residual_check(
            EnvelopeSpec(E.UPPER_POWER, 1.5, 5.0), ModelParams(), build_monod(2.0), _power_set(1.5)
        )


# --------------------------------------------------------------------------- #
# Case compatibility and search
# --------------------------------------------------------------------------- #


def test_compact_kernels_fit_no_case() -> None:
    k = normalize(KernelSpec.compact(1.0))
    ks = KernelSet(k, k, k)
    alpha, reason = case_compatibility(E.UPPER_POWER, ks)
    assert alpha is None and "dominates" in reason
    alpha, reason = case_compatibility(E.LOWER_J2DOM_ALPHA_IN_1_2, ks)
    assert alpha is None and "not power_law" in reason


def test_power_kernel_dominating_compact_fits_upper_case() -> None:
    heavy = normalize(KernelSpec.power_law(1.5))
    light = normalize(KernelSpec.compact(1.0))
    assert case_compatibility(E.UPPER_POWER, KernelSet(light, heavy, light)) == (1.5, "")
    alpha, reason = case_compatibility(E.UPPER_TLNT, KernelSet(light, heavy, light))
    assert alpha is None and "alpha = 2" in reason


@pytest.mark.parametrize(
    "light", [KernelSpec.gaussian(1.0), KernelSpec.laplace(1.0)], ids=["gaussian", "laplace"]
)
def test_upper_case_needs_a_power_law_on_top(light: KernelSpec) -> None:
    heavy = normalize(KernelSpec.power_law(1.5))
    soft = normalize(light)
    assert case_compatibility(E.UPPER_POWER, KernelSet(soft, heavy, soft)) == (1.5, "")
    assert case_compatibility(E.UPPER_POWER, KernelSet(heavy, soft, soft)) == (1.5, "")
    alpha, reason = case_compatibility(E.UPPER_POWER, KernelSet(soft, soft, soft))
    assert alpha is None and "no power-law kernel" in reason


def test_search_finds_upper_power_envelope() -> None:
    p = ModelParams()
    res = search_constants(E.UPPER_POWER, p, build_monod(2.0), _power_set(1.5))
    assert res.found and res.spec is not None and res.report is not None
    assert res.report.passed
    assert front(res.spec, 0.0) >= p.h0
    assert res.spec.u_star == pytest.approx(1.0) and res.spec.M == 1.01
    assert res.to_json()["found"] is True


def test_search_rejects_mismatched_case() -> None:
    res = search_constants(E.LOWER_J2DOM_ALPHA_2, ModelParams(), build_monod(2.0), _power_set(1.5))
    assert not res.found
    assert res.tried == 0
    assert "alpha = 2" in res.reason


def test_search_needs_positive_equilibrium() -> None:
    res = search_constants(E.UPPER_POWER, ModelParams(), build_monod(0.8), _power_set(1.5))
    assert not res.found
    assert "no envelope" in res.reason


@pytest.mark.slow
def test_search_finds_lower_envelope() -> None:
    res = search_constants(
        E.LOWER_J2DOM_ALPHA_IN_1_2, ModelParams(), build_monod(2.0), _power_set(1.5)
    )
    assert res.found and res.spec is not None
    assert res.spec.lam == 2.0


# --------------------------------------------------------------------------- #
# Comparison with a trajectory
# --------------------------------------------------------------------------- #


def _trajectory(
    h: np.ndarray, level: float, stop: StopReason = StopReason.HORIZON
) -> Trajectory:
    times = np.linspace(0.0, 10.0, 11)
    narrow = np.linspace(-2.0, 2.0, 9)
    wide = np.linspace(-10.0, 10.0, 81)
    snaps = (
        Snapshot(0.0, narrow, np.full(9, level), np.full(9, level)),
        Snapshot(1.0, wide, np.full(81, level), np.full(81, level)),
    )
    return Trajectory(times, -h, h, snapshots=snaps, stop_reason=stop)


ANCHORED = EnvelopeSpec(E.LOWER_J2DOM_ALPHA_IN_1_2, 1.5, 2.0, C1=0.1, C2=1.0, delta1=0.5, delta2=0.5)


def test_front_curves_shift_lower_envelope() -> None:
    t, lo, hi = front_curves(ANCHORED, None, [0.0, 1.0, 3.0], t0=1.0)
    assert np.isnan(lo[0])
    assert lo[1] == 4.0
    assert lo[2] == pytest.approx(2.2**2)
    assert np.all(np.isnan(hi))
    np.testing.assert_array_equal(t, [0.0, 1.0, 3.0])


def test_sandwiched_trajectory_passes() -> None:
    traj = _trajectory(10.0 + 5.0 * np.linspace(0.0, 10.0, 11), 1.0)
    rep = envelope_compare(traj, ANCHORED, UPPER)
    assert rep
    assert rep.t0 == 1.0
    assert rep.lower_margin == pytest.approx(11.0)
    assert rep.upper_ok is True
    assert rep.to_json()["ok"] is True


def test_stalled_front_fails_lower_comparison() -> None:
    fast = EnvelopeSpec(E.LOWER_J2DOM_ALPHA_IN_1_2, 1.5, 2.0, C1=1.0, C2=1.0, delta1=0.5, delta2=0.5)
    rep = envelope_compare(_trajectory(np.full(11, 5.0), 1.0), fast, None)
    assert not rep
    assert rep.lower_ok is False and rep.upper_ok is None


def test_anchoring_failure_is_reported() -> None:
    rep = envelope_compare(_trajectory(np.full(11, 20.0), 0.1), ANCHORED, None)
    assert not rep
    assert "anchoring failed" in rep.reason


@pytest.mark.parametrize(
    "traj,verdict",
    [
        (_trajectory(np.full(11, 20.0), 1.0, StopReason.VANISHED), None),
        (_trajectory(np.full(11, 20.0), 1.0), DichotomyVerdict(VerdictKind.VANISHING)),
    ],
    ids=["vanished", "vanishing-verdict"],
)
def test_non_spreading_trajectories_are_refused(
    traj: Trajectory, verdict: DichotomyVerdict | None
) -> None:
    rep = envelope_compare(traj, ANCHORED, UPPER, verdict=verdict)
    assert not rep
    assert "not spreading" in rep.reason


def test_compare_needs_an_envelope() -> None:
    with pytest.raises(ValidationError):
        envelope_compare(_trajectory(np.full(11, 20.0), 1.0), None, None)
