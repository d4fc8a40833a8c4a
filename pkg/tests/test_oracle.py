"""Lattice oracles and constructive attainment of identified-set values."""

from __future__ import annotations

import numpy as np
import pytest

from did_sens import (
    AnticipationIncrementBounds,
    DgpSpec,
    PretrendShareBounds,
    ReducedForm,
    RelativeMagnitude,
    TreatmentShareBounds,
    construct_attaining_dgp,
    identified_set_from_effect_shares,
    identified_set_from_increments,
    identified_set_from_pretrend_shares,
    lattice_extremes_effect_shares,
    lattice_extremes_increments,
    lattice_extremes_pretrend_shares,
    verify_dgp,
)
from did_sens.oracle import (
    PARAM_EFFECT_SHARES,
    PARAM_INCREMENTS,
    PARAM_PRETREND_SHARES,
)
from conftest import (
    random_feasible_treatment_shares,
    random_gamma,
    random_increments,
    random_magnitude,
    random_pretrend_shares,
)


def assert_close_interval(a, b, rel=1e-12):
    scale = max(1.0, abs(a.lb), abs(a.ub))
    assert abs(a.lb - b.lb) <= rel * scale
    assert abs(a.ub - b.ub) <= rel * scale


# ---------------------------------------------------------------------------
# Lattice agreement
# ---------------------------------------------------------------------------

def test_lattice_matches_closed_form_reference(ref_gamma):
    closed = identified_set_from_pretrend_shares(
        ref_gamma, PretrendShareBounds(0.0, 0.0), RelativeMagnitude(1.0)
    )
    lattice = lattice_extremes_pretrend_shares(
        ref_gamma, PretrendShareBounds(0.0, 0.0), RelativeMagnitude(1.0), grid_density=11
    )
    assert lattice.lb == pytest.approx(-0.0783, abs=1e-15)
    assert lattice.ub == pytest.approx(0.0263, abs=1e-15)
    assert_close_interval(closed, lattice)


def test_lattice_matches_closed_form_randomly():
    rng = np.random.default_rng(51)
    for _ in range(60):
        n = int(rng.integers(1, 4))
        gamma = random_gamma(rng, n)
        mag = random_magnitude(rng)

        inc = random_increments(rng, n)
        assert_close_interval(
            identified_set_from_increments(gamma, inc, mag),
            lattice_extremes_increments(gamma, inc, mag, grid_density=9),
        )

        sh = random_pretrend_shares(rng)
        assert_close_interval(
            identified_set_from_pretrend_shares(gamma, sh, mag),
            lattice_extremes_pretrend_shares(gamma, sh, mag, grid_density=9),
        )

        ks = random_feasible_treatment_shares(rng, n, mag.m)
        assert_close_interval(
            identified_set_from_effect_shares(gamma, ks, mag),
            lattice_extremes_effect_shares(gamma, ks, mag, grid_density=9),
        )


def test_lattice_singleton_boxes_reproduce_points():
    rng = np.random.default_rng(52)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        gamma = random_gamma(rng, n)
        point = rng.uniform(-1, 1, size=n)
        inc = AnticipationIncrementBounds(tuple(point), tuple(point))
        itv = lattice_extremes_increments(gamma, inc, RelativeMagnitude(0.0), grid_density=5)
        expected = gamma.theta1 + point.sum()
        assert itv.lb == pytest.approx(expected, rel=1e-14)
        assert itv.ub == pytest.approx(expected, rel=1e-14)


def test_lattice_density_two_is_vertex_exact(ref_gamma):
    inc = AnticipationIncrementBounds((-0.1, 0.0), (0.2, 0.3))
    mag = RelativeMagnitude(1.3)
    fine = lattice_extremes_increments(ref_gamma, inc, mag, grid_density=31)
    coarse = lattice_extremes_increments(ref_gamma, inc, mag, grid_density=2)
    assert coarse.lb == fine.lb and coarse.ub == fine.ub


# ---------------------------------------------------------------------------
# Constructive attainment
# ---------------------------------------------------------------------------

def test_construct_trivial_point_case(ref_gamma):
    inc = AnticipationIncrementBounds.zero(2)
    mag = RelativeMagnitude(0.0)
    spec = construct_attaining_dgp(
        ref_gamma, ref_gamma.theta1, PARAM_INCREMENTS, inc, mag
    )
    ok, reasons = verify_dgp(spec, ref_gamma, inc, mag)
    assert ok, reasons
    # Violations are accumulated into mean paths and differenced back out,
    # so they match the pre-trends to rounding, not bitwise.
    assert spec.violations_pre() == pytest.approx(ref_gamma.pre_trends, abs=1e-14)
    assert spec.anticipation_levels() == (0.0,) * 3
    assert spec.violation_post() == 0.0


def test_construct_hits_recorded_endpoints(ref_gamma):
    inc = AnticipationIncrementBounds((-0.02, -0.01), (0.05, 0.04))
    mag = RelativeMagnitude(0.8)
    itv = identified_set_from_increments(ref_gamma, inc, mag)
    for tau, witness in ((itv.lb, itv.lb_witness), (itv.ub, itv.ub_witness)):
        spec = construct_attaining_dgp(ref_gamma, tau, PARAM_INCREMENTS, inc, mag)
        ok, reasons = verify_dgp(spec, ref_gamma, inc, mag)
        assert ok, reasons
        assert spec.witness["r"] == witness.r


def test_construct_rejects_outside_targets(ref_gamma):
    inc = AnticipationIncrementBounds.zero(2)
    mag = RelativeMagnitude(0.5)
    itv = identified_set_from_increments(ref_gamma, inc, mag)
    with pytest.raises(ValueError, match="outside"):
        construct_attaining_dgp(ref_gamma, itv.ub + 0.1, PARAM_INCREMENTS, inc, mag)


@pytest.mark.parametrize("param", [PARAM_INCREMENTS, PARAM_PRETREND_SHARES, PARAM_EFFECT_SHARES])
def test_sharpness_round_trip_with_endpoints(param):
    rng = np.random.default_rng(53)
    for _ in range(15):
        n = int(rng.integers(1, 4))
        gamma = random_gamma(rng, n)
        mag = random_magnitude(rng)
        if param == PARAM_INCREMENTS:
            bounds = random_increments(rng, n)
            itv = identified_set_from_increments(gamma, bounds, mag)
        elif param == PARAM_PRETREND_SHARES:
            bounds = random_pretrend_shares(rng)
            itv = identified_set_from_pretrend_shares(gamma, bounds, mag)
        else:
            bounds = random_feasible_treatment_shares(rng, n, mag.m)
            itv = identified_set_from_effect_shares(gamma, bounds, mag)
        for tau in np.linspace(itv.lb, itv.ub, 20):
            spec = construct_attaining_dgp(gamma, float(tau), param, bounds, mag)
            ok, reasons = verify_dgp(spec, gamma, bounds, mag)
            assert ok, (param, reasons, float(tau))


def test_effect_share_zero_target_forces_zero_levels():
    gamma = ReducedForm((0.2, -0.1), 0.0)
    shares = TreatmentShareBounds.constant(-0.1, 0.2, 2)
    mag = RelativeMagnitude(0.5)
    itv = identified_set_from_effect_shares(gamma, shares, mag)
    assert itv.contains(0.0)
    spec = construct_attaining_dgp(gamma, 0.0, PARAM_EFFECT_SHARES, shares, mag)
    ok, reasons = verify_dgp(spec, gamma, shares, mag)
    assert ok, reasons
    assert all(abs(v) < 1e-12 for v in spec.anticipation_levels())


# ---------------------------------------------------------------------------
# Verifier failure reporting
# ---------------------------------------------------------------------------

def _valid_spec(ref_gamma):
    inc = AnticipationIncrementBounds((-0.02, -0.01), (0.05, 0.04))
    mag = RelativeMagnitude(0.8)
    itv = identified_set_from_increments(ref_gamma, inc, mag)
    tau = 0.5 * (itv.lb + itv.ub)
    return construct_attaining_dgp(ref_gamma, tau, PARAM_INCREMENTS, inc, mag), inc, mag


def test_verify_flags_magnitude_cap_violation(ref_gamma):
    spec, inc, mag = _valid_spec(ref_gamma)
    cf = list(spec.counterfactual_means)
    cf[-1] += 5.0  # inflate the post-period violation far past the cap
    broken = DgpSpec(
        spec.parameterization, spec.tau, spec.treated_means, tuple(cf),
        spec.untreated_trends, spec.witness,
    )
    ok, reasons = verify_dgp(broken, ref_gamma, inc, mag)
    assert not ok
    assert any("magnitude cap" in r for r in reasons)


def test_verify_flags_nonzero_initial_level(ref_gamma):
    spec, inc, mag = _valid_spec(ref_gamma)
    cf = list(spec.counterfactual_means)
    cf[0] += 0.1  # first-period anticipation level becomes -0.1
    broken = DgpSpec(
        spec.parameterization, spec.tau, spec.treated_means, tuple(cf),
        spec.untreated_trends, spec.witness,
    )
    ok, reasons = verify_dgp(broken, ref_gamma, inc, mag)
    assert not ok
    assert any("first period" in r for r in reasons)


def test_verify_flags_moment_mismatch(ref_gamma):
    spec, inc, mag = _valid_spec(ref_gamma)
    other = ReducedForm((0.5, 0.5), 0.5)
    ok, reasons = verify_dgp(spec, other, inc, mag)
    assert not ok
    assert any("pre-trend" in r or "post contrast" in r for r in reasons)


# ---------------------------------------------------------------------------
# Non-identification sanity
# ---------------------------------------------------------------------------

def test_unrestricted_bounds_blow_up(ref_gamma):
    big = 1e6
    inc = AnticipationIncrementBounds((-big, -big), (big, big))
    itv = identified_set_from_increments(ref_gamma, inc, RelativeMagnitude(1.0))
    assert itv.width > big
