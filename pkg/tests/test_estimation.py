"""Panel ingestion, reduced-form moments, and bootstrap draws."""

from __future__ import annotations

import numpy as np
import pytest

from did_sens import (
    DegenerateShareError,
    PanelDataset,
    PanelFormatError,
    bayesian_bootstrap,
    cluster_bootstrap,
    compute_reduced_form,
    posterior_summary,
)
from did_sens.estimation import read_draws_csv, write_draws_binary, write_draws_csv
from conftest import synthetic_panel


def toy_panel() -> PanelDataset:
    # Treated unit outcomes (0, 1, 3); untreated (0, 0, 1).
    return PanelDataset(
        unit_ids=("t", "t", "t", "u", "u", "u"),
        cluster_ids=("a", "a", "a", "b", "b", "b"),
        times=(0, 1, 2, 0, 1, 2),
        y=(0.0, 1.0, 3.0, 0.0, 0.0, 1.0),
        treated=(1, 1, 1, 0, 0, 0),
    )


# ---------------------------------------------------------------------------
# Reduced form
# ---------------------------------------------------------------------------

def test_toy_reduced_form():
    gamma = compute_reduced_form(toy_panel())
    assert gamma.pre_trends == (1.0,)
    assert gamma.theta1 == 1.0


def test_identical_trajectories_give_zero():
    data = PanelDataset(
        unit_ids=("t", "t", "t", "u", "u", "u"),
        cluster_ids=("a", "a", "a", "b", "b", "b"),
        times=(0, 1, 2, 0, 1, 2),
        y=(0.5, 1.5, 2.5, 0.5, 1.5, 2.5),
        treated=(1, 1, 1, 0, 0, 0),
    )
    gamma = compute_reduced_form(data)
    assert gamma.pre_trends == (0.0,)
    assert gamma.theta1 == 0.0


def test_weights_mapping_and_sequence_agree():
    data = toy_panel()
    by_map = compute_reduced_form(data, weights={"a": 2.0, "b": 1.0})
    by_seq = compute_reduced_form(data, weights=[2.0, 1.0])
    assert by_map == by_seq
    # With one unit per cluster the contrasts are weight-invariant.
    assert by_map == compute_reduced_form(data)


def test_weights_validation():
    data = toy_panel()
    with pytest.raises(ValueError):
        compute_reduced_form(data, weights=[1.0])
    with pytest.raises(ValueError):
        compute_reduced_form(data, weights=[-1.0, 1.0])
    with pytest.raises(ValueError):
        compute_reduced_form(data, weights={"a": 1.0})
    with pytest.raises(DegenerateShareError):
        compute_reduced_form(data, weights=[1.0, 0.0])  # untreated mass vanishes


def test_synthetic_recovery_within_three_posterior_sds():
    rng = np.random.default_rng(42)
    truth_pre = (-0.05, -0.02)
    truth_theta = -0.03
    data = synthetic_panel(rng, n_clusters=1000, units_per_cluster=2,
                           pre_trends=truth_pre, theta1=truth_theta)
    gamma = compute_reduced_form(data)
    draws = bayesian_bootstrap(data, 400, seed=9)
    sds = draws.draws.std(axis=0)
    truth = np.array([*truth_pre, truth_theta])
    got = np.array([*gamma.pre_trends, gamma.theta1])
    assert np.all(np.abs(got - truth) <= 3.0 * sds)


# ---------------------------------------------------------------------------
# Validation failures
# ---------------------------------------------------------------------------

def test_duplicate_unit_time_rejected():
    with pytest.raises(PanelFormatError, match="duplicate"):
        PanelDataset(("t", "t"), ("a", "a"), (0, 0), (1.0, 2.0), (1, 1))


def test_treated_flip_rejected():
    with pytest.raises(PanelFormatError, match="flips"):
        PanelDataset(("t", "t"), ("a", "a"), (0, 1), (1.0, 2.0), (1, 0))


def test_cluster_flip_rejected():
    with pytest.raises(PanelFormatError, match="cluster"):
        PanelDataset(("t", "t"), ("a", "b"), (0, 1), (1.0, 2.0), (1, 1))


def test_single_group_rejected():
    with pytest.raises(PanelFormatError, match="both treated and untreated"):
        PanelDataset(("t", "t", "t"), ("a",) * 3, (0, 1, 2), (0.0, 1.0, 2.0), (1, 1, 1))


def test_unbalanced_panel_rejected():
    data = PanelDataset(
        unit_ids=("t", "t", "t", "u", "u"),
        cluster_ids=("a",) * 3 + ("b",) * 2,
        times=(0, 1, 2, 0, 2),
        y=(0.0, 1.0, 3.0, 0.0, 1.0),
        treated=(1, 1, 1, 0, 0),
    )
    with pytest.raises(PanelFormatError, match="unbalanced"):
        compute_reduced_form(data)


def test_nonconsecutive_periods_rejected():
    data = PanelDataset(
        unit_ids=("t",) * 3 + ("u",) * 3,
        cluster_ids=("a",) * 3 + ("b",) * 3,
        times=(0, 1, 3, 0, 1, 3),
        y=(0.0, 1.0, 3.0, 0.0, 0.0, 1.0),
        treated=(1, 1, 1, 0, 0, 0),
    )
    with pytest.raises(PanelFormatError, match="consecutive"):
        compute_reduced_form(data)


def test_too_few_periods_rejected():
    data = PanelDataset(
        unit_ids=("t", "t", "u", "u"),
        cluster_ids=("a", "a", "b", "b"),
        times=(0, 1, 0, 1),
        y=(0.0, 1.0, 0.0, 0.0),
        treated=(1, 1, 0, 0),
    )
    with pytest.raises(PanelFormatError, match="pre-trend"):
        compute_reduced_form(data)


def test_csv_round_trip_and_line_numbered_errors(tmp_path):
    csv_text = (
        "unit_id,cluster_id,time,y,treated\n"
        "t,a,0,0.0,1\nt,a,1,1.0,1\nt,a,2,3.0,1\n"
        "u,b,0,0.0,0\nu,b,1,0.0,0\nu,b,2,1.0,0\n"
    )
    path = tmp_path / "panel.csv"
    path.write_text(csv_text, encoding="utf-8")
    gamma = compute_reduced_form(PanelDataset.from_csv(path))
    assert (gamma.pre_trends, gamma.theta1) == ((1.0,), 1.0)

    with pytest.raises(PanelFormatError, match="line 3"):
        PanelDataset.from_csv_text(
            "unit_id,cluster_id,time,y,treated\nt,a,0,0.0,1\nt,a,oops,1.0,1\n"
        )
    with pytest.raises(PanelFormatError, match="line 2"):
        PanelDataset.from_csv_text(
            "unit_id,cluster_id,time,y,treated\nt,a,0,nan,1\n"
        )
    with pytest.raises(PanelFormatError, match="line 1"):
        PanelDataset.from_csv_text("unit,cluster,time,y,treated\n")


# ---------------------------------------------------------------------------
# Bootstraps
# ---------------------------------------------------------------------------

def small_panel(seed: int = 0) -> PanelDataset:
    rng = np.random.default_rng(seed)
    return synthetic_panel(rng, n_clusters=40, units_per_cluster=3,
                           pre_trends=(-0.05, -0.02), theta1=-0.03)


def test_uniform_variates_reproduce_plugin_exactly():
    data = small_panel()
    n_clusters = len(data.sorted_cluster_ids())
    forced = np.full((1, n_clusters), 3.7)
    draws = bayesian_bootstrap(data, 1, seed=5, variates=forced)
    gamma = compute_reduced_form(data)
    assert tuple(draws.draws[0][:-1]) == gamma.pre_trends
    assert draws.draws[0][-1] == gamma.theta1


def test_variate_draws_match_normalized_cluster_weights():
    # Each draw must equal the plug-in under that draw's normalized cluster
    # weights: one weight per cluster applied to all of its units, summing to
    # one across clusters.  Rescaling a row must not change anything.
    data = small_panel()
    clusters = data.sorted_cluster_ids()
    rng = np.random.default_rng(31)
    variates = rng.standard_exponential((6, len(clusters)))
    draws = bayesian_bootstrap(data, 6, seed=0, variates=variates)
    for b in range(6):
        row = variates[b] / variates[b].sum()
        assert row.sum() == pytest.approx(1.0, abs=1e-12)
        gamma = compute_reduced_form(data, weights=dict(zip(clusters, row)))
        assert tuple(draws.draws[b][:-1]) == gamma.pre_trends
        assert draws.draws[b][-1] == gamma.theta1
    # Power-of-two rescaling is exactly neutral in IEEE arithmetic (other
    # scales are neutral only up to rounding of each product).
    rescaled = bayesian_bootstrap(data, 6, seed=0, variates=1024.0 * variates)
    assert np.array_equal(rescaled.draws, draws.draws)


def test_bootstrap_determinism_and_byte_identity():
    data = small_panel()
    a = bayesian_bootstrap(data, 50, seed=123)
    b = bayesian_bootstrap(data, 50, seed=123)
    assert np.array_equal(a.draws, b.draws)
    assert write_draws_csv(a) == write_draws_csv(b)
    c = bayesian_bootstrap(data, 50, seed=124)
    assert not np.array_equal(a.draws, c.draws)


def test_bootstrap_permutation_invariance():
    data = small_panel()
    rng = np.random.default_rng(99)
    order = rng.permutation(data.n_rows)
    shuffled = PanelDataset(
        tuple(data.unit_ids[i] for i in order),
        tuple(data.cluster_ids[i] for i in order),
        tuple(data.times[i] for i in order),
        tuple(data.y[i] for i in order),
        tuple(data.treated[i] for i in order),
    )
    a = bayesian_bootstrap(data, 25, seed=7)
    b = bayesian_bootstrap(shuffled, 25, seed=7)
    assert np.array_equal(a.draws, b.draws)
    fa = cluster_bootstrap(data, 25, seed=7)
    fb = cluster_bootstrap(shuffled, 25, seed=7)
    assert np.array_equal(fa.draws, fb.draws)


def test_cluster_bootstrap_single_cluster_errors():
    data = PanelDataset(
        unit_ids=("t", "t", "t", "u", "u", "u"),
        cluster_ids=("a",) * 6,
        times=(0, 1, 2, 0, 1, 2),
        y=(0.0, 1.0, 3.0, 0.0, 0.0, 1.0),
        treated=(1, 1, 1, 0, 0, 0),
    )
    with pytest.raises(ValueError, match="two clusters"):
        cluster_bootstrap(data, 10, seed=0)


def test_cluster_bootstrap_rejects_degenerate_resamples():
    # Two clusters, one all-treated and one all-untreated: every resample
    # that repeats a single cluster is degenerate and must be redrawn.
    data = PanelDataset(
        unit_ids=("t", "t", "t", "u", "u", "u"),
        cluster_ids=("a", "a", "a", "b", "b", "b"),
        times=(0, 1, 2, 0, 1, 2),
        y=(0.0, 1.0, 3.0, 0.0, 0.0, 1.0),
        treated=(1, 1, 1, 0, 0, 0),
    )
    draws = cluster_bootstrap(data, 40, seed=11)
    assert draws.n_rejected > 0
    # Every retained draw mixes both clusters, so it reproduces the plug-in.
    gamma = compute_reduced_form(data)
    assert np.allclose(draws.draws, [*gamma.pre_trends, gamma.theta1])


def test_bayes_and_frequentist_intervals_close_on_synthetic_data():
    rng = np.random.default_rng(8)
    data = synthetic_panel(rng, n_clusters=600, units_per_cluster=2,
                           pre_trends=(-0.05, -0.02), theta1=-0.03)
    bayes = posterior_summary(bayesian_bootstrap(data, 800, seed=1), 0.10)
    freq = posterior_summary(cluster_bootstrap(data, 800, seed=2), 0.10)
    for b_lo, b_hi, f_lo, f_hi in zip(bayes.lower, bayes.upper, freq.lower, freq.upper):
        assert abs(b_lo - f_lo) < 0.01
        assert abs(b_hi - f_hi) < 0.01


# ---------------------------------------------------------------------------
# Summaries and draw files
# ---------------------------------------------------------------------------

def test_posterior_summary_constant_draws():
    from did_sens import PosteriorDraws

    draws = PosteriorDraws(np.full((10, 2), 0.4), seed=0, pre_trend_times=(0,))
    s = posterior_summary(draws, 0.10)
    assert s.median == (0.4, 0.4)
    assert s.lower == (0.4, 0.4) and s.upper == (0.4, 0.4)


def test_posterior_summary_quantile_convention():
    from did_sens import PosteriorDraws

    col = np.arange(1.0, 101.0)
    draws = PosteriorDraws(np.column_stack([col, col]), seed=0, pre_trend_times=(0,))
    s = posterior_summary(draws, 0.10)
    assert s.lower[0] == pytest.approx(5.95, abs=1e-12)
    assert s.upper[0] == pytest.approx(95.05, abs=1e-12)
    with pytest.raises(ValueError):
        posterior_summary(draws, 1.5)


def test_posterior_summary_symmetric_draws():
    from did_sens import PosteriorDraws

    rng = np.random.default_rng(12)
    col = rng.normal(0.0, 1.0, size=4000)
    col = np.concatenate([col, -col])  # exactly symmetric
    draws = PosteriorDraws(col[:, None] * np.ones((1, 2)), seed=0, pre_trend_times=(0,))
    s = posterior_summary(draws, 0.10)
    assert abs(s.median[0]) < 1.0 / np.sqrt(len(col))


def test_draws_csv_round_trip():
    data = small_panel()
    draws = bayesian_bootstrap(data, 20, seed=3)
    text = write_draws_csv(draws)
    back = read_draws_csv(text)
    assert np.array_equal(back.draws, draws.draws)
    assert back.pre_trend_times == draws.pre_trend_times


def test_draws_binary_format(tmp_path):
    data = small_panel()
    draws = bayesian_bootstrap(data, 8, seed=3)
    bin_path = tmp_path / "draws.bin"
    write_draws_binary(draws, bin_path)
    meta = (tmp_path / "draws.bin.json").read_text(encoding="utf-8")
    import json

    info = json.loads(meta)
    assert info["shape"] == [8, 3]
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8").reshape(
        info["shape"], order="F"
    )
    assert np.array_equal(raw, draws.draws)
