"""Shared fixtures and random-instance helpers."""

from __future__ import annotations

import numpy as np
import pytest

from did_sens import (
    AnticipationIncrementBounds,
    PretrendShareBounds,
    ReducedForm,
    RelativeMagnitude,
    TreatmentShareBounds,
)

# Reference reduced-form point estimates used throughout the worked examples:
# two pre-trends (oldest first) and the post-period contrast.
REF_PRE_TRENDS = (-0.0523, -0.0225)
REF_THETA1 = -0.0260


@pytest.fixture
def ref_gamma() -> ReducedForm:
    return ReducedForm(REF_PRE_TRENDS, REF_THETA1)


def random_gamma(rng: np.random.Generator, n_pre: int, scale: float = 1.0) -> ReducedForm:
    vals = rng.uniform(-scale, scale, size=n_pre + 1)
    return ReducedForm(tuple(vals[:-1]), float(vals[-1]))


def random_increments(
    rng: np.random.Generator, n_pre: int, scale: float = 1.0
) -> AnticipationIncrementBounds:
    a = rng.uniform(-scale, scale, size=n_pre)
    b = rng.uniform(-scale, scale, size=n_pre)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return AnticipationIncrementBounds(tuple(lo), tuple(hi))


def random_pretrend_shares(rng: np.random.Generator, scale: float = 2.0) -> PretrendShareBounds:
    a, b = rng.uniform(-scale, scale, size=2)
    return PretrendShareBounds(min(a, b), max(a, b))


def random_feasible_treatment_shares(
    rng: np.random.Generator, n_pre: int, magnitude: float
) -> TreatmentShareBounds:
    # Symmetric-box margin keeps every box strictly inside the feasible region.
    limit = 1.0 / (1.0 + 2.0 * magnitude)
    cap = 0.9 * limit
    a = rng.uniform(-cap, cap, size=n_pre + 1)
    b = rng.uniform(-cap, cap, size=n_pre + 1)
    return TreatmentShareBounds(tuple(np.minimum(a, b)), tuple(np.maximum(a, b)))


def random_magnitude(rng: np.random.Generator, high: float = 3.0) -> RelativeMagnitude:
    return RelativeMagnitude(float(rng.uniform(0.0, high)))


def synthetic_panel(
    rng: np.random.Generator,
    n_clusters: int,
    units_per_cluster: int,
    pre_trends: tuple[float, ...],
    theta1: float,
    noise_sd: float = 0.15,
):
    """Panel whose population reduced form is exactly (pre_trends, theta1).

    Treated and untreated units share common period trends; treated units add
    the pre-trend (resp. the post contrast) to their consecutive change, so
    the group contrast in mean changes is the target reduced form.  Outcome
    noise is independent across observations, leaving the moments unbiased.
    """
    from did_sens import PanelDataset

    n_pre = len(pre_trends)
    n_periods = n_pre + 2
    common = rng.uniform(-0.5, 0.5, size=n_periods - 1)  # shared period trends
    extra = np.concatenate([np.asarray(pre_trends), [theta1]])

    units, clusters, times, ys, treated = [], [], [], [], []
    for c in range(n_clusters):
        cluster = f"c{c:05d}"
        for u in range(units_per_cluster):
            unit = f"{cluster}_u{u}"
            x = int(rng.uniform() < 0.5)
            level = float(rng.normal(0.0, 1.0))
            for t in range(n_periods):
                if t > 0:
                    level += common[t - 1] + (extra[t - 1] if x == 1 else 0.0)
                units.append(unit)
                clusters.append(cluster)
                times.append(t)
                ys.append(level + float(rng.normal(0.0, noise_sd)))
                treated.append(x)
    return PanelDataset(tuple(units), tuple(clusters), tuple(times), tuple(ys), tuple(treated))
