"""Breakdown values and frontiers for qualitative conclusions.

A breakdown value is the smallest relative magnitude at which a conclusion
about the treatment effect can no longer be sustained by the identified set:
the upper bound reaches zero for a negative-sign claim, or the lower bound
reaches the threshold for an above-threshold claim.  Because every bound is
affine (share calibration) or linear-fractional (effect-share calibration) in
the magnitude along each corner branch, breakdown values have closed forms:
the minimum over branches of per-branch crossing points.

Conventions: the breakdown value itself belongs to the failure region (an
infimum), the robust region uses a strict inequality, and ``inf`` over an
empty crossing set is ``+inf`` -- meaning no breakdown inside the admissible
set, not unlimited robustness.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

from .types import (
    ATT_ABOVE_THRESHOLD,
    ATT_NEGATIVE,
    Conclusion,
    FLAG_ERROR,
    FLAG_FINITE,
    FLAG_UNBOUNDED,
    FrontierGrid,
    InfeasibleSharesError,
    PretrendShareBounds,
    ReducedForm,
)

__all__ = [
    "breakdown_sign_pretrend",
    "breakdown_pretrend",
    "admissible_magnitude_limit",
    "breakdown_effect_shares",
    "frontier_grid",
    "in_robust_region",
    "PARAM_PRETREND",
    "PARAM_EFFECT",
]

PARAM_PRETREND = "pretrend_shares"
PARAM_EFFECT = "effect_shares"


# ---------------------------------------------------------------------------
# Pre-trend share calibration
# ---------------------------------------------------------------------------

def _pretrend_branches(gamma: ReducedForm, shares: PretrendShareBounds, upper: bool):
    """Corner branches of the requested bound as pairs (value at M=0, slope).

    The bound in the magnitude M is ``max`` (upper) or ``min`` (lower) over
    branches of ``N + M*D`` resp. ``N - M*D`` with ``D >= 0``.
    """
    lo, hi = shares.lo, shares.hi
    n = gamma.n_pre
    for i in range(n):
        d_r = gamma.pre_trends[i]
        rest = 0.0
        for j in range(n):
            if j == i:
                continue
            d_j = gamma.pre_trends[j]
            if upper:
                coef = hi if d_j >= 0 else lo
            else:
                coef = lo if d_j >= 0 else hi
            rest += coef * d_j
        for p in (lo, hi):
            base = gamma.theta1 + rest + p * d_r
            slope = abs(d_r * (1.0 - p))
            yield base, slope


def _crossing_up(base: float, slope: float, target: float) -> float:
    """inf{M >= 0 : base + M*slope >= target} for slope >= 0."""
    if slope > 0.0:
        return max(0.0, (target - base) / slope)
    return 0.0 if base >= target else math.inf


def _crossing_down(base: float, slope: float, target: float) -> float:
    """inf{M >= 0 : base - M*slope <= target} for slope >= 0."""
    if slope > 0.0:
        return max(0.0, (base - target) / slope)
    return 0.0 if base <= target else math.inf


def breakdown_sign_pretrend(gamma: ReducedForm, shares: PretrendShareBounds) -> float:
    """Smallest magnitude at which the claim "effect < 0" fails, i.e. at which
    the upper bound of the identified set reaches zero.

    ``+inf`` when no branch ever crosses (point identification with a
    negative value)."""
    best = math.inf
    for base, slope in _pretrend_branches(gamma, shares, upper=True):
        best = min(best, _crossing_up(base, slope, 0.0))
    return best


def breakdown_pretrend(
    gamma: ReducedForm, shares: PretrendShareBounds, conclusion: Conclusion
) -> float:
    """Breakdown magnitude for a conclusion under the pre-trend-share
    calibration.

    Negative-sign claims break when the upper bound reaches the target;
    above-threshold claims break when the lower bound falls to the threshold.
    Both bounds are piecewise affine in the magnitude, so the crossing is the
    minimum of per-branch closed forms.
    """
    best = math.inf
    if conclusion.kind == ATT_NEGATIVE:
        for base, slope in _pretrend_branches(gamma, shares, upper=True):
            best = min(best, _crossing_up(base, slope, conclusion.tau))
    else:
        for base, slope in _pretrend_branches(gamma, shares, upper=False):
            best = min(best, _crossing_down(base, slope, conclusion.tau))
    return best


# ---------------------------------------------------------------------------
# Treatment-effect share calibration (constant bounds)
# ---------------------------------------------------------------------------

def admissible_magnitude_limit(lo: float, hi: float) -> float:
    """Largest magnitude range ``[0, limit)`` on which a constant share box
    ``[lo, hi]`` keeps the effect objective's denominator positive.

    ``(1 - hi) / (hi - lo)`` for a nondegenerate box, ``+inf`` for a
    singleton.  The endpoint itself is excluded.  Requires ``hi < 1``.
    """
    if not (lo <= hi):
        raise ValueError(f"lo {lo} exceeds hi {hi}")
    if hi >= 1.0:
        raise InfeasibleSharesError(
            "share upper bound must be < 1 (a unit share zeroes the denominator)"
        )
    if lo == hi:
        return math.inf
    return (1.0 - hi) / (hi - lo)


def breakdown_effect_shares(
    gamma: ReducedForm, lo: float, hi: float, tau: float
) -> float:
    """Breakdown magnitude for the claim "effect > tau" under a constant
    effect-share box ``[lo, hi]``.

    Per corner, the crossing condition is one-sided and affine in the
    magnitude once the denominator is sign-pinned, yielding a three-branch
    closed form for each signed scale; candidates at or beyond the admissible
    magnitude limit are reported as ``+inf``.
    """
    if not math.isfinite(tau):
        raise ValueError("threshold must be finite")
    m_limit = admissible_magnitude_limit(lo, hi)
    theta1 = gamma.theta1
    best = math.inf
    for i in range(gamma.n_pre):
        d_r = gamma.pre_trends[i]
        r = i - (gamma.n_pre - 1)
        if r == 0:
            corners = [(k0, k0, kp) for k0 in (lo, hi) for kp in (lo, hi)]
        else:
            corners = [
                (k0, kr, kp)
                for k0 in (lo, hi)
                for kr in (lo, hi)
                for kp in (lo, hi)
            ]
        for k0, kr, kp in corners:
            gap = d_r - tau * (kr - kp)
            head = theta1 - tau * (1.0 - k0)
            # positive signed scale
            if gap > 0.0:
                mu_pos = max(0.0, head / gap)
            elif head <= 0.0:
                mu_pos = 0.0
            else:
                mu_pos = math.inf
            # negative signed scale
            if gap < 0.0:
                mu_neg = max(0.0, head / (-gap))
            elif head <= 0.0:
                mu_neg = 0.0
            else:
                mu_neg = math.inf
            for mu in (mu_pos, mu_neg):
                if mu >= m_limit:
                    mu = math.inf
                if mu < best:
                    best = mu
    return best


# ---------------------------------------------------------------------------
# Frontier grids
# ---------------------------------------------------------------------------

def _grid_workers() -> int:
    raw = os.environ.get("DID_SENS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_indexed(fn: Callable[[tuple[float, float]], float],
                 points: Sequence[tuple[float, float]]) -> list:
    """Evaluate fn at every point; results merged by index, so the outcome is
    identical whether the sweep runs serially or on a capped thread pool."""
    workers = _grid_workers()
    if workers == 1 or len(points) < 2:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


def frontier_grid(
    gamma: ReducedForm,
    axis: Iterable[tuple[float, float]],
    conclusion: Conclusion,
    parameterization: str,
) -> FrontierGrid:
    """Breakdown values over a grid of ``(lo, hi)`` sensitivity boxes.

    Points that fail per-point validation (e.g. an effect-share upper bound
    at or above one) are flagged as errors rather than aborting the sweep.
    Evaluation is pure per point and deterministic regardless of order.
    """
    points = tuple((float(lo), float(hi)) for lo, hi in axis)
    if not points:
        raise ValueError("axis must be nonempty")
    if parameterization == PARAM_PRETREND:
        def evaluate(point: tuple[float, float]):
            lo, hi = point
            return breakdown_pretrend(gamma, PretrendShareBounds(lo, hi), conclusion)
    elif parameterization == PARAM_EFFECT:
        if conclusion.kind != ATT_ABOVE_THRESHOLD:
            raise ValueError(
                "effect-share frontiers trace above-threshold conclusions; "
                "sign claims do not vary with the share box"
            )

        def evaluate(point: tuple[float, float]):
            lo, hi = point
            return breakdown_effect_shares(gamma, lo, hi, conclusion.tau)
    else:
        raise ValueError(f"unknown parameterization {parameterization!r}")

    def safe(point: tuple[float, float]):
        try:
            return evaluate(point), None
        except (ValueError, InfeasibleSharesError) as exc:
            return math.nan, str(exc)

    results = _map_indexed(safe, points)
    values = []
    flags = []
    messages = []
    for value, err in results:
        if err is not None:
            values.append(math.nan)
            flags.append(FLAG_ERROR)
            messages.append(err)
        elif math.isinf(value):
            values.append(math.inf)
            flags.append(FLAG_UNBOUNDED)
            messages.append("")
        else:
            values.append(value)
            flags.append(FLAG_FINITE)
            messages.append("")
    return FrontierGrid(points, tuple(values), tuple(flags), tuple(messages))


def in_robust_region(magnitude: float, breakdown_value: float) -> bool:
    """Whether a magnitude sits strictly below the breakdown value (the
    conclusion still holds there).  The breakdown value itself is outside."""
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    return magnitude < breakdown_value
