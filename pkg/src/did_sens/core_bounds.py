"""Sharp identified sets for the first-post-period ATT.

Each identified set is an exact corner enumeration: for the increment and
pre-trend-share calibrations the per-period objective is concave (lower
bound) or convex (upper bound) in the free coordinate, so box extremes sit at
endpoints; for the treatment-effect-share calibration the objective is a
ratio of multilinear forms whose box extremes also sit at vertices once the
denominator cannot vanish.  Two corners per pre-period suffice for the first
two calibrations and at most sixteen vertices per pre-period for the third.

All arithmetic is double precision; no interval arithmetic is used.  Ties
across pre-periods resolve to the lowest event time, and corner-value ties
resolve to the lower endpoint, so results are order-deterministic.
"""

from __future__ import annotations

import math
from typing import Iterable

from .types import (
    AnticipationIncrementBounds,
    CornerWitness,
    DimensionMismatchError,
    InfeasibleSharesError,
    Interval,
    PretrendShareBounds,
    ReducedForm,
    RelativeMagnitude,
    SinglePretrendCase,
    TreatmentShareBounds,
    WidthComparison,
)

__all__ = [
    "att_from_decomposition",
    "implied_violation",
    "anticipation_level",
    "identified_set_from_increments",
    "identified_set_from_pretrend_shares",
    "identified_set_from_effect_shares",
    "per_period_increment_bounds",
    "per_period_effect_share_bounds",
    "effect_shares_feasible",
    "symmetric_share_limit",
    "onesided_share_limit",
    "classify_single_pretrend",
    "width_comparison",
]

#: Vertex values within this distance of zero count as a denominator violation.
FEASIBILITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# Decomposition identities
# ---------------------------------------------------------------------------

def att_from_decomposition(theta1: float, anticipation: float, violation: float) -> float:
    """Treatment effect implied by the post-period contrast, the anticipation
    level at event time 0, and the post-period trend violation."""
    return theta1 + anticipation - violation


def implied_violation(pre_trend: float, increment: float) -> float:
    """Pre-period trend violation left over once an anticipation increment is
    netted out of the observed pre-trend."""
    return pre_trend - increment


def anticipation_level(increments: Iterable[float], s: int) -> float:
    """Anticipation level at event time ``s``: the telescoping sum of
    increments from the earliest pre-trend through ``s`` (the level in the
    first data period is zero)."""
    inc = [float(v) for v in increments]
    n = len(inc)
    idx = s + n - 1
    if not 0 <= idx < n:
        raise IndexError(f"event time {s} outside {-(n - 1)}..0")
    total = 0.0
    for v in inc[: idx + 1]:
        total += v
    return total


# ---------------------------------------------------------------------------
# Increment calibration
# ---------------------------------------------------------------------------

def _attaining_scale(magnitude: float, gap: float, maximize: bool) -> float:
    """Signed scale in {-M, 0, M} at which +-M|gap| is attained."""
    if gap > 0:
        return -magnitude if maximize else magnitude
    if gap < 0:
        return magnitude if maximize else -magnitude
    return 0.0


def per_period_increment_bounds(
    gamma: ReducedForm,
    increments: AnticipationIncrementBounds,
    magnitude: RelativeMagnitude,
) -> list[dict]:
    """Candidate bounds per pre-period under absolute increment bounds.

    For pre-period ``r`` the candidate lower bound pins every other increment
    at its lower endpoint and evaluates ``a - M|d_r - a|`` at the two
    endpoints of period ``r``'s box; the upper bound mirrors this.  Each
    record carries the candidate ``lb``/``ub``, the attaining increment
    endpoint (``side``), and the attaining signed scale.
    """
    if increments.n_pre != gamma.n_pre:
        raise DimensionMismatchError(
            f"{increments.n_pre} increment bounds for {gamma.n_pre} pre-trends"
        )
    M = magnitude.m
    records = []
    for i, r in enumerate(gamma.event_times()):
        d = gamma.pre_trends[i]
        lo = increments.lower[i]
        hi = increments.upper[i]

        rest_lo = 0.0
        rest_hi = 0.0
        for j in range(increments.n_pre):
            if j == i:
                continue
            rest_lo += increments.lower[j]
            rest_hi += increments.upper[j]

        v_lo = lo - M * abs(d - lo)
        v_hi = hi - M * abs(d - hi)
        if v_lo <= v_hi:
            a_lb, inner_lb, lb_side = lo, v_lo, "lower"
        else:
            a_lb, inner_lb, lb_side = hi, v_hi, "upper"

        w_lo = lo + M * abs(d - lo)
        w_hi = hi + M * abs(d - hi)
        if w_lo >= w_hi:
            a_ub, inner_ub, ub_side = lo, w_lo, "lower"
        else:
            a_ub, inner_ub, ub_side = hi, w_hi, "upper"

        records.append(
            {
                "r": r,
                "lb": gamma.theta1 + rest_lo + inner_lb,
                "ub": gamma.theta1 + rest_hi + inner_ub,
                "lb_increment": a_lb,
                "lb_scale": _attaining_scale(M, d - a_lb, maximize=False),
                "lb_side": lb_side,
                "ub_increment": a_ub,
                "ub_scale": _attaining_scale(M, d - a_ub, maximize=True),
                "ub_side": ub_side,
            }
        )
    return records


def identified_set_from_increments(
    gamma: ReducedForm,
    increments: AnticipationIncrementBounds,
    magnitude: RelativeMagnitude,
) -> Interval:
    """Sharp identified set under absolute increment bounds: minimum over
    pre-periods of the candidate lower bounds paired with the maximum of the
    candidate upper bounds (see :func:`per_period_increment_bounds`)."""
    best_lb = math.inf
    best_ub = -math.inf
    lb_wit: CornerWitness | None = None
    ub_wit: CornerWitness | None = None
    for rec in per_period_increment_bounds(gamma, increments, magnitude):
        if rec["lb"] < best_lb:
            best_lb = rec["lb"]
            lb_wit = CornerWitness(
                rec["r"],
                {
                    "increment": rec["lb_increment"],
                    "scale": rec["lb_scale"],
                    "side": rec["lb_side"],
                },
            )
        if rec["ub"] > best_ub:
            best_ub = rec["ub"]
            ub_wit = CornerWitness(
                rec["r"],
                {
                    "increment": rec["ub_increment"],
                    "scale": rec["ub_scale"],
                    "side": rec["ub_side"],
                },
            )
    return Interval(best_lb, best_ub, lb_wit, ub_wit)


# ---------------------------------------------------------------------------
# Pre-trend share calibration
# ---------------------------------------------------------------------------

def identified_set_from_pretrend_shares(
    gamma: ReducedForm,
    shares: PretrendShareBounds,
    magnitude: RelativeMagnitude,
) -> Interval:
    """Sharp identified set when increments are share multiples of their own
    pre-trends.

    A share box ``[lo, hi]`` is the absolute increment box
    ``[min(lo*d, hi*d), max(lo*d, hi*d)]`` per pre-trend ``d``, so this
    delegates to :func:`identified_set_from_increments` on that box; the two
    parameterizations agree identically, not merely to rounding.  Witnesses
    report the attaining share.
    """
    inc = shares.to_increment_bounds(gamma)
    itv = identified_set_from_increments(gamma, inc, magnitude)
    return Interval(
        itv.lb,
        itv.ub,
        _share_witness(itv.lb_witness, gamma, shares),
        _share_witness(itv.ub_witness, gamma, shares),
    )


def _share_witness(
    wit: CornerWitness | None, gamma: ReducedForm, shares: PretrendShareBounds
) -> CornerWitness | None:
    if wit is None:
        return None
    d = gamma.pre_trend(wit.r)
    side = wit.corner["side"]
    # The increment box flips orientation when the pre-trend is negative.
    if d >= 0:
        share = shares.lo if side == "lower" else shares.hi
    else:
        share = shares.hi if side == "lower" else shares.lo
    return CornerWitness(
        wit.r,
        {"share": share, "increment": wit.corner["increment"], "scale": wit.corner["scale"]},
    )


# ---------------------------------------------------------------------------
# Treatment-effect share calibration
# ---------------------------------------------------------------------------

def _effect_share_corners(shares: TreatmentShareBounds, r: int, magnitude: float):
    """Vertices of the relevant box for pre-period ``r``.

    Yields ``(k0, k_r, k_prev, scale)``.  For ``r == 0`` the share at event
    time 0 plays both the level role and the increment role, so it is
    enumerated once (8 vertices instead of 16).
    """
    k0_lo, k0_hi = shares.bounds_at(0)
    kp_lo, kp_hi = shares.bounds_at(r - 1)
    scales = (-magnitude, magnitude)
    if r == 0:
        for k0 in (k0_lo, k0_hi):
            for kp in (kp_lo, kp_hi):
                for m in scales:
                    yield k0, k0, kp, m
    else:
        kr_lo, kr_hi = shares.bounds_at(r)
        for k0 in (k0_lo, k0_hi):
            for kr in (kr_lo, kr_hi):
                for kp in (kp_lo, kp_hi):
                    for m in scales:
                        yield k0, kr, kp, m


def effect_shares_feasible(
    shares: TreatmentShareBounds,
    magnitude: RelativeMagnitude,
    tol: float = FEASIBILITY_TOL,
) -> bool:
    """Whether ``1 - k0 - m*(k_r - k_prev)`` is bounded away from zero over
    the whole box, for every pre-period.

    The expression is multilinear in its arguments, so its extremes over the
    box sit at vertices; a single strict sign across all vertices is therefore
    necessary and sufficient.  Vertex values within ``tol`` of zero count as
    violations (conservative).
    """
    M = magnitude.m
    n_pre = shares.n_pre
    for r in range(-(n_pre - 1), 1):
        has_pos = False
        has_neg = False
        for k0, kr, kp, m in _effect_share_corners(shares, r, M):
            value = 1.0 - k0 - m * (kr - kp)
            if abs(value) <= tol:
                return False
            if value > 0:
                has_pos = True
            else:
                has_neg = True
        if has_pos and has_neg:
            return False
    return True


def symmetric_share_limit(magnitude: RelativeMagnitude) -> float:
    """Supremum of admissible ``K`` for symmetric share boxes ``[-K, K]``:
    ``1 / (1 + 2M)``."""
    return 1.0 / (1.0 + 2.0 * magnitude.m)


def onesided_share_limit(magnitude: RelativeMagnitude) -> float:
    """Supremum of admissible ``K`` for one-sided share boxes ``[0, K]``:
    ``1 / (1 + M)``."""
    return 1.0 / (1.0 + magnitude.m)


def per_period_effect_share_bounds(
    gamma: ReducedForm,
    shares: TreatmentShareBounds,
    magnitude: RelativeMagnitude,
) -> list[dict]:
    """Candidate bounds per pre-period under effect-share calibration.

    Each record carries the vertex-enumerated ``lb``/``ub`` for one
    pre-period and the attaining ``(share_0, share_r, share_prev, scale)``
    corners.  Requires the feasibility check to pass.
    """
    if shares.n_pre != gamma.n_pre:
        raise DimensionMismatchError(
            f"shares cover {shares.n_pre} pre-trends, reduced form has {gamma.n_pre}"
        )
    if not effect_shares_feasible(shares, magnitude):
        raise InfeasibleSharesError(
            "nonzero-denominator condition fails: the share box admits a zero "
            "denominator in the effect objective, so the bounds would be infinite"
        )
    records = []
    for i, r in enumerate(gamma.event_times()):
        d = gamma.pre_trends[i]
        lb = math.inf
        ub = -math.inf
        lb_corner = ub_corner = None
        for k0, kr, kp, m in _effect_share_corners(shares, r, magnitude.m):
            value = (gamma.theta1 - m * d) / (1.0 - k0 - m * (kr - kp))
            if value < lb:
                lb = value
                lb_corner = {"share_0": k0, "share_r": kr, "share_prev": kp, "scale": m}
            if value > ub:
                ub = value
                ub_corner = {"share_0": k0, "share_r": kr, "share_prev": kp, "scale": m}
        records.append(
            {"r": r, "lb": lb, "ub": ub, "lb_corner": lb_corner, "ub_corner": ub_corner}
        )
    return records


def identified_set_from_effect_shares(
    gamma: ReducedForm,
    shares: TreatmentShareBounds,
    magnitude: RelativeMagnitude,
) -> Interval:
    """Sharp identified set when anticipation levels are share multiples of
    the treatment effect itself.

    The effect solves a fixed point and becomes the ratio
    ``(theta1 - m*d_r) / (1 - k0 - m*(k_r - k_prev))``; with the denominator
    sign-constant over the box, extremes are attained at box vertices, which
    are enumerated exactly.

    Raises :class:`InfeasibleSharesError` when the denominator can vanish
    (the bounds would be infinite).
    """
    best_lb = math.inf
    best_ub = -math.inf
    lb_wit: CornerWitness | None = None
    ub_wit: CornerWitness | None = None
    for rec in per_period_effect_share_bounds(gamma, shares, magnitude):
        if rec["lb"] < best_lb:
            best_lb = rec["lb"]
            lb_wit = CornerWitness(rec["r"], rec["lb_corner"])
        if rec["ub"] > best_ub:
            best_ub = rec["ub"]
            ub_wit = CornerWitness(rec["r"], rec["ub_corner"])
    return Interval(best_lb, best_ub, lb_wit, ub_wit)


# ---------------------------------------------------------------------------
# One-pre-trend design: configuration and width
# ---------------------------------------------------------------------------

def classify_single_pretrend(
    gamma: ReducedForm,
    increments: AnticipationIncrementBounds,
    magnitude: RelativeMagnitude,
) -> tuple[SinglePretrendCase, Interval]:
    """Which endpoint pair attains the identified set when there is a single
    pre-trend.

    Returns the configuration label (both bounds at the lower endpoint, both
    at the upper endpoint, or one at each) and the resulting interval.  The
    reversed cross pairing (lower bound from the upper endpoint and upper
    bound from the lower endpoint) is never optimal when the box is
    nondegenerate, so it is never returned.
    """
    if gamma.n_pre != 1:
        raise DimensionMismatchError("classification applies to a single pre-trend")
    if increments.n_pre != 1:
        raise DimensionMismatchError("increment bounds must cover one pre-trend")
    d = gamma.pre_trends[0]
    lo = increments.lower[0]
    hi = increments.upper[0]
    M = magnitude.m

    if M == 0.0:
        case = SinglePretrendCase.CROSS
    elif hi <= d:
        case = SinglePretrendCase.SAME_LOWER if M >= 1.0 else SinglePretrendCase.CROSS
    elif lo >= d:
        case = SinglePretrendCase.SAME_UPPER if M >= 1.0 else SinglePretrendCase.CROSS
    elif M > 1.0:
        # Box straddles the pre-trend: endpoint selection switches at two
        # interior thresholds that exist only for M > 1.
        c_lo = (lo * (1.0 + M) - hi * (1.0 - M)) / (2.0 * M)
        c_hi = (hi * (1.0 + M) - lo * (1.0 - M)) / (2.0 * M)
        if d > c_hi:
            case = SinglePretrendCase.SAME_LOWER
        elif d < c_lo:
            case = SinglePretrendCase.SAME_UPPER
        else:
            case = SinglePretrendCase.CROSS
    else:
        case = SinglePretrendCase.CROSS

    if case is SinglePretrendCase.SAME_LOWER:
        a_lb = a_ub = lo
    elif case is SinglePretrendCase.SAME_UPPER:
        a_lb = a_ub = hi
    else:
        a_lb, a_ub = lo, hi
    # Interval values come from the shared per-period engine so the numbers
    # are identical to identified_set_from_increments; the label only selects
    # the attaining corners (equal in value at ties).
    rec = per_period_increment_bounds(gamma, increments, magnitude)[0]
    itv = Interval(
        rec["lb"],
        rec["ub"],
        CornerWitness(0, {"increment": a_lb, "scale": _attaining_scale(M, d - a_lb, False)}),
        CornerWitness(0, {"increment": a_ub, "scale": _attaining_scale(M, d - a_ub, True)}),
    )
    return case, itv


def width_comparison(
    gamma: ReducedForm,
    increments: AnticipationIncrementBounds,
    magnitude: RelativeMagnitude,
) -> WidthComparison:
    """Interval widths with and without the anticipation restriction, for a
    single pre-trend and a strictly positive relative magnitude.

    The joint width can undercut the violations-only width ``2M|d|`` only
    when the increment box excludes zero.
    """
    if gamma.n_pre != 1 or increments.n_pre != 1:
        raise DimensionMismatchError("width comparison applies to a single pre-trend")
    if magnitude.m <= 0.0:
        raise ValueError("width comparison requires a strictly positive magnitude")
    case, _ = classify_single_pretrend(gamma, increments, magnitude)
    d = gamma.pre_trends[0]
    lo = increments.lower[0]
    hi = increments.upper[0]
    M = magnitude.m
    w_pt = 2.0 * M * abs(d)
    if case is SinglePretrendCase.SAME_LOWER:
        w_joint = 2.0 * M * abs(d - lo)
    elif case is SinglePretrendCase.SAME_UPPER:
        w_joint = 2.0 * M * abs(d - hi)
    else:
        w_joint = (hi - lo) + M * (abs(d - hi) + abs(d - lo))
    return WidthComparison(w_pt, w_joint, w_joint < w_pt, case)
