"""Independent verifiers for the closed-form bounds.

Two routes cross-check every identified set.  The lattice oracle evaluates
the raw bound objective over a dense lattice of the feasible box (vertices
always included); because the true extremes sit at vertices, the lattice
extremes are exact regardless of density.  The constructive oracle inverts
the bound objective: for any target value inside the identified set it
produces explicit counterfactual conditional means whose implied moments
reproduce the observed reduced form while satisfying every maintained
restriction, and a verifier checks all of that from the means alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core_bounds import (
    per_period_effect_share_bounds,
    per_period_increment_bounds,
)
from .core_bounds import effect_shares_feasible
from .types import (
    AnticipationIncrementBounds,
    DimensionMismatchError,
    InfeasibleSharesError,
    InternalInvariantError,
    Interval,
    PretrendShareBounds,
    ReducedForm,
    RelativeMagnitude,
    TreatmentShareBounds,
)

__all__ = [
    "DEFAULT_GRID_DENSITY",
    "DgpSpec",
    "lattice_extremes_increments",
    "lattice_extremes_pretrend_shares",
    "lattice_extremes_effect_shares",
    "construct_attaining_dgp",
    "verify_dgp",
    "PARAM_INCREMENTS",
    "PARAM_PRETREND_SHARES",
    "PARAM_EFFECT_SHARES",
]

PARAM_INCREMENTS = "increments"
PARAM_PRETREND_SHARES = "pretrend_shares"
PARAM_EFFECT_SHARES = "effect_shares"

#: Lattice points per axis; vertices are included at any density.
DEFAULT_GRID_DENSITY = 101

_VERIFY_TOL = 1e-10


def _axis(lo: float, hi: float, density: int) -> np.ndarray:
    if lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, max(2, int(density)))


# ---------------------------------------------------------------------------
# Lattice extremes
# ---------------------------------------------------------------------------

def lattice_extremes_increments(
    gamma: ReducedForm,
    increments: AnticipationIncrementBounds,
    magnitude: RelativeMagnitude,
    grid_density: int = DEFAULT_GRID_DENSITY,
) -> Interval:
    """Lattice min/max of the increment-calibration objective
    ``theta1 + sum(a_j) - m*(d_r - a_r)`` over box x scale-range x period."""
    if increments.n_pre != gamma.n_pre:
        raise DimensionMismatchError("increment bounds do not match the reduced form")
    axes = [
        _axis(lo, hi, grid_density)
        for lo, hi in zip(increments.lower, increments.upper)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    total = sum(mesh)
    scales = _axis(-magnitude.m, magnitude.m, grid_density)
    best_lo = math.inf
    best_hi = -math.inf
    for i in range(gamma.n_pre):
        d = gamma.pre_trends[i]
        a_r = mesh[i]
        for m in scales:
            f = gamma.theta1 + total + m * (a_r - d)
            best_lo = min(best_lo, float(f.min()))
            best_hi = max(best_hi, float(f.max()))
    return Interval(best_lo, best_hi)


def lattice_extremes_pretrend_shares(
    gamma: ReducedForm,
    shares: PretrendShareBounds,
    magnitude: RelativeMagnitude,
    grid_density: int = DEFAULT_GRID_DENSITY,
) -> Interval:
    """Lattice min/max of the share-calibration objective
    ``theta1 + sum(p_j d_j) - m*d_r*(1 - p_r)``."""
    axes = [_axis(shares.lo, shares.hi, grid_density) for _ in range(gamma.n_pre)]
    mesh = np.meshgrid(*axes, indexing="ij")
    total = 0.0
    for i in range(gamma.n_pre):
        total = total + gamma.pre_trends[i] * mesh[i]
    scales = _axis(-magnitude.m, magnitude.m, grid_density)
    best_lo = math.inf
    best_hi = -math.inf
    for i in range(gamma.n_pre):
        d = gamma.pre_trends[i]
        p_r = mesh[i]
        for m in scales:
            f = gamma.theta1 + total + m * d * (p_r - 1.0)
            best_lo = min(best_lo, float(f.min()))
            best_hi = max(best_hi, float(f.max()))
    return Interval(best_lo, best_hi)


def lattice_extremes_effect_shares(
    gamma: ReducedForm,
    shares: TreatmentShareBounds,
    magnitude: RelativeMagnitude,
    grid_density: int = DEFAULT_GRID_DENSITY,
) -> Interval:
    """Lattice min/max of the effect-share ratio objective.  Requires the
    nonzero-denominator check to pass (no pole inside any box)."""
    if shares.n_pre != gamma.n_pre:
        raise DimensionMismatchError("share bounds do not match the reduced form")
    if not effect_shares_feasible(shares, magnitude):
        raise InfeasibleSharesError("share box admits a zero denominator")
    scales = _axis(-magnitude.m, magnitude.m, grid_density)
    best_lo = math.inf
    best_hi = -math.inf
    for i, r in enumerate(gamma.event_times()):
        d = gamma.pre_trends[i]
        k0_axis = _axis(*shares.bounds_at(0), grid_density)
        kp_axis = _axis(*shares.bounds_at(r - 1), grid_density)
        if r == 0:
            K0, KP = np.meshgrid(k0_axis, kp_axis, indexing="ij")
            KR = K0
        else:
            kr_axis = _axis(*shares.bounds_at(r), grid_density)
            K0, KR, KP = np.meshgrid(k0_axis, kr_axis, kp_axis, indexing="ij")
        for m in scales:
            f = (gamma.theta1 - m * d) / (1.0 - K0 - m * (KR - KP))
            best_lo = min(best_lo, float(f.min()))
            best_hi = max(best_hi, float(f.max()))
    return Interval(best_lo, best_hi)


# ---------------------------------------------------------------------------
# Constructive sharpness: explicit mean paths attaining a target value
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DgpSpec:
    """Conditional-mean description of a data-generating process.

    ``treated_means[t]`` is the treated cohort's mean outcome path (its
    treatment-path potential outcome, which is what is observed for that
    cohort), and ``counterfactual_means[t]`` the untreated-path mean, both
    for event times ``-S..1``.  ``untreated_trends`` are the comparison-group
    consecutive changes for event times ``-(S-1)..1``.  Anticipation levels
    and trend violations are implied by differences of these paths.
    """

    parameterization: str
    tau: float
    treated_means: tuple[float, ...]
    counterfactual_means: tuple[float, ...]
    untreated_trends: tuple[float, ...]
    witness: Mapping

    def __post_init__(self) -> None:
        n = len(self.treated_means)
        if n < 3 or len(self.counterfactual_means) != n:
            raise ValueError("mean paths must cover event times -S..1")
        if len(self.untreated_trends) != n - 1:
            raise ValueError("untreated trends must cover event times -(S-1)..1")

    @property
    def n_pre(self) -> int:
        return len(self.treated_means) - 2

    def anticipation_levels(self) -> tuple[float, ...]:
        """Implied anticipation level per event time ``-S..0``."""
        return tuple(
            t - c
            for t, c in zip(self.treated_means[:-1], self.counterfactual_means[:-1])
        )

    def violations_pre(self) -> tuple[float, ...]:
        """Implied pre-period trend violations, event times ``-(S-1)..0``."""
        cf = self.counterfactual_means
        return tuple(
            (cf[i + 1] - cf[i]) - self.untreated_trends[i]
            for i in range(len(cf) - 2)
        )

    def violation_post(self) -> float:
        cf = self.counterfactual_means
        return (cf[-1] - cf[-2]) - self.untreated_trends[-1]

    def att(self) -> float:
        return self.treated_means[-1] - self.counterfactual_means[-1]


def _edge_solve_affine(base: float, coef: float, x0: float, x1: float, tau: float):
    """Value of x in [x0, x1] (unordered) with base + coef*x == tau, or None."""
    f0 = base + coef * x0
    f1 = base + coef * x1
    if not (min(f0, f1) <= tau <= max(f0, f1)):
        return None
    if coef == 0.0:
        return x0 if f0 == tau else None
    x = (tau - base) / coef
    lo, hi = (x0, x1) if x0 <= x1 else (x1, x0)
    return min(max(x, lo), hi)


def _walk_affine(coords: list[float], targets: list[float], coefs, value_fn, tau: float):
    """Move coordinates one at a time from ``coords`` to ``targets``; on the
    first edge whose endpoint values bracket ``tau``, solve the affine edge
    equation exactly.  ``coefs(k, coords)`` gives the slope of coordinate k
    at the current point; ``value_fn(coords)`` the objective.

    Recomputing corner values can land an ulp past ``tau`` when the target is
    an interval endpoint, so the nearest visited corner is kept as a fallback
    (the caller checks its proximity)."""
    cur = list(coords)
    f_cur = value_fn(cur)
    best = list(cur)
    best_gap = abs(f_cur - tau)
    for k in range(len(cur)):
        x0, x1 = cur[k], targets[k]
        if x0 == x1:
            continue
        coef = coefs(k, cur)
        base = f_cur - coef * x0
        nxt = list(cur)
        nxt[k] = x1
        f_nxt = value_fn(nxt)
        if min(f_cur, f_nxt) <= tau <= max(f_cur, f_nxt):
            x = _edge_solve_affine(base, coef, x0, x1, tau)
            if x is not None:
                cur[k] = x
                return cur
        if abs(f_nxt - tau) < best_gap:
            best_gap = abs(f_nxt - tau)
            best = list(nxt)
        cur = nxt
        f_cur = f_nxt
    return best


def _pick_period(records: list[dict], tau: float) -> dict:
    best = None
    best_slack = -math.inf
    for rec in records:
        slack = min(tau - rec["lb"], rec["ub"] - tau)
        if slack > best_slack:
            best_slack = slack
            best = rec
    if best is None or best_slack < -1e-9 * max(1.0, abs(tau)):
        raise ValueError(f"target {tau} lies outside the identified set")
    return best


def construct_attaining_dgp(
    gamma: ReducedForm,
    tau: float,
    parameterization: str,
    bounds,
    magnitude: RelativeMagnitude,
) -> DgpSpec:
    """Explicit mean paths under which the treatment effect equals ``tau``.

    Picks a pre-period whose candidate interval brackets ``tau`` (the
    attainment metadata of the closed form), walks from the lower-bound
    corner to the upper-bound corner one coordinate at a time, and solves the
    bracketing edge exactly; the objective is affine (increments, shares) or
    monotone linear-fractional (effect shares) along each edge, so a crossing
    on the walk always exists.  The comparison-group trends and the treated
    baseline level are normalized to zero; they cancel from every moment.

    Raises ``ValueError`` if ``tau`` lies outside the identified set.
    """
    if parameterization == PARAM_INCREMENTS:
        return _construct_increments(gamma, tau, bounds, magnitude)
    if parameterization == PARAM_PRETREND_SHARES:
        inc = bounds.to_increment_bounds(gamma)
        spec = _construct_increments(gamma, tau, inc, magnitude)
        witness = dict(spec.witness)
        witness["share_box"] = (bounds.lo, bounds.hi)
        return DgpSpec(
            PARAM_PRETREND_SHARES,
            tau,
            spec.treated_means,
            spec.counterfactual_means,
            spec.untreated_trends,
            witness,
        )
    if parameterization == PARAM_EFFECT_SHARES:
        return _construct_effect_shares(gamma, tau, bounds, magnitude)
    raise ValueError(f"unknown parameterization {parameterization!r}")


def _treated_mean_path(gamma: ReducedForm) -> tuple[float, ...]:
    # Baseline level 0 and zero comparison trends: increments are the
    # pre-trends, then the post-period contrast.
    path = [0.0]
    for d in gamma.pre_trends:
        path.append(path[-1] + d)
    path.append(path[-1] + gamma.theta1)
    return tuple(path)


def _assemble_spec(
    gamma: ReducedForm,
    parameterization: str,
    tau: float,
    violations_pre: list[float],
    violation_post: float,
    level_start: float,
    witness: Mapping,
) -> DgpSpec:
    treated = _treated_mean_path(gamma)
    cf = [treated[0] - level_start]
    for v in violations_pre:
        cf.append(cf[-1] + v)
    cf.append(cf[-1] + violation_post)
    trends = (0.0,) * (gamma.n_pre + 1)
    return DgpSpec(parameterization, tau, treated, tuple(cf), trends, witness)


def _construct_increments(
    gamma: ReducedForm,
    tau: float,
    increments: AnticipationIncrementBounds,
    magnitude: RelativeMagnitude,
) -> DgpSpec:
    records = per_period_increment_bounds(gamma, increments, magnitude)
    rec = _pick_period(records, tau)
    r = rec["r"]
    i = r + gamma.n_pre - 1
    d_r = gamma.pre_trends[i]
    n = gamma.n_pre

    # Coordinates: increments for every period (own period last) then scale.
    order = [j for j in range(n) if j != i] + [i, n]
    start = [increments.lower[j] for j in range(n)] + [rec["lb_scale"]]
    start[i] = rec["lb_increment"]
    target = [increments.upper[j] for j in range(n)] + [rec["ub_scale"]]
    target[i] = rec["ub_increment"]

    def value_fn(coords):
        a = coords[:n]
        m = coords[n]
        return gamma.theta1 + sum(a) - m * (d_r - a[i])

    def coefs(k, coords):
        j = order[k]
        if j == n:
            return coords[i] - d_r
        if j == i:
            return 1.0 + coords[n]
        return 1.0

    cur = [start[j] for j in order]
    tgt = [target[j] for j in order]

    def reindex(vec):
        full = [0.0] * (n + 1)
        for pos, j in enumerate(order):
            full[j] = vec[pos]
        return full

    solved = _walk_affine(
        cur, tgt, lambda k, c: coefs(k, reindex(c)), lambda c: value_fn(reindex(c)), tau
    )
    full = reindex(solved)
    a = full[:n]
    m = full[n]
    attained = value_fn(full)
    if abs(attained - tau) > 1e-9 * max(1.0, abs(tau)):
        raise InternalInvariantError(
            f"walk attained {attained}, target {tau}; identified-set bracketing failed"
        )

    violations = [gamma.pre_trends[j] - a[j] for j in range(n)]
    violation_post = m * (d_r - a[i])
    witness = {"r": r, "increments": tuple(a), "scale": m}
    return _assemble_spec(
        gamma, PARAM_INCREMENTS, tau, violations, violation_post, 0.0, witness
    )


def _construct_effect_shares(
    gamma: ReducedForm,
    tau: float,
    shares: TreatmentShareBounds,
    magnitude: RelativeMagnitude,
) -> DgpSpec:
    records = per_period_effect_share_bounds(gamma, shares, magnitude)
    rec = _pick_period(records, tau)
    r = rec["r"]
    d_r = gamma.pre_trend(r)
    theta1 = gamma.theta1

    # Free coordinates for this period: shares in {0, r, r-1} plus the scale.
    # For r == 0 the share at event time 0 fills both level and increment
    # roles, so there are three coordinates instead of four.
    if r == 0:
        names = ["share_0", "share_prev", "scale"]
    else:
        names = ["share_0", "share_r", "share_prev", "scale"]
    start = [rec["lb_corner"][nm] for nm in names]
    target = [rec["ub_corner"][nm] for nm in names]

    def unpack(coords):
        if r == 0:
            k0, kp, m = coords
            kr = k0
        else:
            k0, kr, kp, m = coords
        return k0, kr, kp, m

    def value_fn(coords):
        k0, kr, kp, m = unpack(coords)
        return (theta1 - m * d_r) / (1.0 - k0 - m * (kr - kp))

    def mobius(k, coords):
        """(A, B, G, H) with f = (A + B x)/(G + H x) in coordinate k."""
        k0, kr, kp, m = unpack(coords)
        name = names[k]
        if name == "scale":
            return theta1, -d_r, 1.0 - k0, -(kr - kp)
        if name == "share_0" and r == 0:
            return theta1 - m * d_r, 0.0, 1.0 + m * kp, -(1.0 + m)
        if name == "share_0":
            return theta1 - m * d_r, 0.0, 1.0 - m * (kr - kp), -1.0
        if name == "share_r":
            return theta1 - m * d_r, 0.0, 1.0 - k0 + m * kp, -m
        # share_prev
        if r == 0:
            return theta1 - m * d_r, 0.0, 1.0 - k0 * (1.0 + m), m
        return theta1 - m * d_r, 0.0, 1.0 - k0 - m * kr, m

    cur = list(start)
    f_cur = value_fn(cur)
    best = list(cur)
    best_gap = abs(f_cur - tau)
    solved = None
    for k in range(len(cur)):
        x0, x1 = cur[k], target[k]
        if x0 == x1:
            continue
        nxt = list(cur)
        nxt[k] = x1
        f_nxt = value_fn(nxt)
        if min(f_cur, f_nxt) <= tau <= max(f_cur, f_nxt):
            A, B, G, H = mobius(k, cur)
            denom = B - tau * H
            if denom == 0.0:
                x = x0  # objective flat at tau along this edge
            else:
                x = (tau * G - A) / denom
                lo, hi = (x0, x1) if x0 <= x1 else (x1, x0)
                x = min(max(x, lo), hi)
            cur[k] = x
            solved = cur
            break
        if abs(f_nxt - tau) < best_gap:
            best_gap = abs(f_nxt - tau)
            best = list(nxt)
        cur = nxt
        f_cur = f_nxt
    if solved is None:
        solved = best
    attained = value_fn(solved)
    if abs(attained - tau) > 1e-9 * max(1.0, abs(tau)):
        raise InternalInvariantError(
            f"walk attained {attained}, target {tau}; identified-set bracketing failed"
        )

    k0, kr, kp, m = unpack(solved)
    # Extend to a full share vector: pinned coordinates take their solved
    # values, remaining periods sit at their lower bounds.
    n_pre = gamma.n_pre
    k_full = [shares.lower[idx] for idx in range(n_pre + 1)]
    k_full[0 + n_pre] = k0
    k_full[r + n_pre] = kr
    k_full[r - 1 + n_pre] = kp

    violations = []
    for i, s in enumerate(gamma.event_times()):
        inc = (k_full[s + n_pre] - k_full[s - 1 + n_pre]) * tau
        violations.append(gamma.pre_trends[i] - inc)
    violation_post = m * (d_r - (kr - kp) * tau)
    witness = {"r": r, "shares": tuple(k_full), "scale": m}
    # Level in the first data period is the earliest share times the effect.
    return _assemble_spec(
        gamma,
        PARAM_EFFECT_SHARES,
        tau,
        violations,
        violation_post,
        k_full[0] * tau,
        witness,
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def verify_dgp(
    spec: DgpSpec,
    gamma: ReducedForm,
    bounds,
    magnitude: RelativeMagnitude,
    tol: float = _VERIFY_TOL,
) -> tuple[bool, list[str]]:
    """Check a mean-path description against the observed reduced form and
    the maintained restrictions.  Everything is derived from the mean paths.

    Checks: (i) implied pre-trends and post-period contrast reproduce the
    reduced form; (ii) implied anticipation satisfies the calibration bounds
    (with a zero level in the first period where required); (iii) the
    post-period violation is within the magnitude cap of the largest
    pre-period violation; (iv) the decomposition identity returns ``tau``.

    Returns ``(ok, reasons)``; ``reasons`` lists every failed check.
    """
    reasons: list[str] = []
    if spec.n_pre != gamma.n_pre:
        return False, ["mean paths cover a different number of pre-trends"]

    treated = spec.treated_means
    trends = spec.untreated_trends
    implied_pre = [
        (treated[i + 1] - treated[i]) - trends[i] for i in range(gamma.n_pre)
    ]
    implied_theta = (treated[-1] - treated[-2]) - trends[-1]
    for s, (have, want) in enumerate(zip(implied_pre, gamma.pre_trends)):
        if abs(have - want) > tol:
            reasons.append(f"implied pre-trend {s} is {have}, observed {want}")
    if abs(implied_theta - gamma.theta1) > tol:
        reasons.append(f"implied post contrast {implied_theta} != {gamma.theta1}")

    levels = spec.anticipation_levels()
    increments = [levels[i + 1] - levels[i] for i in range(len(levels) - 1)]
    att = spec.att()

    if spec.parameterization in (PARAM_INCREMENTS, PARAM_PRETREND_SHARES):
        if abs(levels[0]) > tol:
            reasons.append(f"anticipation level in first period is {levels[0]}, not 0")
        if spec.parameterization == PARAM_INCREMENTS:
            box = bounds
        else:
            box = bounds.to_increment_bounds(gamma)
        for i, inc in enumerate(increments):
            lo, hi = box.lower[i], box.upper[i]
            if not (lo - tol <= inc <= hi + tol):
                reasons.append(f"increment {inc} at index {i} outside [{lo}, {hi}]")
    elif spec.parameterization == PARAM_EFFECT_SHARES:
        slack = tol * max(1.0, abs(att))
        for idx, level in enumerate(levels):
            lo_k, hi_k = bounds.lower[idx], bounds.upper[idx]
            if abs(att) <= tol:
                if abs(level) > slack:
                    reasons.append(
                        f"zero effect forces zero anticipation; level {level} at index {idx}"
                    )
                continue
            a, b = lo_k * att, hi_k * att
            lo_t, hi_t = (a, b) if a <= b else (b, a)
            if not (lo_t - slack <= level <= hi_t + slack):
                reasons.append(
                    f"anticipation level {level} at index {idx} outside share box"
                )
    else:
        reasons.append(f"unknown parameterization {spec.parameterization!r}")

    pre_v = spec.violations_pre()
    post_v = spec.violation_post()
    cap = magnitude.m * max(abs(v) for v in pre_v)
    if abs(post_v) > cap + tol * max(1.0, cap):
        reasons.append(
            f"post violation {post_v} exceeds magnitude cap {cap}"
        )

    recomposed = gamma.theta1 + levels[-1] - post_v
    if abs(recomposed - spec.tau) > tol * max(1.0, abs(spec.tau)):
        reasons.append(
            f"decomposition returns {recomposed}, target {spec.tau}"
        )
    return not reasons, reasons
