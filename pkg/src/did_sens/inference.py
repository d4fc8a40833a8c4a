"""Posterior uncertainty summaries for frontiers and identified sets.

The simultaneous lower band centers on per-point posterior medians, scales by
per-point posterior standard deviations, and shifts down by the posterior
quantile of the largest standardized downward deviation across the grid; by
construction the whole frontier lies above the band with posterior
probability at least the nominal level.  Pointwise credible sets enlarge the
median interval symmetrically until the containment quantile is reached.

Critical values use the inverse-ECDF quantile (the smallest value whose
empirical posterior probability reaches the level); interpolated quantiles
can undershoot the guaranteed-coverage property on small draw sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .types import FLAG_FINITE, FLAG_UNBOUNDED

__all__ = [
    "LowerBand",
    "CredibleSet",
    "simultaneous_lower_band",
    "pointwise_credible_set",
    "inner_robust_region",
    "FLAG_DEGENERATE_SCALE",
]

FLAG_DEGENERATE_SCALE = "degenerate_scale"

#: Scales below this are treated as exactly zero (degenerate points).
SCALE_TOL = 1e-12


def quantile_at_level(values: np.ndarray, level: float) -> float:
    """Smallest value whose empirical probability weakly exceeds ``level``."""
    return float(np.quantile(np.asarray(values, dtype=float), level, method="inverted_cdf"))


@dataclass(frozen=True)
class LowerBand:
    """Simultaneous lower credible band for a breakdown frontier.

    ``band[j] = center[j] - critical * scale[j]`` at active grid points;
    points whose posterior median is infinite are flagged ``unbounded`` and
    excluded from the deviation maximization (their band is undefined and
    stored as NaN).  ``mean`` is the per-point posterior mean, computed
    alongside the median but not used in the deviation statistic.
    """

    grid: tuple
    center: tuple[float, ...]
    mean: tuple[float, ...]
    scale: tuple[float, ...]
    critical: float
    band: tuple[float, ...]
    flags: tuple[str, ...]
    alpha: float
    n_hard_violations: int = 0

    def __post_init__(self) -> None:
        if self.critical < 0:
            raise ValueError("critical value must be nonnegative")
        for c, s, b, f in zip(self.center, self.scale, self.band, self.flags):
            if f == FLAG_UNBOUNDED:
                continue
            if s > 0 and not b <= c:
                raise ValueError("band must not exceed its center")


def simultaneous_lower_band(
    frontier_draws: np.ndarray,
    alpha: float,
    grid: tuple | None = None,
) -> LowerBand:
    """Lower band below which the whole frontier falls with posterior
    probability at most ``alpha``.

    ``frontier_draws`` is a (draws, grid points) matrix of breakdown values;
    ``+inf`` entries are allowed.  Per point: the center is the posterior
    median and the scale the posterior standard deviation (infinite draws
    winsorized to the largest finite draw for the scale only).  Per draw, the
    deviation statistic is the largest standardized drop below the centers,
    clipped at zero; infinite draws therefore contribute nothing.  The
    critical value is the inverse-ECDF posterior quantile of the deviations,
    which makes the coverage hold on the supplied draws by construction
    (``band = center - critical * scale`` up to a sub-ulp tightening that
    keeps the recomposed band consistent with the deviation guarantee).

    Points where the posterior median itself is infinite are flagged
    ``unbounded`` and excluded; if every point is excluded there is nothing
    to band and a ``ValueError`` is raised.  Points with (numerically) zero
    scale contribute nothing when the draw is at or above the center; draws
    below the center at such points are counted as hard violations.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    draws = np.asarray(frontier_draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] < 2:
        raise ValueError("frontier draws must be a (B, J) matrix with B >= 2")
    if np.any(np.isnan(draws)) or np.any(np.isneginf(draws)):
        raise ValueError("frontier draws must be >= 0 (NaN and -inf not allowed)")
    B, J = draws.shape
    grid_labels = tuple(grid) if grid is not None else tuple(range(J))
    if len(grid_labels) != J:
        raise ValueError("grid labels must match the number of columns")

    center = np.median(draws, axis=0)
    active = np.isfinite(center)
    if not np.any(active):
        raise ValueError(
            "every grid point has an infinite posterior median; no band exists"
        )

    # Winsorize infinite draws to the largest finite draw, per column, for the
    # scale only; deviations below already clip infinite draws to zero.
    wins = draws.copy()
    for j in range(J):
        col = wins[:, j]
        inf_mask = np.isinf(col)
        if inf_mask.any():
            finite = col[~inf_mask]
            col[inf_mask] = finite.max() if finite.size else 0.0
    mean = wins.mean(axis=0)
    scale = wins.std(axis=0)  # 1/B convention

    degenerate = active & (scale < SCALE_TOL)
    usable = active & ~degenerate

    dev = np.zeros((B, J))
    if np.any(usable):
        gaps = center[usable][None, :] - draws[:, usable]
        dev[:, usable] = np.clip(gaps / scale[usable][None, :], 0.0, None)
    n_hard = int(np.sum(draws[:, degenerate] < center[degenerate][None, :])) if np.any(
        degenerate
    ) else 0

    per_draw = dev[:, active].max(axis=1) if np.any(active) else np.zeros(B)
    critical = quantile_at_level(per_draw, 1.0 - alpha)

    band = np.where(active, center - critical * scale, np.nan)
    # Numerical consistency with the deviation guarantee: every draw whose
    # deviation is within the critical value must lie weakly above the band.
    # Recomposing center - c*s can land an ulp above such a draw, so tighten
    # by the covered draws' minimum (a sub-ulp adjustment at most).
    covered = per_draw <= critical
    if covered.any():
        floor = draws[covered].min(axis=0)
        band = np.where(usable, np.minimum(band, floor), band)
    flags = []
    for j in range(J):
        if not active[j]:
            flags.append(FLAG_UNBOUNDED)
        elif degenerate[j]:
            flags.append(FLAG_DEGENERATE_SCALE)
        else:
            flags.append(FLAG_FINITE)
    return LowerBand(
        grid=grid_labels,
        center=tuple(center),
        mean=tuple(mean),
        scale=tuple(scale),
        critical=critical,
        band=tuple(band),
        flags=tuple(flags),
        alpha=alpha,
        n_hard_violations=n_hard,
    )


@dataclass(frozen=True)
class CredibleSet:
    """Credible set for an identified set at fixed sensitivity parameters:
    the median interval enlarged symmetrically by ``enlargement``."""

    center_lb: float
    center_ub: float
    enlargement: float
    lb: float
    ub: float
    alpha: float

    def __post_init__(self) -> None:
        if self.enlargement < 0:
            raise ValueError("enlargement must be nonnegative")
        if not (self.lb <= self.center_lb and self.center_ub <= self.ub):
            raise ValueError("credible set must contain its center interval")

    def contains_interval(self, lb: float, ub: float) -> bool:
        return self.lb <= lb and ub <= self.ub


def pointwise_credible_set(
    lower_draws: np.ndarray, upper_draws: np.ndarray, alpha: float
) -> CredibleSet:
    """Smallest symmetric enlargement of the median interval that contains
    the identified set with posterior probability at least ``1 - alpha``.

    The per-draw requirement ``max(center_lb - L, U - center_ub, 0)`` is the
    minimal enlargement containing that draw's interval; the credible set
    uses its inverse-ECDF posterior quantile, so the containment fraction on
    the supplied draws is at least the nominal level by construction.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    lo = np.asarray(lower_draws, dtype=float)
    hi = np.asarray(upper_draws, dtype=float)
    if lo.size == 0 or lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("lower and upper draw vectors must be equal-length and nonempty")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("interval draws must be finite")
    center_lb = float(np.median(lo))
    center_ub = float(np.median(hi))
    need = np.maximum.reduce([center_lb - lo, hi - center_ub, np.zeros_like(lo)])
    c = quantile_at_level(need, 1.0 - alpha)
    # As with the lower band: keep the set numerically consistent with the
    # enlargement guarantee on the supplied draws (sub-ulp adjustment).
    covered = need <= c
    result_lb = min(center_lb - c, float(lo[covered].min()))
    result_ub = max(center_ub + c, float(hi[covered].max()))
    return CredibleSet(
        center_lb=center_lb,
        center_ub=center_ub,
        enlargement=c,
        lb=result_lb,
        ub=result_ub,
        alpha=alpha,
    )


def inner_robust_region(band: LowerBand) -> Callable[[int, float], bool]:
    """Membership predicate for the inner credible set of the robust region:
    a (grid point, magnitude) pair belongs iff the magnitude is strictly
    below the band there.

    Flagged points (unbounded median) make no claim and are never members,
    which keeps the region inside the true robust region with the band's
    posterior probability.
    """
    values = band.band
    flags = band.flags

    def member(j: int, magnitude: float) -> bool:
        if not 0 <= j < len(values):
            raise IndexError(f"grid point {j} outside 0..{len(values) - 1}")
        if flags[j] != FLAG_FINITE and flags[j] != FLAG_DEGENERATE_SCALE:
            return False
        v = values[j]
        return bool(magnitude < v) if not math.isnan(v) else False

    return member
