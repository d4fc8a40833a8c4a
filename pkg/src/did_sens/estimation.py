"""Panel ingestion, reduced-form moments, and cluster-weighted bootstraps.

The reduced form is built from three weighted moments per period pair: the
mean outcome change interacted with the treated indicator, interacted with
the untreated indicator, and the treated share.  Weights act at the cluster
level: one weight per cluster applied to all of that cluster's units.

Bootstrap draws re-weight clusters with normalized standard-exponential
variates (posterior draws) or resample clusters with replacement (frequentist
comparison).  Randomness comes from a counter-based generator consumed in
sorted cluster-id order, so row order and thread count never change results.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .types import DegenerateShareError, PanelFormatError, ReducedForm

__all__ = [
    "PanelDataset",
    "PosteriorDraws",
    "PosteriorSummary",
    "compute_reduced_form",
    "bayesian_bootstrap",
    "cluster_bootstrap",
    "posterior_summary",
    "write_draws_csv",
    "read_draws_csv",
    "write_draws_binary",
]

PANEL_COLUMNS = ("unit_id", "cluster_id", "time", "y", "treated")

#: Redraws allowed per requested draw before giving up on degenerate resamples.
REDRAW_CAP_FACTOR = 100


# ---------------------------------------------------------------------------
# Panel data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PanelDataset:
    """Long-format panel: one row per (unit, period).

    Treatment status and cluster membership are unit attributes and must be
    constant within unit; each (unit, time) pair appears at most once; both
    treated and untreated units must be present.  Periods are integer indices
    with the post period at the maximum.
    """

    unit_ids: tuple
    cluster_ids: tuple
    times: tuple[int, ...]
    y: tuple[float, ...]
    treated: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.unit_ids)
        if n == 0:
            raise PanelFormatError("panel has no rows")
        for name in ("cluster_ids", "times", "y", "treated"):
            if len(getattr(self, name)) != n:
                raise PanelFormatError(f"column {name} has wrong length")
        object.__setattr__(self, "times", tuple(int(t) for t in self.times))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        object.__setattr__(self, "treated", tuple(int(x) for x in self.treated))
        for i, v in enumerate(self.y):
            if not math.isfinite(v):
                raise PanelFormatError(f"row {i}: outcome is not finite")
        for i, x in enumerate(self.treated):
            if x not in (0, 1):
                raise PanelFormatError(f"row {i}: treated must be 0 or 1, got {x}")
        seen: dict = {}
        unit_treated: dict = {}
        unit_cluster: dict = {}
        for i, (u, c, t, x) in enumerate(
            zip(self.unit_ids, self.cluster_ids, self.times, self.treated)
        ):
            key = (u, t)
            if key in seen:
                raise PanelFormatError(
                    f"row {i}: duplicate observation for unit {u!r} at time {t} "
                    f"(first at row {seen[key]})"
                )
            seen[key] = i
            if u in unit_treated and unit_treated[u] != x:
                raise PanelFormatError(f"row {i}: treated flips within unit {u!r}")
            if u in unit_cluster and unit_cluster[u] != c:
                raise PanelFormatError(f"row {i}: cluster flips within unit {u!r}")
            unit_treated[u] = x
            unit_cluster[u] = c
        marks = set(unit_treated.values())
        if marks != {0, 1}:
            raise PanelFormatError("panel needs both treated and untreated units")

    @property
    def n_rows(self) -> int:
        return len(self.unit_ids)

    def sorted_cluster_ids(self) -> list:
        return sorted(set(self.cluster_ids))

    @classmethod
    def from_csv(cls, path) -> "PanelDataset":
        """Read `unit_id,cluster_id,time,y,treated` (UTF-8).  Parse failures
        raise :class:`PanelFormatError` carrying the file line number."""
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_csv_text(text)

    @classmethod
    def from_csv_text(cls, text: str) -> "PanelDataset":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("empty panel file") from None
        if tuple(h.strip() for h in header) != PANEL_COLUMNS:
            raise PanelFormatError(
                f"line 1: header must be {','.join(PANEL_COLUMNS)}, got {','.join(header)}"
            )
        units, clusters, times, ys, treated = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise PanelFormatError(f"line {lineno}: expected 5 fields, got {len(row)}")
            u, c, t, yv, x = (f.strip() for f in row)
            try:
                t_int = int(t)
            except ValueError:
                raise PanelFormatError(f"line {lineno}: time {t!r} is not an integer") from None
            try:
                y_val = float(yv)
            except ValueError:
                raise PanelFormatError(f"line {lineno}: outcome {yv!r} is not a number") from None
            if not math.isfinite(y_val):
                raise PanelFormatError(f"line {lineno}: outcome {yv!r} is not finite")
            if x not in ("0", "1"):
                raise PanelFormatError(f"line {lineno}: treated {x!r} must be 0 or 1")
            units.append(u)
            clusters.append(c)
            times.append(t_int)
            ys.append(y_val)
            treated.append(int(x))
        return cls(tuple(units), tuple(clusters), tuple(times), tuple(ys), tuple(treated))


# ---------------------------------------------------------------------------
# Cluster sufficient statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _ClusterStats:
    """Per-cluster sums that are sufficient for every reduced-form moment."""

    window: tuple[int, ...]          # period indices used, oldest..post
    cluster_ids: tuple               # sorted
    n_units: np.ndarray              # (C,)
    sum_x: np.ndarray                # (C,)
    sum_dy_treated: np.ndarray       # (C, S+1)
    sum_dy_untreated: np.ndarray     # (C, S+1)

    @property
    def n_pre(self) -> int:
        return len(self.window) - 2


def _estimation_window(data: PanelDataset, n_pre_trends: int | None) -> tuple[int, ...]:
    times = sorted(set(data.times))
    if n_pre_trends is None:
        n_pre_trends = len(times) - 2
    if n_pre_trends < 1:
        raise PanelFormatError("estimation needs at least one pre-trend (3 periods)")
    need = n_pre_trends + 2
    if len(times) < need:
        raise PanelFormatError(
            f"{need} periods required for {n_pre_trends} pre-trends, panel has {len(times)}"
        )
    window = times[-need:]
    for a, b in zip(window, window[1:]):
        if b - a != 1:
            raise PanelFormatError(
                f"periods used must be consecutive integers, got gap {a} -> {b}"
            )
    return tuple(window)


def _cluster_stats(data: PanelDataset, n_pre_trends: int | None) -> _ClusterStats:
    window = _estimation_window(data, n_pre_trends)
    w_index = {t: k for k, t in enumerate(window)}
    n_periods = len(window)

    unit_rows: dict = {}
    unit_treated: dict = {}
    unit_cluster: dict = {}
    for u, c, t, yv, x in zip(data.unit_ids, data.cluster_ids, data.times, data.y, data.treated):
        unit_treated[u] = x
        unit_cluster[u] = c
        if t in w_index:
            unit_rows.setdefault(u, {})[t] = yv

    incomplete = [
        u for u in unit_treated
        if len(unit_rows.get(u, {})) != n_periods
    ]
    if incomplete:
        sample = ", ".join(repr(u) for u in sorted(incomplete, key=str)[:5])
        raise PanelFormatError(
            f"unbalanced panel: {len(incomplete)} unit(s) missing periods "
            f"{list(window)} (e.g. {sample}); complete consecutive differences "
            "are required"
        )

    clusters = data.sorted_cluster_ids()
    c_index = {c: k for k, c in enumerate(clusters)}
    C = len(clusters)
    n_units = np.zeros(C)
    sum_x = np.zeros(C)
    sum_dy_t = np.zeros((C, n_periods - 1))
    sum_dy_u = np.zeros((C, n_periods - 1))
    # Accumulate in sorted unit order so row order never changes the sums.
    for u in sorted(unit_rows, key=str):
        rows = unit_rows[u]
        k = c_index[unit_cluster[u]]
        levels = np.array([rows[t] for t in window])
        dy = np.diff(levels)
        n_units[k] += 1.0
        if unit_treated[u] == 1:
            sum_x[k] += 1.0
            sum_dy_t[k] += dy
        else:
            sum_dy_u[k] += dy
    return _ClusterStats(window, tuple(clusters), n_units, sum_x, sum_dy_t, sum_dy_u)


def _combine_row(stats: _ClusterStats, v: np.ndarray) -> np.ndarray:
    """Reduced-form vector from one cluster weight row of shape (C,)."""
    # The contrasts depend on weights only through ratios; rescaling by the
    # maximum keeps them well-conditioned and maps every uniform row to
    # exactly ones, so forced-uniform draws reproduce the plug-in bitwise.
    peak = v.max()
    if peak <= 0:
        raise DegenerateShareError("total weight mass is zero")
    v = v / peak
    total = v @ stats.n_units
    tx = v @ stats.sum_x
    if total <= 0:
        raise DegenerateShareError("total weight mass is zero")
    if tx <= 0 or total - tx <= 0:
        raise DegenerateShareError("weighted treatment share is 0 or 1")
    m1 = v @ stats.sum_dy_treated
    m0 = v @ stats.sum_dy_untreated
    return m1 / tx - m0 / (total - tx)


def _combine(stats: _ClusterStats, v: np.ndarray) -> np.ndarray:
    """Reduced-form vector(s) from cluster weight row(s) of shape (..., C).

    Rows are processed one at a time so a draw computed inside a batch is
    bitwise identical to the same weights passed through
    :func:`compute_reduced_form` (batched BLAS products associate reductions
    differently from single-row ones).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return _combine_row(stats, v)
    return np.stack([_combine_row(stats, row) for row in v])


def _degenerate_mask(stats: _ClusterStats, v: np.ndarray) -> np.ndarray:
    total = v @ stats.n_units
    tx = v @ stats.sum_x
    return (total <= 0) | (tx <= 0) | (total - tx <= 0)


def compute_reduced_form(
    data: PanelDataset,
    weights: Mapping | Sequence | np.ndarray | None = None,
    n_pre_trends: int | None = None,
) -> ReducedForm:
    """Weighted reduced form: pre-trends for the consecutive pre-period pairs
    plus the post-period contrast.

    ``weights`` is one nonnegative weight per cluster, either a mapping from
    cluster id or a sequence aligned with the sorted cluster ids; ``None``
    means equal weights.  By default all periods in the panel are used
    (``n_pre_trends = periods - 2``); pass ``n_pre_trends`` to restrict to
    the latest periods.  Every unit must be observed in every period used.
    """
    stats = _cluster_stats(data, n_pre_trends)
    v = _resolve_weights(stats, weights)
    gam = _combine(stats, v)
    return ReducedForm(pre_trends=tuple(gam[:-1]), theta1=float(gam[-1]))


def _resolve_weights(stats: _ClusterStats, weights) -> np.ndarray:
    C = len(stats.cluster_ids)
    if weights is None:
        return np.ones(C)
    if isinstance(weights, Mapping):
        missing = [c for c in stats.cluster_ids if c not in weights]
        if missing:
            raise ValueError(f"weights missing for clusters {missing[:5]}")
        v = np.array([float(weights[c]) for c in stats.cluster_ids])
    else:
        v = np.asarray(weights, dtype=float)
        if v.shape != (C,):
            raise ValueError(f"expected {C} cluster weights, got shape {v.shape}")
    if np.any(~np.isfinite(v)) or np.any(v < 0):
        raise ValueError("cluster weights must be finite and nonnegative")
    if v.sum() <= 0:
        raise ValueError("cluster weights must have positive total mass")
    return v


# ---------------------------------------------------------------------------
# Bootstrap draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorDraws:
    """Joint draws of the reduced form.

    ``draws[b]`` holds the pre-trends (oldest to newest) followed by the
    post-period contrast.  ``pre_trend_times`` are the matching event times.
    """

    draws: np.ndarray
    seed: int
    pre_trend_times: tuple[int, ...]
    weight_level: str = "cluster"
    kind: str = "bayesian_bootstrap"
    n_rejected: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.draws, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("draws must be a (B, coords) matrix with B >= 1")
        if arr.shape[1] != len(self.pre_trend_times) + 1:
            raise ValueError("draw width must equal number of pre-trends + 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("draws must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "draws", arr)

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(f"delta_{t}" for t in self.pre_trend_times) + ("theta1",)

    def reduced_form(self, b: int) -> ReducedForm:
        row = self.draws[b]
        return ReducedForm(pre_trends=tuple(row[:-1]), theta1=float(row[-1]))


def _rng(seed: int) -> np.random.Generator:
    # Counter-based generator: substreams are positional, so consuming one
    # block per draw in sorted cluster order is order- and thread-stable.
    return np.random.Generator(np.random.Philox(seed))


def bayesian_bootstrap(
    data: PanelDataset,
    n_draws: int,
    seed: int,
    n_pre_trends: int | None = None,
    variates: np.ndarray | None = None,
) -> PosteriorDraws:
    """Posterior draws of the reduced form from exponential cluster weights.

    Each draw assigns one standard-exponential variate per cluster (sorted
    cluster-id order), normalizes them to sum to one, and applies the
    cluster's weight to all of its units.  Draws with a degenerate weighted
    treatment share are rejected and redrawn, up to ``100 * n_draws``
    rejections in total.  ``variates`` is a test hook that substitutes a
    fixed (n_draws, clusters) matrix for the random ones.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    stats = _cluster_stats(data, n_pre_trends)
    C = len(stats.cluster_ids)
    rng = _rng(seed)

    if variates is not None:
        v = np.asarray(variates, dtype=float)
        if v.shape != (n_draws, C):
            raise ValueError(f"variates must have shape ({n_draws}, {C})")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("variates must be finite and nonnegative")
        weights = v / v.sum(axis=1, keepdims=True)
        gam = _combine(stats, weights)
        return PosteriorDraws(
            gam, seed, _pre_trend_times(stats), kind="bayesian_bootstrap"
        )

    v = rng.standard_exponential((n_draws, C))
    n_rejected = 0
    cap = REDRAW_CAP_FACTOR * n_draws
    while True:
        bad = np.flatnonzero(_degenerate_mask(stats, v))
        if bad.size == 0:
            break
        n_rejected += bad.size
        if n_rejected > cap:
            raise DegenerateShareError(
                f"gave up after {n_rejected} degenerate bootstrap draws "
                f"(cap {cap}); the panel's treatment split cannot support "
                "cluster re-weighting"
            )
        v[bad] = rng.standard_exponential((bad.size, C))
    weights = v / v.sum(axis=1, keepdims=True)
    gam = _combine(stats, weights)
    return PosteriorDraws(
        gam, seed, _pre_trend_times(stats), kind="bayesian_bootstrap",
        n_rejected=n_rejected,
    )


def cluster_bootstrap(
    data: PanelDataset,
    n_draws: int,
    seed: int,
    n_pre_trends: int | None = None,
) -> PosteriorDraws:
    """Frequentist comparison: resample clusters with replacement, equal mass.

    Returns draws in the same shape as :func:`bayesian_bootstrap`; percentile
    intervals are computed downstream with :func:`posterior_summary`.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    stats = _cluster_stats(data, n_pre_trends)
    C = len(stats.cluster_ids)
    if C < 2:
        raise ValueError("cluster bootstrap requires at least two clusters")
    rng = _rng(seed)

    def draw_counts(k: int) -> np.ndarray:
        idx = rng.integers(0, C, size=(k, C))
        counts = np.zeros((k, C))
        for b in range(k):
            counts[b] = np.bincount(idx[b], minlength=C)
        return counts

    v = draw_counts(n_draws)
    n_rejected = 0
    cap = REDRAW_CAP_FACTOR * n_draws
    while True:
        bad = np.flatnonzero(_degenerate_mask(stats, v))
        if bad.size == 0:
            break
        n_rejected += bad.size
        if n_rejected > cap:
            raise DegenerateShareError(
                f"gave up after {n_rejected} degenerate cluster resamples (cap {cap})"
            )
        v[bad] = draw_counts(bad.size)
    gam = _combine(stats, v)
    return PosteriorDraws(
        gam, seed, _pre_trend_times(stats), kind="cluster_bootstrap",
        n_rejected=n_rejected,
    )


def _pre_trend_times(stats: _ClusterStats) -> tuple[int, ...]:
    return tuple(range(-(stats.n_pre - 1), 1))


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorSummary:
    """Coordinate-wise posterior medians and equal-tailed intervals."""

    names: tuple[str, ...]
    median: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    alpha: float


def posterior_summary(draws: PosteriorDraws, alpha: float) -> PosteriorSummary:
    """Medians and equal-tailed ``[alpha/2, 1 - alpha/2]`` intervals.

    Quantiles use linear interpolation between order statistics.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    arr = draws.draws
    med = np.median(arr, axis=0)
    lo = np.quantile(arr, alpha / 2.0, axis=0)
    hi = np.quantile(arr, 1.0 - alpha / 2.0, axis=0)
    return PosteriorSummary(
        draws.column_names, tuple(med), tuple(lo), tuple(hi), alpha
    )


# ---------------------------------------------------------------------------
# Draw file formats
# ---------------------------------------------------------------------------

def write_draws_csv(draws: PosteriorDraws) -> str:
    """One row per draw, shortest round-trip float formatting."""
    lines = [",".join(draws.column_names)]
    for row in draws.draws:
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def read_draws_csv(text: str, seed: int = 0) -> PosteriorDraws:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    names = tuple(h.strip() for h in header)
    if not names or names[-1] != "theta1":
        raise PanelFormatError("draws file must end with a theta1 column")
    times = []
    for h in names[:-1]:
        if not h.startswith("delta_"):
            raise PanelFormatError(f"unexpected draws column {h!r}")
        times.append(int(h[len("delta_"):]))
    rows = [[float(x) for x in row] for row in reader if row]
    return PosteriorDraws(np.array(rows), seed, tuple(times))


def write_draws_binary(draws: PosteriorDraws, bin_path, meta_path=None) -> None:
    """Compact column format: float64, little-endian, column-major, with a
    JSON sidecar recording shape and column names."""
    bin_path = Path(bin_path)
    meta_path = Path(meta_path) if meta_path is not None else bin_path.with_suffix(
        bin_path.suffix + ".json"
    )
    arr = np.asarray(draws.draws, dtype="<f8")
    bin_path.write_bytes(np.asfortranarray(arr).tobytes(order="F"))
    meta = {
        "dtype": "float64",
        "byte_order": "little",
        "layout": "column-major",
        "shape": list(arr.shape),
        "columns": list(draws.column_names),
        "seed": draws.seed,
        "kind": draws.kind,
        "n_rejected": draws.n_rejected,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
