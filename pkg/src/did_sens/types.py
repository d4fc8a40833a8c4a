"""Shared domain types for DiD sensitivity analysis under joint relaxations.

The library works on a small reduced-form parameter: the consecutive
pre-treatment trend contrasts between the treated and comparison groups
("pre-trends"), plus the post-period difference-in-differences contrast.
Anticipation behaviour is restricted through one of three calibrations:

* absolute bounds on the period-to-period change of the anticipation level
  (:class:`AnticipationIncrementBounds`),
* the change expressed as a share of the same period's pre-trend
  (:class:`PretrendShareBounds`),
* the anticipation *level* expressed as a share of the treatment effect
  itself (:class:`TreatmentShareBounds`).

The post-period trend violation is capped at :class:`RelativeMagnitude` times
the largest implied pre-period violation.  All identified sets are closed
intervals (:class:`Interval`) with attainment metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class DidSensError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(DidSensError, ValueError):
    """Bound specification length does not match the reduced form."""


class InfeasibleSharesError(DidSensError, ValueError):
    """Treatment-share box admits a zero denominator; bounds would be infinite."""


class DegenerateShareError(DidSensError, ValueError):
    """Weighted treatment share is 0 or 1; group contrasts are undefined."""


class PanelFormatError(DidSensError, ValueError):
    """Panel input is malformed (diagnostics carry row numbers)."""


class InternalInvariantError(DidSensError, RuntimeError):
    """A computed quantity violated an internal invariant."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Reduced form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedForm:
    """Identifiable inputs: consecutive pre-trends plus the post-period contrast.

    ``pre_trends`` is ordered oldest to newest and indexed by event time
    ``-(S-1), ..., 0`` where ``S >= 1`` is the number of pre-trends.
    ``theta1`` is the post-period difference-in-differences contrast relative
    to event time 0.  All values are in outcome units.
    """

    pre_trends: tuple[float, ...]
    theta1: float

    def __post_init__(self) -> None:
        trends = tuple(_require_finite("pre_trend", v) for v in self.pre_trends)
        if len(trends) < 1:
            raise ValueError("at least one pre-trend is required")
        object.__setattr__(self, "pre_trends", trends)
        object.__setattr__(self, "theta1", _require_finite("theta1", self.theta1))

    @property
    def n_pre(self) -> int:
        """Number of observed pre-trends."""
        return len(self.pre_trends)

    def event_times(self) -> range:
        """Event times carrying a pre-trend: ``-(S-1), ..., 0``."""
        return range(-(self.n_pre - 1), 1)

    def pre_trend(self, s: int) -> float:
        """Pre-trend at event time ``s``."""
        idx = s + self.n_pre - 1
        if not 0 <= idx < self.n_pre:
            raise IndexError(f"event time {s} outside {list(self.event_times())}")
        return self.pre_trends[idx]

    def to_json(self) -> str:
        return json.dumps({"pre_trends": list(self.pre_trends), "theta1": self.theta1})

    @classmethod
    def from_json(cls, text: str) -> "ReducedForm":
        obj = json.loads(text)
        return cls(pre_trends=tuple(obj["pre_trends"]), theta1=obj["theta1"])


# ---------------------------------------------------------------------------
# Anticipation calibrations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnticipationIncrementBounds:
    """Known box bounds on each period-to-period anticipation increment.

    ``lower[i] <= increment at event time -(S-1)+i <= upper[i]`` (outcome
    units).  The anticipation level at the first period in the data is zero,
    so levels are telescoping sums of increments.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(_require_finite("lower", v) for v in self.lower)
        hi = tuple(_require_finite("upper", v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have equal length")
        if not lo:
            raise ValueError("at least one increment bound is required")
        for a, b in zip(lo, hi):
            if a > b:
                raise ValueError(f"lower bound {a} exceeds upper bound {b}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n_pre(self) -> int:
        return len(self.lower)

    @classmethod
    def zero(cls, n_pre: int) -> "AnticipationIncrementBounds":
        """No-anticipation benchmark: every increment pinned at zero."""
        return cls((0.0,) * n_pre, (0.0,) * n_pre)

    @classmethod
    def full_attribution(cls, gamma: ReducedForm) -> "AnticipationIncrementBounds":
        """Each pre-trend attributed entirely to anticipation."""
        return cls(gamma.pre_trends, gamma.pre_trends)

    @classmethod
    def limited(cls, gamma: ReducedForm, onset: int) -> "AnticipationIncrementBounds":
        """Anticipation pinned at zero up to event time ``onset`` and at the
        pre-trend afterwards (the conventional limited-anticipation benchmark;
        combine with a zero relative magnitude for point identification)."""
        lo = []
        for s in gamma.event_times():
            lo.append(gamma.pre_trend(s) if s > onset else 0.0)
        return cls(tuple(lo), tuple(lo))


@dataclass(frozen=True)
class PretrendShareBounds:
    """Each anticipation increment is a known-share multiple of its pre-trend.

    The share interval ``[lo, hi]`` is common to all pre-periods
    (dimensionless).  Shares outside ``[0, 1]`` are allowed: increment and
    trend violation may have opposite signs.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo = _require_finite("lo", self.lo)
        hi = _require_finite("hi", self.hi)
        if lo > hi:
            raise ValueError(f"lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def to_increment_bounds(self, gamma: ReducedForm) -> AnticipationIncrementBounds:
        """Equivalent absolute increment box: ``[min(lo*d, hi*d), max(lo*d, hi*d)]``
        per pre-trend ``d``.  A zero pre-trend forces a zero increment."""
        lows = []
        highs = []
        for d in gamma.pre_trends:
            a = self.lo * d
            b = self.hi * d
            if a <= b:
                lows.append(a)
                highs.append(b)
            else:
                lows.append(b)
                highs.append(a)
        return AnticipationIncrementBounds(tuple(lows), tuple(highs))


@dataclass(frozen=True)
class TreatmentShareBounds:
    """Anticipation levels as known-share multiples of the treatment effect.

    Shares are indexed by event time ``-S, ..., 0`` (one more entry than
    there are pre-trends, because the level in the first data period is also
    restricted).  Dimensionless.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(_require_finite("lower", v) for v in self.lower)
        hi = tuple(_require_finite("upper", v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have equal length")
        if len(lo) < 2:
            raise ValueError("treatment-share bounds need entries for event times -S..0")
        for a, b in zip(lo, hi):
            if a > b:
                raise ValueError(f"lower bound {a} exceeds upper bound {b}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n_pre(self) -> int:
        """Number of pre-trends this specification matches (= entries - 1)."""
        return len(self.lower) - 1

    def bounds_at(self, s: int) -> tuple[float, float]:
        """Share bounds at event time ``s`` in ``-S..0``."""
        idx = s + self.n_pre
        if not 0 <= idx < len(self.lower):
            raise IndexError(f"event time {s} outside -{self.n_pre}..0")
        return self.lower[idx], self.upper[idx]

    @classmethod
    def constant(cls, lo: float, hi: float, n_pre: int) -> "TreatmentShareBounds":
        """Same share interval in every period, for ``n_pre`` pre-trends."""
        return cls((lo,) * (n_pre + 1), (hi,) * (n_pre + 1))

    @classmethod
    def zero(cls, n_pre: int) -> "TreatmentShareBounds":
        return cls.constant(0.0, 0.0, n_pre)


@dataclass(frozen=True)
class RelativeMagnitude:
    """Cap on the post-period trend violation as a multiple of the largest
    implied pre-period violation (dimensionless, nonnegative)."""

    m: float

    def __post_init__(self) -> None:
        m = _require_finite("m", self.m)
        if m < 0:
            raise ValueError(f"relative magnitude must be nonnegative, got {m}")
        object.__setattr__(self, "m", m)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CornerWitness:
    """Where a bound is attained: pre-period event time plus corner values."""

    r: int
    corner: Mapping[str, float]


@dataclass(frozen=True)
class Interval:
    """Closed identified set ``[lb, ub]`` with attainment metadata.

    Ties across pre-periods are broken toward the lowest event time; the
    interval value itself is tie-invariant.
    """

    lb: float
    ub: float
    lb_witness: CornerWitness | None = None
    ub_witness: CornerWitness | None = None

    def __post_init__(self) -> None:
        if math.isnan(self.lb) or math.isnan(self.ub):
            raise ValueError("interval endpoints must not be NaN")
        if self.lb > self.ub:
            raise InternalInvariantError(f"lb {self.lb} exceeds ub {self.ub}")

    @property
    def width(self) -> float:
        return self.ub - self.lb

    @property
    def is_singleton(self) -> bool:
        return self.lb == self.ub

    def contains(self, value: float) -> bool:
        return self.lb <= value <= self.ub


class SinglePretrendCase(Enum):
    """Configuration of the identified set in the one-pre-trend design."""

    SAME_LOWER = "same_endpoint_lower"
    SAME_UPPER = "same_endpoint_upper"
    CROSS = "cross_endpoint"


@dataclass(frozen=True)
class WidthComparison:
    """Interval widths with and without an anticipation restriction, for the
    one-pre-trend design."""

    width_violations_only: float
    width_joint: float
    shorter: bool
    case: SinglePretrendCase


# ---------------------------------------------------------------------------
# Conclusions and frontiers
# ---------------------------------------------------------------------------

ATT_NEGATIVE = "att_negative"
ATT_ABOVE_THRESHOLD = "att_above_threshold"


@dataclass(frozen=True)
class Conclusion:
    """Qualitative conclusion whose robustness is traced.

    ``att_negative`` is the sign claim (effect strictly below zero);
    ``att_above_threshold`` claims the effect exceeds a finite ``tau``.
    """

    kind: str
    tau: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (ATT_NEGATIVE, ATT_ABOVE_THRESHOLD):
            raise ValueError(f"unknown conclusion kind {self.kind!r}")
        tau = float(self.tau)
        if self.kind == ATT_NEGATIVE and tau != 0.0:
            raise ValueError("att_negative carries no threshold")
        if not math.isfinite(tau):
            raise ValueError("threshold must be finite")
        object.__setattr__(self, "tau", tau)

    @classmethod
    def negative_effect(cls) -> "Conclusion":
        return cls(ATT_NEGATIVE)

    @classmethod
    def above(cls, tau: float) -> "Conclusion":
        return cls(ATT_ABOVE_THRESHOLD, tau)


FLAG_FINITE = "finite"
FLAG_UNBOUNDED = "unbounded"
FLAG_ERROR = "error"


@dataclass(frozen=True)
class FrontierGrid:
    """Breakdown values over a grid of sensitivity-parameter boxes.

    ``axis[j]`` is the ``(lo, hi)`` bound pair at point ``j``; ``values[j]``
    is the breakdown magnitude there (``inf`` allowed); ``flags[j]`` is
    ``finite``, ``unbounded``, or ``error`` (with detail in ``messages[j]``).
    A ``+inf`` value means no breakdown inside the admissible set, not
    unlimited robustness.
    """

    axis: tuple[tuple[float, float], ...]
    values: tuple[float, ...]
    flags: tuple[str, ...]
    messages: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.axis:
            raise ValueError("frontier grid needs at least one point")
        if len(self.axis) != len(self.values) or len(self.axis) != len(self.flags):
            raise ValueError("axis, values, and flags must have equal length")
        msgs = self.messages or ("",) * len(self.axis)
        if len(msgs) != len(self.axis):
            raise ValueError("messages length mismatch")
        object.__setattr__(self, "messages", tuple(msgs))
        for v, f in zip(self.values, self.flags):
            if f == FLAG_FINITE and not (math.isfinite(v) and v >= 0):
                raise InternalInvariantError(f"finite point carries value {v}")

    def capped_values(self, m_cap: float = 100.0) -> tuple[float, ...]:
        """Values with unbounded points replaced by ``m_cap`` (finite summaries
        only; the raw flags remain authoritative)."""
        return tuple(min(v, m_cap) if math.isfinite(v) else m_cap for v in self.values)

    def to_csv(self) -> str:
        lines = ["param_lo,param_hi,m_bp,unbounded_flag"]
        for (lo, hi), v, f in zip(self.axis, self.values, self.flags):
            val = "" if f == FLAG_ERROR else repr(v)
            lines.append(f"{lo!r},{hi!r},{val},{f}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "axis": [list(p) for p in self.axis],
                "values": [None if f == FLAG_ERROR else _json_float(v)
                           for v, f in zip(self.values, self.flags)],
                "flags": list(self.flags),
                "messages": list(self.messages),
            }
        )


def _json_float(v: float):
    """JSON-safe float: infinities as strings, finite values unchanged."""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v
