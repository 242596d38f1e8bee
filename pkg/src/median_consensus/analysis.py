"""Median oracle and trace metrics (settling, convergence, steady-state error).

All band checks are relative to the measurement median of the same step:
an agent is inside the band at step ``k`` when its distance to ``m(z^k)``
is at most ``tolerance * |m(z^k)|``. For even agent counts the median is
an interval and the distance to the interval is used (zero inside it).
When ``|m|`` falls below ``zero_floor`` the band switches to the absolute
``abs_tolerance``.

Settling and convergence times use sustained entry: the reported step is
the first one from which the condition holds until the end of the trace.
"""

from __future__ import annotations

import math
import statistics
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyInputError, StatsUndefinedError

DEFAULT_TOLERANCE = 0.05
ZERO_FLOOR = 1e-9
ABS_TOLERANCE = 1e-6


class SteadyStateWarning(UserWarning):
    """Steady-state window starts before the trace has settled."""


@dataclass(frozen=True)
class MedianResult:
    low: float
    high: float
    point: float

    def distance(self, v: float) -> float:
        return max(self.low - v, v - self.high, 0.0)


def median(z: Sequence[float]) -> MedianResult:
    """Median of ``z``; an interval ``[low, high]`` for even lengths.

    ``point`` is the interval midpoint.
    """
    s = sorted(float(v) for v in z)
    n = len(s)
    if n == 0:
        raise EmptyInputError("median of an empty vector")
    if n % 2:
        m = s[n // 2]
        return MedianResult(m, m, m)
    low, high = s[n // 2 - 1], s[n // 2]
    return MedianResult(low, high, (low + high) / 2)


def _median_columns(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = np.sort(z, axis=1)
    n = z.shape[1]
    if n % 2:
        m = s[:, n // 2]
        return m, m, m
    low, high = s[:, n // 2 - 1], s[:, n // 2]
    return low, high, (low + high) / 2


def _reference(point, zero_floor):
    """Magnitude used to scale relative errors (1.0 under the zero guard)."""
    mag = np.abs(point)
    return np.where(mag < zero_floor, 1.0, mag)


def _thresholds(point, tolerance, zero_floor, abs_tolerance):
    mag = np.abs(point)
    return np.where(mag < zero_floor, abs_tolerance, tolerance * mag)


def row_errors(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Per-step max distance of any agent from the median interval."""
    low, high, _ = _median_columns(z)
    d = np.maximum(np.maximum(low[:, None] - x, x - high[:, None]), 0.0)
    return d.max(axis=1)


def _sustained_start(ok: np.ndarray, offset: int = 0) -> Optional[int]:
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return offset
    last = int(bad[-1])
    if last == ok.size - 1:
        return None
    return offset + last + 1


def settling_time(
    trace,
    tolerance: float = DEFAULT_TOLERANCE,
    zero_floor: float = ZERO_FLOOR,
    abs_tolerance: float = ABS_TOLERANCE,
) -> Optional[int]:
    """First step from which every agent stays within the band; None if never."""
    _, _, point = _median_columns(trace.z)
    ok = row_errors(trace.x, trace.z) <= _thresholds(point, tolerance, zero_floor, abs_tolerance)
    return _sustained_start(ok, getattr(trace, "start", 0))


def convergence_time(
    trace,
    tolerance: float = DEFAULT_TOLERANCE,
    zero_floor: float = ZERO_FLOOR,
    abs_tolerance: float = ABS_TOLERANCE,
) -> Optional[int]:
    """First step from which the spread ``max x - min x`` stays within the band."""
    _, _, point = _median_columns(trace.z)
    spread = trace.x.max(axis=1) - trace.x.min(axis=1)
    ok = spread <= _thresholds(point, tolerance, zero_floor, abs_tolerance)
    return _sustained_start(ok, getattr(trace, "start", 0))


def default_window(total_steps: int, cycle: int) -> tuple[int, int]:
    """Row range ``[start, stop)`` covering the final full communication cycle."""
    stop = total_steps + 1
    return max(0, stop - cycle), stop


def steady_state_error(
    trace,
    window: Optional[tuple[int, int]] = None,
    zero_floor: float = ZERO_FLOOR,
    settled_at: Optional[int] = -1,
) -> float:
    """Max relative distance of any agent from the median over ``window``.

    ``window`` is a ``[start, stop)`` step range, defaulting to the last
    communication cycle. Emits :class:`SteadyStateWarning` if the window
    begins before the settling time. Pass ``settled_at`` to skip
    recomputing it (None means never settled).
    """
    first = getattr(trace, "start", 0)
    last = first + trace.x.shape[0] - 1
    if window is None:
        window = default_window(last, trace.n)
    start, stop = window
    if not (first <= start < stop <= last + 1):
        raise ValueError(f"window {window} outside trace steps {first}..{last}")
    if settled_at == -1:
        settled_at = settling_time(trace)
    if settled_at is None or start < settled_at:
        warnings.warn(
            f"steady-state window starts at {start} before settling ({settled_at})",
            SteadyStateWarning,
            stacklevel=2,
        )
    x, z = trace.x[start - first:stop - first], trace.z[start - first:stop - first]
    _, _, point = _median_columns(z)
    return float((row_errors(x, z) / _reference(point, zero_floor)).max())


@dataclass(frozen=True)
class MetricsReport:
    t_s: Optional[int]
    t_c: Optional[int]
    epsilon_ss: float
    band: float
    window: tuple[int, int]
    total_steps: int
    window_after_settle: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["window"] = tuple(d["window"])
        return cls(**d)


def compute_metrics(
    trace,
    tolerance: float = DEFAULT_TOLERANCE,
    window: Optional[tuple[int, int]] = None,
    zero_floor: float = ZERO_FLOOR,
    abs_tolerance: float = ABS_TOLERANCE,
) -> MetricsReport:
    total = getattr(trace, "start", 0) + trace.x.shape[0] - 1
    if window is None:
        window = default_window(total, trace.n)
    t_s = settling_time(trace, tolerance, zero_floor, abs_tolerance)
    t_c = convergence_time(trace, tolerance, zero_floor, abs_tolerance)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SteadyStateWarning)
        eps = steady_state_error(trace, window, zero_floor, settled_at=t_s)
    return MetricsReport(
        t_s=t_s,
        t_c=t_c,
        epsilon_ss=eps,
        band=tolerance,
        window=tuple(window),
        total_steps=total,
        window_after_settle=t_s is not None and window[0] >= t_s,
    )


class StreamingMetrics:
    """Row-by-row equivalent of :func:`compute_metrics` that keeps no trace.

    Feed rows ``k = 0 .. total_steps`` in order through :meth:`update`.
    """

    def __init__(
        self,
        n: int,
        total_steps: int,
        tolerance: float = DEFAULT_TOLERANCE,
        window: Optional[tuple[int, int]] = None,
        zero_floor: float = ZERO_FLOOR,
        abs_tolerance: float = ABS_TOLERANCE,
    ):
        self.n = n
        self.total_steps = total_steps
        self.tolerance = tolerance
        self.window = tuple(window) if window is not None else default_window(total_steps, n)
        self.zero_floor = zero_floor
        self.abs_tolerance = abs_tolerance
        self._last_bad_s = -1
        self._last_bad_c = -1
        self._eps = None
        self._rows = 0

    def update(self, k: int, x: Sequence[float], z: Sequence[float]) -> None:
        if k != self._rows:
            raise ValueError(f"expected row {self._rows}, got {k}")
        self._rows += 1
        s = sorted(z)
        n = len(s)
        if n % 2:
            low = high = point = s[n // 2]
        else:
            low, high = s[n // 2 - 1], s[n // 2]
            point = (low + high) / 2
        err = max(max(low - v, v - high, 0.0) for v in x)
        mag = abs(point)
        thr = self.abs_tolerance if mag < self.zero_floor else self.tolerance * mag
        if not err <= thr:
            self._last_bad_s = k
        if not max(x) - min(x) <= thr:
            self._last_bad_c = k
        start, stop = self.window
        if start <= k < stop:
            rel = err / (1.0 if mag < self.zero_floor else mag)
            if self._eps is None or rel > self._eps:
                self._eps = rel

    def _start(self, last_bad):
        if last_bad == -1:
            return 0
        if last_bad == self.total_steps:
            return None
        return last_bad + 1

    def report(self) -> MetricsReport:
        if self._rows != self.total_steps + 1:
            raise ValueError(f"saw {self._rows} rows, expected {self.total_steps + 1}")
        t_s = self._start(self._last_bad_s)
        return MetricsReport(
            t_s=t_s,
            t_c=self._start(self._last_bad_c),
            epsilon_ss=float(self._eps),
            band=self.tolerance,
            window=self.window,
            total_steps=self.total_steps,
            window_after_settle=t_s is not None and self.window[0] >= t_s,
        )


@dataclass(frozen=True)
class EnsembleStats:
    mean: float
    std: float
    count: int
    not_reached: int


def ensemble_stats(values: Iterable[Optional[float]]) -> EnsembleStats:
    """Sample mean and standard deviation (n-1 denominator) of reached values.

    ``None`` entries count as not reached and are excluded. A single
    reached value has standard deviation 0.
    """
    values = list(values)
    reached = [float(v) for v in values if v is not None and not math.isnan(v)]
    missing = len(values) - len(reached)
    if not reached:
        raise StatsUndefinedError(f"no reached values among {len(values)} runs")
    std = statistics.stdev(reached) if len(reached) > 1 else 0.0
    return EnsembleStats(statistics.fmean(reached), std, len(reached), missing)
