"""Deterministic per-agent measurement generators, indexed by step."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import ConfigurationError, InvalidParameterError


@dataclass(frozen=True)
class Constant:
    value: float

    kind = "constant"

    def __call__(self, k: int) -> float:
        return self.value


@dataclass(frozen=True)
class Step:
    """Holds ``initial`` before ``step_time`` and ``final`` from it onward."""

    initial: float
    final: float
    step_time: int

    kind = "step"

    def __post_init__(self):
        if self.step_time < 0:
            raise InvalidParameterError(f"step_time must be >= 0, got {self.step_time}")

    def __call__(self, k: int) -> float:
        return self.final if k >= self.step_time else self.initial


@dataclass(frozen=True)
class Sine:
    """``offset + amplitude * sin(phase + 2*pi*k/period)``.

    If ``switch_step`` is set, the period changes to ``fast_period`` from
    that step on, with the phase kept continuous across the switch.
    """

    offset: float
    amplitude: float
    period: float
    phase: float = 0.0
    fast_period: Optional[float] = None
    switch_step: Optional[int] = None

    kind = "sine"

    def __post_init__(self):
        if self.period < 2:
            raise InvalidParameterError(f"sine period must be >= 2 steps, got {self.period}")
        if (self.fast_period is None) != (self.switch_step is None):
            raise InvalidParameterError("fast_period and switch_step must be given together")
        if self.fast_period is not None and self.fast_period < 2:
            raise InvalidParameterError(f"fast_period must be >= 2 steps, got {self.fast_period}")

    def __call__(self, k: int) -> float:
        if self.switch_step is None or k < self.switch_step:
            angle = 2.0 * math.pi * k / self.period
        else:
            angle = (2.0 * math.pi * self.switch_step / self.period
                     + 2.0 * math.pi * (k - self.switch_step) / self.fast_period)
        return self.offset + self.amplitude * math.sin(self.phase + angle)


@dataclass(frozen=True)
class Table:
    """Piecewise-constant signal from ``(step, value)`` breakpoints.

    Each value holds until the next breakpoint; the last one holds forever.
    Steps before the first breakpoint take the first value.
    """

    breakpoints: tuple[tuple[int, float], ...]

    kind = "table"

    def __post_init__(self):
        bp = tuple((int(k), float(v)) for k, v in self.breakpoints)
        if not bp:
            raise InvalidParameterError("table signal needs at least one breakpoint")
        steps = [k for k, _ in bp]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise InvalidParameterError("table breakpoints must be strictly increasing in step")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "_steps", steps)

    def __call__(self, k: int) -> float:
        idx = bisect.bisect_right(self._steps, k) - 1
        return self.breakpoints[max(idx, 0)][1]


ReferenceSignal = Union[Constant, Step, Sine, Table]


def evaluate(sig: ReferenceSignal, k: int) -> float:
    if k < 0:
        raise InvalidParameterError(f"step must be >= 0, got {k}")
    return sig(k)


def evaluate_all(signals: Sequence[ReferenceSignal], k: int, n: Optional[int] = None) -> list[float]:
    """Measurement vector at step ``k``; ``n`` (if given) must match the signal count."""
    if n is not None and len(signals) != n:
        raise ConfigurationError(f"expected {n} signals, got {len(signals)}")
    if k < 0:
        raise InvalidParameterError(f"step must be >= 0, got {k}")
    return [float(s(k)) for s in signals]
