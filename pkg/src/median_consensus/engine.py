"""Step-by-step simulation of the protocol under the slot schedule.

At global step ``k`` every agent's measurement is ``z^k``; the slot owner
``j`` broadcasts its pre-step ``x_j^k`` and each agent in the delivery set
applies the update rule using that same value. Row ``k`` of a trace holds
the state *after* ``k`` steps together with ``z^k``; its transmitter and
receivers are those of the step that produced it (``-1`` and the empty
set for row 0).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np

from . import analysis
from .errors import ConfigurationError, NumericDomainError
from .network import LossModel, Schedule, Topology, deliveries, neighbor_counts
from .protocol import (
    LENIENT,
    STRICT,
    UNCHECKED,
    BoundaryWarning,
    ProtocolParams,
    UncheckedParamsWarning,
    lyapunov_from_arrays,
    update_values,
    validate_params,
)
from .signals import ReferenceSignal, evaluate_all


@dataclass(frozen=True)
class EngineOptions:
    self_update: bool = True
    y_clamp: bool = False
    quantization: Optional[float] = None

    def __post_init__(self):
        q = self.quantization
        if q is not None and not (q > 0 and math.isfinite(q)):
            raise ConfigurationError(f"quantization step must be positive, got {q!r}")


@dataclass(frozen=True)
class SimulationConfig:
    params: ProtocolParams
    topology: Topology
    signals: tuple[ReferenceSignal, ...]
    total_steps: int
    schedule: Optional[Schedule] = None
    loss: LossModel = field(default_factory=LossModel)
    options: EngineOptions = field(default_factory=EngineOptions)
    validation: str = LENIENT

    def __post_init__(self):
        if self.validation not in (STRICT, LENIENT, UNCHECKED):
            raise ConfigurationError(f"unknown validation mode {self.validation!r}")
        object.__setattr__(self, "signals", tuple(self.signals))
        if self.schedule is None:
            object.__setattr__(self, "schedule", Schedule.round_robin(self.topology.n))

    @property
    def n(self) -> int:
        return self.params.n

    def check(self) -> None:
        """Raise before any stepping if the pieces do not fit together."""
        n = self.params.n
        if self.topology.n != n:
            raise ConfigurationError(f"topology has {self.topology.n} agents, params say {n}")
        if self.schedule.n != n:
            raise ConfigurationError(f"schedule has {self.schedule.n} slots, params say {n}")
        if len(self.signals) != n:
            raise ConfigurationError(f"{len(self.signals)} signals for {n} agents")
        if isinstance(self.total_steps, bool) or not isinstance(self.total_steps, int) or self.total_steps < 1:
            raise ConfigurationError(f"total_steps must be a positive integer, got {self.total_steps!r}")
        if self.validation == UNCHECKED:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryWarning)
                report = validate_params(self.params, LENIENT)
            if report.failed:
                warnings.warn(
                    "running with failed conditions: " + ", ".join(report.failed),
                    UncheckedParamsWarning,
                    stacklevel=2,
                )
            return
        report = validate_params(self.params, self.validation)
        if not report.ok:
            raise ConfigurationError("parameters rejected: " + ", ".join(report.failed))

    def with_seed(self, seed: int) -> "SimulationConfig":
        return replace(self, loss=replace(self.loss, rng_seed=seed))


class Simulation:
    """Mutable simulation state advanced one slot at a time.

    ``receiver_order`` (optional) reorders the delivery set before updates
    are applied; results must not depend on it.
    """

    def __init__(
        self,
        config: SimulationConfig,
        receiver_order: Optional[Callable[[list[int]], Iterable[int]]] = None,
    ):
        config.check()
        self.config = config
        self.n = config.n
        self.r = neighbor_counts(config.topology)
        self.k = 0
        self.z = evaluate_all(config.signals, 0)
        self.x = list(self.z)
        self.y = [0.0] * self.n
        self._check_finite(self.x, "x", 0)
        self._channel = config.loss.channel()
        self._order = receiver_order

    @staticmethod
    def _check_finite(vals, name, k):
        for i, v in enumerate(vals):
            if not math.isfinite(v):
                raise NumericDomainError(f"non-finite {name}[{i}] = {v!r} at step {k}", step=k)

    def step(self) -> tuple[int, set[int]]:
        """Advance one slot; returns the transmitter and receiver set."""
        cfg = self.config
        p = cfg.params
        opts = cfg.options
        k = self.k
        j = cfg.schedule.transmitter(k)
        receivers = deliveries(cfg.topology, cfg.schedule, self._channel, k, opts.self_update)
        x, y, z, r = self.x, self.y, self.z, self.r
        x_j = x[j]
        q = opts.quantization
        if q is not None:
            x_j = round(x_j / q) * q
        # each receiver only touches its own entries, so x_j stays the pre-step value
        ordered = sorted(receivers) if self._order is None else list(self._order(sorted(receivers)))
        for i in ordered:
            xi, yi = update_values(x[i], y[i], z[i], r[i], x_j, p.alpha, p.beta, p.gamma, p.kappa)
            if opts.y_clamp:
                band = 2.0 * p.alpha / r[i]
                yi = min(max(yi, -band), band)
            if not (math.isfinite(xi) and math.isfinite(yi)):
                raise NumericDomainError(f"non-finite state of agent {i} at step {k + 1}", step=k + 1)
            x[i] = xi
            y[i] = yi
        self.k = k + 1
        self.z = evaluate_all(cfg.signals, self.k)
        self._check_finite(self.z, "z", self.k)
        return j, receivers


@dataclass(eq=False)
class Trace:
    """Time series of a run.

    A full trace has ``total_steps + 1`` rows. A tail trace (see
    ``run(keep_last=...)``) starts at step ``start`` instead of 0.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    transmitter: np.ndarray
    delivered: np.ndarray
    lyapunov: np.ndarray
    r: tuple[int, ...]
    alpha: float
    start: int = 0

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def total_steps(self) -> int:
        """Index of the last recorded step."""
        return self.start + self.x.shape[0] - 1

    @property
    def y_band_violations(self) -> np.ndarray:
        """Boolean (rows, n) flags where ``|y_i| > 2*alpha/r_i``."""
        band = 2.0 * self.alpha / np.asarray(self.r, dtype=float)
        return np.abs(self.y) > band

    def receivers(self, k: int) -> set[int]:
        mask = int(self.delivered[k - self.start])
        return {i for i in range(self.n) if mask >> i & 1}

    def equals(self, other: "Trace") -> bool:
        """Bit-exact equality of every recorded series."""
        return (
            self.r == other.r
            and self.alpha == other.alpha
            and self.start == other.start
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("x", "y", "z", "transmitter", "delivered", "lyapunov")
            )
        )


def _mask(receivers) -> int:
    m = 0
    for i in receivers:
        m |= 1 << i
    return m


def run(
    config: SimulationConfig,
    receiver_order: Optional[Callable[[list[int]], Iterable[int]]] = None,
    keep_last: Optional[int] = None,
) -> Trace:
    """Simulate ``config`` and record every step.

    With ``keep_last`` only the final ``keep_last + 1`` rows are stored,
    which keeps long runs within memory; the result's ``start`` says where
    the tail begins.
    """
    sim = Simulation(config, receiver_order)
    n, steps = sim.n, config.total_steps
    start = 0 if keep_last is None else max(0, steps - keep_last)
    rows = steps + 1 - start
    x = np.empty((rows, n))
    y = np.empty((rows, n))
    z = np.empty((rows, n))
    tx = np.full(rows, -1, dtype=np.int64)
    delivered = np.zeros(rows, dtype=np.int64 if n < 63 else object)
    v = np.empty(rows)
    if start == 0:
        x[0], y[0], z[0] = sim.x, sim.y, sim.z
        v[0] = lyapunov_from_arrays(sim.x, sim.y)
    for k in range(1, steps + 1):
        j, rec = sim.step()
        if k < start:
            continue
        row = k - start
        x[row], y[row], z[row] = sim.x, sim.y, sim.z
        tx[row] = j
        delivered[row] = _mask(rec)
        v[row] = lyapunov_from_arrays(sim.x, sim.y)
    return Trace(x, y, z, tx, delivered, v, tuple(sim.r), config.params.alpha, start)


def run_metrics(
    config: SimulationConfig,
    tolerance: float = analysis.DEFAULT_TOLERANCE,
    window: Optional[tuple[int, int]] = None,
) -> analysis.MetricsReport:
    """Run without storing the trace and return its metrics.

    Gives the same report as ``compute_metrics(run(config))``.
    """
    sim = Simulation(config)
    acc = analysis.StreamingMetrics(sim.n, config.total_steps, tolerance, window)
    acc.update(0, sim.x, sim.z)
    for k in range(1, config.total_steps + 1):
        sim.step()
        acc.update(k, sim.x, sim.z)
    return acc.report()


def _seeded(config, n_runs, seed_base):
    if n_runs < 1:
        raise ConfigurationError(f"n_runs must be >= 1, got {n_runs}")
    return [config.with_seed(seed_base + i) for i in range(n_runs)]


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(c) for c in items]


def run_ensemble(
    config: SimulationConfig, n_runs: int, seed_base: int = 0, workers: Optional[int] = None
) -> list[Trace]:
    """Independent runs whose loss streams are seeded ``seed_base + i``."""
    return _map(run, _seeded(config, n_runs, seed_base), workers)


def ensemble_metrics(
    config: SimulationConfig, n_runs: int, seed_base: int = 0, workers: Optional[int] = None
) -> list[analysis.MetricsReport]:
    """Like :func:`run_ensemble` but returns streamed metrics only."""
    return _map(run_metrics, _seeded(config, n_runs, seed_base), workers)


def stationarity_residual(trace: Trace, k: int, cycle: Optional[int] = None) -> float:
    """``max_i |x_i^{k+n} - x_i^k| + |y_i^{k+n} - y_i^k|`` for cycle length n."""
    n = trace.n if cycle is None else cycle
    if k < trace.start or k + n > trace.total_steps:
        raise IndexError(f"steps {k}..{k + n} outside trace rows {trace.start}..{trace.total_steps}")
    a, b = k - trace.start, k + n - trace.start
    dx = np.abs(trace.x[b] - trace.x[a])
    dy = np.abs(trace.y[b] - trace.y[a])
    return float((dx + dy).max())
