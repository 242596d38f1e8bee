"""Topologies, the round-robin slot schedule and per-message packet loss."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidParameterError


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected communication graph with self-loops on every node.

    ``adjacency[i][j] == 1`` means agent ``i`` hears agent ``j``.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.int8)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigurationError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise InvalidParameterError(f"topology needs n >= 2, got {a.shape[0]}")
        if not np.isin(a, (0, 1)).all():
            raise ConfigurationError("adjacency entries must be 0 or 1")
        if not (a == a.T).all():
            raise ConfigurationError("adjacency must be symmetric")
        if not (np.diag(a) == 1).all():
            raise ConfigurationError("adjacency diagonal must be all ones")
        if not _connected(a):
            raise ConfigurationError("topology graph is not connected")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(
            self, "_columns", tuple(tuple(np.flatnonzero(a[:, j]).tolist()) for j in range(a.shape[0]))
        )

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors_of(self, j: int) -> tuple[int, ...]:
        """Agents that hear ``j`` (``j`` included)."""
        return self._columns[j]

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())


def _connected(a: np.ndarray) -> bool:
    n = a.shape[0]
    seen = {0}
    todo = deque([0])
    while todo:
        i = todo.popleft()
        for j in np.flatnonzero(a[i]):
            if j not in seen:
                seen.add(int(j))
                todo.append(int(j))
    return len(seen) == n


def _check_size(n):
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise InvalidParameterError(f"topology size must be an integer >= 2, got {n!r}")


def build_complete(n: int) -> Topology:
    _check_size(n)
    return Topology(np.ones((n, n), dtype=np.int8))


def build_chain(n: int) -> Topology:
    """Tridiagonal line graph: each agent hears itself and its index neighbours."""
    _check_size(n)
    idx = np.arange(n)
    return Topology((np.abs(idx[:, None] - idx[None, :]) <= 1).astype(np.int8))


def from_edges(n: int, edges: Sequence[tuple[int, int]]) -> Topology:
    """Build a topology from undirected edges; self-loops are added."""
    _check_size(n)
    a = np.eye(n, dtype=np.int8)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ConfigurationError(f"edge ({i}, {j}) out of range for n={n}")
        a[i, j] = a[j, i] = 1
    return Topology(a)


def neighbor_counts(t: Topology) -> list[int]:
    return t.adjacency.sum(axis=1).astype(int).tolist()


def read_topology(path) -> Topology:
    """Read a topology text file.

    Two layouts are accepted. A matrix file has one row of ``0``/``1``
    entries per line (whitespace or comma separated). An edge-list file
    starts with a line ``n <count>`` followed by ``i j`` pairs. Blank lines
    and ``#`` comments are ignored.
    """
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if line:
            lines.append(line.split())
    if not lines:
        raise ConfigurationError(f"{path}: empty topology file")
    if lines[0][0] == "n":
        if len(lines[0]) != 2:
            raise ConfigurationError(f"{path}: header must be 'n <count>'")
        n = int(lines[0][1])
        edges = []
        for lineno, parts in enumerate(lines[1:], start=2):
            if len(parts) != 2:
                raise ConfigurationError(f"{path}: edge entry {lineno} must be 'i j'")
            edges.append((int(parts[0]), int(parts[1])))
        return from_edges(n, edges)
    rows = [[int(v) for v in parts] for parts in lines]
    return Topology(np.array(rows))


def write_topology(t: Topology, path) -> None:
    text = "\n".join(" ".join(str(int(v)) for v in row) for row in t.adjacency) + "\n"
    Path(path).write_text(text)


@dataclass(frozen=True)
class Schedule:
    """Round-robin slot assignment; one transmitter per step, cycle length n."""

    slot_order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(v) for v in self.slot_order)
        if sorted(order) != list(range(len(order))):
            raise ConfigurationError(f"slot_order must be a permutation of 0..n-1, got {order}")
        if len(order) < 2:
            raise InvalidParameterError("schedule needs n >= 2")
        object.__setattr__(self, "slot_order", order)

    @classmethod
    def round_robin(cls, n: int) -> "Schedule":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.slot_order)

    @property
    def cycle_length(self) -> int:
        return len(self.slot_order)

    def transmitter(self, k: int) -> int:
        return self.slot_order[k % len(self.slot_order)]


@dataclass(frozen=True)
class LossModel:
    """Independent per-message drop probability plus the seed of its stream."""

    drop_probability: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        p = self.drop_probability
        if not (0.0 <= p <= 1.0):
            raise InvalidParameterError(f"drop_probability must be in [0, 1], got {p!r}")

    def channel(self) -> "LossChannel":
        """Fresh random stream for one simulation run."""
        return LossChannel(self.drop_probability, self.rng_seed)


class LossChannel:
    """Stateful drop sampler owned by a single run.

    One uniform draw is consumed per non-self candidate receiver, in
    ascending receiver order, whenever ``0 < p < 1``.
    """

    def __init__(self, drop_probability: float, seed: int):
        self.p = drop_probability
        self._rng = random.Random(seed)

    def dropped(self) -> bool:
        p = self.p
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self._rng.random() < p


def deliveries(
    t: Topology,
    s: Schedule,
    channel: LossChannel,
    k: int,
    self_update: bool = True,
) -> set[int]:
    """Receivers that apply the update at step ``k``.

    The transmitter's own entry is never dropped; it is included only when
    ``self_update`` is on.
    """
    if k < 0:
        raise InvalidParameterError(f"step must be >= 0, got {k}")
    j = s.transmitter(k)
    out = set()
    for i in t.neighbors_of(j):
        if i == j:
            if self_update:
                out.add(i)
        elif not channel.dropped():
            out.add(i)
    return out
