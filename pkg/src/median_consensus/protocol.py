"""Agent state, the local update rule and parameter checks.

The update applied by a receiving agent ``i`` when agent ``j`` transmits::

    x' = x + beta * (x_j - x) + (alpha / r) * sign(z - x) + y
    y' = y + gamma * ((x_j - x) - kappa * y)

``r`` is the number of neighbours of ``i`` in the underlying graph,
counting ``i`` itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import (
    ConstraintViolationError,
    EmptyInputError,
    InvalidParameterError,
    NumericDomainError,
)

STRICT = "strict"
LENIENT = "lenient"
# engine-only mode: failed conditions are warned about but the run proceeds
UNCHECKED = "unchecked"


class BoundaryWarning(UserWarning):
    """beta sits exactly on the 1/n**2 bound (accepted in lenient mode)."""


class UncheckedParamsWarning(UserWarning):
    """A run proceeds with parameters that fail the stability conditions."""


def sign(v: float) -> int:
    # sign(0) == 0 keeps x = z a fixed point
    return int(v > 0) - int(v < 0)


@dataclass(frozen=True)
class ProtocolParams:
    alpha: float
    beta: float
    gamma: float
    kappa: float
    n: int

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "kappa"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InvalidParameterError(f"{name} must be a real number, got {v!r}")
            if not math.isfinite(v) or v <= 0:
                raise InvalidParameterError(f"{name} must be positive and finite, got {v!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 2:
            raise InvalidParameterError(f"n must be an integer >= 2, got {self.n!r}")

    def with_(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class AgentState:
    """Protocol state held by one agent.

    Attributes:
        x: Consensus state, the value broadcast to neighbours.
        y: Auxiliary state, never transmitted.
        z: Current local measurement.
        r: Neighbour count including the agent itself.
    """

    x: float
    y: float
    z: float
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise InvalidParameterError(f"r must be >= 1, got {self.r}")

    @classmethod
    def initial(cls, z: float, r: int) -> "AgentState":
        return cls(x=float(z), y=0.0, z=float(z), r=r)

    def y_band(self, alpha: float) -> float:
        return 2.0 * alpha / self.r

    def band_violated(self, alpha: float) -> bool:
        return abs(self.y) > self.y_band(alpha)


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    boundary: bool = False
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    params: ProtocolParams
    mode: str
    conditions: tuple[Condition, ...]
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        """True when the params pass under the report's mode."""
        return all(c.passed or (c.boundary and self.mode == LENIENT) for c in self.conditions)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def format(self) -> str:
        lines = []
        for c in self.conditions:
            if c.passed:
                status = "PASS"
            elif c.boundary and self.mode == LENIENT:
                status = "WARN"
            else:
                status = "FAIL"
            lines.append(f"{status}  {c.name:<16} {c.detail}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        lines.append(f"result ({self.mode}): {'ok' if self.ok else 'rejected'}")
        return "\n".join(lines)


def validate_params(p: ProtocolParams, mode: str = LENIENT) -> ValidationReport:
    """Check the stability conditions ``gamma < beta < 1/n**2`` and ``kappa*gamma < 1``.

    In strict mode any failed condition raises
    :class:`ConstraintViolationError`. In lenient mode ``beta == 1/n**2``
    is accepted with a :class:`BoundaryWarning`; other failures are only
    reported (check ``report.ok``).
    """
    if mode not in (STRICT, LENIENT):
        raise InvalidParameterError(f"unknown validation mode {mode!r}")
    bound = 1.0 / p.n**2
    kg = p.kappa * p.gamma
    on_bound = math.isclose(p.beta, bound, rel_tol=1e-12, abs_tol=0.0)
    conditions = (
        Condition("gamma < beta", p.gamma < p.beta, detail=f"{p.gamma:g} < {p.beta:g}"),
        Condition("kappa*gamma < 1", kg < 1.0, detail=f"{kg:g} < 1"),
        Condition(
            "beta < 1/n^2",
            p.beta < bound and not on_bound,
            boundary=on_bound,
            detail=f"{p.beta:g} < {bound:g}",
        ),
    )
    notes = ()
    if on_bound:
        notes = (f"beta = {p.beta:g} equals 1/n^2 = {bound:g}",)
    report = ValidationReport(p, mode, conditions, notes)

    if mode == STRICT and report.failed:
        raise ConstraintViolationError(
            "constraint violated: " + ", ".join(report.failed)
        )
    if mode == LENIENT and on_bound:
        warnings.warn(notes[0], BoundaryWarning, stacklevel=2)
    return report


def update_values(
    x: float, y: float, z: float, r: int, x_j: float,
    alpha: float, beta: float, gamma: float, kappa: float,
) -> tuple[float, float]:
    """Scalar form of the update rule, shared with the engine's inner loop."""
    d = x_j - x
    return (
        x + beta * d + (alpha / r) * sign(z - x) + y,
        y + gamma * (d - kappa * y),
    )


def local_update(
    state: AgentState, x_j: float, link_active: bool, p: ProtocolParams
) -> AgentState:
    """Apply one received message from a transmitter holding ``x_j``.

    Returns ``state`` itself when the link is inactive. ``z`` and ``r`` are
    carried over unchanged.
    """
    if not link_active:
        return state
    for name, v in (("x", state.x), ("y", state.y), ("z", state.z), ("x_j", x_j)):
        if not math.isfinite(v):
            raise NumericDomainError(f"non-finite {name}: {v!r}")
    x, y = update_values(
        state.x, state.y, state.z, state.r, x_j, p.alpha, p.beta, p.gamma, p.kappa
    )
    return AgentState(x=x, y=y, z=state.z, r=state.r)


def lyapunov_value(states: Iterable[AgentState]) -> float:
    """Spread of x plus spread of y over all agents."""
    states = list(states)
    if not states:
        raise EmptyInputError("lyapunov_value needs at least one agent")
    return lyapunov_from_arrays([s.x for s in states], [s.y for s in states])


def lyapunov_from_arrays(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) == 0:
        raise EmptyInputError("lyapunov_value needs at least one agent")
    return (max(xs) - min(xs)) + (max(ys) - min(ys))


def instability_band(p: ProtocolParams, r_min: int) -> float:
    """Worst-case spread below which the Lyapunov decrease is not guaranteed.

    Evaluates ``(6*alpha - 4*kappa*gamma*alpha) / (r_min * (beta - gamma))``.
    """
    if r_min < 1:
        raise InvalidParameterError(f"r_min must be >= 1, got {r_min}")
    if p.beta <= p.gamma:
        raise ConstraintViolationError(
            f"constraint violated: gamma < beta ({p.gamma:g} >= {p.beta:g})"
        )
    a = p.alpha
    return (6 * a - 4 * p.kappa * p.gamma * a) / (r_min * (p.beta - p.gamma))
