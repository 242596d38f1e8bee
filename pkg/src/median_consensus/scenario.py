"""YAML scenario and sweep files.

Scenario layout (every key except ``agents``, ``params``, ``signals`` and
``steps`` is optional)::

    name: sim1_complete_n3
    agents: 3
    params: {alpha: 9, beta: 0.08, gamma: 0.003, kappa: 0.1}
    topology: complete            # chain | {matrix: [[...]]} | {edges: [[i, j]]} | {file: path}
    schedule: [0, 1, 2]
    loss: {drop_probability: 0.0, seed: 0}
    signals:
      - {kind: constant, value: 100}
      - {kind: step, initial: 100, final: 180, step_time: 500}
      - {kind: sine, offset: 100, amplitude: 20, period: 2000, phase: 0.0,
         fast_period: 400, switch_step: 6000}
      - {kind: table, breakpoints: [[0, 100], [300, 120]]}
    steps: 5000
    options: {self_update: true, y_clamp: false, quantization: null}
    validation: lenient

A sweep file points at a base scenario and lists one or two swept
dimensions::

    base: sim3_complete_n5        # shipped name or path relative to this file
    runs: 100
    seed_base: 0
    dimensions:
      - {parameter: drop_probability, values: [0.0, 0.1, 0.2]}
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from .engine import EngineOptions, SimulationConfig
from .errors import ConsensusError, ScenarioError
from .network import LossModel, Schedule, Topology, build_chain, build_complete, from_edges, read_topology
from .protocol import LENIENT, STRICT, UNCHECKED, ProtocolParams
from .signals import Constant, Sine, Step, Table

SWEEPABLE = ("alpha", "beta", "gamma", "kappa", "drop_probability")
_SCENARIO_KEYS = {"name", "description", "agents", "params", "topology", "schedule",
                  "loss", "signals", "steps", "options", "validation"}
_SIGNAL_FIELDS = {
    "constant": (Constant, {"value"}, set()),
    "step": (Step, {"initial", "final", "step_time"}, set()),
    "sine": (Sine, {"offset", "amplitude", "period"}, {"phase", "fast_period", "switch_step"}),
    "table": (Table, {"breakpoints"}, set()),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SimulationConfig
    description: str = ""
    source: Optional[Path] = None


# --- locating diagnostics -------------------------------------------------

def _node_at(node, path):
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            return node
        node = nxt
    return node


def _path_str(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
    return out or "<root>"


class _Reader:
    """Field access with errors addressed by dotted path and line number."""

    def __init__(self, text: str, origin: str):
        self.origin = origin
        try:
            self.root_node = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            loc = f"{origin}:{mark.line + 1}" if mark else origin
            raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", loc) from None

    def fail(self, path, message):
        node = _node_at(self.root_node, path) if self.root_node is not None else None
        line = f":{node.start_mark.line + 1}" if node is not None else ""
        raise ScenarioError(message, f"{self.origin}{line} {_path_str(path)}")

    def mapping(self, value, path):
        if not isinstance(value, dict):
            self.fail(path, f"expected a mapping, got {type(value).__name__}")
        return value

    def get(self, mapping, key, path, kind, required=True, default=None):
        if key not in mapping or mapping[key] is None:
            if required:
                self.fail(path, f"missing required field '{key}'")
            return default
        v = mapping[key]
        p = path + [key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.fail(p, f"expected a number, got {v!r}")
            return float(v)
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(p, f"expected an integer, got {v!r}")
            return v
        if kind is bool:
            if not isinstance(v, bool):
                self.fail(p, f"expected true/false, got {v!r}")
            return v
        if kind is str:
            if not isinstance(v, str):
                self.fail(p, f"expected a string, got {v!r}")
            return v
        return v

    def reject_unknown(self, mapping, allowed, path):
        for key in mapping:
            if key not in allowed:
                self.fail(path + [key], f"unknown field '{key}'")


# --- parsing --------------------------------------------------------------

def _parse_topology(rd, raw, n, base_dir):
    path = ["topology"]
    if raw is None or raw == "complete":
        return build_complete(n)
    if raw == "chain":
        return build_chain(n)
    if isinstance(raw, str):
        rd.fail(path, f"unknown topology '{raw}' (use complete, chain, matrix, edges or file)")
    rd.mapping(raw, path)
    if len(raw) != 1:
        rd.fail(path, "topology mapping needs exactly one of matrix, edges, file")
    (key, value), = raw.items()
    if key == "matrix":
        return Topology(value)
    if key == "edges":
        return from_edges(n, [tuple(e) for e in value])
    if key == "file":
        p = Path(value)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        return read_topology(p)
    rd.fail(path + [key], f"unknown topology form '{key}'")


def _parse_signal(rd, raw, path):
    rd.mapping(raw, path)
    kind = rd.get(raw, "kind", path, str)
    if kind not in _SIGNAL_FIELDS:
        rd.fail(path + ["kind"], f"unknown signal kind '{kind}'")
    cls, required, optional = _SIGNAL_FIELDS[kind]
    rd.reject_unknown(raw, required | optional | {"kind"}, path)
    kwargs = {}
    for key in sorted(required | optional):
        if kind == "table":
            bp = rd.get(raw, key, path, None)
            if not isinstance(bp, list) or not all(isinstance(e, list) and len(e) == 2 for e in bp):
                rd.fail(path + [key], "breakpoints must be a list of [step, value] pairs")
            kwargs[key] = tuple((e[0], e[1]) for e in bp)
            continue
        want = int if key in ("step_time", "switch_step") else float
        v = rd.get(raw, key, path, want, required=key in required)
        if v is not None:
            kwargs[key] = v
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        rd.fail(path, str(exc))


def _build_config(rd: _Reader, data: dict, base_dir: Optional[Path]) -> SimulationConfig:
    rd.mapping(data, [])
    rd.reject_unknown(data, _SCENARIO_KEYS, [])
    n = rd.get(data, "agents", [], int)

    praw = rd.mapping(rd.get(data, "params", [], None), ["params"])
    rd.reject_unknown(praw, {"alpha", "beta", "gamma", "kappa"}, ["params"])
    pvals = {k: rd.get(praw, k, ["params"], float) for k in ("alpha", "beta", "gamma", "kappa")}
    try:
        params = ProtocolParams(n=n, **pvals)
    except ConsensusError as exc:
        rd.fail(["params"], str(exc))

    try:
        topology = _parse_topology(rd, data.get("topology"), n, base_dir)
    except ScenarioError:
        raise
    except (ConsensusError, ValueError, TypeError, OSError) as exc:
        rd.fail(["topology"], str(exc))

    schedule = None
    if data.get("schedule") is not None:
        try:
            schedule = Schedule(tuple(data["schedule"]))
        except (ConsensusError, TypeError, ValueError) as exc:
            rd.fail(["schedule"], str(exc))

    lraw = data.get("loss") or {}
    rd.mapping(lraw, ["loss"])
    rd.reject_unknown(lraw, {"drop_probability", "seed"}, ["loss"])
    try:
        loss = LossModel(
            rd.get(lraw, "drop_probability", ["loss"], float, required=False, default=0.0),
            rd.get(lraw, "seed", ["loss"], int, required=False, default=0),
        )
    except ConsensusError as exc:
        rd.fail(["loss"], str(exc))

    sraw = rd.get(data, "signals", [], None)
    if not isinstance(sraw, list):
        rd.fail(["signals"], "signals must be a list with one entry per agent")
    signals = tuple(_parse_signal(rd, s, ["signals", i]) for i, s in enumerate(sraw))

    oraw = data.get("options") or {}
    rd.mapping(oraw, ["options"])
    rd.reject_unknown(oraw, {"self_update", "y_clamp", "quantization"}, ["options"])
    try:
        options = EngineOptions(
            self_update=rd.get(oraw, "self_update", ["options"], bool, required=False, default=True),
            y_clamp=rd.get(oraw, "y_clamp", ["options"], bool, required=False, default=False),
            quantization=rd.get(oraw, "quantization", ["options"], float, required=False),
        )
    except ConsensusError as exc:
        rd.fail(["options"], str(exc))

    validation = data.get("validation", LENIENT)
    if validation not in (LENIENT, STRICT, UNCHECKED):
        rd.fail(["validation"], f"validation must be one of {LENIENT}, {STRICT}, {UNCHECKED}")

    config = SimulationConfig(
        params=params,
        topology=topology,
        signals=signals,
        total_steps=rd.get(data, "steps", [], int),
        schedule=schedule,
        loss=loss,
        options=options,
        validation=validation,
    )
    n_checks = (
        (topology.n != n, ["topology"], f"topology has {topology.n} agents, expected {n}"),
        (schedule is not None and schedule.n != n, ["schedule"], f"schedule must list {n} agents"),
        (len(signals) != n, ["signals"], f"{len(signals)} signals for {n} agents"),
        (config.total_steps < 1, ["steps"], "steps must be >= 1"),
    )
    for bad, path, msg in n_checks:
        if bad:
            rd.fail(path, msg)
    return config


def _shipped(suffix):
    files = resources.files("median_consensus") / "scenarios"
    return sorted(p.name[: -len(suffix)] for p in files.iterdir() if p.name.endswith(suffix))


def shipped_scenarios() -> list[str]:
    return [s for s in _shipped(".yaml") if not s.endswith(".sweep")]


def shipped_sweeps() -> list[str]:
    return _shipped(".sweep.yaml")


def resolve(ref, relative_to: Optional[Path] = None) -> Path:
    """Path of a scenario given a file path or the name of a shipped scenario."""
    p = Path(ref)
    if relative_to is not None and not p.is_absolute() and (relative_to / p).exists():
        return relative_to / p
    if p.exists():
        return p
    for suffix in (".yaml", ".sweep.yaml"):
        shipped = resources.files("median_consensus") / "scenarios" / f"{ref}{suffix}"
        if shipped.is_file():
            return Path(str(shipped))
    raise ScenarioError(f"no such scenario file or shipped scenario: {ref}")


def loads_scenario(text: str, origin: str = "<string>", base_dir: Optional[Path] = None) -> Scenario:
    rd = _Reader(text, origin)
    if rd.data is None:
        raise ScenarioError("empty scenario", origin)
    data = rd.mapping(rd.data, [])
    config = _build_config(rd, data, base_dir)
    name = data.get("name") or Path(origin).stem
    return Scenario(str(name), config, str(data.get("description") or ""))


def load_scenario(ref) -> Scenario:
    path = resolve(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", str(path)) from None
    sc = loads_scenario(text, str(path), path.parent)
    return replace(sc, source=path)


# --- emitting -------------------------------------------------------------

def _num(v):
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def _signal_dict(sig) -> dict:
    if isinstance(sig, Constant):
        return {"kind": "constant", "value": _num(sig.value)}
    if isinstance(sig, Step):
        return {"kind": "step", "initial": _num(sig.initial), "final": _num(sig.final),
                "step_time": sig.step_time}
    if isinstance(sig, Sine):
        d = {"kind": "sine", "offset": _num(sig.offset), "amplitude": _num(sig.amplitude),
             "period": _num(sig.period), "phase": _num(sig.phase)}
        if sig.switch_step is not None:
            d["fast_period"] = _num(sig.fast_period)
            d["switch_step"] = sig.switch_step
        return d
    if isinstance(sig, Table):
        return {"kind": "table", "breakpoints": [[k, _num(v)] for k, v in sig.breakpoints]}
    raise TypeError(f"cannot serialise signal {sig!r}")


def scenario_dict(config: SimulationConfig, name: str = "", description: str = "") -> dict:
    p = config.params
    n = p.n
    if config.topology == build_complete(n):
        topo: Any = "complete"
    elif config.topology == build_chain(n):
        topo = "chain"
    else:
        topo = {"matrix": config.topology.adjacency.astype(int).tolist()}
    d = {}
    if name:
        d["name"] = name
    if description:
        d["description"] = description
    d.update({
        "agents": n,
        "params": {"alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "kappa": p.kappa},
        "topology": topo,
        "schedule": list(config.schedule.slot_order),
        "loss": {"drop_probability": config.loss.drop_probability, "seed": config.loss.rng_seed},
        "signals": [_signal_dict(s) for s in config.signals],
        "steps": config.total_steps,
        "options": {
            "self_update": config.options.self_update,
            "y_clamp": config.options.y_clamp,
            "quantization": config.options.quantization,
        },
        "validation": config.validation,
    })
    return d


def dumps_scenario(config: SimulationConfig, name: str = "", description: str = "") -> str:
    return yaml.safe_dump(scenario_dict(config, name, description), sort_keys=False)


# --- sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    dimensions: tuple[tuple[str, tuple[float, ...]], ...]
    runs: int = 100
    seed_base: int = 0
    tolerance: float = 0.05

    def points(self) -> list[dict[str, float]]:
        names = [d[0] for d in self.dimensions]
        return [dict(zip(names, combo)) for combo in itertools.product(*(d[1] for d in self.dimensions))]


def apply_point(config: SimulationConfig, point: dict[str, float]) -> SimulationConfig:
    """Return ``config`` with swept parameter values substituted."""
    params, loss = config.params, config.loss
    for key, value in point.items():
        if key == "drop_probability":
            loss = replace(loss, drop_probability=float(value))
        elif key in ("alpha", "beta", "gamma", "kappa"):
            params = replace(params, **{key: float(value)})
        else:
            raise ScenarioError(f"parameter '{key}' cannot be swept (choose from {', '.join(SWEEPABLE)})")
    return replace(config, params=params, loss=loss)


def load_sweep(ref) -> SweepSpec:
    path = resolve(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read sweep file: {exc}", str(path)) from None
    rd = _Reader(text, str(path))
    data = rd.mapping(rd.data, [])
    rd.reject_unknown(data, {"base", "runs", "seed_base", "tolerance", "dimensions", "validation",
                             "name", "description"}, [])
    base = load_scenario(resolve(rd.get(data, "base", [], str), path.parent))
    validation = data.get("validation")
    if validation is not None:
        if validation not in (LENIENT, STRICT, UNCHECKED):
            rd.fail(["validation"], f"validation must be one of {LENIENT}, {STRICT}, {UNCHECKED}")
        base = replace(base, config=replace(base.config, validation=validation))
    dims_raw = rd.get(data, "dimensions", [], None)
    if not isinstance(dims_raw, list) or not 1 <= len(dims_raw) <= 2:
        rd.fail(["dimensions"], "dimensions must list one or two swept parameters")
    dims = []
    for i, d in enumerate(dims_raw):
        p = ["dimensions", i]
        rd.mapping(d, p)
        rd.reject_unknown(d, {"parameter", "values"}, p)
        name = rd.get(d, "parameter", p, str)
        if name not in SWEEPABLE:
            rd.fail(p + ["parameter"], f"parameter '{name}' cannot be swept (choose from {', '.join(SWEEPABLE)})")
        values = d.get("values")
        if not isinstance(values, list) or not values:
            rd.fail(p + ["values"], "values must be a non-empty list")
        for j, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                rd.fail(p + ["values", j], f"expected a number, got {v!r}")
        dims.append((name, tuple(float(v) for v in values)))
    runs = rd.get(data, "runs", [], int, required=False, default=100)
    if runs < 1:
        rd.fail(["runs"], "runs must be >= 1")
    spec = SweepSpec(
        base=base,
        dimensions=tuple(dims),
        runs=runs,
        seed_base=rd.get(data, "seed_base", [], int, required=False, default=0),
        tolerance=rd.get(data, "tolerance", [], float, required=False, default=0.05),
    )
    for point in spec.points():
        try:
            apply_point(base.config, point).check()
        except ConsensusError as exc:
            rd.fail(["dimensions"], f"point {point}: {exc}")
    return spec
