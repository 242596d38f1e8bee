"""Trace, metrics and plot-data files.

Trace CSV: header ``k,transmitter,x_0..x_{n-1},y_0..,z_0..,V,delivered``
then one row per step. Floats are written with ``repr`` so they re-parse
bit-exactly; ``transmitter`` is ``-1`` on row 0; ``delivered`` is the
receiver set as a decimal bitmask (bit ``i`` set when agent ``i``
updated). A JSON sidecar ``<trace>.meta.json`` carries the scenario echo,
seed, neighbour counts and package version.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import MetricsReport, median
from .engine import Trace

FORMAT_VERSION = 1


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_columns(n: int) -> list[str]:
    return (["k", "transmitter"] + [f"x_{i}" for i in range(n)] + [f"y_{i}" for i in range(n)]
            + [f"z_{i}" for i in range(n)] + ["V", "delivered"])


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json") if path.suffix != ".csv" else path.with_suffix(".meta.json")


def trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_columns(trace.n))
    for k in range(trace.x.shape[0]):
        w.writerow(
            [trace.start + k, int(trace.transmitter[k])]
            + [repr(float(v)) for v in trace.x[k]]
            + [repr(float(v)) for v in trace.y[k]]
            + [repr(float(v)) for v in trace.z[k]]
            + [repr(float(trace.lyapunov[k])), int(trace.delivered[k])]
        )
    return buf.getvalue()


def write_trace(trace: Trace, path, scenario: Optional[dict] = None, seed: Optional[int] = None) -> None:
    path = Path(path)
    atomic_write(path, trace_csv(trace))
    meta = {
        "format_version": FORMAT_VERSION,
        "artifact_version": __version__,
        "n": trace.n,
        "total_steps": trace.total_steps,
        "r": list(trace.r),
        "alpha": trace.alpha,
        "seed": seed,
        "columns": trace_columns(trace.n),
        "scenario": scenario,
    }
    atomic_write(sidecar_path(path), json.dumps(meta, indent=2) + "\n")


def read_trace(path) -> Trace:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    n = meta["n"]
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != trace_columns(n):
        raise ValueError(f"{path}: header does not match n={n}")
    body = rows[1:]
    k = np.array([int(r[0]) for r in body])
    start = int(k[0]) if len(k) else 0
    if not np.array_equal(k, np.arange(start, start + len(body))):
        raise ValueError(f"{path}: step column is not consecutive")
    vals = np.array([[float(v) for v in r[2:2 + 3 * n + 1]] for r in body]).reshape(len(body), 3 * n + 1)
    delivered = np.array([int(r[-1]) for r in body], dtype=np.int64 if n < 63 else object)
    return Trace(
        x=vals[:, :n].copy(),
        y=vals[:, n:2 * n].copy(),
        z=vals[:, 2 * n:3 * n].copy(),
        transmitter=np.array([int(r[1]) for r in body], dtype=np.int64),
        delivered=delivered,
        lyapunov=vals[:, 3 * n].copy(),
        r=tuple(meta["r"]),
        alpha=float(meta["alpha"]),
        start=start,
    )


def write_metrics(report: MetricsReport, path, extra: Optional[dict] = None) -> None:
    d = report.to_dict()
    if extra:
        d.update(extra)
    atomic_write(path, json.dumps(d, indent=2) + "\n")


def read_metrics(path) -> MetricsReport:
    d = json.loads(Path(path).read_text())
    keys = MetricsReport.__dataclass_fields__
    return MetricsReport.from_dict({k: v for k, v in d.items() if k in keys})


def _series_csv(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_plot_data(trace: Trace, out_dir) -> list[Path]:
    """One CSV per figure: x with the median band, y with the ±alpha/r lines, z, and V."""
    out = Path(out_dir)
    n = trace.n
    steps = list(range(trace.start, trace.start + trace.x.shape[0]))
    meds = [median(row) for row in trace.z]
    files = {
        "plot_x.csv": (
            ["k"] + [f"x_{i}" for i in range(n)] + ["median_low", "median_high"],
            [steps] + [trace.x[:, i] for i in range(n)]
            + [[m.low for m in meds], [m.high for m in meds]],
        ),
        "plot_y.csv": (
            ["k"] + [f"y_{i}" for i in range(n)],
            [steps] + [trace.y[:, i] for i in range(n)],
        ),
        "plot_z.csv": (
            ["k"] + [f"z_{i}" for i in range(n)],
            [steps] + [trace.z[:, i] for i in range(n)],
        ),
        "plot_lyapunov.csv": (["k", "V"], [steps, trace.lyapunov]),
    }
    written = []
    for name, (header, cols) in files.items():
        atomic_write(out / name, _series_csv(header, cols))
        written.append(out / name)
    return written
