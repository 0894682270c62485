"""Experiment orchestration and persistence: scan/profile CSVs, SVG plots, manifest.

All numbers are written with 12 significant digits in scientific notation so
that two runs of one configuration produce byte-identical CSV files.
"""

from __future__ import annotations

import math
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .model import MeasurementSetup
from .sweep import reference_columns, scan_delta_a
from .svgplot import Series, loglog_svg

SCAN_COLUMNS = (
    "delta_a",
    "delta_a_eff_equivalent",
    "delta_a_eff_gaussfit",
    "analytic_linear",
    "classical_limit",
    "quantum_limit",
    "leak_max",
    "tail_ratio",
    "status",
)
PROFILE_COLUMNS = ("epsilon", "re_I", "im_I", "P")
ANALYTIC_COLUMNS = ("delta_a", "analytic_linear", "classical_limit", "quantum_limit")


def fmt(x):
    """12 significant digits, scientific; nan/inf spelled out."""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


def csv_text(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def scan_csv(rows):
    return csv_text(
        SCAN_COLUMNS,
        [
            (r.delta_a, r.width_equivalent, r.width_gauss_fit, r.analytic_linear, r.classical_limit,
             r.quantum_limit, r.leak_max, r.tail_ratio, r.status)
            for r in rows
        ],
    )


def profile_csv(result):
    """Profile of one row; I is stored as its mantissa, the manifest holds log_scale."""
    eps = result.epsilon.values
    amps = result.amplitudes
    return csv_text(PROFILE_COLUMNS, zip(eps, amps.real, amps.imag, result.profile))


def analytic_rows(system, tau, mode_index, delta_as):
    return [(d, *reference_columns(system, MeasurementSetup(tau, d, mode_index))) for d in delta_as]


def analytic_csv(config):
    return csv_text(ANALYTIC_COLUMNS, analytic_rows(config.system, config.tau, config.mode_index, config.delta_as))


def width_plot(delta_as, simulated, linear, classical, quantum, title=""):
    series = [
        Series(delta_as, linear, "analytic (linear)", color="black", line="solid"),
        Series(delta_as, classical, "classical limit", color="#1f6fb4", line="dashed"),
        Series(delta_as, quantum, "quantum limit", color="#c0392b", line="dotdash"),
    ]
    if simulated is not None:
        series.append(Series(delta_as, simulated, "numerical", color="#2c8c2c", line=None, marker=True))
    return loglog_svg(series, title=title, xlabel="delta_a", ylabel="delta_a_eff")


def manifest_text(items):
    lines = []
    for k, v in items.items():
        s = fmt(v) if isinstance(v, (float, np.floating)) else str(v)
        lines.append(f"{k}={s.replace(chr(10), ' ')}")
    return "\n".join(lines) + "\n"


@dataclass
class RunOutcome:
    rows: list
    files: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def failed(self):
        return sum(not r.ok for r in self.rows)

    @property
    def exit_code(self):
        return 0 if self.failed == 0 else 2


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_experiment(config, out_dir=None, plots=None, parallel=None):
    """Scan every delta_a of ``config`` and write the outputs; rows that fail are kept as status=failed."""
    out_dir = out_dir or config.out_dir
    plots = config.plots if plots is None else plots
    parallel = config.parallel if parallel is None else parallel
    os.makedirs(out_dir, exist_ok=True)

    profile_rows = set(config.profile_rows())
    started = time.perf_counter()
    rows = scan_delta_a(
        config.delta_as, config.system, config.tau, config.mode_index,
        numerics=config.numerics, parallel=parallel, keep_results=bool(profile_rows),
    )
    wall = time.perf_counter() - started

    files = []
    path = os.path.join(out_dir, "scan.csv")
    _write(path, scan_csv(rows))
    files.append(path)
    for i, row in enumerate(rows):
        if i in profile_rows and row.result is not None:
            path = os.path.join(out_dir, f"profile-{i}.csv")
            _write(path, profile_csv(row.result))
            files.append(path)
    if plots:
        sim = [r.width_equivalent for r in rows]
        svg = width_plot(
            [r.delta_a for r in rows], sim, [r.analytic_linear for r in rows],
            [r.classical_limit for r in rows], [r.quantum_limit for r in rows],
            title=f"n = {config.mode_index}, beta_tilde = {config.system.beta_tilde:g}",
        )
        path = os.path.join(out_dir, "widths.svg")
        _write(path, svg)
        files.append(path)

    manifest = {"artifact.version": __version__, "python": platform.python_version(),
                "numpy": np.__version__}
    manifest.update(config.echo())
    manifest["derived.quantum_scale"] = config.system.quantum_scale
    manifest["derived.mode_frequency"] = config.mode_index * math.pi / config.tau
    manifest["run.out_dir"] = out_dir
    manifest["run.parallel"] = parallel
    manifest["run.wall_seconds"] = wall
    manifest["run.rows"] = len(rows)
    manifest["run.failed"] = sum(not r.ok for r in rows)
    leaks = [r.leak_max for r in rows if r.ok]
    manifest["run.leak_max"] = max(leaks) if leaks else math.nan
    for i, r in enumerate(rows):
        pre = f"row.{i}"
        manifest[f"{pre}.delta_a"] = r.delta_a
        manifest[f"{pre}.status"] = r.status
        if r.message:
            manifest[f"{pre}.message"] = r.message
        d = r.diagnostics
        for key in ("dt", "dx", "num_steps", "grid_points", "half_width", "eps_max", "doublings",
                    "retries", "frame", "spectral_max", "log_scale", "seconds"):
            if key in d:
                manifest[f"{pre}.{key}"] = d[key]
    path = os.path.join(out_dir, "manifest.txt")
    _write(path, manifest_text(manifest))
    files.append(path)
    return RunOutcome(rows, files, manifest)
