"""CSV serialization and matplotlib figures for sweep, validation, bench and
optimization results."""

import csv
import io
import math
import os
import subprocess
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .config import SCHEMA_VERSION  # noqa: E402
from .errors import FinprecError  # noqa: E402
from .evaluation import BenchRecord, SweepResult  # noqa: E402
from .precoder import OptimizationTrace  # noqa: E402

SWEEP_COLUMNS = ["snr_db", "method", "mi_asy_bits", "mi_exact_bits", "std_error", "iterations", "wall_seconds"]
TRACE_COLUMNS = ["restart", "iteration", "mi_asy_bits", "step_lambda", "step_v", "fp_residual", "fp_sweeps",
                 "wall_seconds"]
BENCH_COLUMNS = ["n_t", "n_s", "modulation", "seconds_per_iteration", "status"]


def fmt(x) -> str:
    """Floats with 9 significant digits; ``None`` as an empty cell."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.9g}"
    return str(x)


def git_describe() -> str:
    override = os.environ.get("FINPREC_GIT_DESCRIBE")
    if override:
        return override
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def provenance_line(command: str, seed, **extra) -> str:
    parts = [f"schema={SCHEMA_VERSION}", f"command={command}", f"seed={seed}", f"git={git_describe()}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# finprec " + " ".join(parts)


def _rows(result, record_timing):
    if isinstance(result, SweepResult):
        rows = []
        for r in result.records:
            rows.append([r.snr_db, r.method, r.mi_asy, r.mi_exact, r.std_error, r.iterations,
                         r.wall_seconds if record_timing else None])
        return SWEEP_COLUMNS, rows
    if isinstance(result, OptimizationTrace):
        rows = [[r.restart, r.iteration, r.mi_asy, r.step_lambda, r.step_v, r.fp_residual, r.fp_sweeps,
                 r.wall_seconds if record_timing else None] for r in result.records]
        return TRACE_COLUMNS, rows
    records = list(result)
    if all(isinstance(r, BenchRecord) for r in records):
        return BENCH_COLUMNS, [[r.n_t, r.n_s, r.modulation, r.seconds_per_iteration, r.status] for r in records]
    raise TypeError(f"cannot serialize {type(result).__name__}")


def render_csv(result, provenance=None, record_timing=True) -> str:
    columns, rows = _rows(result, record_timing)
    buf = io.StringIO()
    if provenance:
        buf.write(provenance.rstrip("\n") + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def emit_csv(result, path, provenance=None, record_timing=True) -> Path:
    """Write ``result`` as UTF-8 CSV with LF line endings.

    Wall-clock columns are left empty when ``record_timing`` is false, which
    makes sweep and trace files byte-reproducible for a fixed seed.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(result, provenance, record_timing))
    except OSError as exc:
        raise FinprecError(f"cannot write {path}: {exc}") from exc
    return path


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(result: SweepResult, path, title="Spectral efficiency vs SNR", saturation=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for i, method in enumerate(result.methods()):
        recs = [r for r in result.records if r.method == method and r.status == "ok"]
        color = f"C{i}"
        ax.plot([r.snr_db for r in recs], [r.mi_asy for r in recs], "-o", color=color, ms=4,
                label=f"{method} (asymptotic)")
        ex = [r for r in recs if r.mi_exact is not None]
        if ex:
            ax.errorbar([r.snr_db for r in ex], [r.mi_exact for r in ex], yerr=[2 * r.std_error for r in ex],
                        fmt="--s", color=color, ms=4, mfc="none", capsize=2, label=f"{method} (exact)")
    if saturation:
        ax.axhline(saturation, color="0.6", lw=0.8, ls=":")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Spectral efficiency (b/s/Hz)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_bench(records, path):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    groups = {}
    for r in records:
        groups.setdefault((r.modulation, r.n_s), []).append(r)
    for (mod, n_s), recs in sorted(groups.items()):
        ok = [r for r in recs if not r.exceeded]
        ax.plot([r.n_t for r in ok], [r.seconds_per_iteration for r in ok], "-o", ms=4,
                label=f"{mod}, N_s={n_s}")
        for r in recs:
            if r.exceeded:
                ax.annotate("×", (r.n_t, ax.get_ylim()[1]), ha="center", va="top")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("N_t")
    ax.set_ylabel("seconds per iteration")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_trace(trace: OptimizationTrace, path):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for r in trace.restarts:
        ax.plot([rec.iteration for rec in r.records], [rec.mi_asy for rec in r.records], "-", lw=1.2,
                label=f"restart {r.restart}" + (" (best)" if r.restart == trace.best_restart else ""))
    ax.set_xlabel("iteration")
    ax.set_ylabel("asymptotic MI (bits)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)
