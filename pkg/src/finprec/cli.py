"""Command-line front end: ``finprec {sweep,optimize,validate,bench}``.

Every run writes a CSV (with a ``# finprec ...`` provenance comment), a PNG
figure next to it, and a ``.meta.json`` sidecar holding the wall-clock data
that is kept out of the CSV so that equal seeds give byte-identical files.

Exit codes: 0 success, 1 other failure, 2 configuration error, 3 numerical
non-convergence, 4 timeout.
"""

import argparse
import json
import logging
import os
import signal
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import report
from .channel import exp_correlation, load_stats, make_stats, write_matrix
from .config import COMMANDS, RunConfig, load_config
from .constellation import make_constellation
from .errors import CapacityError, ConfigError, ConvergenceError, DimensionError, FinprecError
from .evaluation import SweepConfig, bench_iteration, run_sweep
from .precoder import OptimizerConfig, optimize

log = logging.getLogger("finprec")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_TIMEOUT = 0, 1, 2, 3, 4


class RunTimeout(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finprec", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS, nargs="?", help="defaults to the config's command")
    parser.add_argument("--config", required=True, help="TOML run configuration (schema = 1)")
    parser.add_argument("--out", help="output CSV path (overrides the config's output)")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes for restarts")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument(
        "--timeout-secs",
        type=float,
        help="bench: per-cell limit; other commands: limit for the whole run",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _stats(cfg: RunConfig, base_dir: Path):
    if cfg.channel == "file":
        return load_stats(base_dir / cfg.a_t_file, base_dir / cfg.a_r_file)
    return make_stats(exp_correlation(cfg.n_t, cfg.rho_t), exp_correlation(cfg.n_r, cfg.rho_r))


def _optimizer_cfg(cfg: RunConfig, workers: int) -> OptimizerConfig:
    return OptimizerConfig(
        max_iter=cfg.max_iter,
        epsilon=cfg.epsilon,
        restarts=cfg.restarts,
        seed=cfg.seed,
        noise_samples=cfg.optimize_noise_samples,
        workers=workers,
    )


def _sweep_cfg(cfg: RunConfig, workers: int, exact: bool) -> SweepConfig:
    return SweepConfig(
        optimizer=_optimizer_cfg(cfg, workers),
        seed=cfg.seed,
        exact=exact,
        n_channels=cfg.n_channels,
        exact_noise_samples=cfg.exact_noise_samples,
        noise_per_channel=cfg.noise_per_channel or None,
        report_noise_samples=cfg.report_noise_samples,
    )


def _sidecar(out: Path, cfg: RunConfig, started: float, extra=None):
    meta = {
        "schema": cfg.schema,
        "command": cfg.command,
        "seed": cfg.seed,
        "git": report.git_describe(),
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_seconds": round(time.time() - started, 3),
    }
    meta.update(extra or {})
    path = out.with_suffix(out.suffix + ".meta.json")
    path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return path


def _provenance(cfg: RunConfig, started: float) -> str:
    extra = {"modulation": cfg.modulation, "n_t": cfg.n_t, "n_r": cfg.n_r}
    if cfg.record_timing:
        extra["wall_clock"] = datetime.fromtimestamp(started, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return report.provenance_line(cfg.command, cfg.seed, **extra)


def cmd_sweep(cfg, base_dir, out, workers, started, validate=False):
    stats = _stats(cfg, base_dir)
    c = make_constellation(cfg.modulation)
    methods = cfg.methods or (
        ["unprecoded", f"optimized:{cfg.n_s}"] if validate else [f"optimized:{cfg.n_s}", "unprecoded", "gaussian_wf"]
    )
    result = run_sweep(stats, c, cfg.snr_db, methods, _sweep_cfg(cfg, workers, cfg.exact or validate))
    report.emit_csv(result, out, _provenance(cfg, started), cfg.record_timing)
    title = "Asymptotic vs exact ergodic MI" if validate else "Spectral efficiency vs SNR"
    fig = report.plot_sweep(result, out.with_suffix(".png"), title, saturation=cfg.n_t * c.bits)
    code = EXIT_OK
    gaps = []
    for r in result.records:
        if r.status != "ok":
            log.error("%s dB %s: %s", r.snr_db, r.method, r.status)
            code = EXIT_CONVERGENCE
        elif validate and r.mi_exact is not None:
            gap = float(abs(r.mi_asy - r.mi_exact))
            ok = bool(gap <= cfg.validate_tolerance)
            gaps.append({"snr_db": r.snr_db, "method": r.method, "gap_bits": gap, "within_tolerance": ok})
            print(f"{'PASS' if ok else 'FAIL'}  {r.snr_db:6.1f} dB  {r.method:<14} |I_asy - I_exact| = {gap:.4f}")
    _sidecar(out, cfg, started, {"figure": fig.name, "gaps": gaps} if validate else {"figure": fig.name})
    return code


def cmd_optimize(cfg, base_dir, out, workers, started):
    stats = _stats(cfg, base_dir)
    c = make_constellation(cfg.modulation)
    if len(cfg.snr_db) != 1:
        raise ConfigError("snr_db: optimize takes exactly one SNR value")
    power = 10.0 ** (cfg.snr_db[0] / 10.0)
    trace = optimize(stats, c, power, cfg.s, cfg.n_s, _optimizer_cfg(cfg, workers))
    report.emit_csv(trace, out, _provenance(cfg, started), cfg.record_timing)
    b_path = out.with_suffix(".B.txt")
    write_matrix(b_path, trace.b)
    fig = report.plot_trace(trace, out.with_suffix(".png"))
    print(f"I_asy = {trace.mi_asy:.6f} bits (restart {trace.best_restart}); precoder written to {b_path}")
    _sidecar(out, cfg, started, {"figure": fig.name, "precoder": b_path.name, "mi_asy_bits": trace.mi_asy,
                                 "stop_reasons": [r.stop_reason for r in trace.restarts]})
    return EXIT_OK


def cmd_bench(cfg, base_dir, out, workers, started):
    records = []
    for mod in cfg.bench_modulations:
        for n_t in cfg.bench_n_t:
            for n_s in cfg.bench_n_s:
                if n_s > n_t or n_t % n_s:
                    continue
                rec = bench_iteration(n_t, n_s, mod, cfg.bench_repeats, cfg.timeout_secs, seed=cfg.seed)
                log.info("bench %s N_t=%d N_s=%d: %s s/iteration (%s)", mod, n_t, n_s,
                         rec.seconds_per_iteration, rec.status)
                records.append(rec)
    report.emit_csv(records, out, _provenance(cfg, started))
    fig = report.plot_bench(records, out.with_suffix(".png"))
    _sidecar(out, cfg, started, {"figure": fig.name})
    return EXIT_OK


def _alarm(signum, frame):
    raise RunTimeout()


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    started = time.time()
    try:
        cfg = load_config(args.config, command=args.command)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be a non-negative integer")
            cfg = replace(cfg, seed=args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.timeout_secs is not None and args.timeout_secs <= 0:
            raise ConfigError("--timeout-secs must be positive")
        if args.out:
            cfg = replace(cfg, output=args.out)
        if cfg.command == "bench" and args.timeout_secs is not None:
            cfg = replace(cfg, timeout_secs=args.timeout_secs)
    except (ConfigError, DimensionError, CapacityError) as exc:
        print(f"finprec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output)
    base_dir = Path(args.config).resolve().parent
    run_limit = args.timeout_secs if cfg.command != "bench" else None
    if run_limit:
        signal.signal(signal.SIGALRM, _alarm)
        signal.setitimer(signal.ITIMER_REAL, run_limit)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        if cfg.command == "sweep":
            return cmd_sweep(cfg, base_dir, out, args.workers, started)
        if cfg.command == "validate":
            return cmd_sweep(cfg, base_dir, out, args.workers, started, validate=True)
        if cfg.command == "optimize":
            return cmd_optimize(cfg, base_dir, out, args.workers, started)
        return cmd_bench(cfg, base_dir, out, args.workers, started)
    except RunTimeout:
        print(f"finprec: run exceeded {run_limit:g} s", file=sys.stderr)
        return EXIT_TIMEOUT
    except (ConfigError, DimensionError, CapacityError) as exc:
        print(f"finprec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"finprec: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (FinprecError, OSError) as exc:
        print(f"finprec: {exc}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        if run_limit:
            signal.setitimer(signal.ITIMER_REAL, 0)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
