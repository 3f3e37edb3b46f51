"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
``failure.json`` report is written to the output directory).
"""

import argparse
import json
import logging
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from . import io as _io
from ._validation import NumericalFailure
from .config import ConfigError, ExperimentConfig, load_config, validate_config
from .mckv import CFLError

log = logging.getLogger("sparsediff")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _sweep_tasks(cfg):
    return [(n, p, r) for n, p in cfg.schedule() for r in range(cfg.sweep.replicates)]


def _plot(args, out, name, x, y, comment):
    if args.emit_plot_data:
        _io.write_plot_data(out / f"{name}.dat", x, y, comment)


def cmd_simulate(cfg, args, out):
    traj_dir = None
    if cfg.output.save_trajectories:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
    tasks = [(cfg, n, p, r, None if traj_dir is None else str(traj_dir)) for n, p, r in _sweep_tasks(cfg)]
    rows = ex.run_tasks(ex.simulate_task, tasks, args.workers)
    _io.write_csv(out / "simulate.csv", rows, ex.SIMULATE_COLUMNS)
    _plot(args, out, "delta_vs_n", [r["n"] for r in rows], [r["delta_T"] for r in rows], "n delta_T")
    return rows


def cmd_sweep_scaling(cfg, args, out):
    rows = cmd_simulate(cfg, args, out)
    table = ex.scaling_table(rows)
    _io.write_csv(out / "scaling.csv", table, ex.SCALING_COLUMNS)
    _plot(args, out, "scaling", [r["np"] for r in table], [r["median_delta_T"] for r in table],
          "n*p median_delta_T")
    return table


def cmd_graph_stats(cfg, args, out):
    tasks = [(cfg, n, p, r) for n, p, r in _sweep_tasks(cfg)]
    results = ex.run_tasks(ex.graph_stats_task, tasks, args.workers)
    rows = [r for r, _ in results]
    _io.write_csv(out / "graph_stats.csv", rows, ex.GRAPH_COLUMNS)
    certs = [{"n": r["n"], "p": r["p"], "replicate": r["replicate"], "records": [json.loads(s) for s in recs]}
             for r, recs in results]
    _io.write_json(out / "norm_certificates.json", certs)
    _plot(args, out, "norm_vs_np", [r["n"] * r["p"] for r in rows], [r["norm_D_lower"] / r["n"] for r in rows],
          "n*p norm_D_lower/n")
    return rows


def cmd_norm_bench(cfg, args, out):
    bench = ex.norm_bench(cfg)
    _io.write_csv(out / "norm_bench.csv", bench, ex.BENCH_COLUMNS)
    tasks = [(cfg, p, r) for p in cfg.norms.bennett_p for r in range(cfg.norms.bennett_replicates)]
    values = ex.run_tasks(ex.bennett_task, tasks, args.workers)
    by_p = {p: [v for (_, q, _), v in zip(tasks, values) if q == p] for p in cfg.norms.bennett_p}
    table = ex.bennett_table(cfg, by_p)
    _io.write_csv(out / "bennett.csv", table, ex.BENNETT_COLUMNS)
    return bench, table


def cmd_mckv(cfg, args, out):
    flow, rows, summary = ex.mckv_experiment(cfg)
    _io.write_csv(out / "mckv.csv", rows, ex.MCKV_COLUMNS)
    _io.write_json(out / "mckv_summary.json", summary)
    _io.save_density(out / "density.bin", flow)
    if args.emit_plot_data:
        for k, t in enumerate(flow.times):
            _io.write_plot_data(out / f"density_t{t:g}.dat", flow.centers,
                                flow.atom_weights @ flow.q[k], f"x q(t={t:g})")
    return rows


def cmd_approx(cfg, args, out):
    results = ex.run_tasks(ex.approx_task, [(cfg, r) for r in range(cfg.sweep.replicates)], args.workers)
    rows = [row for part in results for row in part]
    _io.write_csv(out / "approx.csv", rows, ex.APPROX_COLUMNS)
    _io.write_csv(out / "mollify.csv", ex.mollify_rows(), ex.MOLLIFY_COLUMNS)
    return rows


def cmd_mollify_check(cfg, args, out):
    rows = ex.mollify_rows()
    _io.write_csv(out / "mollify.csv", rows, ex.MOLLIFY_COLUMNS)
    return rows


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-scaling": cmd_sweep_scaling,
    "graph-stats": cmd_graph_stats,
    "mckv": cmd_mckv,
    "approx": cmd_approx,
    "mollify-check": cmd_mollify_check,
    "norm-bench": cmd_norm_bench,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="sparsediff", description="Sparse-graph interacting diffusion experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="INI experiment configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides [seed] master)")
    parser.add_argument("--workers", type=int, default=1, help="worker processes")
    parser.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    parser.add_argument("--emit-plot-data", action="store_true", help="also write gnuplot .dat files")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        validate_config(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    args.emit_plot_data = args.emit_plot_data or cfg.output.emit_plot_data
    (out / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    try:
        COMMANDS[args.command](cfg, args, out)
    except (NumericalFailure, CFLError, FloatingPointError) as exc:
        report = {"command": args.command, "error": type(exc).__name__, "message": str(exc),
                  "traceback": traceback.format_exc()}
        _io.write_json(out / "failure.json", report)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
