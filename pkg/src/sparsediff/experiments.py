"""Experiment units shared by the command line and the acceptance suite.

Each task is a pure function of ``(config, n, p, replicate)`` returning a
row dict, so tasks can run in any order or process and be merged by key.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

from . import approx as _approx
from . import io as _io
from . import mckv as _mckv
from .dynamics import integrate_coupled, integrate_single
from .graph import kernel_matrix, row_sum_stats, sample_w_graph
from .measures import EmpiricalMeasure, coupling_delta, dbl_lower_bound, gronwall_wasserstein_bound
from .norms import (EXACT_CAP, bennett_log_tail, norm_inf_to_one_exact, norm_inf_to_one_lower,
                    norm_inf_to_one_upper, norm_record)
from .rng import MC, run_seed, stream

log = logging.getLogger(__name__)

SIMULATE_COLUMNS = ["n", "p", "replicate", "seed", "delta_T", "delta_T_capped", "dbl_lower", "w1_at_T",
                    "norm_D_lower", "norm_D_upper", "norm_D_exact", "gronwall_bound", "gronwall_pass"]
SCALING_COLUMNS = ["n", "p", "np", "replicates", "median_delta_T", "median_delta_T_capped",
                   "median_norm_D_lower_over_n", "median_norm_D_upper_over_n", "decreasing"]
GRAPH_COLUMNS = ["n", "p", "replicate", "seed", "edges", "mean_S", "ones_P_ones_over_n", "norm_D_lower",
                 "norm_D_upper", "norm_D_exact", "bound", "bound_holds"]
APPROX_COLUMNS = ["replicate", "n", "epsilon", "R", "exit_fraction", "capped_delta", "rapp_C", "rapp_bound",
                  "pass", "exit_zero"]
BENCH_COLUMNS = ["index", "n", "lower", "exact", "upper", "ordered", "attained"]
BENNETT_COLUMNS = ["n", "p", "eta", "replicates", "frequency", "bound", "ok"]
MCKV_COLUMNS = ["t", "w1", "self_w1", "mass_error"]
MOLLIFY_COLUMNS = ["function", "epsilon", "R", "check", "value", "limit", "pass"]


def _slack(cfg):
    return 10.0 * np.sqrt(cfg.run.dt) * cfg.run.T


def _worker_init():
    threadpool_limits(1)


def run_tasks(fn, tasks, workers=1):
    """Run ``fn(*task)`` for every task; results come back in task order.

    BLAS is pinned to one thread in every process so that results do not
    depend on the worker count.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        with threadpool_limits(1):
            return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


def simulate_task(cfg, n, p, replicate, traj_dir=None):
    model = cfg.build_model()
    seed = run_seed(cfg.seed, n, replicate)
    media = model.sample_media(seed, n)
    sample = sample_w_graph(n, p, model.W, media, seed, kernel_id=cfg.model_id)
    pair = integrate_coupled(model, sample, cfg.run.T, cfg.run.dt, seed, noise_scale=cfg.run.noise_scale)
    report = coupling_delta(pair)
    D = sample.D
    lower = norm_inf_to_one_lower(D, restarts=cfg.distances.norm_restarts, seed=seed)
    upper = norm_inf_to_one_upper(D)
    exact = norm_inf_to_one_exact(D) if n <= EXACT_CAP else float("nan")
    certified = exact if n <= EXACT_CAP else upper
    try:
        bound = gronwall_wasserstein_bound(model, certified, n, cfg.run.T)
    except ValueError:
        bound = float("nan")
    dbl = dbl_lower_bound(EmpiricalMeasure.from_pair(pair, "sparse"), EmpiricalMeasure.from_pair(pair, "dense"),
                          dictionary_size=cfg.distances.dbl_dictionary, seed=seed,
                          time_points=cfg.distances.dbl_time_points)
    if traj_dir is not None:
        _io.save_trajectories(f"{traj_dir}/n{n}_r{replicate}.bin", pair)
    return {
        "n": n, "p": p, "replicate": replicate, "seed": seed,
        "delta_T": report.delta_T, "delta_T_capped": report.delta_T_capped, "dbl_lower": dbl,
        "w1_at_T": float(report.w1_marginals[-1]), "norm_D_lower": lower, "norm_D_upper": upper,
        "norm_D_exact": exact, "gronwall_bound": bound,
        "gronwall_pass": bool(report.delta_T <= bound + _slack(cfg)) if np.isfinite(bound) else False,
    }


def scaling_table(rows):
    """Medians per sweep point and the monotone-decrease flags."""
    keys = sorted({(r["n"], r["p"]) for r in rows})
    table, previous = [], None
    for n, p in keys:
        sel = [r for r in rows if r["n"] == n and r["p"] == p]
        med = float(np.median([r["delta_T"] for r in sel]))
        table.append({
            "n": n, "p": p, "np": n * p, "replicates": len(sel),
            "median_delta_T": med,
            "median_delta_T_capped": float(np.median([r["delta_T_capped"] for r in sel])),
            "median_norm_D_lower_over_n": float(np.median([r["norm_D_lower"] / n for r in sel])),
            "median_norm_D_upper_over_n": float(np.median([r["norm_D_upper"] / n for r in sel])),
            "decreasing": previous is None or med < previous,
        })
        previous = med
    return table


def graph_stats_task(cfg, n, p, replicate):
    model = cfg.build_model()
    seed = run_seed(cfg.seed, n, replicate)
    media = model.sample_media(seed, n)
    sample = sample_w_graph(n, p, model.W, media, seed, kernel_id=cfg.model_id)
    D = sample.D
    lower, x, _ = norm_inf_to_one_lower(D, restarts=cfg.distances.norm_restarts, seed=seed,
                                        return_certificate=True)
    upper = norm_inf_to_one_upper(D)
    exact = norm_inf_to_one_exact(D) if n <= EXACT_CAP else float("nan")
    stats = row_sum_stats(sample, norm_D=exact if n <= EXACT_CAP else upper)
    row = {
        "n": n, "p": p, "replicate": replicate, "seed": seed, "edges": int(sample.edges().shape[0]),
        "mean_S": stats["mean_S"], "ones_P_ones_over_n": stats["ones_P_ones_over_n"],
        "norm_D_lower": lower, "norm_D_upper": upper, "norm_D_exact": exact,
        "bound": stats["bound"], "bound_holds": stats["bound_holds"],
    }
    records = [norm_record("lower", lower, {"x": x}), norm_record("upper", upper)]
    if n <= EXACT_CAP:
        records.append(norm_record("exact", exact))
    return row, records


def _bench_matrix(seed, i, max_n):
    g = stream(seed, MC, 100, i)
    n = int(g.integers(2, max_n + 1))
    kind = i % 3
    if kind == 0:
        return g.standard_normal((n, n))
    if kind == 1:
        return g.choice([-1.0, 1.0], size=(n, n))
    # centred adjacency, the case that matters here
    p = g.uniform(0.1, 0.9)
    A = np.triu((g.random((n, n)) < p).astype(float))
    A = A + np.triu(A, 1).T
    return A / (p * n) - 1.0 / n


def norm_bench(cfg):
    rows = []
    for i in range(cfg.norms.bench_matrices):
        M = _bench_matrix(cfg.seed, i, cfg.norms.bench_max_n)
        lo = norm_inf_to_one_lower(M, restarts=cfg.distances.norm_restarts, seed=cfg.seed)
        ex = norm_inf_to_one_exact(M)
        up = norm_inf_to_one_upper(M)
        tol = 1e-9 * max(1.0, ex)
        rows.append({"index": i, "n": M.shape[0], "lower": lo, "exact": ex, "upper": up,
                     "ordered": lo <= ex + tol and ex <= up + tol, "attained": abs(lo - ex) <= tol})
    return rows


def bennett_task(cfg, p, replicate):
    n = cfg.norms.bennett_n
    seed = run_seed(cfg.seed, n, replicate)
    media = np.zeros((n, 1))
    # the same uniforms serve every p, so replicates are monotonely coupled across p
    sample = sample_w_graph(n, p, _ones, media, seed, kernel_id="erdos_renyi")
    return norm_inf_to_one_exact(sample.D) / n


def _ones(w, q):
    return np.ones(np.broadcast_shapes(np.shape(w)[:-1], np.shape(q)[:-1]))


def bennett_table(cfg, values_by_p):
    n = cfg.norms.bennett_n
    rows = []
    for p, values in values_by_p.items():
        values = np.asarray(values)
        for eta in cfg.norms.bennett_eta:
            bound = float(np.exp(min(bennett_log_tail(n, p, eta), 0.0)))
            freq = float(np.mean(values > eta))
            rows.append({"n": n, "p": p, "eta": float(eta), "replicates": len(values), "frequency": freq,
                         "bound": bound, "ok": bound >= 1.0 or freq <= bound})
    return rows


def approx_task(cfg, replicate):
    model = cfg.build_model()
    n = cfg.approx.n
    p = dict(cfg.schedule()).get(n, float(cfg.sweep.c * n ** (-cfg.sweep.gamma)))
    p = min(p, 1.0 / model.sup_W)
    seed = run_seed(cfg.seed, n, replicate)
    media = model.sample_media(seed, n)
    sample = sample_w_graph(n, p, model.W, media, seed, kernel_id=cfg.model_id)
    norm_D = norm_inf_to_one_upper(sample.D)
    C = _approx.rapp_constant(model)
    rows, reference = [], None
    for eps in cfg.approx.epsilon:
        for R in cfg.approx.R:
            run = _approx.run_approx_system(model, sample, eps, R, cfg.run.T, cfg.run.dt, seed,
                                            noise_scale=cfg.run.noise_scale, reference=reference)
            reference = run.reference
            bound = _approx.rapp_bound(model, eps, run.exit_fraction, norm_D / n, cfg.run.T)
            rows.append({
                "replicate": replicate, "n": n, "epsilon": float(eps), "R": float(R),
                "exit_fraction": run.exit_fraction, "capped_delta": run.capped_delta, "rapp_C": C,
                "rapp_bound": bound, "pass": run.capped_delta <= bound + _slack(cfg),
                "exit_zero": run.exit_fraction == 0.0,
            })
    return rows


def _kuramoto_pair(kappa):
    def phi(v):
        return kappa * np.sin(v[:, 1] - v[:, 0])

    return phi


def mollify_rows(epsilons=(0.1, 0.01), radii=(4.0, 8.0), tol=1e-6):
    """Grid assertions for sin in 1-D and the Kuramoto pair function in 2-D."""
    rows = []
    cases = [
        ("sin", lambda v: np.sin(v[:, 0]), 1.0, 1.0, 1),
        ("kuramoto_pair", _kuramoto_pair(1.0), 1.0, np.sqrt(2.0), 2),
    ]
    for name, phi, sup_phi, grad_phi, dim in cases:
        for R in radii:
            lim = 2.5 * R
            if dim == 1:
                grid = np.linspace(-lim, lim, 2001)[:, None]
            else:
                ax = np.linspace(-lim, lim, 61)
                grid = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
            for eps in epsilons:
                checks = _approx.mollifier_checks(phi, sup_phi, grad_phi, dim, eps, R, grid, tol=tol)
                for check, res in checks.items():
                    rows.append({"function": name, "epsilon": eps, "R": R, "check": check,
                                 "value": res["value"], "limit": res["limit"], "pass": res["pass"]})
    x = np.linspace(-10, 10, 2001)[:, None]
    for eps in epsilons:
        err = np.max(np.abs(_approx.mollify(np.sin, eps, x, order=16).ravel()
                            - np.exp(-eps**2 / 2) * np.sin(x[:, 0])))
        rows.append({"function": "sin", "epsilon": eps, "R": float("inf"), "check": "closed form",
                     "value": float(err), "limit": 1e-10, "pass": bool(err <= 1e-10)})
    return rows


def mckv_experiment(cfg):
    model = cfg.build_model()
    m = cfg.mckv
    checkpoints = sorted(set(m.checkpoints) | {m.T})
    t0 = time.perf_counter()
    flow = _mckv.solve_mckv(model, media_atoms=m.media_atoms, grid_points=m.grid_points, T=m.T,
                            dt_pde=m.dt_pde or None, seed=cfg.seed, checkpoints=checkpoints)
    log.info("PDE solved in %.1fs (dt_pde=%.3g)", time.perf_counter() - t0, flow.dt_pde)
    n = m.n or max(cfg.sweep.n)
    seed = run_seed(cfg.seed, n, 0)
    media = model.sample_media(seed, n)
    Pbar = kernel_matrix(model.W, media) / n
    paths = integrate_single(model, Pbar, media, m.T, cfg.run.dt, seed, noise_scale=cfg.run.noise_scale)
    emp = EmpiricalMeasure(paths, media, cfg.run.dt)
    rows = []
    for k, t in enumerate(flow.times):
        own = _mckv.sample_marginal(flow, t, n, quantiles=True)
        rows.append({
            "t": float(t),
            "w1": _mckv.compare_to_empirical(flow, emp, t).distance,
            "self_w1": _mckv.compare_to_empirical(flow, (own, None), t).distance,
            "mass_error": float(np.max(flow.mass_error[k])),
        })
    summary = {"residual": _mckv.stationarity_residual(flow, model), "dt_pde": flow.dt_pde,
               "clip_mass": flow.clip_mass, "n": n, "grid_points": m.grid_points}
    return flow, rows, summary
