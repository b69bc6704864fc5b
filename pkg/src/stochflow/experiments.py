"""Experiment runners: fan out pure path shards, merge in fixed order, persist.

Workers rebuild the field system from its family name, so only plain data
crosses process boundaries.  Shard decomposition depends solely on the config,
never on the worker count, which makes reports bit-identical for any pool size.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import verify
from .config import ExperimentConfig
from .families import build_family
from .fields import check_hypothesis_H
from .integrate import SolverConfig
from .verify import BoundConstants, MomentEstimate

SHARD_PATHS = 64

_H_LINE_ENTRIES = {
    "gamma1": "sup_diffusion_sq",
    "gamma2": "sup_drift",
    "beta1": "lip_diffusion_sq",
    "beta2": "lip_drift",
    "delta1": "bracket_lip_offdiag",
    "delta2": "bracket_lip_drift",
}


@dataclass(frozen=True)
class ExperimentOutcome:
    report: dict
    hard_pass: bool
    files: tuple


def _solver_cfg(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(
        substeps_per_interval=cfg.substeps,
        explosion_threshold=cfg.explosion_threshold,
    )


def _default_x0(cfg: ExperimentConfig, dim: int) -> np.ndarray:
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.shape != (dim,):
            raise ValueError(f"x0 must have dimension {dim}")
        return x0
    return np.full(dim, 1.0 / math.sqrt(dim))


def _shard_bounds(paths: int):
    return [(lo, min(lo + SHARD_PATHS, paths)) for lo in range(0, paths, SHARD_PATHS)]


# ---------------------------------------------------------------------------
# Worker entry point (top level so it pickles)


def _flow_shard(system, grid_pts, level, seed, lo, hi, scfg, times, alpha):
    states, _, taus = verify.states_samples(
        system, level, grid_pts, hi - lo, seed, scfg, start_index=lo
    )
    out_level = scfg.resolve_output_level(level)
    x0s = np.asarray(grid_pts, dtype=float)
    d = x0s.shape[1]
    diff0 = np.linalg.norm(x0s[:, None] - x0s[None, :], axis=-1)
    mask = ~np.eye(len(x0s), dtype=bool)
    perm0 = np.argsort(x0s[:, 0]) if d == 1 else None
    first_tau = np.min(taus, axis=1)

    out = {}
    for t in times:
        j = round(t * (1 << out_level))
        snap = states[:, :, j]
        difft = np.linalg.norm(snap[:, :, None, :] - snap[:, None, :, :], axis=-1)
        ok = first_tau > t
        margins = np.where(ok, np.nanmin(np.where(mask, difft, np.inf), axis=(1, 2)), np.nan)
        with np.errstate(invalid="ignore"):
            holders = np.where(
                ok, np.nanmax(difft[:, mask] / diff0[mask] ** alpha, axis=1), np.nan
            )
        if d == 1:
            order = ok & np.all(np.diff(snap[:, perm0, 0], axis=1) > 0.0, axis=1)
        else:
            order = np.zeros(len(snap), dtype=bool)
        out[t] = {
            "margin": margins,
            "holder": holders,
            "order": order,
            "exploded": ~ok,
        }
    return out


def _worker(task: dict):
    system = build_family(task["family"], task["family_params"])
    scfg = SolverConfig(task["substeps"], task["threshold"])
    kind = task["kind"]
    if kind == "sup":
        return verify.sup_samples(
            system,
            task["level"],
            np.asarray(task["x0"]),
            task["hi"] - task["lo"],
            task["seed"],
            scfg,
            n_max=task["n_max"],
            start_index=task["lo"],
        )
    if kind == "conv":
        return verify.convergence_shard(
            system,
            np.asarray(task["grid"]),
            task["levels"],
            task["seed"],
            task["lo"],
            task["hi"],
            scfg,
            n_ref=task["n_ref"],
        )
    if kind == "flow":
        return _flow_shard(
            system,
            np.asarray(task["grid"]),
            task["level"],
            task["seed"],
            task["lo"],
            task["hi"],
            scfg,
            task["times"],
            task["alpha"],
        )
    raise ValueError(f"unknown task kind {kind!r}")


def _map_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_worker, tasks))


def _base_task(cfg: ExperimentConfig) -> dict:
    return {
        "family": cfg.family,
        "family_params": cfg.family_params,
        "substeps": cfg.substeps,
        "threshold": cfg.explosion_threshold,
        "seed": cfg.seed,
    }


# ---------------------------------------------------------------------------
# JSON / CSV plumbing


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "family": cfg.family,
        "family_params": cfg.family_params,
        "radius": cfg.radius,
        "grid_points": cfg.grid_points,
        "levels": list(cfg.levels),
        "n_max": cfg.n_max,
        "paths": cfg.paths,
        "orders": list(cfg.orders),
        "substeps": cfg.substeps,
        "explosion_threshold": cfg.explosion_threshold,
        "times": list(cfg.times),
        "x0": list(cfg.x0) if cfg.x0 is not None else None,
        "radii": list(cfg.radii),
        "holder_alpha": cfg.holder_alpha,
        "dist": cfg.dist,
    }


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _finish(cfg: ExperimentConfig, report: dict, hard: list, files: list, make_plots: bool):
    report["hard_verdicts"] = {k: bool(v) for k, v in hard}
    hard_pass = all(v for _, v in hard)
    report["passed"] = hard_pass
    report["config"] = _config_echo(cfg)
    if make_plots:
        from . import plots

        files.extend(plots.render(report, cfg.out))
    report["manifest"] = sorted(os.path.basename(f) for f in files)
    report["timestamp"] = datetime.now(timezone.utc).isoformat()
    json_path = os.path.join(cfg.out, f"{cfg.experiment.replace('-', '_')}_report.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append(json_path)
    return ExperimentOutcome(report=report, hard_pass=hard_pass, files=tuple(files))


# ---------------------------------------------------------------------------
# Experiment runners


def run_moments(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    """One-point sup-process moments per level and order, on shared noise."""
    system = build_family(cfg.family, cfg.family_params)
    x0 = _default_x0(cfg, system.dim_state)
    levels = sorted(cfg.levels)
    n_max = max(levels)
    results = []
    rows = []
    for level in levels:
        tasks = [
            {**_base_task(cfg), "kind": "sup", "level": level, "n_max": n_max,
             "x0": x0.tolist(), "lo": lo, "hi": hi}
            for lo, hi in _shard_bounds(cfg.paths)
        ]
        sups = np.concatenate(_map_tasks(tasks, cfg.workers))
        finite = sups[np.isfinite(sups)]
        for p in cfg.orders:
            est = MomentEstimate.from_samples(finite, p)
            entry = {"level": level, "p": p, **est.to_dict()}
            entry["failed"] = int(np.sum(~np.isfinite(sups)))
            results.append(entry)
            rows.append(
                [level, p, est.estimate, est.half_width, est.count, entry["failed"]]
            )
    report = {"experiment": "moments", "results": results}
    files = [
        _write_csv(
            os.path.join(cfg.out, "moments_summary.csv"),
            ["level", "p", "estimate", "half_width", "count", "failed"],
            rows,
        )
    ]
    hard = [("all_estimates_finite", all(math.isfinite(r["estimate"]) for r in results))]
    return _finish(cfg, report, hard, files, make_plots)


def run_two_point(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    """Near-pair moment-ratio boundedness of the coupled two-point motion."""
    system = build_family(cfg.family, cfg.family_params)
    x0 = _default_x0(cfg, system.dim_state)
    consts = _bound_constants(cfg, system)
    level = max(cfg.levels)
    reports = []
    rows = []
    for idx, p in enumerate(cfg.orders):
        rep = verify.verify_inequality(
            "(3.15)",
            system,
            consts,
            {"p": p, "level": level, "count": cfg.paths, "x0": x0.tolist()},
            cfg.seed + 1000 * idx,
            _solver_cfg(cfg),
        )
        reports.append(rep.to_dict())
        for k, ratio in zip(rep.params["ks"], rep.details["ratios"]):
            rows.append([p, k, ratio])
    report = {"experiment": "two-point", "reports": reports}
    files = [
        _write_csv(
            os.path.join(cfg.out, "two_point_ratios.csv"),
            ["p", "k", "moment_ratio"],
            rows,
        )
    ]
    hard = [(f"ratio_bounded_p{p:g}", r["verdict"]) for p, r in zip(cfg.orders, reports)]
    return _finish(cfg, report, hard, files, make_plots)


def run_convergence(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    """Per-level sup error against the finest-grid reference, with slope fit."""
    from .flow import uniform_ball_grid

    system = build_family(cfg.family, cfg.family_params)
    grid = uniform_ball_grid(system.dim_state, cfg.radius, cfg.grid_points, cfg.seed)
    levels = sorted(cfg.levels)
    tasks = [
        {**_base_task(cfg), "kind": "conv", "grid": grid.initial_points.tolist(),
         "levels": levels, "n_ref": cfg.n_max, "lo": lo, "hi": hi}
        for lo, hi in _shard_bounds(cfg.paths)
    ]
    shards = _map_tasks(tasks, cfg.workers)
    result = verify.merge_convergence_shards(shards, levels, cfg.n_max, cfg.orders[0])
    medians = [result.per_level[n]["median"] for n in levels]
    quarter = medians[-1] <= 0.25 * medians[0]
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(medians, medians[1:]))
    cross_ok = result.cross_check_median <= 0.10 * medians[-1]
    report = {
        "experiment": "convergence",
        "result": result.to_dict(),
        "cross_check_within_tenth_of_finest_error": cross_ok,
    }
    rows = [
        [n, s["mean"], s["median"], s["q25"], s["q75"]]
        for n, s in ((n, result.per_level[n]) for n in levels)
    ]
    files = [
        _write_csv(
            os.path.join(cfg.out, "convergence_curve.csv"),
            ["level", "mean_sup_error", "median_sup_error", "q25", "q75"],
            rows,
        )
    ]
    hard = [
        ("finest_error_at_most_quarter_of_coarsest", quarter),
        ("median_error_monotone_nonincreasing", monotone),
    ]
    return _finish(cfg, report, hard, files, make_plots)


def run_flow_check(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    """Homeomorphism diagnostics of the flow map over a ball grid of starts."""
    from .flow import uniform_ball_grid

    system = build_family(cfg.family, cfg.family_params)
    grid = uniform_ball_grid(system.dim_state, cfg.radius, cfg.grid_points, cfg.seed)
    level = max(cfg.levels)
    tasks = [
        {**_base_task(cfg), "kind": "flow", "grid": grid.initial_points.tolist(),
         "level": level, "times": list(cfg.times), "alpha": cfg.holder_alpha,
         "lo": lo, "hi": hi}
        for lo, hi in _shard_bounds(cfg.paths)
    ]
    shards = _map_tasks(tasks, cfg.workers)
    per_time = []
    rows = []
    for t in cfg.times:
        margin = np.concatenate([s[t]["margin"] for s in shards])
        holder = np.concatenate([s[t]["holder"] for s in shards])
        order = np.concatenate([s[t]["order"] for s in shards])
        exploded = np.concatenate([s[t]["exploded"] for s in shards])
        ok = ~exploded
        entry = {
            "time": t,
            "min_injectivity_margin": float(np.min(margin[ok])) if ok.any() else math.nan,
            "max_holder_constant": float(np.max(holder[ok])) if ok.any() else math.nan,
            "order_preserved": bool(np.all(order[ok])) if system.dim_state == 1 else None,
            "explosions": int(np.sum(exploded)),
            "paths": int(len(margin)),
        }
        per_time.append(entry)
        rows.append(
            [t, entry["min_injectivity_margin"], entry["max_holder_constant"],
             entry["explosions"]]
        )
    report = {
        "experiment": "flow-check",
        "level": level,
        "holder_alpha": cfg.holder_alpha,
        "per_time": per_time,
    }
    files = [
        _write_csv(
            os.path.join(cfg.out, "flow_check_summary.csv"),
            ["t", "min_injectivity_margin", "max_holder_constant", "explosions"],
            rows,
        )
    ]
    hard = [
        ("no_explosions", all(e["explosions"] == 0 for e in per_time)),
        (
            "injectivity_margin_positive",
            all(e["min_injectivity_margin"] > 0 for e in per_time),
        ),
    ]
    if system.dim_state == 1:
        hard.append(("order_preserved", all(e["order_preserved"] for e in per_time)))
    return _finish(cfg, report, hard, files, make_plots)


def run_hypothesis_check(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    """Log-growth hypothesis verdicts for the configured family."""
    system = build_family(cfg.family, cfg.family_params)
    hc = check_hypothesis_H(system, cfg.radii)
    violations = [
        f"{line} ({_H_LINE_ENTRIES[line]}) grows faster than its admissible power of log m"
        for line, ok in hc.verdicts.items()
        if not ok
    ]
    rows = [
        [line, _H_LINE_ENTRIES[line], getattr(hc, line), hc.verdicts[line]]
        for line in _H_LINE_ENTRIES
    ]
    report = {
        "experiment": "hypothesis-check",
        "constants": {line: getattr(hc, line) for line in _H_LINE_ENTRIES},
        "verdicts": hc.verdicts,
        "violations": violations,
        "diagnostics": hc.diagnostics,
    }
    files = [
        _write_csv(
            os.path.join(cfg.out, "hypothesis_check_summary.csv"),
            ["line", "profile_entry", "fitted_constant", "verdict"],
            rows,
        )
    ]
    hard = [(line, hc.verdicts[line]) for line in _H_LINE_ENTRIES]
    return _finish(cfg, report, hard, files, make_plots)


def _bound_constants(cfg: ExperimentConfig, system) -> BoundConstants:
    kwargs = dict(cfg.constants)
    kwargs.setdefault("N", system.dim_noise)
    return BoundConstants(**kwargs)


def run_bounds(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    """Run the configured list of registered inequality checks."""
    system = build_family(cfg.family, cfg.family_params)
    consts = _bound_constants(cfg, system)
    reports = []
    rows = []
    for idx, entry in enumerate(cfg.inequalities):
        params = dict(entry["params"])
        params.setdefault("count", cfg.paths)
        if cfg.x0 is not None:
            params.setdefault("x0", list(cfg.x0))
        rep = verify.verify_inequality(
            entry["name"], system, consts, params, cfg.seed + 1000 * idx, _solver_cfg(cfg)
        )
        reports.append(rep.to_dict())
        rows.append(
            [rep.name, rep.lhs, rep.ci, rep.rhs, rep.margin, rep.verdict,
             rep.shape_check, rep.samples, rep.explosions]
        )
    report = {"experiment": "bounds", "reports": reports}
    files = [
        _write_csv(
            os.path.join(cfg.out, "bounds_summary.csv"),
            ["name", "lhs", "ci", "rhs", "margin", "verdict", "shape_check",
             "samples", "explosions"],
            rows,
        )
    ]
    hard = [
        (f"{i}:{r['name']}", r["verdict"])
        for i, r in enumerate(reports)
        if not r["shape_check"]
    ]
    return _finish(cfg, report, hard, files, make_plots)


RUNNERS = {
    "moments": run_moments,
    "two-point": run_two_point,
    "convergence": run_convergence,
    "flow-check": run_flow_check,
    "hypothesis-check": run_hypothesis_check,
    "bounds": run_bounds,
}


def run_experiment(cfg: ExperimentConfig, make_plots: bool = True) -> ExperimentOutcome:
    os.makedirs(cfg.out, exist_ok=True)
    return RUNNERS[cfg.experiment](cfg, make_plots=make_plots)
