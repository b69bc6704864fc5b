"""Experiment configuration: YAML schema, strict validation, no execution.

Unknown keys are hard errors so a typo in a constant name cannot silently
change a verdict.  Seeding is always explicit; there is no wall-clock entropy
anywhere in the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import wiener
from .families import family_names

EXPERIMENTS = (
    "moments",
    "two-point",
    "convergence",
    "flow-check",
    "hypothesis-check",
    "bounds",
)

_TOP_KEYS = {
    "experiment",
    "seed",
    "family",
    "radius",
    "grid_points",
    "levels",
    "n_max",
    "paths",
    "orders",
    "workers",
    "out",
    "solver",
    "times",
    "x0",
    "constants",
    "inequalities",
    "radii",
    "holder_alpha",
    "dist",
}
_FAMILY_KEYS = {"name", "params"}
_SOLVER_KEYS = {"substeps", "explosion_threshold"}
_CONSTANT_KEYS = {"C1", "C2", "C3", "C4", "L1", "L2", "K1", "K2", "delta0", "C"}
_INEQUALITY_KEYS = {"name", "params"}


class ConfigError(ValueError):
    """Raised when a configuration file fails schema or cross-field checks."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, immutable experiment description."""

    experiment: str
    seed: int
    family: str
    family_params: dict = field(default_factory=dict)
    radius: float = 4.0
    grid_points: int = 25
    levels: tuple = (4, 6, 8, 10)
    n_max: int = 14
    paths: int = 200
    orders: tuple = (2.0, 4.0, 8.0)
    workers: int = 1
    out: str = "reports"
    substeps: int = 8
    explosion_threshold: float = 1e8
    times: tuple = (0.25, 0.5, 1.0)
    x0: Optional[tuple] = None
    constants: dict = field(default_factory=dict)
    inequalities: tuple = ()
    radii: tuple = (2.0, 4.0, 8.0, 16.0, 32.0)
    holder_alpha: float = 0.5
    dist: float = 1e-3


def _check_keys(mapping, allowed, where, diags) -> bool:
    if not isinstance(mapping, dict):
        diags.append(f"{where}: expected a mapping")
        return False
    unknown = sorted(set(mapping) - allowed)
    for key in unknown:
        diags.append(f"{where}: unknown key {key!r}")
    return not unknown


def validate_config(raw: dict, experiment: Optional[str] = None) -> list:
    """Schema and cross-field diagnostics; empty list means valid."""
    diags: list = []
    if not isinstance(raw, dict):
        return ["top level: expected a mapping"]
    _check_keys(raw, _TOP_KEYS, "top level", diags)

    if "seed" not in raw:
        diags.append("seed: required key missing")
    elif not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool):
        diags.append("seed: must be an integer")

    exp = raw.get("experiment", experiment)
    if exp is not None and exp not in EXPERIMENTS:
        diags.append(f"experiment: unknown experiment {exp!r}")
    if (
        experiment is not None
        and raw.get("experiment") is not None
        and raw["experiment"] != experiment
    ):
        diags.append(
            f"experiment: file says {raw['experiment']!r} but {experiment!r} was requested"
        )

    fam = raw.get("family")
    if fam is None:
        diags.append("family: required key missing")
    elif _check_keys(fam, _FAMILY_KEYS, "family", diags):
        if "name" not in fam:
            diags.append("family.name: required key missing")
        elif fam["name"] not in family_names():
            diags.append(f"family.name: unknown family {fam['name']!r}")
        if not isinstance(fam.get("params", {}), dict):
            diags.append("family.params: expected a mapping")

    levels = raw.get("levels", list(ExperimentConfig.levels))
    if not (
        isinstance(levels, list)
        and levels
        and all(isinstance(n, int) and not isinstance(n, bool) for n in levels)
    ):
        diags.append("levels: expected a nonempty list of integers")
        levels = None
    elif min(levels) < 1:
        diags.append("levels: every level must be >= 1")

    n_max = raw.get("n_max")
    if n_max is None and levels:
        n_max = max(levels) + 4
    if n_max is not None:
        if not isinstance(n_max, int) or isinstance(n_max, bool):
            diags.append("n_max: must be an integer")
        elif not 1 <= n_max <= wiener.MAX_LEVEL:
            diags.append(f"n_max: must lie in [1, {wiener.MAX_LEVEL}]")
        elif levels and max(levels) > n_max - 4:
            diags.append(
                f"levels: max level {max(levels)} exceeds n_max - 4 = {n_max - 4} "
                "(the reference resolution rule)"
            )

    for key, kind in (
        ("radius", (int, float)),
        ("holder_alpha", (int, float)),
        ("dist", (int, float)),
        ("grid_points", int),
        ("paths", int),
        ("workers", int),
    ):
        if key in raw and not isinstance(raw[key], kind):
            diags.append(f"{key}: wrong type")
    for key in ("radius", "grid_points", "paths", "dist"):
        if isinstance(raw.get(key), (int, float)) and raw[key] <= 0:
            diags.append(f"{key}: must be positive")
    if isinstance(raw.get("holder_alpha"), (int, float)) and not (
        0.0 < raw["holder_alpha"] < 1.0
    ):
        diags.append("holder_alpha: must lie in (0, 1)")
    if isinstance(raw.get("workers"), int) and raw["workers"] < 1:
        diags.append("workers: must be >= 1")

    if "orders" in raw:
        orders = raw["orders"]
        if not (
            isinstance(orders, list)
            and orders
            and all(isinstance(p, (int, float)) and p >= 1 for p in orders)
        ):
            diags.append("orders: expected a nonempty list of numbers >= 1")
    if "times" in raw:
        times = raw["times"]
        if not (
            isinstance(times, list)
            and times
            and all(isinstance(t, (int, float)) and 0.0 < t <= 1.0 for t in times)
        ):
            diags.append("times: expected a nonempty list of times in (0, 1]")
    if "radii" in raw:
        radii = raw["radii"]
        if not (
            isinstance(radii, list)
            and len(radii) >= 4
            and all(isinstance(m, (int, float)) and m >= 2 for m in radii)
        ):
            diags.append("radii: expected at least 4 radii, each >= 2")
    if "x0" in raw and raw["x0"] is not None:
        x0 = raw["x0"]
        if not (
            isinstance(x0, list) and x0 and all(isinstance(v, (int, float)) for v in x0)
        ):
            diags.append("x0: expected a list of coordinates")
    if "out" in raw and not isinstance(raw["out"], str):
        diags.append("out: expected a path string")

    solver = raw.get("solver", {})
    if _check_keys(solver, _SOLVER_KEYS, "solver", diags):
        sub = solver.get("substeps", 8)
        if not isinstance(sub, int) or sub < 1:
            diags.append("solver.substeps: must be an integer >= 1")
        thr = solver.get("explosion_threshold", 1e8)
        if not isinstance(thr, (int, float)) or thr <= 0:
            diags.append("solver.explosion_threshold: must be positive")

    consts = raw.get("constants", {})
    if _check_keys(consts, _CONSTANT_KEYS, "constants", diags):
        for key, val in consts.items():
            if not isinstance(val, (int, float)):
                diags.append(f"constants.{key}: must be a number")

    ineqs = raw.get("inequalities", [])
    if not isinstance(ineqs, list):
        diags.append("inequalities: expected a list")
    else:
        for idx, entry in enumerate(ineqs):
            where = f"inequalities[{idx}]"
            if _check_keys(entry, _INEQUALITY_KEYS, where, diags):
                if "name" not in entry:
                    diags.append(f"{where}.name: required key missing")
                if not isinstance(entry.get("params", {}), dict):
                    diags.append(f"{where}.params: expected a mapping")
    return diags


def parse_config(raw: dict, experiment: Optional[str] = None) -> ExperimentConfig:
    """Validate and freeze a raw mapping; raises ConfigError on any diagnostic."""
    diags = validate_config(raw, experiment)
    if diags:
        raise ConfigError(diags)
    levels = tuple(raw.get("levels", ExperimentConfig.levels))
    solver = raw.get("solver", {})
    return ExperimentConfig(
        experiment=raw.get("experiment", experiment),
        seed=raw["seed"],
        family=raw["family"]["name"],
        family_params=dict(raw["family"].get("params", {})),
        radius=float(raw.get("radius", ExperimentConfig.radius)),
        grid_points=int(raw.get("grid_points", ExperimentConfig.grid_points)),
        levels=levels,
        n_max=int(raw.get("n_max") or max(levels) + 4),
        paths=int(raw.get("paths", ExperimentConfig.paths)),
        orders=tuple(float(p) for p in raw.get("orders", ExperimentConfig.orders)),
        workers=int(raw.get("workers", 1)),
        out=str(raw.get("out", ExperimentConfig.out)),
        substeps=int(solver.get("substeps", 8)),
        explosion_threshold=float(solver.get("explosion_threshold", 1e8)),
        times=tuple(float(t) for t in raw.get("times", ExperimentConfig.times)),
        x0=tuple(float(v) for v in raw["x0"]) if raw.get("x0") else None,
        constants=dict(raw.get("constants", {})),
        inequalities=tuple(
            {"name": e["name"], "params": dict(e.get("params", {}))}
            for e in raw.get("inequalities", [])
        ),
        radii=tuple(float(m) for m in raw.get("radii", ExperimentConfig.radii)),
        holder_alpha=float(raw.get("holder_alpha", ExperimentConfig.holder_alpha)),
        dist=float(raw.get("dist", ExperimentConfig.dist)),
    )


def load_config(path: str, experiment: Optional[str] = None) -> ExperimentConfig:
    """Read a YAML file and return a validated ExperimentConfig."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(["file is empty"])
    return parse_config(raw, experiment)


def validate_file(path: str, experiment: Optional[str] = None) -> list:
    """Diagnostics for a YAML file without executing anything."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        return [f"cannot read {path}: {exc}"]
    except yaml.YAMLError as exc:
        return [f"not valid YAML: {exc}"]
    if raw is None:
        return ["file is empty"]
    return validate_config(raw, experiment)
