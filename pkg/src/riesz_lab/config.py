"""Experiment configs in TOML: parsing, validation with line numbers, object builders.

A config looks like::

    seed = 7
    out = "results"

    [grid]
    d = 3
    n = 12
    side = 3.0

    [potential]          # needed by Schroedinger operators, rho, covering, ...
    kind = "constant"    # constant | file | formula
    value = 1.0
    q = 2.0

    [[tasks]]
    name = "r2-strong"
    kind = "fs-constant"
    operator = "R2"
    p = 1.5
    trials = 200
    [tasks.maximal]
    mode = "theta"
    young = "power:4"
    theta = 1.0
"""

import re
from dataclasses import dataclass, field

import numpy as np
import tomli

from .grid import GridFunction, make_grid
from .io import read_rlgf
from .maximal import MaximalSpec, build_dictionary
from .operators import check_gamma, classical_from_name, parse_operator_name
from .young import YoungFunction

TASK_KINDS = ("fs-constant", "weak-check", "kernel-check", "envelope", "integrability", "rho", "covering")
FORMULAS = ("gaussian", "quadratic")
MAXIMAL_DEFAULTS = {"mode": "full", "young": "power:1", "theta": 0.0, "k_radii": 16, "policy": "all",
                    "stride": 1, "compose_with_hl": 0}
TASK_DEFAULTS = {
    "fs-constant": {"p": 2.0, "trials": 500, "restarts": 2, "steps": 200, "match_steps": 40},
    "weak-check": {"p": 1.0, "trials": 500, "restarts": 2, "steps": 200, "match_steps": 40},
    "kernel-check": {"condition": "A_s", "s": 2.0, "N": 0.0, "delta": 0.5, "samples": 2000},
    "envelope": {"theta": 1.0, "young": "power:1"},
    "integrability": {"beta": 1.0, "p": 2.0, "sigma": 4.0, "theta": 1.0, "d": 3, "sides": [8, 16, 32]},
    "rho": {"samples": 10000},
    "covering": {"shrink": 1.0, "sigmas": [1, 2, 4, 8]},
}


class ConfigError(ValueError):
    """Invalid config; the message names the file line when it is known."""


def _line_map(text):
    """``{(table path, key): line}`` where array-of-table entries carry their index."""
    lines = {}
    counts = {}
    path = ()
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        m = re.fullmatch(r"\[\[\s*([\w.-]+)\s*\]\]", s)
        if m:
            name = m.group(1)
            counts[name] = counts.get(name, -1) + 1
            path = (name, counts[name])
            lines[(path, None)] = no
            continue
        m = re.fullmatch(r"\[\s*([\w.-]+)\s*\]", s)
        if m:
            parts = m.group(1).split(".")
            if parts[0] in counts and len(parts) > 1:
                path = (parts[0], counts[parts[0]], *parts[1:])
            else:
                path = tuple(parts)
            lines[(path, None)] = no
            continue
        m = re.match(r"([\w-]+)\s*=", s)
        if m:
            lines[(path, m.group(1))] = no
    return lines


@dataclass
class ExperimentConfig:
    data: dict
    source: str = "<config>"
    lines: dict = field(default_factory=dict, repr=False)

    def fail(self, msg, path=(), key=None):
        no = self.lines.get((tuple(path), key)) or self.lines.get((tuple(path), None))
        where = f"{self.source}:{no}" if no else self.source
        raise ConfigError(f"{where}: {msg}")

    @property
    def seed(self):
        return int(self.data.get("seed", 0))

    @property
    def tasks(self):
        return self.data.get("tasks", [])


def load_config(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    return parse_config(raw.decode(), source=str(path))


def parse_config(text, source="<config>"):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = ExperimentConfig(data, source, _line_map(text))
    validate(cfg)
    return cfg


def _need_number(cfg, table, key, path, lo=None, integer=False):
    v = table.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
        cfg.fail(f"'{key}' must be {'an integer' if integer else 'a number'}, got {v!r}", path, key)
    if lo is not None and v < lo:
        cfg.fail(f"'{key}' must be >= {lo}, got {v}", path, key)
    return v


def validate(cfg):
    """Check grid, potential and task entries; fills defaults in place."""
    data = cfg.data
    if "seed" in data:
        _need_number(cfg, data, "seed", (), 0, integer=True)
    grid = data.get("grid")
    if not isinstance(grid, dict):
        cfg.fail("missing [grid] table")
    for key in ("d", "n"):
        if key not in grid:
            cfg.fail(f"[grid] needs '{key}'", ("grid",))
        _need_number(cfg, grid, key, ("grid",), 1, integer=True)
    if grid["n"] % 2 or grid["n"] < 4:
        cfg.fail(f"n must be even and >= 4, got {grid['n']}", ("grid",), "n")
    grid.setdefault("side", 2 * np.pi)
    if _need_number(cfg, grid, "side", ("grid",)) <= 0:
        cfg.fail("side must be positive", ("grid",), "side")

    pot = data.get("potential")
    if pot is not None:
        kind = pot.get("kind", "constant")
        pot["kind"] = kind
        if kind == "constant":
            pot.setdefault("value", 1.0)
            if _need_number(cfg, pot, "value", ("potential",)) < 0:
                cfg.fail("potential must be non-negative", ("potential",), "value")
        elif kind == "file":
            if not isinstance(pot.get("path"), str):
                cfg.fail("file potential needs 'path'", ("potential",), "kind")
        elif kind == "formula":
            if pot.get("formula") not in FORMULAS:
                cfg.fail(f"formula must be one of {FORMULAS}, got {pot.get('formula')!r}", ("potential",), "formula")
        else:
            cfg.fail(f"unknown potential kind {kind!r}", ("potential",), "kind")
        pot.setdefault("q", float(grid["d"]))
        _need_number(cfg, pot, "q", ("potential",), 1)

    tasks = data.setdefault("tasks", [])
    if not isinstance(tasks, list):
        cfg.fail("'tasks' must be an array of tables ([[tasks]])")
    for i, task in enumerate(tasks):
        _validate_task(cfg, task, i, grid, pot)


def _validate_task(cfg, task, i, grid, pot):
    path = ("tasks", i)
    kind = task.get("kind")
    if kind not in TASK_KINDS:
        cfg.fail(f"unknown task kind {kind!r}; expected one of {', '.join(TASK_KINDS)}", path, "kind")
    task.setdefault("name", f"task{i}")
    for k, v in TASK_DEFAULTS[kind].items():
        task.setdefault(k, v)
    needs_L = kind in ("rho", "covering", "envelope")
    if kind in ("fs-constant", "weak-check", "kernel-check"):
        op = task.get("operator")
        if not isinstance(op, str):
            cfg.fail("task needs an 'operator' name", path, "kind")
        try:
            if op.startswith("classical:"):
                classical_from_name(make_grid(grid["d"], 4, 1.0), op)
            else:
                base, _, gamma, comps = parse_operator_name(op)
                if base not in ("R1", "R2", "VgL", "mixed", "Linv", "Lhalf_inv", "Id"):
                    raise ValueError(f"unknown operator tag {op!r}")
                if base in ("VgL", "mixed"):
                    if gamma is None:
                        raise ValueError(f"{base} needs a gamma, e.g. '{base}:0.75'")
                    check_gamma(base, gamma, grid["d"])
                if any(c >= grid["d"] for c in comps):
                    raise ValueError(f"component out of range for d = {grid['d']}")
                needs_L = base != "Id"
        except ValueError as exc:
            cfg.fail(str(exc), path, "operator")
    if kind == "fs-constant":
        _need_number(cfg, task, "p", path, 1)
    if kind == "weak-check" and task["p"] != 1:
        cfg.fail("weak-check uses p = 1", path, "p")
    if kind in ("fs-constant", "weak-check"):
        _need_number(cfg, task, "trials", path, 1, integer=True)
        m = task.setdefault("maximal", {})
        for k, v in MAXIMAL_DEFAULTS.items():
            m.setdefault(k, v)
        mpath = path + ("maximal",)
        if m["mode"] not in ("full", "local", "theta"):
            cfg.fail(f"unknown maximal mode {m['mode']!r}", mpath, "mode")
        try:
            YoungFunction.parse(m["young"])
        except ValueError as exc:
            cfg.fail(str(exc), mpath, "young")
        _need_number(cfg, m, "theta", mpath, 0)
        _need_number(cfg, m, "k_radii", mpath, 8, integer=True)
        if m["mode"] != "full":
            needs_L = True
    if kind == "kernel-check":
        from .kernels import CONDITIONS

        if task["condition"] not in CONDITIONS:
            cfg.fail(f"unknown condition {task['condition']!r}", path, "condition")
        if task["s"] <= 1:
            cfg.fail("s must exceed 1", path, "s")
    if kind == "integrability":
        for key in ("p", "sigma"):
            _need_number(cfg, task, key, path, 0)
    if needs_L and kind != "integrability":
        if pot is None:
            cfg.fail(f"task '{task['name']}' needs a [potential] table", path, "kind")
        if grid["d"] < 3:
            cfg.fail(f"task '{task['name']}' needs d >= 3", ("grid",), "d")


def build_grid(cfg):
    g = cfg.data["grid"]
    return make_grid(int(g["d"]), int(g["n"]), float(g["side"]))


def build_potential(cfg, grid):
    pot = cfg.data.get("potential")
    if pot is None:
        return None
    if pot["kind"] == "constant":
        return GridFunction.constant(grid, pot["value"])
    if pot["kind"] == "file":
        V = read_rlgf(pot["path"])
        if V.grid != grid:
            cfg.fail(f"potential file {pot['path']} lives on {V.grid}, config grid is {grid}", ("potential",), "path")
        return V
    center = np.full(grid.d, grid.side / 2)
    dist = grid.distances_from(center)
    amp, width, floor = float(pot.get("amplitude", 1.0)), float(pot.get("width", grid.side / 8)), float(pot.get("floor", 0.0))
    if pot["formula"] == "gaussian":
        vals = floor + amp * np.exp(-0.5 * (dist / width) ** 2)
    else:
        vals = floor + amp * dist**2
    return GridFunction(grid, vals)


def build_maximal(m, grid, rho=None):
    D = build_dictionary(grid, m.get("policy", "all"), int(m.get("k_radii", 16)), int(m.get("stride", 1)))
    return MaximalSpec(
        D,
        YoungFunction.parse(m.get("young", "power:1")),
        m.get("mode", "full"),
        rho if m.get("mode", "full") != "full" else None,
        float(m.get("theta", 0.0)),
        int(m.get("compose_with_hl", 0)),
    )
