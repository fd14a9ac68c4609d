"""JSON and CSV artifacts, and execution of config tasks."""

import csv
import datetime
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .kernels import _plain

SCHEMA = "riesz-lab/1"
CSV_COLUMNS = ("task", "operator", "maximal", "p", "theta", "best_ratio", "stability", "samples", "seed")


def timestamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def to_json(obj):
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(_plain(_jsonable(obj)), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _jsonable(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def envelope(kind, result, config=None, seed=None):
    """Wrap a result with the schema tag, the resolved config and a timestamp."""
    return {"schema": SCHEMA, "kind": kind, "seed": seed, "config": config, "timestamp": timestamp(),
            "result": _jsonable(result)}


def write_text(path, text):
    try:
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc


def csv_row(summary):
    return {c: summary.get(c, "") for c in CSV_COLUMNS}


def csv_text(rows):
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in csv_row(r).items()})
    return buf.getvalue()


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_report(results, fmt, path):
    """Write ``results`` (list of task summaries or report envelopes) as JSON or CSV."""
    if fmt == "json":
        write_text(path, to_json(list(results)))
    elif fmt == "csv":
        write_text(path, csv_text(list(results)))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


# ---------------------------------------------------------------- task execution


class Context:
    """Shared read-only inputs of a config run, built lazily."""

    def __init__(self, cfg):
        from .config import build_grid, build_potential

        self.cfg = cfg
        self.grid = build_grid(cfg)
        self.V = build_potential(cfg, self.grid)
        self._L = None
        self._rho = None

    @property
    def q(self):
        pot = self.cfg.data.get("potential") or {}
        return float(pot.get("q", self.grid.d))

    @property
    def L(self):
        if self._L is None:
            from .operators import assemble_schrodinger

            self._L = assemble_schrodinger(self.grid, self.V)
        return self._L

    @property
    def rho(self):
        if self._rho is None:
            from .critical import rho_field

            self._rho = rho_field(self.V, self.q, seed=self.cfg.seed)
        return self._rho

    def operator(self, name):
        from .operators import build_operator, classical_from_name, Identity

        if name.startswith("classical:"):
            return classical_from_name(self.grid, name)
        if name == "Id":
            return Identity(self.grid)
        return build_operator(self.L, name)


def run_task(ctx, task, index, threads=1):
    """Run one validated task; returns ``(summary, report dict)``."""
    from .config import build_maximal

    kind, seed = task["kind"], ctx.cfg.seed
    summary = {"task": task["name"], "operator": task.get("operator", ""), "maximal": "", "p": task.get("p", ""),
               "theta": task.get("theta", ""), "best_ratio": "", "stability": "", "samples": "", "seed": seed}
    if kind in ("fs-constant", "weak-check"):
        from .inequalities import InequalityTask, estimate_constant

        m = task["maximal"]
        spec = build_maximal(m, ctx.grid, ctx.rho if m["mode"] != "full" else None)
        T = ctx.operator(task["operator"])
        it = InequalityTask(
            T, spec, float(task["p"]), "strong" if kind == "fs-constant" else "weak", int(task["trials"]),
            restarts=int(task["restarts"]), steps=int(task["steps"]), match_steps=int(task["match_steps"]),
            seed=seed, task_index=index, name=task["name"],
        )
        rep = estimate_constant(it, threads=threads)
        summary.update(maximal=spec.describe(), theta=spec.theta, best_ratio=rep.best_ratio,
                       stability=rep.stability, samples=rep.samples)
        return summary, rep.to_dict()
    if kind == "kernel-check":
        from .kernels import check_condition
        from .operators import kernel_of

        T = ctx.operator(task["operator"])
        K = kernel_of(T)
        K0 = None
        if task["condition"] in ("B_s", "B_inf"):
            K0 = kernel_of(ctx.operator(task.get("comparison", _classical_partner(task["operator"]))))
        rep = check_condition(K, task["condition"], ctx.rho, task["s"], task["N"], task["delta"], K0,
                              int(task["samples"]), seed)
        summary.update(best_ratio=rep.empirical_constant, samples=rep.sample_count)
        return summary, rep.to_dict()
    if kind == "envelope":
        from .inequalities import chi_envelope
        from .young import YoungFunction

        rep = chi_envelope(ctx.rho, float(task["theta"]), YoungFunction.parse(task["young"]))
        summary.update(maximal=f"theta:{task['young']}", best_ratio=rep.sigma2)
        return summary, rep.to_dict()
    if kind == "integrability":
        from .inequalities import integrability_verdict

        rep = integrability_verdict(task["beta"], task["p"], task["sigma"], task["theta"], int(task["d"]),
                                    tuple(task["sides"]))
        return summary, rep.to_dict()
    if kind == "rho":
        r = ctx.rho
        rep = {"rho": r.values, "fitted_C0": r.fitted_C0, "fitted_N0": r.fitted_N0,
               "capped_fraction": r.capped_fraction}
        return summary, rep
    if kind == "covering":
        from .critical import critical_covering, default_shrink

        shrink = task["shrink"]
        if shrink == "auto":
            shrink = default_shrink(ctx.rho.fitted_C0, ctx.rho.fitted_N0, ctx.grid.d)
        rep = critical_covering(ctx.rho, float(shrink), tuple(task["sigmas"]))
        return summary, rep.to_dict()
    raise ValueError(f"unknown task kind {kind!r}")


def _classical_partner(name):
    """Classical kernel matching an R1/R2 tag, e.g. ``R2:01`` -> ``classical:R201``."""
    from .operators import parse_operator_name

    base, star, _, comps = parse_operator_name(name)
    if base == "R1":
        return f"classical:R1{(comps or (0,))[0]}" + ("*" if star else "")
    if base == "R2":
        j, k = comps or (0, 0)
        return f"classical:R2{j}{k}"
    raise ValueError(f"no classical comparison kernel for {name!r}; set 'comparison'")


def run_config(cfg, out_dir, threads=1, parallel_tasks=False):
    """Run every task; writes ``<name>.json`` per task and ``index.csv``.  Returns the summaries."""
    ctx = Context(cfg)
    resolved = cfg.data

    def one(item):
        i, task = item
        summary, rep = run_task(ctx, task, i, threads)
        doc = envelope(task["kind"], rep, resolved, cfg.seed)
        doc["task"] = task["name"]
        write_text(os.path.join(out_dir, f"{task['name']}.json"), to_json(doc))
        return summary

    items = list(enumerate(cfg.tasks))
    if parallel_tasks and len(items) > 1:
        # Schroedinger operator and rho are built once up front so tasks only read them
        if ctx.V is not None and ctx.grid.d >= 3:
            ctx.L, ctx.rho  # noqa: B018
        with ThreadPoolExecutor(threads) as pool:
            summaries = list(pool.map(one, items))
    else:
        summaries = [one(it) for it in items]
    emit_report(summaries, "csv", os.path.join(out_dir, "index.csv"))
    return summaries
