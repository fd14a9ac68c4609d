"""``riesz-lab`` command line entry point."""

import argparse
import sys

import numpy as np

from . import reporting
from .config import ConfigError, MAXIMAL_DEFAULTS, build_maximal, load_config
from .grid import GridFunction, make_grid
from .io import read_rlgf, write_rlgf


def _common(sub=False):
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if sub else None
    p.add_argument("--seed", type=int, default=d if sub else 0, help="master seed")
    p.add_argument("--threads", type=int, default=d if sub else 1, help="worker threads")
    p.add_argument("--out", default=d, help="output file (directory for 'run')")
    return p


def _grid_args(p, d=3, n=16, side=4.0):
    p.add_argument("--d", type=int, default=d)
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--side", type=float, default=side)


def _potential_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--potential", help="potential V as an RLGF file (its grid overrides --d/--n/--side)")
    g.add_argument("--constant", type=float, default=1.0, help="constant potential V = c (default 1)")
    p.add_argument("--q", type=float, default=None, help="reverse Hoelder exponent (default d)")


def _grid_and_potential(args):
    if getattr(args, "potential", None):
        V = read_rlgf(args.potential)
        return V.grid, V
    grid = make_grid(args.d, args.n, args.side)
    return grid, GridFunction.constant(grid, args.constant)


def _emit(args, kind, result, config):
    doc = reporting.envelope(kind, result, config, args.seed)
    text = reporting.to_json(doc)
    if args.out:
        reporting.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _describe_args(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "threads", "seed_given", "command")}


# ---------------------------------------------------------------- commands


def cmd_grid_info(args):
    grid = make_grid(args.d, args.n, args.side)
    info = {"d": grid.d, "n": grid.n, "side": grid.side, "spacing": grid.spacing, "size": grid.size,
            "cell_volume": grid.cell_volume, "max_distance": grid.side * np.sqrt(grid.d) / 2}
    _emit(args, "grid-info", info, _describe_args(args))


def cmd_rho(args):
    from .critical import rho_field

    grid, V = _grid_and_potential(args)
    rho = rho_field(V, args.q, samples=args.samples, seed=args.seed)
    rep = {"rho": rho.values, "min": float(rho.values.min()), "max": float(rho.values.max()),
           "fitted_C0": rho.fitted_C0, "fitted_N0": rho.fitted_N0, "capped_fraction": rho.capped_fraction}
    _emit(args, "rho", rep, _describe_args(args))


def cmd_covering(args):
    from .critical import critical_covering, default_shrink, rho_field

    grid, V = _grid_and_potential(args)
    rho = rho_field(V, args.q, seed=args.seed)
    shrink = default_shrink(rho.fitted_C0, rho.fitted_N0, grid.d) if args.shrink == "auto" else float(args.shrink)
    _emit(args, "covering", critical_covering(rho, shrink), _describe_args(args))


def cmd_maximal(args):
    from .critical import rho_field

    f = read_rlgf(getattr(args, "in"))
    with open(args.spec, "rb") as fh:
        import tomli

        data = tomli.load(fh)
    m = dict(MAXIMAL_DEFAULTS, **data.get("maximal", {}))
    rho = None
    if m["mode"] != "full":
        pot = data.get("potential", {})
        V = read_rlgf(pot["path"]) if "path" in pot else GridFunction.constant(f.grid, pot.get("value", 1.0))
        rho = rho_field(V, pot.get("q"), seed=args.seed)
    from .maximal import maximal_apply

    Mf = maximal_apply(f, build_maximal(m, f.grid, rho))
    if not args.out:
        raise ValueError("maximal needs --out for the RLGF result")
    write_rlgf(Mf, args.out)


def cmd_kernel_check(args):
    from .critical import rho_field
    from .kernels import check_condition
    from .operators import assemble_schrodinger, build_operator, classical_from_name, kernel_of

    grid, V = _grid_and_potential(args)
    L = assemble_schrodinger(grid, V)
    rho = rho_field(V, args.q, seed=args.seed)
    cond = {"a_s": "A_s", "a_s_prime": "A_s_prime", "b_s": "B_s", "c_s": "C_s", "a_inf": "A_inf",
            "b_inf": "B_inf"}.get(args.cond.lower(), args.cond)
    K = kernel_of(build_operator(L, args.op))
    K0 = None
    if cond in ("B_s", "B_inf"):
        K0 = kernel_of(classical_from_name(grid, args.comparison or reporting._classical_partner(args.op)))
    rep = check_condition(K, cond, rho, args.s, args.N, args.delta, K0, args.samples, args.seed)
    _emit(args, "kernel-check", rep, _describe_args(args))


def _task_cmd(kind):
    def run(args):
        cfg = load_config(args.task)
        cfg.data["seed"] = args.seed if args.seed_given else cfg.seed
        tasks = [t for t in cfg.tasks if t["kind"] == kind]
        if not tasks:
            raise ConfigError(f"{args.task}: no '{kind}' tasks")
        ctx = reporting.Context(cfg)
        docs = []
        for i, task in enumerate(cfg.tasks):
            if task["kind"] != kind:
                continue
            summary, rep = reporting.run_task(ctx, task, i, args.threads)
            doc = reporting.envelope(kind, rep, cfg.data, cfg.seed)
            doc["task"], doc["summary"] = task["name"], summary
            docs.append(doc)
        text = reporting.to_json(docs if len(docs) > 1 else docs[0])
        if args.out:
            reporting.write_text(args.out, text)
        else:
            sys.stdout.write(text)

    return run


def cmd_envelope(args):
    from .critical import rho_field
    from .inequalities import chi_envelope
    from .young import YoungFunction

    grid, V = _grid_and_potential(args)
    rho = rho_field(V, args.q, seed=args.seed)
    rep = chi_envelope(rho, args.theta, YoungFunction.parse(args.young))
    _emit(args, "envelope", rep, _describe_args(args))


def cmd_integrability(args):
    from .inequalities import integrability_verdict

    rep = integrability_verdict(args.beta, args.p, args.sigma, args.theta, args.d, tuple(args.sides))
    _emit(args, "integrability", rep, _describe_args(args))


def cmd_pde(args):
    from .operators import assemble_schrodinger, solve_pde

    grid, V = _grid_and_potential(args)
    L = assemble_schrodinger(grid, V)
    if getattr(args, "in", None):
        src = read_rlgf(getattr(args, "in"))
    else:
        c = np.full(grid.d, grid.side / 2)
        src = GridFunction(grid, np.exp(-0.5 * (grid.distances_from(c) / (grid.side / 8)) ** 2))
    sol = solve_pde(L, source=src)
    h_d = grid.cell_volume

    def norm(a, p=2):
        return float((np.sum(np.abs(a) ** p) * h_d) ** (1 / p))

    rep = {
        "residual": sol.residual,
        "u_L2": norm(sol.u.values),
        "grad_u_L2": norm(np.sqrt(sum(g.values**2 for g in sol.grad_u))),
        "hess_u_L2": norm(np.sqrt(sum(h.values**2 for row in sol.hess_u for h in row))),
        "Vu_L2": norm(sol.Vu.values),
        "source_L2": norm(src.values),
    }
    _emit(args, "pde", rep, _describe_args(args))


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed_given:
        cfg.data["seed"] = args.seed
    out = args.out or cfg.data.get("out", "results")
    summaries = reporting.run_config(cfg, out, threads=args.threads, parallel_tasks=args.parallel)
    sys.stdout.write(f"{len(summaries)} task(s) written to {out}\n")


# ---------------------------------------------------------------- parser


def build_parser():
    common = _common(sub=True)
    parser = argparse.ArgumentParser(prog="riesz-lab", description="Weighted inequalities for Schroedinger-Riesz transforms on a periodic grid.", parents=[_common()])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid-info", parents=[common], help="grid spacing, size and volume")
    _grid_args(p)
    p.set_defaults(func=cmd_grid_info)

    p = sub.add_parser("rho", parents=[common], help="critical radius field of a potential")
    _grid_args(p)
    _potential_args(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("covering", parents=[common], help="covering by critical balls")
    _grid_args(p)
    _potential_args(p)
    p.add_argument("--shrink", default="1.0", help="ball shrink factor or 'auto'")
    p.set_defaults(func=cmd_covering)

    p = sub.add_parser("maximal", parents=[common], help="apply a maximal operator to an RLGF field")
    p.add_argument("--spec", required=True, help="TOML with a [maximal] table (and [potential] for local/theta)")
    p.add_argument("--in", required=True, help="input RLGF field")
    p.set_defaults(func=cmd_maximal)

    p = sub.add_parser("kernel-check", parents=[common], help="empirical constant of a kernel condition")
    _grid_args(p, n=12, side=3.0)
    _potential_args(p)
    p.add_argument("--op", default="R1")
    p.add_argument("--cond", default="a_s")
    p.add_argument("--s", type=float, default=2.0)
    p.add_argument("--N", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--comparison", default=None, help="classical comparison kernel, e.g. classical:R10")
    p.set_defaults(func=cmd_kernel_check)

    for kind, text in (("fs-constant", "strong-type constant search"), ("weak-check", "weak-type constant search")):
        p = sub.add_parser(kind, parents=[common], help=text)
        p.add_argument("--task", required=True, help="task TOML")
        p.set_defaults(func=_task_cmd(kind))

    p = sub.add_parser("envelope", parents=[common], help="power envelopes of the damped maximal function of a critical ball")
    _grid_args(p)
    _potential_args(p)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--young", default="power:1")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("integrability", parents=[common], help="growth trends over boxes of side 8, 16, 32")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=4.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--sides", type=int, nargs="+", default=[8, 16, 32])
    p.set_defaults(func=cmd_integrability)

    p = sub.add_parser("pde", parents=[common], help="solve -Laplacian u + V u = f and report norms")
    _grid_args(p, n=12, side=3.0)
    _potential_args(p)
    p.add_argument("--in", default=None, help="source RLGF field (default: centred Gaussian)")
    p.set_defaults(func=cmd_pde)

    p = sub.add_parser("run", parents=[common], help="run every task of a config")
    p.add_argument("config")
    p.add_argument("--parallel", action="store_true", help="run tasks in parallel threads")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"riesz-lab: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"riesz-lab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
