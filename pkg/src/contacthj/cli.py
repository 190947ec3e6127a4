"""Command line front end.

Subcommands mirror the library layers: orbit integration (flow), grid
evolution (evolve), stationary profiles (stationary), pinned action profiles
(action), invariant graph filtering (mane), invariant measures (mather),
stability verdicts (classify), uniqueness criteria (uniqueness), and the
full forcing-grid table (table1).

Exit codes: 0 on success, 2 when a scored table cell misses its expected
verdict, 1 on errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .contact_flow import Diverged, flow
from .experiments import (ExperimentConfig, lyapunov_csv_rows, run_lyapunov,
                          run_table1, run_uniqueness_sweep, sweep_csv_rows,
                          table1_csv_rows, write_csv)
from .mather import classify_stability, measure_ensemble, uniqueness_check
from .semigroup import GridFunction, action_function, evolve
from .weakkam import (EmptyAfterRelaxation, EmptyGraph, NonConvergence,
                      extract_graph, find_stationary, mane_filter)

_FLOW_DT = 1e-3


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return cfg.updated(model=args.model, a=args.a, b=args.b, n=args.n,
                       dt=args.dt, T=args.T, delta=args.delta, seed=args.seed,
                       x0=args.x0, p0=args.p0, u0=args.u0, t=args.t)


def _maybe_write(args, cfg, header, rows):
    if args.out:
        write_csv(args.out, header, rows, cfg.hash())
        print(f"wrote {args.out}")


def _stationary_profile(cfg, model, scheme):
    stat = find_stationary(model, scheme, GridFunction.constant(cfg.n, 0.0),
                           T_max=max(cfg.T, 5.0), tol=1e-3)
    if not stat.converged:
        raise NonConvergence(
            f"backward iteration did not settle (divergence={stat.divergence})",
            history=stat.history)
    return stat


def cmd_flow(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    try:
        orbit = flow(model, (cfg.x0, cfg.p0, cfg.u0), cfg.T, dt=cfg.dt)
    except Diverged as exc:
        print(f"orbit diverged: {exc}", file=sys.stderr)
        return 1
    x, p, u = orbit.data[-1]
    h0 = float(model.h(cfg.x0, cfg.p0, cfg.u0))
    h1 = float(model.h(x, p, u))
    print(f"flow {cfg.model}: t={cfg.T:g} "
          f"start=({cfg.x0:g}, {cfg.p0:g}, {cfg.u0:g}) "
          f"end=({x:.6f}, {p:.6f}, {u:.6f})")
    print(f"H start={h0:.3e} end={h1:.3e}")
    header = ["time", "x", "p", "u"]
    rows = [(orbit.t0 + k * orbit.dt, *orbit.data[k])
            for k in range(orbit.data.shape[0])]
    _maybe_write(args, cfg, header, rows)
    return 0


def cmd_evolve(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    scheme = cfg.build_scheme(model)
    phi = GridFunction.constant(cfg.n, cfg.u0)
    stride = max(1, int(round(0.1 / cfg.dt)))
    snaps = evolve(model, scheme, phi, cfg.T, forward=args.forward,
                   record_every=stride)
    t_end, w_end, drift = snaps[-1]
    word = "forward" if args.forward else "backward"
    print(f"evolve {cfg.model} ({word}): T={cfg.T:g} n={cfg.n} dt={cfg.dt:g}")
    print(f"final sup norm {w_end.sup_norm():.6e}, "
          f"sup distance to start {drift:.6e}")
    header = ["time", "sup_norm", "sup_distance_to_start"]
    rows = [(tk, wk.sup_norm(), dk) for tk, wk, dk in snaps]
    _maybe_write(args, cfg, header, rows)
    return 0


def cmd_stationary(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    scheme = cfg.build_scheme(model)
    stat = find_stationary(model, scheme, GridFunction.constant(cfg.n, cfg.u0),
                           T_max=cfg.T, tol=1e-3)
    print(f"stationary {cfg.model}: converged={stat.converged} "
          f"residual={stat.residual:.3e} divergence={stat.divergence}")
    if stat.converged:
        sol = stat.solution
        print(f"sup norm {sol.sup_norm():.6e}")
        header = ["x", "u", "du"]
        grad = sol.gradient()
        rows = [(sol.nodes[i], sol.values[i], grad[i]) for i in range(sol.n)]
        _maybe_write(args, cfg, header, rows)
        return 0
    return 1


def cmd_action(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    scheme = cfg.build_scheme(model)
    h = action_function(model, scheme, cfg.x0, cfg.u0, cfg.t, n=cfg.n,
                        forward=args.forward)
    word = "forward" if args.forward else "backward"
    i_ext = int(np.argmax(h.values) if args.forward else np.argmin(h.values))
    print(f"action {cfg.model} ({word}): pinned at x0={cfg.x0:g} "
          f"u0={cfg.u0:g}, t={cfg.t:g}")
    print(f"extremum {h.values[i_ext]:.6f} at x={h.nodes[i_ext]:.6f}")
    header = ["x", "h"]
    rows = list(zip(h.nodes, h.values))
    _maybe_write(args, cfg, header, rows)
    return 0


def cmd_mane(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    scheme = cfg.build_scheme(model)
    stat = _stationary_profile(cfg, model, scheme)
    graph = extract_graph(model, stat.solution, dt=cfg.dt, source=cfg.model)
    kept = mane_filter(model, graph, dt=_FLOW_DT)
    print(f"mane {cfg.model}: graph atoms {len(graph)} "
          f"(dropped {graph.dropped}), kept {len(kept)} "
          f"(filtered {kept.dropped})")
    header = ["x", "p", "u", "node"]
    rows = [(kept.atoms[i, 0], kept.atoms[i, 1], kept.atoms[i, 2],
             int(kept.node_index[i])) for i in range(len(kept))]
    _maybe_write(args, cfg, header, rows)
    return 0


def _measures_for(cfg, model, scheme):
    stat = _stationary_profile(cfg, model, scheme)
    graph = extract_graph(model, stat.solution, dt=cfg.dt, source=cfg.model)
    kept = mane_filter(model, graph, dt=_FLOW_DT)
    return stat, measure_ensemble(model, kept, dt=_FLOW_DT)


def cmd_mather(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    scheme = cfg.build_scheme(model)
    _, measures = _measures_for(cfg, model, scheme)
    print(f"mather {cfg.model}: {len(measures)} invariant measure(s)")
    header = ["index", "kind", "period", "hu_average", "n_support"]
    rows = []
    for i, m in enumerate(measures):
        avg = m.hu_average(model)
        period = m.period if m.period is not None else float("nan")
        print(f"  [{i}] {m.kind}: average d_u H = {avg:+.6f}"
              + (f", period {m.period:.6f}" if m.period is not None else ""))
        rows.append((i, m.kind, period, avg, len(m.weights)))
    _maybe_write(args, cfg, header, rows)
    return 0


def cmd_classify(args):
    cfg = _load_config(args)
    model = cfg.build_model()
    scheme = cfg.build_scheme(model)
    stat, measures = _measures_for(cfg, model, scheme)
    report = classify_stability(model, measures)
    print(f"classify {cfg.model}: verdict={report.verdict} "
          f"a_min={report.a_min:.6f} a_max={report.a_max:.6f} "
          f"({len(measures)} measures)")
    header = ["verdict", "a_min", "a_max", "n_measures", "lyapunov_rate"]
    rate = float("nan")
    if args.lyapunov:
        run = run_lyapunov(model, scheme, stat.solution, delta=cfg.delta,
                           T=cfg.T)
        rate = run.rate
        print(f"perturbation probe: rate={rate:+.4f} "
              f"(delta={cfg.delta:g}, window {run.window[0]:g}..{run.window[1]:g})")
        if args.out:
            lh, lr = lyapunov_csv_rows(run)
            write_csv(args.out, lh, lr, cfg.hash())
            print(f"wrote {args.out}")
            return 0
    _maybe_write(args, cfg, header, [(report.verdict, report.a_min,
                                      report.a_max, len(measures), rate)])
    return 0


def cmd_uniqueness(args):
    cfg = _load_config(args)
    if args.sweep is not None:
        res = run_uniqueness_sweep(model_name=cfg.model, n_initials=args.sweep,
                                   n=cfg.n, dt=cfg.dt, seed=cfg.seed,
                                   log=print)
        print(f"sweep {cfg.model}: {res.n_converged}/{res.n_initials} "
              f"converged into {res.n_clusters} cluster(s), "
              f"max spread {res.max_spread:.3e}")
        if res.n_clusters == 1:
            print(f"no counterexample found; {res.caveat}")
        header, rows = sweep_csv_rows(res)
        _maybe_write(args, cfg, header, rows)
        return 0
    model = cfg.build_model()
    crit = uniqueness_check(model)
    print(f"uniqueness {cfg.model}: route={crit.route} passed={crit.passed}")
    print(f"min d_u H on zero level set: {crit.min_hu_level:.6f}")
    if crit.min_hu_rest is not None:
        print(f"min d_u H on rest set: {crit.min_hu_rest:.6f}")
    if crit.lie_min is not None:
        print(f"min bracket span: {crit.lie_min:.3e}")
    header = ["route", "passed", "min_hu_level", "min_hu_rest", "lie_min"]
    rows = [(crit.route, crit.passed, crit.min_hu_level,
             crit.min_hu_rest if crit.min_hu_rest is not None else float("nan"),
             crit.lie_min if crit.lie_min is not None else float("nan"))]
    _maybe_write(args, cfg, header, rows)
    return 0


def cmd_table1(args):
    cfg = _load_config(args)
    res = run_table1(n=cfg.n, dt=cfg.dt, delta=cfg.delta, log=print)
    print(f"table1: {sum(c.match for c in res.cells)}/{len(res.cells)} cells "
          f"match expected verdicts ({res.seconds:.0f}s)")
    header, rows = table1_csv_rows(res)
    _maybe_write(args, cfg, header, rows)
    return 0 if res.all_match else 2


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--model", help="model name (example1, example2, example3, discounted)")
    common.add_argument("--a", type=float, help="drift parameter of example3")
    common.add_argument("--b", type=float, help="coupling offset of example3")
    common.add_argument("--n", type=int, help="grid nodes (power of two, >= 64)")
    common.add_argument("--dt", type=float, help="time step")
    common.add_argument("--T", type=float, help="time horizon")
    common.add_argument("--delta", type=float, help="perturbation size")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--x0", type=float, help="initial angle")
    common.add_argument("--p0", type=float, help="initial momentum")
    common.add_argument("--u0", type=float, help="initial value")
    common.add_argument("--t", type=float, help="action pin time")
    common.add_argument("--out", help="write a CSV to this path")

    parser = argparse.ArgumentParser(
        prog="contacthj",
        description="Contact Hamilton-Jacobi laboratory on the circle")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", parents=[common],
                       help="integrate one contact orbit")
    p.set_defaults(handler=cmd_flow)

    p = sub.add_parser("evolve", parents=[common],
                       help="run the grid solution operator")
    p.add_argument("--forward", action="store_true",
                   help="use the forward (max-coupled) operator")
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("stationary", parents=[common],
                       help="find a stationary profile by backward iteration")
    p.set_defaults(handler=cmd_stationary)

    p = sub.add_parser("action", parents=[common],
                       help="pinned action profile at time t")
    p.add_argument("--forward", action="store_true",
                   help="forward action (maximal) instead of backward")
    p.set_defaults(handler=cmd_action)

    p = sub.add_parser("mane", parents=[common],
                       help="flow-invariant part of the stationary graph")
    p.set_defaults(handler=cmd_mane)

    p = sub.add_parser("mather", parents=[common],
                       help="invariant measures on the filtered graph")
    p.set_defaults(handler=cmd_mather)

    p = sub.add_parser("classify", parents=[common],
                       help="stability verdict for the stationary solution")
    p.add_argument("--lyapunov", action="store_true",
                   help="confirm with a +-delta perturbation probe")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("uniqueness", parents=[common],
                       help="uniqueness criteria, or a convergence sweep")
    p.add_argument("--sweep", type=int, nargs="?", const=10, default=None,
                   metavar="K", help="instead run K random initial profiles")
    p.set_defaults(handler=cmd_uniqueness)

    p = sub.add_parser("table1", parents=[common],
                       help="stability table over the forcing grid")
    p.set_defaults(handler=cmd_table1)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (Diverged, NonConvergence, EmptyGraph, EmptyAfterRelaxation,
            ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
