"""Command-line driver: ``holomap <command> [options]``.

Every command writes its artifacts and a ``manifest.json`` into
``--out-dir`` and exits with 0 only when all of its checks pass.  Usage
errors (including missing input files) exit with 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import catalog
from .bangbang import (ObjectiveFn, enumerate_bangbang, optimize, optimize_policy,
                       refine_and_converge, write_convergence_csv, write_vertices_csv)
from .density import DEFAULT_GRID, StepDensity, cumulative, grid_nodes, read_density_csv, write_density_csv
from .errors import HolomapError
from .fperron import RandomMap, deterministic_residual, fp_random_at, invariance_residual
from .montecarlo import SimConfig, bin_deviation, ks_distance, mass_near, simulate
from .piecewise import PiecewiseMap
from .probability import PiecewiseAffineProbability
from .probsolver import (closed_form_coefficients, infeasibility_probe, solve_general,
                         solve_lebesgue, step_search)
from .selector import selector_from_mixture, selector_from_random_pdf
from .semimarkov import combine, induced_matrix, left_invariant, ulam_matrix, uniform_edges

DEFAULT_TERMS = 60
DEFAULT_TOL = 1e-6
DEFAULT_SEED = 0


class Manifest:
    """Collects inputs, outputs and checks of one run."""

    def __init__(self, command, out_dir, inputs):
        self.command = command
        self.out_dir = out_dir
        self.inputs = inputs
        self.outputs = []
        self.checks = []
        self.values = {}

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        self.outputs.append(name)
        return p

    def check(self, name, value, tol, ok):
        self.checks.append({"name": name, "value": _plain(value), "tol": tol, "passed": bool(ok)})
        return ok

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def write(self):
        data = {"command": self.command, "inputs": self.inputs, "outputs": sorted(self.outputs),
                "checks": self.checks, "values": {k: _plain(v) for k, v in self.values.items()},
                "passed": self.passed}
        with open(os.path.join(self.out_dir, "manifest.json"), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def _write_xy(path, x, y, header):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for xi, yi in zip(x, y):
            fh.write(f"{xi:.12g},{yi:.12g}\n")


# reproduce ----------------------------------------------------------------

def _rep_example1(args, man):
    pair = catalog.example1()
    rep = solve_lebesgue(pair.tau1, pair.tau2, grid=args.grid, n_terms=args.terms)
    x = np.linspace(0.0, pair.a, args.grid + 1)
    p = rep.p(x)
    B, A = np.polyfit(x, p, 1)
    fit = float(np.max(np.abs(A + B * x - p)))
    rep.p_to_csv(man.path("p.csv"))
    rep.to_json(man.path("report.json"))
    man.values.update(A=A, B=B)
    exact = closed_form_coefficients(pair.a, 0.5, 4.5)
    man.check("closed form A, B", [float(v) for v in exact], 0.0, tuple(exact) == (0.0625, 1.875))
    man.check("fit residual", fit, args.tol, fit <= args.tol)
    err = max(abs(A - 0.0625), abs(B - 1.875))
    man.check("coefficient error", err, args.tol, err <= args.tol)


def _rep_example2(args, man):
    pair = catalog.example2()
    E = pair.extra["edges"]
    M = combine(induced_matrix(pair.tau1, E), induced_matrix(pair.tau2, E), pair.extra["p_cells"])
    M.to_csv(man.path("matrix.csv"))
    diff = float(np.max(np.abs(M.matrix - pair.extra["printed_matrix"])))
    v = left_invariant(M)
    _write_xy(man.path("invariant.csv"), E[:-1], v, "cell_lo,density")
    man.check("matrix matches published", diff, 1e-12, diff <= 1e-12)
    dv = float(np.max(np.abs(v - 1.0)))
    man.check("left invariant vector is uniform", dv, 1e-10, dv <= 1e-10)
    res = invariance_residual(RandomMap(pair.tau1, pair.tau2, pair.p), 1.0, args.grid)[1]
    man.check("random map preserves Lebesgue", res, 1e-8, res <= 1e-8)


def _rep_example3(args, man):
    pair = catalog.example3()
    f = pair.extra["f"]
    sel = deterministic_residual(pair.extra["selector"], f, args.grid)[1]
    man.check("selector preserves f", sel, 1e-8, sel <= 1e-8)
    rep = infeasibility_probe(pair.tau1, pair.tau2, pair.extra["selector"], f)
    rep.to_json(man.path("report.json"))
    man.values["verdict"] = rep.verdict
    man.check("verdict is Infeasible", rep.verdict, None, rep.verdict == "Infeasible")
    forced = rep.forced_value if rep.forced_value is not None else float("nan")
    man.check("forced probability >= 1.5", forced, 1.5, forced >= 1.5)
    search = step_search(pair.tau1, pair.tau2, f, catalog.example2().extra["edges"])
    man.check("no feasible 6-cell step p", search.residual_linf, args.tol,
              search.residual_linf > args.tol)


def _rep_example4(args, man):
    pair = catalog.example4()
    rep = solve_lebesgue(pair.tau1, pair.tau2, grid=args.grid, n_terms=args.terms)
    rep.p_to_csv(man.path("p.csv"))
    rep.to_json(man.path("report.json"))
    x = np.linspace(0.0, 0.45, args.grid + 1)
    err = float(np.max(np.abs(rep.p(x) - (x + 0.25))))
    man.check("max |p - (x + 1/4)| on [0, 0.45]", err, args.tol, err <= args.tol)


def _rep_example5(args, man):
    pair = catalog.example5()
    rep = solve_lebesgue(pair.tau1, pair.tau2, grid=args.grid, n_terms=args.terms)
    rep.to_json(man.path("report.json"))
    x = np.linspace(0.0, pair.a, args.grid + 1)
    _write_xy(man.path("p.csv"), x, rep.p(x), "x,p")
    man.check("reported infeasible", rep.feasible, None, not rep.feasible)
    w = rep.witness or {}
    exc = max(-float(w.get("p", 0.5)), float(w.get("p", 0.5)) - 1.0)
    man.values["witness"] = w
    man.check("witness excursion outside [0, 1]", exc, 0.5, exc >= 0.5)


def _rep_singular(args, man):
    pair = catalog.singular()
    R = RandomMap(pair.tau1, pair.tau2, pair.p)
    x = np.linspace(0.0, 1.0, 10_000)
    P1 = fp_random_at(R, 1.0, x)
    _write_xy(man.path("fp_of_one.csv"), x, P1, "x,P1")
    err = float(np.max(np.abs(P1 - 1.0)))
    man.check("||P_R 1 - 1||_inf on 10^4 points", err, 1e-8, err <= 1e-8)
    cfg = SimConfig(seed=args.seed, n_steps=100_000, bins=100)
    hist = simulate(RandomMap(pair.tau1, pair.tau1, 1.0), 0.3, cfg)
    hist.to_csv(man.path("tau1_histogram.csv"))
    m = mass_near(hist, 0.0, 0.01)
    man.check("tau1 mass in [0, 0.01]", m, 0.99, m >= 0.99)


REPRODUCERS = {
    "example1": _rep_example1, "example2": _rep_example2, "example3": _rep_example3,
    "example4": _rep_example4, "example5": _rep_example5, "singular": _rep_singular,
}


def cmd_reproduce(args, man):
    REPRODUCERS[args.name](args, man)


# inputs -------------------------------------------------------------------

def _load_map(path):
    return PiecewiseMap.from_json(path)


def _load_p(spec):
    """A number or a JSON file with a piecewise-affine probability."""
    try:
        return float(spec)
    except ValueError:
        with open(spec) as fh:
            return PiecewiseAffineProbability.from_dict(json.load(fh))


def _maps(args):
    if args.example:
        pair = catalog.EXAMPLES[args.example]()
        return pair.tau1, pair.tau2, pair.p
    if not args.tau1:
        raise _Usage("give --example or --tau1")
    tau1 = _load_map(args.tau1)
    tau2 = _load_map(args.tau2) if getattr(args, "tau2", None) else tau1
    p = _load_p(args.p) if getattr(args, "p", None) else None
    return tau1, tau2, p


class _Usage(Exception):
    pass


# commands -------------------------------------------------------------------

def cmd_solve_p(args, man):
    tau1, tau2, _ = _maps(args)
    if args.target:
        f = read_density_csv(args.target)
        rep = solve_general(tau1, tau2, f, a=args.a, grid=args.grid, n_terms=args.terms)
        if rep.fp_residual is not None:
            man.check("fp residual", rep.fp_residual, args.tol, rep.fp_residual <= args.tol)
    else:
        rep = solve_lebesgue(tau1, tau2, a=args.a, grid=args.grid, n_terms=args.terms)
    rep.to_json(man.path("report.json"))
    rep.p_to_csv(man.path("p.csv"))
    man.values["verdict"] = rep.verdict
    man.check("functional equation residual", rep.residual, args.tol, rep.residual <= args.tol)
    man.check("p within [0, 1]", rep.feasible, None, rep.feasible)


def _boundary_density(tau, knots, cells):
    """Exact step density on the joint knots when they form a Markov partition, else Ulam."""
    try:
        M = induced_matrix(tau, knots)
    except HolomapError:
        M = ulam_matrix(tau, cells)
    return StepDensity(M.edges, left_invariant(M))


def cmd_selector(args, man):
    tau1, tau2, p = _maps(args)
    x = grid_nodes(args.grid)
    if args.lam is not None:
        knots = np.union1d(tau1.partition, tau2.partition)
        f1 = _boundary_density(tau1, knots, args.cells)
        f2 = _boundary_density(tau2, knots, args.cells)
        build = selector_from_mixture(tau1, tau2, cumulative(f1), cumulative(f2), args.lam, args.grid)
        target = build.density
        for lam, ref, name in ((1.0, tau1, "tau1"), (0.0, tau2, "tau2")):
            if args.lam == lam:
                d = float(np.max(np.abs(build.selector(x) - ref(x))))
                man.check(f"selector equals {name}", d, 2.0 / args.grid, d <= 2.0 / args.grid)
    else:
        if p is None:
            raise _Usage("give --lambda or a probability (--p or --example)")
        target = read_density_csv(args.density) if args.density else 1.0
        build = selector_from_random_pdf(tau1, tau2, p, target, args.grid)
    build.to_csv(man.path("selector.csv"))
    with open(man.path("selector.json"), "w") as fh:
        json.dump({"branches": build.selector.m, **{k: _plain(v) for k, v in build.meta.items()}},
                  fh, indent=2, sort_keys=True)
    res = deterministic_residual(build.selector, target, args.grid)[1]
    man.check("between bounds", [build.lower_gap, build.upper_gap], -2.0 / args.grid, build.between)
    man.check("selector preserves target density", res, 1e-3, res <= 1e-3)


def cmd_invariant(args, man):
    tau1, tau2, p = _maps(args)
    if p is None:
        p = 1.0
    edges = uniform_edges(args.cells)
    M1, M2 = ulam_matrix(tau1, edges), ulam_matrix(tau2, edges)
    pc = np.full(args.cells, float(p)) if isinstance(p, float) else np.clip(
        p.cell_means(edges), 0.0, 1.0)
    M = combine(M1, M2, pc)
    v, info = left_invariant(M, return_info=True)
    M.to_csv(man.path("matrix.csv"))
    f = StepDensity(edges, v)
    write_density_csv(man.path("density.csv"), grid_nodes(args.grid), f(grid_nodes(args.grid)),
                      args.grid)
    man.values.update(method=info.method, reducible=info.reducible)
    man.check("eigen residual", info.residual, 1e-10, info.residual <= 1e-10)


def cmd_simulate(args, man):
    tau1, tau2, p = _maps(args)
    R = RandomMap(tau1, tau2, 1.0 if p is None else p)
    cfg = SimConfig(seed=args.seed, n_steps=args.steps, burn_in=args.burn_in, bins=args.bins)
    hist = simulate(R, args.x0, cfg)
    hist.to_csv(man.path("histogram.csv"))
    hist.meta_json(man.path("histogram.json"))
    if args.density:
        f = read_density_csv(args.density)
        ks, dev = ks_distance(hist, f), bin_deviation(hist, f)
        man.check("KS distance", ks, 0.005, ks <= 0.005)
        man.check("sup-bin deviation", dev, 0.02, dev <= 0.02)


def cmd_bangbang(args, man):
    tau1, tau2, _ = _maps(args)
    g = ObjectiveFn.from_csv(args.objective) if args.objective else ObjectiveFn(lambda x: x, "x")
    edges = uniform_edges(args.N)
    M1, M2 = ulam_matrix(tau1, edges), ulam_matrix(tau2, edges)
    if args.N <= 20:
        verts = enumerate_bangbang(M1, M2)
        write_vertices_csv(man.path("vertices.csv"), verts, g, edges)
        res = optimize(g, M1, M2)
        worst = max(v.residual for v in verts)
        man.check("vertex eigen residuals", worst, 1e-10, worst <= 1e-10)
    else:
        res = optimize_policy(g, M1, M2)
    man.values.update(best_value=res.best_value, best_bits=res.best_label,
                      worst_value=res.worst_value, method=res.method)
    if args.Ns:
        rows, _ = refine_and_converge(tau1, tau2, g, args.Ns)
        write_convergence_csv(man.path("convergence.csv"), rows)


# parser -------------------------------------------------------------------

def _common():
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--grid", type=int, default=DEFAULT_GRID, help="grid intervals (default %(default)s)")
    c.add_argument("--terms", type=int, default=DEFAULT_TERMS, help="series terms (default %(default)s)")
    c.add_argument("--tol", type=float, default=DEFAULT_TOL, help="check tolerance (default %(default)s)")
    c.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default %(default)s)")
    c.add_argument("--out-dir", default=".", help="output directory (default: current)")
    return c


def _map_args(p, two=True, prob=True):
    p.add_argument("--example", choices=sorted(catalog.EXAMPLES), help="use a built-in example")
    p.add_argument("--tau1", help="JSON map file")
    if two:
        p.add_argument("--tau2", help="JSON map file (default: tau1)")
    if prob:
        p.add_argument("--p", help="probability: a number or a JSON file")


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="holomap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reproduce", parents=[common], help="rerun a worked example with checks")
    r.add_argument("name", choices=sorted(REPRODUCERS))
    r.set_defaults(func=cmd_reproduce, files=())

    s = sub.add_parser("solve-p", parents=[common], help="solve for a probability function")
    _map_args(s, prob=False)
    s.add_argument("--target", help="target density CSV (default: Lebesgue)")
    s.add_argument("--a", type=float, help="end of the first lap (default: detected)")
    s.set_defaults(func=cmd_solve_p, files=("tau1", "tau2", "target"))

    c = sub.add_parser("selector", parents=[common], help="construct a selector")
    _map_args(c)
    c.add_argument("--lambda", dest="lam", type=float, help="mixing weight for the mixture construction")
    c.add_argument("--cells", type=int, default=64, help="Ulam cells when the knots are not a Markov partition (default %(default)s)")
    c.add_argument("--density", help="invariant density CSV of the random map (default: 1)")
    c.set_defaults(func=cmd_selector, files=("tau1", "tau2", "p", "density"))

    i = sub.add_parser("invariant", parents=[common], help="invariant density via Ulam matrices")
    _map_args(i)
    i.add_argument("--cells", type=int, default=256, help="partition cells (default %(default)s)")
    i.set_defaults(func=cmd_invariant, files=("tau1", "tau2", "p"))

    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo histogram")
    _map_args(m)
    m.add_argument("--x0", type=float, default=0.3, help="start point (default %(default)s)")
    m.add_argument("--steps", type=int, default=SimConfig.n_steps, help="samples (default %(default)s)")
    m.add_argument("--burn-in", type=int, default=SimConfig.burn_in, help="default %(default)s")
    m.add_argument("--bins", type=int, default=SimConfig.bins, help="default %(default)s")
    m.add_argument("--density", help="density CSV to compare against")
    m.set_defaults(func=cmd_simulate, files=("tau1", "tau2", "p", "density"))

    b = sub.add_parser("bangbang", parents=[common], help="bang-bang enumeration and optimization")
    _map_args(b, prob=False)
    b.add_argument("--N", type=int, default=10, help="uniform cells (default %(default)s)")
    b.add_argument("--objective", help="CSV x,g (default g(x) = x)")
    b.add_argument("--Ns", type=int, nargs="*", help="refinement study over these N")
    b.set_defaults(func=cmd_bangbang, files=("tau1", "tau2"))
    return parser


def _is_file_arg(args, name):
    v = getattr(args, name, None)
    if v is None:
        return None
    if name == "p":
        try:
            float(v)
            return None
        except ValueError:
            pass
    return v


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in args.files:
        v = _is_file_arg(args, name)
        if v is not None and not os.path.isfile(v):
            parser.error(f"--{name}: no such file: {v}")
    os.makedirs(args.out_dir, exist_ok=True)
    inputs = {k: _plain(v) for k, v in sorted(vars(args).items()) if k not in ("func", "files")}
    man = Manifest(args.command, args.out_dir, inputs)
    t0 = time.perf_counter()
    try:
        args.func(args, man)
    except _Usage as exc:
        parser.error(str(exc))
    except HolomapError as exc:
        man.check("completed", str(exc), None, False)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        man.check("completed", f"{type(exc).__name__}: {exc}", None, False)
    man.write()
    for c in man.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: {c['value']}", file=sys.stdout)
    print(f"{args.command}: {'all checks passed' if man.passed else 'checks failed'} "
          f"({time.perf_counter() - t0:.2f} s)")
    return 0 if man.passed else 1


if __name__ == "__main__":
    sys.exit(main())
