"""Invariant densities of piecewise convex maps from the command line.

Exit codes: 0 success, 1 validation failure, 2 numerical failure, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import catalog, dsl
from .analysis import l1_between, l1_vs_exact, sweep
from .errors import DSLSyntaxError, MapDefinitionError, NotContracting, NumericalError, UlamError
from .io import ensure_parent, write_density_csv, write_histogram_csv, write_matrix_csv, write_sweep_csv
from .map_model import ly_constants, validate
from .orbit import orbit_histogram
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, stationary_density
from .truncation import truncate
from .ulam import ulam_matrix

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ulamconvex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, help, n=False, k=False):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--map", required=True,
                        help="catalog name (%s) or path to a .map file" % ", ".join(sorted(catalog.CATALOG)))
        sp.add_argument("--branches", type=int, default=None,
                        help="branches to materialise for countable maps")
        if n:
            sp.add_argument("--n", type=int, required=True, help="truncation index")
        if k:
            sp.add_argument("--k", type=int, default=1000, help="number of Ulam cells")
        return sp

    v = add("validate", "check the piecewise convex class conditions")
    v.add_argument("--samples", type=int, default=64)
    v.add_argument("--tail-index", type=int, default=10**6)

    t = add("truncate", "describe the finite-branch map tau_n", n=True)
    t.add_argument("--tail-index", type=int, default=10**6)

    m = add("matrix", "assemble the Ulam matrix", n=True, k=True)
    m.add_argument("--tol", type=float, default=1e-14)
    m.add_argument("--out", required=True)

    s = add("solve", "stationary Ulam density f_{n,k}", n=True, k=True)
    s.add_argument("--method", choices=["power", "direct"], default="power")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    s.add_argument("--out")
    s.add_argument("--report", help="write the solve report as JSON")

    e = add("error", "L1 error of f_{n,k} against an exact density", n=True, k=True)
    e.add_argument("--exact", help="catalog entry whose exact density to use")
    e.add_argument("--method", choices=["power", "direct"], default="power")
    e.add_argument("--tol", type=float, default=DEFAULT_TOL)

    w = add("sweep", "errors over a grid of (n, k)")
    w.add_argument("--n-list", type=_int_list, required=True)
    w.add_argument("--k-list", type=_int_list, required=True)
    w.add_argument("--exact", help="catalog entry whose exact density to use")
    w.add_argument("--method", choices=["power", "direct"], default="power")
    w.add_argument("--tol", type=float, default=DEFAULT_TOL)
    w.add_argument("--out", required=True)
    w.add_argument("--no-timing", action="store_true", help="leave runtime_ms empty (byte-stable output)")

    o = add("oracle", "orbit histogram estimate of the invariant density", n=True, k=True)
    o.add_argument("--steps", type=int, default=10**7)
    o.add_argument("--burn-in", type=int, default=None)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--walkers", type=int, default=1024)
    o.add_argument("--out")
    return p


def load_map(src: str, branches=None):
    """Resolve ``src`` as a catalog name or a ``.map`` file; returns ``(MapSpec, entry|None)``."""
    if src in catalog.CATALOG:
        entry = catalog.get(src)
        if src in ("example1", "example2") and branches is not None:
            return entry.build(branches), entry
        return entry.build(), entry
    path = Path(src)
    if not path.exists():
        raise UsageError(f"{src!r} is neither a catalog map nor a file")
    defn = dsl.load_definition(path)
    spec = dsl.compile_map(defn, n_branches=branches) if branches else dsl.compile_map(defn)
    return spec, catalog.CATALOG.get(defn.name)


def _working_map(args):
    base, entry = load_map(args.map, args.branches)
    n = getattr(args, "n", None)
    if base.is_finite or n is None:
        return base, base, entry
    if args.branches is None and n > base.n_branches:
        base, entry = load_map(args.map, catalog.default_branch_count(n))
    return base, truncate(base, n).spec, entry


def _exact_for(args, entry):
    name = getattr(args, "exact", None)
    if name:
        ex = catalog.get(name).exact_density
        if ex is None:
            raise UsageError(f"catalog entry {name!r} has no exact density")
        return ex
    return entry.exact_density if entry is not None else None


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_validate(args):
    m, _ = load_map(args.map, args.branches)
    rep = validate(m, args.samples, args.tail_index)
    _emit({"map": m.name, "admissible": rep.admissible, "branches_checked": rep.branches_checked,
           "N": rep.tail_cutoff, "D1": rep.d1, "C": rep.inverse_slope_sum,
           "tail_estimate": rep.tail_estimate, "problems": list(rep.problems)})
    return EXIT_OK if rep.admissible else EXIT_INVALID


def cmd_truncate(args):
    base, _ = load_map(args.map, args.branches)
    if base.is_finite:
        raise UsageError("truncation needs a countable map")
    if args.branches is None and args.n > base.n_branches:
        base, _ = load_map(args.map, catalog.default_branch_count(args.n))
    tm = truncate(base, args.n)
    ly = ly_constants(tm.spec, args.n, args.tail_index)
    _emit({"map": base.name, "n": tm.n, "a_n": tm.a_n, "slope_at_zero": tm.slope_at_zero,
           "branches": tm.spec.n_branches, "N": ly.N, "D1": ly.D1, "C": ly.C, "D": ly.D,
           "a_n_plus_D1": ly.contraction, "sup_bound": ly.sup_bound})
    return EXIT_OK


def cmd_matrix(args):
    _, spec, _ = _working_map(args)
    M = ulam_matrix(spec, args.k, args.tol)
    write_matrix_csv(M, ensure_parent(args.out))
    _emit({"k": M.k, "nnz": int(M.matrix.nnz), "max_row_defect": M.max_row_defect(),
           "out": args.out})
    return EXIT_OK


def cmd_solve(args):
    _, spec, entry = _working_map(args)
    M = ulam_matrix(spec, args.k)
    rep = stationary_density(M, args.method, args.tol, args.max_iter)
    out = rep.record()
    ex = _exact_for(args, entry)
    if ex is not None:
        out["error_l1"] = l1_vs_exact(rep.density, ex)
    if args.out:
        write_density_csv(rep.density, ensure_parent(args.out))
        out["out"] = args.out
    if args.report:
        ensure_parent(args.report).write_text(rep.to_json() + "\n", encoding="utf-8")
    _emit(out)
    return EXIT_OK


def cmd_error(args):
    _, spec, entry = _working_map(args)
    ex = _exact_for(args, entry)
    if ex is None:
        raise UsageError("no exact density known for this map; pass --exact")
    rep = stationary_density(ulam_matrix(spec, args.k), args.method, args.tol)
    _emit({"n": args.n, "k": args.k, "error_l1": l1_vs_exact(rep.density, ex),
           "residual_l1": rep.residual_l1})
    return EXIT_OK


def cmd_sweep(args):
    base, entry = load_map(args.map, args.branches)
    if not base.is_finite and args.branches is None and max(args.n_list) > base.n_branches:
        base, entry = load_map(args.map, catalog.default_branch_count(max(args.n_list)))
    ex = _exact_for(args, entry) if args.exact else None
    rows = sweep(base, ex, args.n_list, args.k_list, {"method": args.method, "tol": args.tol})
    write_sweep_csv(rows, ensure_parent(args.out), timing=not args.no_timing)
    failed = [r for r in rows if r.failure]
    for r in failed:
        print(f"row n={r.n} k={r.k} failed: {r.failure}", file=sys.stderr)
    _emit({"rows": len(rows), "failed": len(failed), "out": args.out,
           "error_l1": [r.error_l1 for r in rows]})
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_oracle(args):
    _, spec, _ = _working_map(args)
    burn = args.burn_in if args.burn_in is not None else min(args.steps // 100, 100 * args.walkers)
    h = orbit_histogram(spec, args.k, args.steps, burn, args.seed, walkers=args.walkers)
    ulam = stationary_density(ulam_matrix(spec, args.k)).density
    if args.out:
        write_histogram_csv(h, ensure_parent(args.out))
    _emit({"k": args.k, "steps": args.steps, "burn_in": burn, "seed": args.seed,
           "anomalies": h.anomalies, "l1_to_ulam": l1_between(h.density(), ulam)})
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "truncate": cmd_truncate, "matrix": cmd_matrix,
    "solve": cmd_solve, "error": cmd_error, "sweep": cmd_sweep, "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for attr in ("n", "k"):
        if getattr(args, attr, 1) is not None and getattr(args, attr, 1) < 1:
            parser.print_usage(sys.stderr)
            print(f"ulamconvex: error: --{attr} must be >= 1", file=sys.stderr)
            return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ulamconvex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MapDefinitionError, DSLSyntaxError, NotContracting) as exc:
        print(f"ulamconvex: invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as exc:
        print(f"ulamconvex: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UlamError as exc:
        print(f"ulamconvex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
