"""Command line: ``solve-gluing``, ``build``, ``reconstruct``, ``transfer-labels``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 search timeout.
"""

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config, parse_rho
from .flatten import FlattenError
from .mesh import MeshError
from .monodromy import (
    RHError,
    SearchTimeout,
    check_rh,
    find_gluing_instructions,
    rh_explanation,
    uniform_ramification,
)
from .pipeline import StageError, build, reconstruct, transfer_labels
from .raster import RasterError

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_TIMEOUT = 0, 2, 3, 4


def exit_code(exc):
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, SearchTimeout):
        return EXIT_TIMEOUT
    if isinstance(cause, (FlattenError, RasterError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(cause, (ConfigError, MeshError, RHError, ValueError, KeyError, OSError)):
        return EXIT_INVALID
    return EXIT_NUMERIC


def _ramification_args(p):
    p.add_argument("-k", "--k", type=int)
    p.add_argument("-r", "--r", type=int)
    p.add_argument("-d", "--d", type=int)
    p.add_argument("--rho", help='e.g. "[[1,1,3],[1,1,3],[1,1,3],[1,1,3],[1,1,3]]"')


def make_parser():
    ap = argparse.ArgumentParser(prog="branchcover", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-gluing", help="search gluing instructions for a ramification type")
    _ramification_args(p)
    p.add_argument("--max-solutions", type=int, default=1)
    p.add_argument("--time-budget", type=float, default=300.0)
    p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("build", help="cover, flatten and rasterize a mesh")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--mesh")
    _ramification_args(p)
    p.add_argument("--sigma-file")
    p.add_argument("--labels", help="per-face label file")
    p.add_argument("--seed-vertex", type=int)
    p.add_argument("--base-vertex", type=int)
    p.add_argument("--res", type=int)
    p.add_argument("--channels", help="comma separated: xyz, normals, labels, spherical:<model>, or signal names")
    p.add_argument("--score", choices=("area", "angle", "combined"))
    p.add_argument("--tol", type=float)
    p.add_argument("--time-budget", type=float)
    p.add_argument("--out")

    for name, helptext in (("reconstruct", "rebuild the mesh from an xyz image"), ("transfer-labels", "push logits to face labels")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--image", required=True, help="raw toric image")
        p.add_argument("--embedding", required=True)
        p.add_argument("--cover", required=True, help="torus OFF written by build")
        p.add_argument("--sidecar", help="cover map file (default: next to the OFF)")
        p.add_argument("--out", required=True)
        if name == "reconstruct":
            p.add_argument("--score", choices=("area", "angle", "combined"), default="area")
    return ap


def _solve_gluing(args):
    if args.rho is not None:
        rho = parse_rho(args.rho, args.d)
    elif None not in (args.k, args.r, args.d):
        rho, _ = uniform_ramification(args.k, args.r, args.d)
    else:
        raise ConfigError("give -k, -r and -d, or --rho")
    if not check_rh(rho):
        raise RHError(rho)
    found = find_gluing_instructions(rho, max_solutions=args.max_solutions, time_budget=args.time_budget)
    if not found.solutions:
        if found.timed_out:
            raise SearchTimeout(f"no gluing instructions within {args.time_budget} s")
        raise ConfigError(f"no gluing instructions realize {rho}")
    text = "\n".join(sol.to_text() for sol in found.solutions)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return {"rho": str(rho), "rh": rh_explanation(rho), "solutions": len(found.solutions),
            "exhausted": found.exhausted, "timed_out": found.timed_out, "nodes": found.nodes}


def _build(args):
    over = {
        "mesh": args.mesh, "k": args.k, "r": args.r, "d": args.d, "rho": args.rho,
        "sigma_file": args.sigma_file, "labels": args.labels, "seed_vertex": args.seed_vertex,
        "base_vertex": args.base_vertex, "res": args.res, "channels": args.channels,
        "score": args.score, "tol": args.tol, "time_budget": args.time_budget, "out": args.out,
    }
    cfg = load_config(args.config, **over)
    return build(cfg)


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve-gluing":
            summary = _solve_gluing(args)
            print(json.dumps(summary), file=sys.stderr)
            return EXIT_OK
        if args.command == "build":
            summary = _build(args)
        elif args.command == "reconstruct":
            summary = reconstruct(args.image, args.embedding, args.cover, args.out, args.sidecar, args.score)
        else:
            summary = transfer_labels(args.image, args.embedding, args.cover, args.out, args.sidecar)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = exit_code(exc)
        stage = exc.stage if isinstance(exc, StageError) else args.command
        cause = exc.cause if isinstance(exc, StageError) else exc
        print(f"error [{stage}]: {type(cause).__name__}: {cause}", file=sys.stderr)
        print(json.dumps({"ok": False, "stage": stage, "exit_code": code}), file=sys.stdout)
        return code
    print(json.dumps({"ok": True, **{k: v for k, v in summary.items() if k != "histograms"}}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
