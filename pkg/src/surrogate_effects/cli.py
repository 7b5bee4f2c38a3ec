"""Command-line front end.

Subcommands: ``check``, ``identify``, ``simulate``, ``strategies``,
``selftest``. Structured results go to stdout as JSON (covariance documents
for ``simulate``, plain report lines for ``selftest``); diagnostics and error
objects go to stderr.

Exit codes: 0 success or SATISFIED, 1 criterion not satisfied or
identification error, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from . import criteria
from .criteria import STRATEGIES, DoubleRoleAssignment, RoleAssignment
from .dsl import dumps_covariance, load_covariance, load_graph
from .exceptions import (
    GraphError,
    IdentificationError,
    InfeasibleModelError,
    ParseError,
    RoleError,
)
from .gaussian import EXACT_TOL, SAMPLE_TOL, identify_tau_sq, sample_misfit_tol
from .sem import implied_covariance, sample_covariance

CRITERIA = ("theorem1", "theorem2", "backdoor", "singledoor", "civ")


class UsageError(Exception):
    pass


def _vertex_list(text):
    if text is None:
        return ()
    return tuple(v for v in (s.strip() for s in text.split(",")) if v)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--tol", type=float, default=EXACT_TOL, help="exact-regime tolerance (default 1e-8)")
    p.add_argument("--sample-tol", type=float, default=SAMPLE_TOL, help="sample-regime tolerance (default 1e-2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=None, help="sample size")
    p.add_argument("--exact", action="store_true", help="use the exact implied covariance")
    return p


def _roles() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    for name in ("x", "y", "u", "w", "x1", "x2", "u1", "w1", "u2", "w2"):
        p.add_argument(f"--{name}")
    for name in ("z", "t", "t1", "t2"):
        p.add_argument(f"--{name}", type=_vertex_list, default=(), help="comma-separated vertices")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surrogate-effects",
        description="Identify squared total effects through surrogate variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common, roles = _common(), _roles()

    p = sub.add_parser("check", parents=[common, roles], help="run one graphical criterion")
    p.add_argument("--graph", required=True, type=Path)
    p.add_argument("--criterion", required=True, choices=CRITERIA)

    p = sub.add_parser("identify", parents=[common, roles], help="compute the squared total effect")
    p.add_argument("--graph", required=True, type=Path)
    p.add_argument("--cov", required=True, type=Path)
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument(
        "--regime", choices=("exact", "sample"), default="exact",
        help="exact: strict --tol on an exact covariance; sample: rescale to correlations and use --sample-tol with --n",
    )

    p = sub.add_parser("simulate", parents=[common], help="emit a covariance document")
    p.add_argument("--graph", required=True, type=Path)

    p = sub.add_parser("strategies", parents=[common, roles], help="list feasible role assignments")
    p.add_argument("--graph", required=True, type=Path)
    p.add_argument("--max-set-size", type=int, default=4)

    sub.add_parser("selftest", parents=[common], help="run the fixture suite end to end")
    return parser


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required flags: {' '.join(missing)}")


def single_roles(args, y_kind="response") -> RoleAssignment:
    _need(args, "x", "y", "u", "w")
    return RoleAssignment(args.x, args.y, args.u, args.w, args.z, args.t, y_kind)


def double_roles(args) -> DoubleRoleAssignment:
    _need(args, "x1", "x2", "u1", "w1", "u2", "w2")
    return DoubleRoleAssignment(
        args.x1, args.x2, args.u1, args.w1, args.u2, args.w2, args.z, args.t1, args.t2
    )


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def cmd_check(args, out, err) -> int:
    g = load_graph(args.graph).diagram
    crit = args.criterion
    if crit == "theorem1":
        cert = criteria.theorem1_check(g, single_roles(args))
        ok, payload = cert.satisfied, cert.to_dict()
    elif crit == "theorem2":
        cert = criteria.theorem2_check(g, double_roles(args))
        ok, payload = cert.satisfied, cert.to_dict()
    else:
        _need(args, "x", "y")
        if crit == "backdoor":
            ok = criteria.back_door(g, args.x, args.y, args.z)
            payload = {"x": args.x, "y": args.y, "adjustment": list(args.z)}
        elif crit == "singledoor":
            ok = criteria.single_door(g, args.x, args.y, args.z)
            payload = {"edge": [args.x, args.y], "adjustment": list(args.z)}
        else:
            if len(args.z) != 1:
                raise UsageError("civ needs exactly one instrument in --z")
            ok = criteria.conditional_iv(g, args.x, args.y, args.z[0], args.t)
            payload = {"x": args.x, "y": args.y, "instrument": args.z[0], "given": list(args.t)}
    _emit({"criterion": crit, "status": "SATISFIED" if ok else "NOT SATISFIED", "certificate": payload}, out)
    return 0 if ok else 1


def cmd_identify(args, out, err) -> int:
    g = load_graph(args.graph).diagram
    cov = load_covariance(args.cov)
    if args.strategy == "double-latent":
        roles = double_roles(args)
    else:
        kind = "treatment" if args.strategy == "backdoor-latent-treatment" else "response"
        roles = single_roles(args, kind)
    if args.regime == "exact":
        tol, misfit = args.tol, None
    else:
        _need(args, "n")
        # a sample covariance estimates a standardized model only up to scale
        cov = cov.to_correlation()
        tol, misfit = args.sample_tol, sample_misfit_tol(args.n, args.sample_tol)
    result = identify_tau_sq(cov, g, roles, args.strategy, tol=tol, misfit_tol=misfit)
    _emit(result.to_dict(), out)
    return 0


def cmd_simulate(args, out, err) -> int:
    doc = load_graph(args.graph)
    if args.exact == (args.n is not None):
        raise UsageError("simulate needs exactly one of --exact or --n")
    model = doc.to_sem()
    if args.exact:
        full = implied_covariance(model)
        cov = full.marginal([v for v in full.labels if v in doc.diagram.observed])
    else:
        cov = sample_covariance(model, args.n, args.seed)
    out.write(dumps_covariance(cov))
    return 0


def cmd_strategies(args, out, err) -> int:
    g = load_graph(args.graph).diagram
    _need(args, "x", "y")
    found = criteria.find_strategies(g, args.x, args.y, args.max_set_size)
    _emit([{"strategy": name, "roles": roles.to_dict()} for name, roles in found], out)
    return 0


def cmd_selftest(args, out, err) -> int:
    from .selftest import run_selftest

    with tempfile.TemporaryDirectory() as tmp:
        lines, ok = run_selftest(Path(tmp), seed=args.seed, tol=args.tol)
    for line in lines:
        out.write(line + "\n")
    return 0 if ok else 1


COMMANDS = {
    "check": cmd_check,
    "identify": cmd_identify,
    "simulate": cmd_simulate,
    "strategies": cmd_strategies,
    "selftest": cmd_selftest,
}


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out, err)
    except IdentificationError as exc:
        _emit(exc.to_dict(), err)
        return 1
    except (ParseError, GraphError, RoleError, UsageError, InfeasibleModelError, OSError) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, err)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
