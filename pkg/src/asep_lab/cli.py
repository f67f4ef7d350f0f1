"""Command-line front end with reproducible CSV/JSON output.

Every output embeds the run manifest (subcommand, parameters, seed,
versions, node counts); re-running with the same manifest reproduces the
output bytes exactly, so wall time goes to the log stream instead of the
file.  Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .duality import (chamber_vectors, exhaustive_states,
                      negative_control_no_liggett, verify_fictitious_site,
                      verify_fullspace_duality, verify_halfline_duality,
                      verify_segment_duality)
from .kpz import (DIRICHLET, ROBIN, KpzParams, she_moment_nested,
                  she_moment_residue_form, scaled_asep_moment)
from .model import ChamberError, ModelParams, SegmentParams, SegmentState, ValidityError
from .moments import QuadratureSpec, q_moment
from .residues import ReductionError
from .segment_ode import solve_u
from .simulate import McEstimate, SimConfig, estimate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


def _versions() -> Dict[str, str]:
    return {
        "asep_lab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": ".".join(map(str, sys.version_info[:3])),
    }


def _manifest(subcommand: str, args: argparse.Namespace, extra: Optional[dict] = None) -> dict:
    skip = {"func", "output", "config", "subcommand"}
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in skip and not callable(v)}
    man = {"subcommand": subcommand, "parameters": params, "versions": _versions()}
    if extra:
        man.update(extra)
    return man


def _emit(args, manifest: dict, columns: Sequence[str], rows: List[dict],
          json_extra: Optional[dict] = None):
    out = sys.stdout if args.output is None else open(args.output, "w")
    try:
        if args.format == "json":
            doc = {"manifest": manifest, "rows": rows}
            if json_extra:
                doc.update(json_extra)
            out.write(json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n")
        else:
            for line in json.dumps(manifest, sort_keys=True, default=str).splitlines():
                out.write(f"# {line}\n")
            out.write(",".join(columns) + "\n")
            for row in rows:
                out.write(",".join(str(row.get(c, "")) for c in columns) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _parse_sites(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ValidityError(f"bad site list {text!r}: {exc}")


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _model_params(args) -> ModelParams:
    if args.rho is not None:
        return ModelParams.from_density(args.p, args.q, Fraction(args.rho))
    if args.alpha is None or args.gamma is None:
        raise ValidityError("give either --rho or both --alpha and --gamma")
    return ModelParams(Fraction(args.p), Fraction(args.q),
                       Fraction(args.alpha), Fraction(args.gamma))


def _segment_params(args) -> SegmentParams:
    if args.rho0 is not None and args.rho_ell is not None:
        return SegmentParams.from_densities(args.p, args.q, Fraction(args.rho0),
                                            Fraction(args.rho_ell), args.ell)
    need = (args.alpha, args.gamma, args.beta, args.delta)
    if any(v is None for v in need):
        raise ValidityError("give --rho0/--rho-ell or all of --alpha/--gamma/--beta/--delta")
    return SegmentParams(Fraction(args.p), Fraction(args.q), Fraction(args.alpha),
                         Fraction(args.gamma), ell=args.ell,
                         beta=Fraction(args.beta), delta=Fraction(args.delta))


def _quad(args) -> QuadratureSpec:
    if args.nodes is None:
        return QuadratureSpec()
    return QuadratureSpec.with_1d_nodes(args.nodes)


def cmd_moments(args) -> int:
    params = _model_params(args)
    x = _parse_sites(args.x)
    quad = _quad(args)
    res = q_moment(args.t, x, params, quad)
    row = {"n": len(x), "t": args.t, "value": repr(res.value), "quad_err": repr(res.quad_error)}
    for i, xi in enumerate(x):
        row[f"x{i + 1}"] = xi
    columns = ["n", "t"] + [f"x{i + 1}" for i in range(len(x))] + ["value", "quad_err"]
    manifest = _manifest("moments", args, {"nodes_by_dim": list(res.nodes_by_dim)})
    breakdown = {"+".join(map(str, lam)): v for lam, v in res.per_partition.items()}
    _emit(args, manifest, columns, [row], {"per_partition": breakdown})
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.ell is not None:
        params = _segment_params(args)
    else:
        params = _model_params(args)
    observables = tuple(_parse_sites(s) for s in args.observable) or ((1,),)
    config = SimConfig(params, args.t, args.trajectories, args.seed, observables)
    ests = estimate(config, threads=args.threads)
    rows = [{"observable": " ".join(map(str, e.observable)), "mean": repr(e.mean),
             "std_error": repr(e.std_error), "trajectories": e.trajectories,
             "seed": args.seed} for e in ests]
    _emit(args, _manifest("simulate", args),
          ["observable", "mean", "std_error", "trajectories", "seed"], rows)
    return EXIT_OK


def _verify_reports(args):
    mode = args.mode
    rng = np.random.default_rng(args.seed)

    def rand_fraction(lo_num=1, hi_num=9, den=10):
        return Fraction(int(rng.integers(lo_num, hi_num + 1)), den)

    reports = []
    for _ in range(args.points):
        qv = rand_fraction(1, 9)          # q in (0,1)
        rho = rand_fraction(1, 10)        # in (0,1]
        params = ModelParams.from_density(1, qv, rho)
        if mode == "halfline":
            for eta in exhaustive_states(args.max_site):
                for n in range(1, args.max_n + 1):
                    for x in chamber_vectors(1, args.max_site + 1, n):
                        reports.append(verify_halfline_duality(params, eta, x))
        elif mode == "fullspace":
            for eta in exhaustive_states(args.max_site):
                for n in range(1, args.max_n + 1):
                    for x in chamber_vectors(1, args.max_site + 1, n):
                        reports.append(verify_fullspace_duality(params, eta, x))
        elif mode == "fictitious":
            for eta in exhaustive_states(args.max_site):
                for n in range(1, args.max_n + 1):
                    for x in chamber_vectors(1, args.max_site + 1, n):
                        reports.append(verify_fictitious_site(params, eta, x))
        elif mode == "segment":
            import itertools
            ell = args.ell or 4
            rho_ell = rand_fraction(1, 10)
            sp = SegmentParams.from_densities(1, qv, rho, rho_ell, ell)
            for eta in itertools.product((0, 1), repeat=ell - 1):
                for n_ell in (0, 1):
                    for n in range(1, min(args.max_n, ell) + 1):
                        for x in chamber_vectors(1, ell, n):
                            reports.append(verify_segment_duality(sp, eta, n_ell, x))
        elif mode == "no-liggett":
            bad = ModelParams(1, qv, rand_fraction(1, 9), rand_fraction(1, 9))
            if bad.liggett_ok():
                bad = ModelParams(1, qv, bad.alpha, bad.gamma + Fraction(1, 7))
            for eta in exhaustive_states(args.max_site):
                for n in range(1, args.max_n + 1):
                    for x in chamber_vectors(1, args.max_site + 1, n):
                        rep = negative_control_no_liggett(bad, eta, x)
                        reports.append(rep.bulk_report or rep.corrected_report)
        else:
            raise ValidityError(f"unknown verify mode {mode}")
    return reports


def cmd_verify(args) -> int:
    reports = _verify_reports(args)
    out = sys.stdout if args.output is None else open(args.output, "w")
    failed = 0
    try:
        man = json.dumps(_manifest("verify", args), sort_keys=True, default=str)
        out.write(json.dumps({"manifest": json.loads(man)}, sort_keys=True) + "\n")
        for rep in reports:
            out.write(rep.to_json() + "\n")
            failed += 0 if rep.ok else 1
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"checked {len(reports)} identities, {failed} failures", file=sys.stderr)
    return EXIT_OK if failed == 0 else EXIT_VERIFICATION


def cmd_segment(args) -> int:
    params = _segment_params(args)
    initial = SegmentState.empty(params.ell)
    sol = solve_u(args.t, initial, params, args.n)
    rows = []
    for x in sol.dual.vectors:
        row = {"t": args.t, "value": repr(sol.value(x)), "solver_err": repr(sol.solver_error)}
        for i, xi in enumerate(x):
            row[f"x{i + 1}"] = xi
        rows.append(row)
    columns = ["t"] + [f"x{i + 1}" for i in range(args.n)] + ["value", "solver_err"]
    _emit(args, _manifest("segment", args), columns, rows)
    return EXIT_OK


def cmd_kpz(args) -> int:
    x = _parse_floats(args.x)
    boundary = DIRICHLET if args.boundary == "dirichlet" else ROBIN
    kpz = KpzParams(t=args.t, x=x, A=args.A, boundary=boundary)
    rows = []
    if args.eps:
        limit = she_moment_nested(kpz)
        for eps in _parse_floats(args.eps):
            val = scaled_asep_moment(eps, kpz)
            rows.append({"eps": eps, "value": repr(val), "limit": repr(limit),
                         "abs_diff": repr(abs(val - limit))})
        columns = ["eps", "value", "limit", "abs_diff"]
    else:
        if args.form == "residue":
            val = she_moment_residue_form(kpz)
        else:
            val = she_moment_nested(kpz)
        row = {"t": args.t, "form": args.form, "value": repr(val)}
        for i, xi in enumerate(x):
            row[f"x{i + 1}"] = xi
        rows.append(row)
        columns = ["t"] + [f"x{i + 1}" for i in range(len(x))] + ["form", "value"]
    _emit(args, _manifest("kpz", args), columns, rows)
    return EXIT_OK


def _add_common(sub, rates=True):
    sub.add_argument("--format", choices=["csv", "json"], default="csv")
    sub.add_argument("--output", default=None, help="write to a file instead of stdout")
    sub.add_argument("--threads", type=int,
                     default=int(os.environ.get("ASEP_LAB_THREADS", "1")))
    if rates:
        sub.add_argument("--p", default="1", help="right jump rate (exact rational)")
        sub.add_argument("--q", default="1/2", help="left jump rate (exact rational)")
        sub.add_argument("--alpha", default=None)
        sub.add_argument("--gamma", default=None)
        sub.add_argument("--rho", default=None,
                         help="boundary density; fills alpha, gamma via Liggett's relation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asep-lab",
        description="q-moments, dualities and KPZ-limit moments for open ASEP")
    parser.add_argument("--config", default=None,
                        help="key=value file supplying flag defaults")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    m = subs.add_parser("moments", help="contour-integral q-moments")
    _add_common(m)
    m.add_argument("--t", type=float, required=True)
    m.add_argument("--x", required=True, help="comma-separated sites")
    m.add_argument("--nodes", type=int, default=None, help="1D trapezoid node count")
    m.set_defaults(func=cmd_moments)

    s = subs.add_parser("simulate", help="Monte Carlo estimates of the observables")
    _add_common(s)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--trajectories", type=int, default=10000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--observable", action="append", default=[],
                   help="comma-separated sites; repeatable")
    s.add_argument("--ell", type=int, default=None, help="simulate the segment model")
    s.add_argument("--beta", default=None)
    s.add_argument("--delta", default=None)
    s.add_argument("--rho0", default=None)
    s.add_argument("--rho-ell", dest="rho_ell", default=None)
    s.set_defaults(func=cmd_simulate)

    v = subs.add_parser("verify", help="exact duality residuals as JSON lines")
    _add_common(v, rates=False)
    v.add_argument("--mode", required=True,
                   choices=["fullspace", "halfline", "segment", "no-liggett", "fictitious"])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--points", type=int, default=3, help="random rational parameter points")
    v.add_argument("--max-site", dest="max_site", type=int, default=5)
    v.add_argument("--max-n", dest="max_n", type=int, default=3)
    v.add_argument("--ell", type=int, default=4)
    v.set_defaults(func=cmd_verify)

    g = subs.add_parser("segment", help="dual-generator ODE solution on the segment")
    _add_common(g)
    g.add_argument("--ell", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--t", type=float, required=True)
    g.add_argument("--beta", default=None)
    g.add_argument("--delta", default=None)
    g.add_argument("--rho0", default=None)
    g.add_argument("--rho-ell", dest="rho_ell", default=None)
    g.set_defaults(func=cmd_segment)

    k = subs.add_parser("kpz", help="stochastic-heat-equation moments")
    _add_common(k, rates=False)
    k.add_argument("--A", type=float, default=None, help="Robin boundary parameter")
    k.add_argument("--t", type=float, required=True)
    k.add_argument("--x", required=True, help="comma-separated positions")
    k.add_argument("--boundary", choices=["robin", "dirichlet"], default="robin")
    k.add_argument("--form", choices=["nested", "residue"], default="nested")
    k.add_argument("--eps", default=None,
                   help="comma-separated asymmetries for the scaling bridge")
    k.set_defaults(func=cmd_kpz)
    return parser


def _apply_config(argv: List[str]) -> List[str]:
    """Inject key=value pairs from --config as flags before the explicit ones.

    Explicit command-line flags win because argparse keeps the last
    occurrence; injected flags pass through the normal type converters.
    """
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2:]
    inject: List[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            flag = "--" + key.strip().replace("_", "-")
            if flag not in rest:
                inject.extend([flag, val.strip()])
    if not rest:
        return rest
    return rest[:1] + inject + rest[1:]


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    start = time.monotonic()
    try:
        code = args.func(args)
    except (ValidityError, ChamberError, ValueError, TypeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ArithmeticError, ReductionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wall_time_s={time.monotonic() - start:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
