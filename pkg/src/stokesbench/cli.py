"""Command-line entry point: ``stokesbench <command> [options]``.

Exit status: 0 on success, 2 for usage errors, 3 when a quantity could not be
computed to the requested precision (including integrator failures), 1 for
any other library error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .algebra import trace2, det2
from .connection import (
    DEFAULT_CLASSIFY_TOL,
    DEFAULT_SEED_MODULUS,
    DEFAULT_TOL,
    BranchPoint,
    classify_obstruction,
    monodromy_matrix,
    residue_spectrum,
    stokes_matrix,
)
from .errors import PrecisionError, StokesbenchError, UsageError
from .integrals import first_integral_residual, formal_first_integral, primitivity_check, truncated_kernel
from .normalform import (
    DEFAULT_ORDER,
    conjugacy_residual,
    formal_diagonalize,
    formal_invariants,
    formal_monodromy,
    gevrey_type_estimate,
)
from .params import Params
from .report import (
    PRESETS,
    RunConfig,
    cmatrix,
    cpair,
    flatten,
    parse_range,
    preset,
    run_report,
    sweep,
    write_csv,
)

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_PRECISION = 0, 1, 2, 3

log = logging.getLogger("stokesbench")


def _shared(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("parameters")
    g.add_argument("--preset", choices=sorted(PRESETS), help="named parameter triple")
    g.add_argument("--a", default=None, help="a as 're' or 're,im' (fractions allowed)")
    g.add_argument("--b", default=None)
    g.add_argument("--c", default=None)
    p.add_argument("--order", type=int, default=DEFAULT_ORDER, help="truncation order N")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="integration tolerance")
    p.add_argument("--classify-tol", type=float, default=DEFAULT_CLASSIFY_TOL)
    p.add_argument("--seed-modulus", type=float, default=DEFAULT_SEED_MODULUS)
    p.add_argument("--mode", choices=("exact", "float"), default="exact")
    p.add_argument("--format", dest="fmt", choices=("json", "csv", "text"), default="json")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokesbench",
        description="Normal forms, Stokes data and first integrals of the X_{a,b,c} family.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalform", help="normalizing series, invariants, Gevrey fit")
    _shared(p)
    p.add_argument("--show", type=int, default=3, help="number of coefficients T_n to print")

    p = sub.add_parser("monodromy", help="monodromy matrix and trace identity")
    _shared(p)
    p.add_argument("--basepoint", type=float, default=1.0, help="modulus of the base point")

    p = sub.add_parser("stokes", help="Stokes matrices S_0 and S_pi")
    _shared(p)

    p = sub.add_parser("integral", help="truncated formal first integral")
    _shared(p)
    p.add_argument("--show", type=int, default=3)

    p = sub.add_parser("kernel", help="truncated first-integral space and primitivity")
    _shared(p)
    p.add_argument("--j-max", type=int, default=3)
    p.add_argument("--d-max", type=int, default=4)

    p = sub.add_parser("report", help="full pipeline for one triple")
    _shared(p)
    p.add_argument("--j-max", type=int, default=4)
    p.add_argument("--d-max", type=int, default=4)

    p = sub.add_parser("sweep", help="CSV over a grid of one or two parameters")
    _shared(p)
    p.add_argument(
        "--vary",
        action="append",
        default=[],
        metavar="NAME=RANGE",
        help="'a=0:1:5' (inclusive, COUNT points) or 'a=0;1/4;1/2'; repeatable up to twice",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    sub.add_parser("presets", help="list named parameter triples")
    return parser


def _params(args) -> Params:
    exact = args.mode == "exact"
    if args.preset:
        base = preset(args.preset, exact)
        vals = [base.a, base.b, base.c]
    else:
        vals = [0, 0, 0]
    for i, name in enumerate("abc"):
        given = getattr(args, name)
        if given is not None:
            vals[i] = given
    if not args.preset and all(getattr(args, n) is None for n in "abc") and args.command != "sweep":
        raise UsageError("give --preset or at least one of --a, --b, --c")
    return Params.of(*vals, exact=exact)


def _config(args, params: Params) -> RunConfig:
    bounds = (getattr(args, "j_max", 4), getattr(args, "d_max", 4))
    return RunConfig(
        params,
        order=args.order,
        seed_modulus=args.seed_modulus,
        tol=args.tol,
        classify_tol=args.classify_tol,
        mode=args.mode,
        fmt=args.fmt,
        kernel_bounds=bounds,
    )


def _emit(payload: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(payload, indent=2, allow_nan=False) + "\n")
    elif fmt == "text":
        for k, v in flatten(payload):
            out.write(f"{k}: {v}\n")
    else:
        out.write("key,value\n")
        for k, v in flatten(payload):
            out.write(f"{k},{json.dumps(v)}\n" if not isinstance(v, str) else f"{k},{v}\n")


def cmd_normalform(args, cfg: RunConfig) -> dict:
    p = cfg.params
    nf = formal_diagonalize(p, cfg.order)
    res = conjugacy_residual(nf, p)
    (c0, c1), _ = formal_invariants(p)
    payload = {
        "params": {"a": cpair(p.a), "b": cpair(p.b), "c": cpair(p.c), "mode": p.mode},
        "order": cfg.order,
        "T": {str(n): cmatrix(nf.that.coeffs[n]) for n in range(min(args.show, cfg.order) + 1)},
        "conjugacy_residual_zero": res.is_zero() if p.exact else None,
        "conjugacy_residual_max": res.max_norm(),
        "formal_invariants": [[cpair(c0), cpair(c1)], [cpair(-c0), cpair(-c1)]],
        "formal_monodromy": cmatrix(formal_monodromy(p)),
    }
    if cfg.order >= 20:
        g = gevrey_type_estimate(nf)
        payload["gevrey"] = {"status": g.status, "fitted_limit": g.fitted_limit}
    return payload


def cmd_monodromy(args, cfg: RunConfig) -> dict:
    p = cfg.params
    m = monodromy_matrix(p, BranchPoint(args.basepoint, 0.0), cfg.tol)
    spec = residue_spectrum(p)
    return {
        "M": cmatrix(m),
        "trace_M": cpair(trace2(m)),
        "det_M": cpair(det2(m)),
        "lambda": cpair(spec.lam),
        "resonant": spec.resonant,
        "two_cos_2pi_lambda": cpair(2 * np.cos(2 * math.pi * spec.lam)),
        "tol": cfg.tol,
    }


def cmd_stokes(args, cfg: RunConfig) -> dict:
    p = cfg.params
    kw = dict(tol=cfg.tol, seed_modulus=cfg.seed_modulus)
    s0 = stokes_matrix(p, 0, **kw)
    spi = stokes_matrix(p, math.pi, **kw)
    return {
        "S0": cmatrix(s0.matrix),
        "Spi": cmatrix(spi.matrix),
        "s0": cpair(s0.constant),
        "spi": cpair(spi.constant),
        "s0spi": cpair(s0.constant * spi.constant),
        "residuals": {"S0": s0.residuals, "Spi": spi.residuals},
        "verdict": str(classify_obstruction(p, cfg.classify_tol).verdict),
        "tol": cfg.tol,
    }


def cmd_integral(args, cfg: RunConfig) -> dict:
    p = cfg.params
    q = formal_first_integral(p, cfg.order)
    res = first_integral_residual(q, p)
    return {
        "Q": {str(n): cmatrix(q.qcoeffs[n]) for n in range(min(args.show, cfg.order) + 1)},
        "residual_zero": res.is_zero() if p.exact else None,
        "residual_max": res.max_norm(),
    }


def cmd_kernel(args, cfg: RunConfig) -> dict:
    p = cfg.params
    kb = truncated_kernel(p, args.j_max, args.d_max)
    rep = primitivity_check(kb, p)

    def terms(poly):
        return {f"x^{j} y1^{k} y2^{l}": cpair(v) for (j, k, l), v in poly}

    return {
        "bounds": [args.j_max, args.d_max],
        "dimension": kb.dimension,
        "elements": [{"artifact": art, "terms": terms(el)} for el, art in zip(kb.elements, kb.artifacts)],
        "artifact_degrees": sorted(kb.artifact_degrees),
        "primitivity": rep.summary(),
        "primitivity_passed": rep.passed,
    }


COMMANDS = {
    "normalform": cmd_normalform,
    "monodromy": cmd_monodromy,
    "stokes": cmd_stokes,
    "integral": cmd_integral,
    "kernel": cmd_kernel,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)

    if args.command == "presets":
        for name, vals in PRESETS.items():
            out.write(f"{name}\t{vals}\n")
        return EXIT_OK

    try:
        params = _params(args)
        cfg = _config(args, params)
        if args.command == "report":
            out.write(run_report(cfg).render(cfg.fmt))
        elif args.command == "sweep":
            ranges = [parse_range(spec, cfg.mode == "exact") for spec in args.vary]
            write_csv(sweep(cfg.params, ranges, cfg, jobs=args.jobs), out)
        else:
            try:
                payload = COMMANDS[args.command](args, cfg)
            except StokesbenchError as exc:
                exc.params = exc.params or str(cfg.params)
                raise
            _emit(payload, cfg.fmt, out)
    except UsageError as exc:
        print(f"usage error: {exc.describe()}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionError as exc:
        print(f"precision failure: {exc.describe()}", file=sys.stderr)
        return EXIT_PRECISION
    except StokesbenchError as exc:
        print(f"error: {exc.describe()}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
