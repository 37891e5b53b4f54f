"""Command-line front end: ``ising-shol <command> ...``.

Exit codes: 0 success, 1 failed verification or numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CapExceededError, IsingError, PairingError, RankError
from .lattice import (Domain, RectangleSpec, build_rectangle, domain_from_json, format_coord, kind,
                      parse_coord)
from .observables import (DUAL_EDGE_CAP, MultiSourceSpec, SourceSpec, multipoint_observable,
                          two_point_observable)
from .propagator import propagator_matrix, spectrum_json
from .rps import Gluing, boundary_kernel, build_rps_blocks, build_rps_direct, build_rps_kernel
from .shol_core import (BETA_C, LAM, FixedValue, IsingCoupling, Residue, boundary_lines, field_from_csv,
                        field_to_csv, solve_rbvp)
from .transfer import TransferSystem, two_point_from_transfer
from .verify import SUITES, run_suite


class UsageError(Exception):
    pass


def parse_beta(text: str) -> float:
    """A positive float, or ``crit`` for the critical point at full precision."""
    if text.strip().lower() == "crit":
        return BETA_C
    try:
        b = float(text)
    except ValueError as exc:
        raise UsageError(f"bad beta {text!r}") from exc
    if not (math.isfinite(b) and b > 0):
        raise UsageError("beta must be positive")
    return b


def parse_domain(text: str) -> Domain:
    """A JSON file, inline JSON, or ``WxH`` for a rectangle."""
    p = Path(text)
    if p.is_file():
        return domain_from_json(p.read_text())
    if "x" in text and not text.lstrip().startswith("{"):
        w, h = (int(t) for t in text.lower().split("x"))
        return build_rectangle(RectangleSpec(w, h))
    return domain_from_json(text)


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cap(args):
    if args.cap is not None and args.cap > DUAL_EDGE_CAP:
        print(f"warning: enumeration cap raised to {args.cap}; memory and time grow as 2^cap",
              file=sys.stderr)
    return args.cap


def _beta_arg(args) -> float:
    if getattr(args, "critical", False):
        return BETA_C
    if args.beta is None:
        raise UsageError("give --beta or --critical")
    return parse_beta(args.beta)


# commands -------------------------------------------------------------------

def cmd_propagator(args) -> int:
    if args.width < 3:
        raise UsageError("width must be at least 3")
    p = propagator_matrix(args.width - 1, IsingCoupling(_beta_arg(args)))
    rep = spectrum_json(p)
    rep["eigenvalues"] = [float(f"{x:.17g}") for x in np.sort(np.linalg.eigvalsh(p.matrix))[::-1]]
    _write(_dump(rep), args.out)
    return 0 if rep["pairing_ok"] else 1


def _rbvp_observable(d: Domain, a, direction: str, k: IsingCoupling) -> dict:
    if d.is_boundary(a):
        if d.side(a) != "bottom":
            raise UsageError("rbvp sources on the boundary must lie on the bottom side")
        if direction == "down":
            return {z: 0j for z in d.edges if z != a}
        f = solve_rbvp(d, k, boundary_lines(d, exclude=[a]) + [FixedValue(a, 1.0)]).field
        f.pop(a)
        return f
    r = 1j / (2 * math.pi) if direction == "up" else -1 / (2 * math.pi)
    return solve_rbvp(d, k, boundary_lines(d) + [Residue(a, r)]).field


def cmd_observable(args) -> int:
    d = parse_domain(args.domain)
    k = IsingCoupling(_beta_arg(args))
    if args.kind == "multi":
        if args.method != "contour":
            raise UsageError("multipoint observables use the contour method")
        edges = [parse_coord(s) for s in args.sources.split(";")]
        arrows = args.arrows.split(",")
        if len(arrows) != len(edges) or any(a not in ("up", "down") for a in arrows):
            raise UsageError("one arrow (up/down) per source")
        spec = MultiSourceSpec(tuple(edges), tuple(1j if a == "up" else -1j for a in arrows),
                               tuple(LAM if a == "up" else LAM ** 3 for a in arrows))
        v = multipoint_observable(d, spec, k, cap=_cap(args))
        _write(f"re,im\n{v.real:.17g},{v.imag:.17g}\n", args.out)
        return 0
    if args.source is None:
        raise UsageError("--source is required")
    a = parse_coord(args.source)
    if kind(a) != "hedge" or a not in d.edges:
        raise UsageError(f"source {format_coord(a)} must be a horizontal edge of the domain")
    if args.method == "contour":
        f = two_point_observable(d, SourceSpec(a, args.kind), k, cap=_cap(args))
    elif args.method == "transfer":
        r = d.rect
        if r is None or r.x0 or r.y0 or build_rectangle(r).faces != d.faces:
            raise UsageError("the transfer method needs a rectangle at the origin")
        up, down = two_point_from_transfer(TransferSystem(r, k), a)
        f = up if args.kind == "up" else down
    else:
        f = _rbvp_observable(d, a, args.kind, k)
    _write(field_to_csv(f), args.out)
    return 0


def cmd_diff(args) -> int:
    f = field_from_csv(Path(args.a).read_text())
    g = field_from_csv(Path(args.b).read_text())
    if set(f) != set(g):
        raise UsageError("the two fields live on different edge sets")
    err = max((abs(f[e] - g[e]) for e in f), default=0.0)
    print(f"max_abs_diff {err:.17g}")
    return 0 if err <= args.tol else 1


def cmd_correlation(args) -> int:
    k = IsingCoupling(_beta_arg(args))
    ts = TransferSystem(RectangleSpec(args.width, args.height), k)
    ins = []
    for item in args.insert:
        kd, _, pos = item.partition(":")
        ins.append((kd, parse_coord(pos)))
    v = ts.correlation(ins)
    print(f"{v.real:.17g},{v.imag:.17g}")
    return 0


def cmd_rps(args) -> int:
    k = IsingCoupling(_beta_arg(args))
    if args.method == "blocks":
        if args.side != "bottom":
            raise UsageError("the blocks method works on the bottom row only")
        r = RectangleSpec(args.width, args.height)
        op = build_rps_blocks(r, r.N, k)
    else:
        d = parse_domain(args.domain) if args.domain else build_rectangle(RectangleSpec(args.width, args.height))
        if args.run:
            run = [parse_coord(s) for s in args.run.split(";")]
        else:
            run = [b.edge for b in d.boundary if b.side == args.side]
            run.sort(key=lambda e: (e[1], e[0]))
        op = build_rps_direct(d, run, k) if args.method == "direct" else build_rps_kernel(d, run, k)
    _write(_dump(op.to_json()), args.out)
    return 0


def cmd_glue_check(args) -> int:
    k = IsingCoupling(_beta_arg(args))
    r = RectangleSpec(args.width, args.height)
    d = build_rectangle(r)
    g = Gluing(d, args.cut, k)
    x = r.hedge(args.source, 0)
    ref = boundary_kernel(d, x, k, "contour")
    across = max(abs(g.pair_across(x, y) - ref[y]) for y in g.upper.edges)
    same = max((abs(g.pair_same_side(x, y) - ref[y]) for y in g.lower.edges if y != x and y not in g.b),
               default=0.0)
    cut = g.observable_on_cut(x)
    on_cut = max(abs(v - ref[e]) for e, v in zip(g.b, cut))
    rep = {"cond": g.q.cond, "pair_across": across, "pair_same_side": same, "observable_on_cut": on_cut,
           "tol": args.tol}
    rep = {kk: (float(f"{v:.17g}") if isinstance(v, float) else v) for kk, v in rep.items()}
    rep["pass"] = bool(max(across, same, on_cut) <= args.tol)
    _write(_dump(rep), args.out)
    return 0 if rep["pass"] else 1


def cmd_verify(args) -> int:
    if args.suite not in SUITES + ("all",):
        raise UsageError(f"unknown suite {args.suite!r}")
    betas = [parse_beta(t) for t in args.betas.split(",")]
    rep = run_suite(args.suite, args.max_width, betas, args.tol)
    text = _dump(rep.to_json())
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ising-shol", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def beta_opts(p, critical=False):
        p.add_argument("--beta", help="inverse temperature, or 'crit'")
        if critical:
            p.add_argument("--critical", action="store_true")

    p = sub.add_parser("propagator", help="spectrum of the row propagator")
    p.add_argument("--width", type=int, required=True)
    beta_opts(p, True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_propagator)

    p = sub.add_parser("observable", help="two-point or multipoint observable")
    p.add_argument("--domain", required=True, help="JSON file, inline JSON or WxH")
    p.add_argument("--kind", choices=["up", "down", "multi"], required=True)
    p.add_argument("--source", help="x2,y2 of the source edge")
    p.add_argument("--sources", help="multi: 'x2,y2;x2,y2;...'")
    p.add_argument("--arrows", help="multi: comma separated up/down")
    p.add_argument("--method", choices=["contour", "transfer", "rbvp"], default="contour")
    p.add_argument("--cap", type=int, help="override the dual-edge enumeration cap")
    beta_opts(p, True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_observable)

    p = sub.add_parser("diff", help="max difference of two field CSV files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(fn=cmd_diff)

    p = sub.add_parser("correlation", help="transfer-matrix correlation on a box")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--insert", action="append", required=True,
                   help="kind:x2,y2 with kind in psi, psibar, psi_up, psi_down, sigma; leftmost first")
    beta_opts(p, True)
    p.set_defaults(fn=cmd_correlation)

    p = sub.add_parser("rps", help="RPS operator on a boundary run")
    p.add_argument("--domain")
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--height", type=int, default=3)
    p.add_argument("--run", help="'x2,y2;x2,y2;...' (default: the whole --side)")
    p.add_argument("--side", choices=["bottom", "top", "left", "right"], default="bottom")
    p.add_argument("--method", choices=["direct", "kernel", "blocks"], default="direct")
    beta_opts(p, True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rps)

    p = sub.add_parser("glue-check", help="compare gluing formulas with the whole-box observable")
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--height", type=int, default=5)
    p.add_argument("--cut", type=int, default=2)
    p.add_argument("--source", type=int, default=0, help="index of the bottom source edge")
    p.add_argument("--tol", type=float, default=1e-9)
    beta_opts(p, True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_glue_check)

    p = sub.add_parser("verify", help="run cross-verification suites")
    p.add_argument("--suite", default="all")
    p.add_argument("--max-width", type=int, default=5)
    p.add_argument("--betas", default="crit,0.4,0.8")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (UsageError, CapExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PairingError, RankError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    except (IsingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
