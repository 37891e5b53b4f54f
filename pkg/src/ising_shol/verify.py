"""Cross-verification suites used by the command line ``verify`` command."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lattice import RectangleSpec, build_rectangle, kind
from .numerics import pfaffian
from .observables import (MultiSourceSpec, SourceSpec, multipoint_observable, partition_function_contour,
                          two_point_observable)
from .propagator import involution, propagator_matrix, spectral_split, gamma_spectrum
from .rps import Gluing, boundary_kernel, build_rps_blocks, build_rps_direct, build_rps_kernel
from .shol_core import LAM, IsingCoupling
from .transfer import (TransferSystem, induced_rotation_bruteforce, induced_rotation_closed_form,
                       ladder_check, physical_vacuum, tm_spectrum)

SUITES = ("propagator", "induced-rotation", "spectrum", "correlations", "pfaffian", "rps")


@dataclass
class CheckResult:
    name: str
    max_abs_err: float
    tol: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_abs_err) and self.max_abs_err <= self.tol)

    def to_json(self) -> dict:
        return {"name": self.name, "max_abs_err": float(f"{self.max_abs_err:.17g}"),
                "tol": self.tol, "pass": self.passed, "seconds": round(self.seconds, 4)}


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"pass": self.passed, "params": self.params, "checks": [c.to_json() for c in self.checks]}


def _timed(name: str, tol: float, fn: Callable[[], float]) -> CheckResult:
    t0 = time.perf_counter()
    err = float(fn())
    return CheckResult(name, err, tol, time.perf_counter() - t0)


# individual suites ----------------------------------------------------------

def _propagator(widths, betas, tol):
    out = []
    for w, b in itertools.product(widths, betas):
        def run(w=w, b=b):
            p = propagator_matrix(w - 1, IsingCoupling(b))
            m = p.matrix
            j = involution(p.n)
            sym = np.max(np.abs(m - m.T))
            inv = np.max(np.abs(np.linalg.inv(m) - j @ m @ j))
            spectral_split(p)
            return max(sym, inv)
        out.append(_timed(f"propagator w={w} beta={b:.6g}", tol, run))
    return out


def _induced(widths, betas, tol):
    out = []
    for w, b in itertools.product(widths, betas):
        def run(w=w, b=b):
            k = IsingCoupling(b)
            ts = TransferSystem(RectangleSpec(w, 2), k)
            brute = induced_rotation_bruteforce(ts.v, ts.basis)
            closed = induced_rotation_closed_form(w - 1, k)
            comp = propagator_matrix(w - 1, k).complexified()
            return max(np.max(np.abs(brute - closed)), np.max(np.abs(brute - comp)))
        out.append(_timed(f"induced-rotation w={w} beta={b:.6g}", tol, run))
    return out


def _spectrum(widths, betas, tol):
    out = []
    for w, b in itertools.product(widths, betas):
        def run(w=w, b=b):
            k = IsingCoupling(b)
            ts = TransferSystem(RectangleSpec(w, 2), k)
            lam0, _ = physical_vacuum(ts.v)
            ref = gamma_spectrum(spectral_split(propagator_matrix(w - 1, k)), lam0)
            got = tm_spectrum(ts.v)
            spec = np.max(np.abs(got - ref) / np.abs(ref))
            return max(spec, ladder_check(ts.v, ts.basis).max_residual)
        out.append(_timed(f"spectrum w={w} beta={b:.6g}", tol, run))
    return out


def _correlations(widths, betas, tol):
    out = []
    for w, b in itertools.product([x for x in widths if x <= 5], betas):
        def run(w=w, b=b):
            k = IsingCoupling(b)
            r = RectangleSpec(w, 3)
            d = build_rectangle(r)
            ts = TransferSystem(r, k)
            worst = 0.0
            for j in range(r.n):
                a = r.hedge(j, 0)
                up = two_point_observable(d, SourceSpec(a, "up"), k)
                dn = two_point_observable(d, SourceSpec(a, "down"), k)
                for z, fu in up.items():
                    fd = dn[z]
                    worst = max(worst,
                                abs(ts.correlation([("psi", z), ("psibar", a)]) - (fu + 1j * fd)),
                                abs(ts.correlation([("psi", z), ("psi", a)]) - (-fu + 1j * fd)),
                                abs(ts.correlation([("psibar", z), ("psibar", a)])
                                    - (np.conj(fu) + 1j * np.conj(fd))))
            z3 = partition_function_contour(d, k)
            zt = ts.partition_function() * np.exp(-b * len(d.edges))
            return max(worst, abs(z3 - zt) / zt)
        out.append(_timed(f"correlations w={w} beta={b:.6g}", tol, run))
    return out


def _pfaffian(widths, betas, tol):
    out = []
    orient = {"up": 1j, "down": -1j}
    eps = {"up": LAM, "down": LAM ** 3}
    for b in betas:
        def run(b=b):
            k = IsingCoupling(b)
            r = RectangleSpec(4, 4)
            d = build_rectangle(r)
            ts = TransferSystem(r, k)
            worst = 0.0
            rng = np.random.default_rng(7)
            hedges = [e for e in d.sorted_edges() if kind(e) == "hedge"]
            for m in (4, 6):
                for _ in range(4):
                    pts = [hedges[i] for i in rng.choice(len(hedges), m, replace=False)]
                    kinds = [str(x) for x in rng.choice(["psi", "psibar"], m)]
                    ins = list(zip(kinds, pts))
                    val = ts.correlation(ins)
                    mat = np.zeros((m, m), dtype=complex)
                    for i in range(m):
                        for j in range(i + 1, m):
                            mat[i, j] = ts.correlation([ins[i], ins[j]])
                            mat[j, i] = -mat[i, j]
                    worst = max(worst, abs(val - pfaffian(mat)))
            for _ in range(4):
                pts = [hedges[i] for i in rng.choice(len(hedges), 4, replace=False)]
                arrows = [str(x) for x in rng.choice(["up", "down"], 4)]
                spec = MultiSourceSpec(tuple(pts), tuple(orient[a] for a in arrows), tuple(eps[a] for a in arrows))
                val = multipoint_observable(d, spec, k)
                mat = np.zeros((4, 4), dtype=complex)
                for i in range(4):
                    for j in range(i + 1, 4):
                        sub = MultiSourceSpec((pts[i], pts[j]), (spec.orientations[i], spec.orientations[j]),
                                              (spec.eps[i], spec.eps[j]))
                        mat[i, j] = multipoint_observable(d, sub, k)
                        mat[j, i] = -mat[i, j]
                worst = max(worst, abs(val - pfaffian(mat)))
            return worst
        out.append(_timed(f"pfaffian beta={b:.6g}", tol, run))
    return out


def _rps(widths, betas, tol):
    out = []
    for w, b in itertools.product([x for x in widths if x <= 5], betas):
        def run(w=w, b=b):
            k = IsingCoupling(b)
            r = RectangleSpec(w, 3)
            d = build_rectangle(r)
            run_ = r.row_edges(0)
            direct = build_rps_direct(d, run_, k).matrix
            kern = build_rps_kernel(d, run_, k).matrix
            blocks = build_rps_blocks(r, r.N, k).matrix
            worst = max(np.max(np.abs(direct - kern)), np.max(np.abs(direct - blocks)))
            big = RectangleSpec(w, 5)
            whole = build_rectangle(big)
            x = big.hedge(0, 0)
            ref = boundary_kernel(whole, x, k, "contour")
            for cut in (1, 2, 3):
                g = Gluing(whole, cut, k)
                for y in g.upper.edges:
                    worst = max(worst, abs(g.pair_across(x, y) - ref[y]))
                for y in g.lower.edges:
                    if y != x and y not in g.b:
                        worst = max(worst, abs(g.pair_same_side(x, y) - ref[y]))
            return worst
        out.append(_timed(f"rps w={w} beta={b:.6g}", tol, run))
    return out


_RUNNERS = {"propagator": _propagator, "induced-rotation": _induced, "spectrum": _spectrum,
            "correlations": _correlations, "pfaffian": _pfaffian, "rps": _rps}


def run_suite(suite: str, max_width: int, betas: Sequence[float], tol: float) -> VerificationReport:
    """Run one suite (or ``"all"``) over widths ``3..max_width`` and the given betas."""
    names = SUITES if suite == "all" else (suite,)
    for s in names:
        if s not in _RUNNERS:
            raise ValueError(f"unknown suite {s!r}")
    if max_width < 3:
        raise ValueError("max width must be at least 3")
    widths = list(range(3, min(max_width, 6) + 1))
    rep = VerificationReport(params={"suite": suite, "max_width": max_width,
                                     "betas": [float(f"{b:.17g}") for b in betas], "tol": tol})
    for s in names:
        rep.checks.extend(_RUNNERS[s](widths, list(betas), tol))
    return rep
