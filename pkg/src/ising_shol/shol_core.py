"""Coupling constants, (massive) s-holomorphicity relations, boundary lines and RBVP solves."""
from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np

from .errors import DomainError, RankError
from .lattice import Coord2, Domain, OPPOSITE, edge_faces, face_edges, kind, to_complex
from .numerics import LsqReport, least_squares

LAM = cmath.exp(1j * math.pi / 4)
BETA_C = 0.5 * math.log(1 + math.sqrt(2))

ComplexField = dict  # Coord2 -> complex


@dataclass(frozen=True)
class IsingCoupling:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @classmethod
    def critical(cls) -> "IsingCoupling":
        return cls(BETA_C)

    @property
    def alpha(self) -> float:
        return math.exp(-2 * self.beta)

    @property
    def S(self) -> float:
        return math.sinh(2 * self.beta)

    @property
    def C(self) -> float:
        return math.cosh(2 * self.beta)

    @property
    def s(self) -> float:
        return math.sinh(self.beta)

    @property
    def c(self) -> float:
        return math.cosh(self.beta)

    @property
    def beta_star(self) -> float:
        return math.atanh(self.alpha)

    @property
    def nu(self) -> complex:
        a = self.alpha
        return LAM.conjugate() ** 3 * (a + 1j) / (a - 1j)

    @property
    def mu(self) -> float:
        S = self.S
        return (S + 1 / S) / 2 - 1

    @property
    def is_critical(self) -> bool:
        return abs(self.beta - BETA_C) < 1e-15


# Riemann boundary lines: f(e) is a real multiple of I_LINE[side] (tau_cw^{-1/2}).
# Fixed by calibration against the contour observable; see tests/test_calibration.py.
I_LINE = {"top": 1 + 0j, "bottom": 1j, "left": LAM.conjugate(), "right": LAM}
# complementary lines (tau_ccw^{-1/2}); chosen so that R on one side of a cut equals I on the other
R_LINE = {s: I_LINE[OPPOSITE[s]] for s in I_LINE}


class Relation(NamedTuple):
    """Complex relation ``sum(a*F(e) + b*conj(F(e))) = 0`` whose values lie on ``direction * R``."""

    terms: tuple
    direction: complex

    def value(self, f) -> complex:
        return sum(a * f[e] + b * np.conj(f[e]) for e, a, b in self.terms)

    def real_row(self) -> list:
        """Coefficients ``(edge, cx, cy)`` of the real equation in ``F(e) = x + i y``."""
        u = np.conj(self.direction)
        return [(e, (u * (a + b)).real, (u * 1j * (a - b)).real) for e, a, b in self.terms]


def _line_of(eta: complex) -> complex:
    # the set {z + eta conj z} is the real line through sqrt(eta)
    return cmath.sqrt(eta)


def face_relations(face: Coord2, k: IsingCoupling) -> list[Relation]:
    """The four massive s-holomorphicity relations on a face.

    Each relation pairs the value at N or S with the value at E or W; at
    ``nu = 1`` they reduce to ordinary s-holomorphicity.
    """
    if kind(face) != "face":
        raise DomainError(f"{face} is not a face")
    ed = face_edges(face)
    nu, lam = k.nu, LAM
    E, N, W, S = ed["E"], ed["N"], ed["W"], ed["S"]
    spec = [
        (N, 1 / nu * lam, E, 1 / nu, lam),
        (N, nu / lam, W, nu, 1 / lam),
        (S, nu * lam ** 3, E, nu, lam ** 3),
        (S, 1 / (nu * lam ** 3), W, 1 / nu, lam ** -3),
    ]
    rels = []
    for e1, eta, e2, a2, b2 in spec:
        rels.append(Relation(((e1, 1 + 0j, complex(eta)), (e2, -complex(a2), -complex(b2))), _line_of(eta)))
    return rels


def check_sholomorphic(f, d: Domain, k: IsingCoupling, skip_faces: Iterable = ()) -> float:
    """Largest face-relation residual of ``f`` over the faces of ``d``."""
    missing = [e for e in d.edges if e not in f]
    if missing:
        raise DomainError(f"field is missing {len(missing)} edge values, e.g. {missing[0]}")
    skip = set(skip_faces)
    worst = 0.0
    for face in d.faces:
        if face in skip:
            continue
        for r in face_relations(face, k):
            worst = max(worst, abs(r.value(f)))
    return worst


def check_massive_laplacian(f, x: Coord2, k: IsingCoupling) -> float:
    """Residual of ``1/4 sum (F(Z) - F(X)) - mu F(X)`` over the four lattice neighbours ``Z = X +- 1, X +- i``."""
    nbrs = [(x[0] + 2, x[1]), (x[0] - 2, x[1]), (x[0], x[1] + 2), (x[0], x[1] - 2)]
    if x not in f or any(z not in f for z in nbrs):
        raise DomainError(f"edge {x} is too close to the boundary of the field")
    lap = sum(f[z] - f[x] for z in nbrs) / 4
    return abs(lap - k.mu * f[x])


def solve_edge_value(face: Coord2, edge: Coord2, f, k: IsingCoupling) -> complex:
    """Value at ``edge`` making ``f`` satisfy every relation of ``face`` that is usable.

    Relations whose other edges are all known are used; two independent real
    equations are required.
    """
    rows, rhs = [], []
    for r in face_relations(face, k):
        edges = [t[0] for t in r.terms]
        if edge not in edges or any(e != edge and e not in f for e in edges):
            continue
        row = [0.0, 0.0]
        b = 0.0
        for e, cx, cy in r.real_row():
            if e == edge:
                row[0] += cx
                row[1] += cy
            else:
                b -= cx * f[e].real + cy * f[e].imag
        rows.append(row)
        rhs.append(b)
    if len(rows) < 2:
        raise DomainError(f"not enough known values on face {face} to solve for {edge}")
    rep = least_squares(np.array(rows), np.array(rhs))
    if rep.rank < 2 or rep.residual > 1e-9 * max(1.0, float(np.linalg.norm(rhs))):
        raise RankError(f"inconsistent one-face extension at {edge}")
    return complex(rep.solution[0], rep.solution[1])


def front_back(f, a: Coord2, k: IsingCoupling) -> tuple[complex, complex]:
    """One-face extensions of ``f`` at the horizontal edge ``a`` from the faces above and below."""
    if kind(a) != "hedge":
        raise DomainError("residues are defined at horizontal edges")
    below, above = edge_faces(a)
    return solve_edge_value(above, a, f, k), solve_edge_value(below, a, f, k)


def discrete_residue(f, a: Coord2, k: IsingCoupling) -> complex:
    """``(i / 2 pi) (f_front(a) - f_back(a))``."""
    fr, bk = front_back(f, a, k)
    return 1j / (2 * math.pi) * (fr - bk)


# RBVP constraints ----------------------------------------------------------

class FixedValue(NamedTuple):
    edge: Coord2
    value: complex


class Residue(NamedTuple):
    edge: Coord2
    value: complex


class BoundaryLine(NamedTuple):
    edge: Coord2
    line: complex


class Projection(NamedTuple):
    """``Re(conj(direction) * f(edge)) = value``: prescribes one line coordinate."""

    edge: Coord2
    direction: complex
    value: float


RbvpConstraint = Union[FixedValue, Residue, BoundaryLine, Projection]


def boundary_lines(d: Domain, exclude: Iterable = ()) -> list[BoundaryLine]:
    ex = set(exclude)
    return [BoundaryLine(b.edge, I_LINE[b.side]) for b in d.boundary if b.edge not in ex]


@dataclass
class RbvpSolution:
    field: dict
    report: LsqReport
    singular: Optional[Coord2] = None
    front: Optional[complex] = None
    back: Optional[complex] = None

    def __iter__(self):
        yield self.field
        yield self.report


def assemble_rbvp(d: Domain, k: IsingCoupling, constraints: list):
    """Real system for an RBVP; returns ``(A, b, columns, singular_edge)``.

    Unknowns are ``(Re, Im)`` per edge, plus a duplicated back value at a
    singular (residue) edge, used by the face below it.
    """
    singular = [c.edge for c in constraints if isinstance(c, Residue)]
    if len(singular) > 1:
        raise DomainError("at most one singular edge per problem")
    sing = singular[0] if singular else None
    edges = d.sorted_edges()
    col = {e: 2 * i for i, e in enumerate(edges)}
    ncol = 2 * len(edges)
    back_col = None
    if sing is not None:
        if sing not in d.edges or d.is_boundary(sing):
            raise DomainError("singular edge must be an interior edge")
        back_col = ncol
        ncol += 2
        back_face = edge_faces(sing)[0]
    rows, rhs = [], []

    def add(entries, value):
        row = np.zeros(ncol)
        for c, v in entries:
            row[c] += v
        rows.append(row)
        rhs.append(value)

    for face in sorted(d.faces):
        for r in face_relations(face, k):
            entries = []
            for e, cx, cy in r.real_row():
                c = back_col if (e == sing and face == back_face) else col[e]
                entries += [(c, cx), (c + 1, cy)]
            add(entries, 0.0)
    for c in constraints:
        if c.edge not in d.edges:
            raise DomainError(f"constraint edge {c.edge} not in domain")
        j = col[c.edge]
        if isinstance(c, FixedValue):
            add([(j, 1.0)], complex(c.value).real)
            add([(j + 1, 1.0)], complex(c.value).imag)
        elif isinstance(c, BoundaryLine):
            # Im(conj(line) f) = 0
            u = np.conj(c.line)
            add([(j, u.imag), (j + 1, u.real)], 0.0)
        elif isinstance(c, Projection):
            u = np.conj(c.direction)
            add([(j, u.real), (j + 1, -u.imag)], float(c.value))
        elif isinstance(c, Residue):
            # (i/2pi)(front - back) = r  <=>  front - back = -2 pi i r
            t = -2j * math.pi * complex(c.value)
            add([(j, 1.0), (back_col, -1.0)], t.real)
            add([(j + 1, 1.0), (back_col + 1, -1.0)], t.imag)
        else:
            raise TypeError(f"unknown constraint {c!r}")
    return np.array(rows), np.array(rhs), edges, sing


def solve_rbvp(d: Domain, k: IsingCoupling, constraints: list, tol: float = 1e-9) -> RbvpSolution:
    """Solve a (massive) s-holomorphic boundary value problem by global least squares.

    Raises
    ------
    RankError
        If the system is rank deficient or the residual exceeds ``tol`` relative to the data.
    """
    A, b, edges, sing = assemble_rbvp(d, k, constraints)
    rep = least_squares(A, b)
    if not rep.full_rank:
        raise RankError(f"RBVP system rank {rep.rank} < {A.shape[1]} unknowns (sigma_min={rep.sigma_min:.3e})")
    x = rep.solution
    scale = max(1.0, float(np.max(np.abs(x))))
    if rep.residual > tol * scale:
        raise RankError(f"RBVP residual {rep.residual:.3e} above tolerance")
    field = {e: complex(x[2 * i], x[2 * i + 1]) for i, e in enumerate(edges)}
    sol = RbvpSolution(field, rep)
    if sing is not None:
        sol.singular = sing
        sol.front = field.pop(sing)
        sol.back = complex(x[-2], x[-1])
    return sol


# CSV -----------------------------------------------------------------------

def field_to_csv(f) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x2", "y2", "re", "im"])
    for e in sorted(f, key=lambda c: (c[1], c[0])):
        v = complex(f[e])
        w.writerow([e[0], e[1], f"{v.real:.17g}", f"{v.imag:.17g}"])
    return buf.getvalue()


def field_from_csv(text: str) -> dict:
    r = csv.DictReader(io.StringIO(text))
    if r.fieldnames != ["x2", "y2", "re", "im"]:
        raise ValueError(f"unexpected CSV header {r.fieldnames}")
    return {(int(row["x2"]), int(row["y2"])): complex(float(row["re"]), float(row["im"])) for row in r}


def linear_field(d: Domain) -> dict:
    """``F(z) = z`` on the edge midpoints of ``d``."""
    return {e: to_complex(e) for e in d.edges}
