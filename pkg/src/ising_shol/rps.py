"""Riemann Poincare-Steklov operators on Cauchy data and gluing along a cut.

Cauchy data on a boundary run ``b`` are stored as real line coordinates:
``f(e) = u(e) R(e) + v(e) I(e)`` with ``R = R_LINE[side]`` and ``I = I_LINE[side]``.
An RPS operator maps the R-coordinates ``u`` to the I-coordinates ``v`` of the
unique massive s-holomorphic extension with I-lines on the rest of the boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, RankError
from .lattice import (Coord2, CutSpec, Domain, RectangleSpec, build_rectangle, format_coord,
                      kind, split_domain)
from .observables import SourceSpec, two_point_observable
from .propagator import propagator_matrix
from .shol_core import (I_LINE, R_LINE, BoundaryLine, IsingCoupling, Projection, solve_edge_value,
                        solve_rbvp)

COND_LIMIT = 1e12
METHODS = ("direct", "kernel", "blocks")


def _check_run(d: Domain, b: Sequence[Coord2]) -> list[Coord2]:
    b = [tuple(e) for e in b]
    if not b:
        raise DomainError("boundary run is empty")
    if len(set(b)) != len(b):
        raise DomainError("boundary run has repeated edges")
    for e in b:
        if e not in d.edges or not d.is_boundary(e):
            raise DomainError(f"{e} is not a boundary edge of the domain")
    return b


def r_coordinate(d: Domain, e: Coord2, value: complex) -> float:
    return float((np.conj(R_LINE[d.side(e)]) * value).real)


def i_coordinate(d: Domain, e: Coord2, value: complex) -> float:
    return float((np.conj(I_LINE[d.side(e)]) * value).real)


@dataclass(frozen=True, eq=False)
class RPSOperator:
    """Real ``|b| x |b|`` matrix from R-coordinates to I-coordinates on ``b``."""

    b: tuple
    matrix: np.ndarray
    method: str
    domain: Optional[Domain] = field(default=None, repr=False)

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def __call__(self, u) -> np.ndarray:
        return self.matrix @ np.asarray(u, dtype=float)

    def to_json(self) -> dict:
        return {"b": [list(e) for e in self.b],
                "matrix": [[float(f"{x:.17g}") for x in row] for row in self.matrix],
                "method": self.method, "cond": float(f"{self.cond:.17g}")}


def extend_cauchy(d: Domain, b: Sequence[Coord2], u, k: IsingCoupling) -> dict:
    """Massive s-holomorphic field with R-coordinates ``u`` on ``b`` and I-lines elsewhere."""
    b = _check_run(d, b)
    u = np.asarray(u, dtype=float)
    if u.shape != (len(b),):
        raise DomainError("one R-coordinate per edge of b is required")
    cons = [BoundaryLine(x.edge, I_LINE[x.side]) for x in d.boundary if x.edge not in set(b)]
    cons += [Projection(e, R_LINE[d.side(e)], float(t)) for e, t in zip(b, u)]
    return solve_rbvp(d, k, cons).field


def build_rps_direct(d: Domain, b: Sequence[Coord2], k: IsingCoupling) -> RPSOperator:
    """Column ``j`` holds the I-coordinates on ``b`` of the extension of the j-th R basis vector."""
    b = _check_run(d, b)
    m = np.zeros((len(b), len(b)))
    for j in range(len(b)):
        u = np.zeros(len(b))
        u[j] = 1.0
        f = extend_cauchy(d, b, u, k)
        m[:, j] = [i_coordinate(d, e, f[e]) for e in b]
    return RPSOperator(tuple(b), m, "direct", d)


def boundary_kernel(d: Domain, y: Coord2, k: IsingCoupling, method: str = "rbvp") -> dict:
    """``f_d(y, .)`` for a boundary edge ``y``: unit R-coordinate at ``y``, I-lines elsewhere.

    ``method="contour"`` uses the two-point observable with the source stub
    pointing into the domain (horizontal ``y`` only), rescaled so that its
    value at ``y`` has unit R-coordinate.
    """
    if y not in d.edges or not d.is_boundary(y):
        raise DomainError(f"{y} is not a boundary edge")
    if method == "rbvp":
        return extend_cauchy(d, [y], [1.0], k)
    if method != "contour":
        raise DomainError(f"unknown kernel method {method!r}")
    side = d.side(y)
    if kind(y) != "hedge":
        raise DomainError("contour kernels need a horizontal source edge")
    f = dict(two_point_observable(d, SourceSpec(y, "up" if side == "bottom" else "down"), k))
    face = d.faces_of(y)[0]
    f[y] = solve_edge_value(face, y, f, k)
    scale = r_coordinate(d, y, f[y])
    if abs(i_coordinate(d, y, f[y])) > 1e-9 * abs(scale):
        raise RankError(f"contour kernel at {y} is not on the R-line")
    return {e: v / scale for e, v in f.items()}


def build_rps_kernel(d: Domain, b: Sequence[Coord2], k: IsingCoupling, method: str = "contour") -> RPSOperator:
    """``U[x, y] = I-coordinate of f_d(y, x)`` for ``x != y`` (zero diagonal)."""
    b = _check_run(d, b)
    m = np.zeros((len(b), len(b)))
    for j, y in enumerate(b):
        f = boundary_kernel(d, y, k, method)
        for i, x in enumerate(b):
            if i != j:
                m[i, j] = i_coordinate(d, x, f[x])
    return RPSOperator(tuple(b), m, "kernel", d)


def kernel_extension(d: Domain, b: Sequence[Coord2], u, k: IsingCoupling, method: str = "contour") -> dict:
    """``h(x) = sum_y u(y) f_d(y, x)`` with ``f_d(y, y)`` set to ``R(y)``."""
    b = _check_run(d, b)
    h = {e: 0j for e in d.edges}
    for y, t in zip(b, np.asarray(u, dtype=float)):
        f = boundary_kernel(d, y, k, method)
        for e in d.edges:
            h[e] += t * (R_LINE[d.side(y)] if e == y else f[e])
    return h


def build_rps_blocks(rect: RectangleSpec, cut_n: int, k: IsingCoupling) -> RPSOperator:
    """RPS operator of the bottom row of a box of ``cut_n`` rows of faces, from ``P^N`` blocks.

    On the bottom row ``Re f`` is the R-coordinate and ``Im f`` the I-coordinate;
    on the top row the I-lines force ``Im(P^N f) = 0``, so
    ``v = -(P_II)^{-1} P_IR u`` with ``I`` the imaginary rows/columns.
    """
    if cut_n < 1:
        raise DomainError("need at least one row of faces")
    n = rect.n
    p = np.linalg.matrix_power(propagator_matrix(n, k).matrix, cut_n)
    p_ir, p_ii = p[n:, :n], p[n:, n:]
    if np.linalg.cond(p_ii) > COND_LIMIT:
        raise RankError("P_II block is singular")
    m = -np.linalg.solve(p_ii, p_ir)
    box = RectangleSpec(rect.width, cut_n + 1, rect.x0, rect.y0)
    return RPSOperator(tuple(box.row_edges(0)), m, "blocks", build_rectangle(box))


def rps_from_json(obj) -> RPSOperator:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if obj.get("method") not in METHODS:
        raise DomainError(f"unknown method {obj.get('method')!r}")
    return RPSOperator(tuple(tuple(e) for e in obj["b"]), np.array(obj["matrix"], dtype=float), obj["method"])


# gluing ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GlueOperator:
    Q: np.ndarray
    cond: float


def glue(u1: RPSOperator, u2: RPSOperator) -> GlueOperator:
    """``Q = (Id - U1 U2)^{-1}``; a large condition number flags a convention mismatch."""
    if u1.b != u2.b:
        raise DomainError("operators live on different cuts")
    m = np.eye(len(u1.b)) - u1.matrix @ u2.matrix
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RankError(f"Id - U1 U2 is near singular (cond {cond:.3e})")
    return GlueOperator(np.linalg.inv(m), cond)


def observable_on_cut(u2: RPSOperator, q: GlueOperator, f1_restriction) -> np.ndarray:
    """Complex values on the cut: R2-coordinates ``Q g`` plus I2-coordinates ``U2 Q g``."""
    g = np.asarray(f1_restriction, dtype=float)
    u = q.Q @ g
    v = u2(u)
    sides = [u2.domain.side(e) if u2.domain is not None else "bottom" for e in u2.b]
    return np.array([a * R_LINE[s] + c * I_LINE[s] for a, c, s in zip(u, v, sides)])


class Gluing:
    """A rectangle cut along a row into ``lower`` and ``upper`` with RPS data on the cut.

    ``f_d(x, .)`` for a boundary source ``x`` is the boundary kernel (unit
    R-coordinate at ``x``), computed by ``kernel_method``.
    """

    def __init__(self, d: Domain, cut_row: int, k: IsingCoupling, method: str = "direct",
                 kernel_method: str = "rbvp"):
        self.d, self.k = d, k
        self.lower, self.upper, b = split_domain(d, CutSpec(cut_row))
        self.b = tuple(b)
        self.kernel_method = kernel_method
        if method == "direct":
            self.u1 = build_rps_direct(self.lower, b, k)
            self.u2 = build_rps_direct(self.upper, b, k)
        elif method == "kernel":
            self.u1 = build_rps_kernel(self.lower, b, k, kernel_method)
            self.u2 = build_rps_kernel(self.upper, b, k, kernel_method)
        else:
            raise DomainError(f"unknown gluing method {method!r}")
        self.q = glue(self.u1, self.u2)
        self._kern: dict = {}

    def kernel(self, part: Domain, y: Coord2) -> dict:
        key = (id(part), y)
        if key not in self._kern:
            self._kern[key] = boundary_kernel(part, y, self.k, self.kernel_method)
        return self._kern[key]

    def _restriction(self, x: Coord2) -> np.ndarray:
        if x in self.b or x not in self.lower.edges or not self.lower.is_boundary(x):
            raise DomainError(f"{x} must be a boundary edge of the lower part off the cut")
        f1 = self.kernel(self.lower, x)
        return np.array([i_coordinate(self.lower, e, f1[e]) for e in self.b])

    def observable_on_cut(self, x: Coord2) -> np.ndarray:
        return observable_on_cut(self.u2, self.q, self._restriction(x))

    def pair_across(self, x: Coord2, y: Coord2) -> complex:
        """``f_d(x, y)`` for ``x`` on the lower boundary and ``y`` in the upper part."""
        if y not in self.upper.edges:
            raise DomainError(f"{y} is not an edge of the upper part")
        u = self.q.Q @ self._restriction(x)
        if y in self.b:
            return complex(observable_on_cut(self.u2, self.q, self._restriction(x))[self.b.index(y)])
        col = np.array([self.kernel(self.upper, e)[y] for e in self.b])
        return complex(col @ u)

    def pair_same_side(self, x: Coord2, y: Coord2) -> complex:
        """``f_d(x, y)`` for ``x``, ``y`` in the lower part: ``f1(x, y) + f1(., y)^T U2 Q g``."""
        if y not in self.lower.edges or y in self.b:
            raise DomainError(f"{y} must be an edge of the lower part off the cut")
        if y == x:
            raise DomainError("source and target coincide")
        g = self._restriction(x)
        u1 = self.u2(self.q.Q @ g)
        col = np.array([self.kernel(self.lower, e)[y] for e in self.b])
        return complex(self.kernel(self.lower, x)[y] + col @ u1)


def pair_across(x: Coord2, y: Coord2, gluing: Gluing) -> complex:
    return gluing.pair_across(x, y)


def pair_same_side(x: Coord2, y: Coord2, gluing: Gluing) -> complex:
    return gluing.pair_same_side(x, y)


def format_run(b: Sequence[Coord2]) -> str:
    return " ".join(format_coord(e) for e in b)
