"""Transfer matrix on the plus-boundary spin space, Clifford generators and fermion correlations.

States of a row ``sigma in {+-1}^I`` with ``sigma_b = +1`` are encoded as
bitmasks: bit ``j`` set means site ``j`` carries spin ``-1``. Site ``j`` is the
``j``-th vertex from the left; horizontal edge ``j`` lies between sites ``j``
and ``j + 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import CapExceededError, ClosureError, DomainError, RankError
from .lattice import Coord2, RectangleSpec, kind
from .numerics import sym_eig
from .shol_core import I_LINE, IsingCoupling, face_relations

MAX_N = 10
SQ2 = math.sqrt(2)


@dataclass(frozen=True)
class SpinBasis:
    width: int

    def __post_init__(self):
        if self.width < 2:
            raise DomainError("need at least two sites")
        if self.width - 1 > MAX_N:
            raise CapExceededError(f"|I*| = {self.width - 1} exceeds the dense cap {MAX_N}")

    @property
    def n(self) -> int:
        return self.width - 1

    @property
    def dim(self) -> int:
        return 1 << self.n

    @cached_property
    def spins(self) -> np.ndarray:
        """``(dim, width)`` array of spins; the last site is always ``+1``."""
        idx = np.arange(self.dim)
        s = np.ones((self.dim, self.width))
        for j in range(self.n):
            s[:, j] = 1 - 2 * ((idx >> j) & 1)
        return s

    def plus(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[0] = 1
        return e


def build_vh_half(basis: SpinBasis, k: IsingCoupling) -> np.ndarray:
    s = basis.spins
    return np.diag(np.exp(k.beta / 2 * np.sum(s[:, :-1] * s[:, 1:], axis=1)))


def build_vv(basis: SpinBasis, k: IsingCoupling) -> np.ndarray:
    s = basis.spins
    m = np.exp(k.beta * (s @ s.T))
    same_end = np.equal.outer(s[:, 0], s[:, 0])
    return np.where(same_end, m, 0.0)


def build_v(basis: SpinBasis, k: IsingCoupling) -> np.ndarray:
    h = build_vh_half(basis, k)
    return h @ build_vv(basis, k) @ h


def _flip_perm(basis: SpinBasis, j: int) -> np.ndarray:
    return np.arange(basis.dim) ^ ((1 << (j + 1)) - 1)


def clifford_p(basis: SpinBasis, j: int) -> np.ndarray:
    """``p_k`` for the edge ``k = j + 1/2``: ``e_sigma -> sigma_{j+1} e_tau`` with sites ``<= j`` flipped."""
    if not 0 <= j < basis.n:
        raise DomainError(f"edge index {j} outside 0..{basis.n - 1}")
    m = np.zeros((basis.dim, basis.dim))
    cols = np.arange(basis.dim)
    m[_flip_perm(basis, j), cols] = basis.spins[:, j + 1]
    return m


def clifford_q(basis: SpinBasis, j: int) -> np.ndarray:
    """``q_k``: ``e_sigma -> i sigma_j e_tau``."""
    if not 0 <= j < basis.n:
        raise DomainError(f"edge index {j} outside 0..{basis.n - 1}")
    m = np.zeros((basis.dim, basis.dim), dtype=complex)
    cols = np.arange(basis.dim)
    m[_flip_perm(basis, j), cols] = 1j * basis.spins[:, j]
    return m


def psi_op(basis: SpinBasis, j: int) -> np.ndarray:
    return 1j / SQ2 * (clifford_p(basis, j) + clifford_q(basis, j))


def psibar_op(basis: SpinBasis, j: int) -> np.ndarray:
    return 1 / SQ2 * (clifford_p(basis, j) - clifford_q(basis, j))


def generators(basis: SpinBasis) -> list[np.ndarray]:
    """``psi_0..psi_{n-1}, psibar_0..psibar_{n-1}``."""
    n = basis.n
    return [psi_op(basis, j) for j in range(n)] + [psibar_op(basis, j) for j in range(n)]


def pairing(u: np.ndarray, v: np.ndarray) -> complex:
    """Scalar ``(u, v)`` with ``u v + v u = (u, v) Id``."""
    return complex(np.trace(u @ v + v @ u)) / u.shape[0]


def _exp_involution(theta: float, m: np.ndarray) -> np.ndarray:
    # exp(theta M) for M^2 = Id
    return math.cosh(theta) * np.eye(m.shape[0]) + math.sinh(theta) * m


def vh_half_clifford(basis: SpinBasis, k: IsingCoupling) -> np.ndarray:
    """``exp(i beta/2 sum_k q_k p_k)`` as a product of commuting factors."""
    out = np.eye(basis.dim, dtype=complex)
    for j in range(basis.n):
        out = out @ _exp_involution(k.beta / 2, 1j * clifford_q(basis, j) @ clifford_p(basis, j))
    return out


def vv_clifford(basis: SpinBasis, k: IsingCoupling) -> np.ndarray:
    """``e^{2 beta} (2S)^{|I|/2 - 1} exp(i beta* sum_j p_{j-1/2} q_{j+1/2})`` over interior sites."""
    out = np.eye(basis.dim, dtype=complex)
    for site in range(1, basis.n):
        flip = 1j * clifford_p(basis, site - 1) @ clifford_q(basis, site)
        out = out @ _exp_involution(k.beta_star, flip)
    return math.exp(2 * k.beta) * (2 * k.S) ** (basis.width / 2 - 1) * out


# induced rotation -----------------------------------------------------------

def induced_rotation_bruteforce(v: np.ndarray, basis: SpinBasis) -> np.ndarray:
    """Matrix of ``w -> V^{-1} w V`` on the fermion span.

    Row ``j`` holds the coefficients of the image of the ``j``-th generator
    (ordering ``psi_0.., psibar_0..``), so the result is directly comparable to
    the complexified propagator ``[[A, B], [conj B, conj A]]``.
    """
    gens = generators(basis)
    n = basis.n
    vinv = np.linalg.inv(v)
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for j, w in enumerate(gens):
        w2 = vinv @ w @ v
        coef = np.array([-pairing(w2, gens[l]) / 2 for l in range(n)]
                        + [pairing(w2, gens[n + l]) / 2 for l in range(n)])
        rebuilt = sum(c * g for c, g in zip(coef, gens))
        if np.max(np.abs(rebuilt - w2)) > 1e-9 * max(1.0, np.max(np.abs(w2))):
            raise ClosureError("conjugated generator left the fermion span")
        out[j] = coef
    return out


def _pq_to_psi(n: int) -> np.ndarray:
    """Columns: coordinates of ``p_j`` and ``q_j`` in the ``(psi, psibar)`` basis."""
    # from psi = i(p+q)/sqrt2 and psibar = (p-q)/sqrt2
    t = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        t[j, j] = -1j / SQ2
        t[n + j, j] = 1 / SQ2
        t[j, n + j] = -1j / SQ2
        t[n + j, n + j] = -1 / SQ2
    return t


def induced_rotation_closed_form(n: int, k: IsingCoupling) -> np.ndarray:
    """Composition of the three conjugation formulas, same layout as the brute-force matrix."""
    s, c, S, C = k.s, k.c, k.S, k.C
    # column convention in the (p_0.., q_0..) basis: column = image
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        H[j, j] = c
        H[n + j, j] = -1j * s
        H[j, n + j] = 1j * s
        H[n + j, n + j] = c
    Vv = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        if j < n - 1:
            Vv[j, j] = C / S
            Vv[n + j + 1, j] = 1j / S
        else:
            Vv[j, j] = 1
        if j > 0:
            Vv[j - 1, n + j] = -1j / S
            Vv[n + j, n + j] = C / S
        else:
            Vv[n + j, n + j] = 1
    m_pq = H @ Vv @ H
    t = _pq_to_psi(n)
    # t converts (p, q)-coordinates into (psi, psibar)-coordinates
    m_psi = t @ m_pq @ np.linalg.inv(t)
    return m_psi.T


def reflection_matrix(n: int) -> np.ndarray:
    """``R``: ``psi_j <-> psibar_{n-1-j}`` as a permutation matrix on coefficient rows."""
    r = np.zeros((2 * n, 2 * n))
    for j in range(n):
        r[j, n + n - 1 - j] = 1
        r[n + j, n - 1 - j] = 1
    return r


def swap_blocks(n: int) -> np.ndarray:
    z, e = np.zeros((n, n)), np.eye(n)
    return np.block([[z, e], [e, z]])


# the box --------------------------------------------------------------------

class Insertion(NamedTuple):
    kind: str
    pos: Coord2


KINDS = ("psi", "psibar", "psi_up", "psi_down", "sigma")


class TransferSystem:
    """Transfer-matrix data for a box, with cached powers and time-shifted operators."""

    def __init__(self, rect: RectangleSpec, k: IsingCoupling):
        if rect.x0 or rect.y0:
            raise DomainError("transfer computations use a box anchored at the origin")
        self.rect = rect
        self.k = k
        self.basis = SpinBasis(rect.width)
        self.vh_half = build_vh_half(self.basis, k)
        self.vv = build_vv(self.basis, k)
        self.v = self.vh_half @ self.vv @ self.vh_half
        self.w, self.q = sym_eig(self.v)
        if np.any(self.w <= 0):
            raise RankError("transfer matrix is not positive definite")
        self._pow: dict = {}
        self._ext: dict = {}
        self._gens = generators(self.basis)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def N(self) -> int:
        return self.rect.N

    def power(self, t: int) -> np.ndarray:
        """``V^t`` (exact matrix powers for t >= 0, eigendecomposition otherwise)."""
        if t not in self._pow:
            if t >= 0 and float(t).is_integer():
                self._pow[t] = np.linalg.matrix_power(self.v, int(t))
            else:
                self._pow[t] = (self.q * self.w ** t) @ self.q.T
        return self._pow[t]

    def at_time(self, op: np.ndarray, y: int) -> np.ndarray:
        """``V^{-y} op V^{y}``."""
        return self.power(-y) @ op @ self.power(y)

    def _hedge_index(self, z: Coord2) -> tuple[int, int]:
        x2, y2 = z
        j, y = (x2 - 1) // 2, y2 // 2
        if kind(z) != "hedge" or not (0 <= j < self.n and 0 <= y <= self.N):
            raise DomainError(f"{z} is not a horizontal edge of the box")
        return j, y

    def local(self, ins) -> tuple[np.ndarray, int]:
        """Row operator ``O`` and time ``y`` with ``Phi = V^{-y} O V^{y}``."""
        kd, z = ins
        if kd == "sigma":
            x2, y2 = z
            x, y = x2 // 2, y2 // 2
            if kind(z) != "vertex" or not (0 <= x <= self.n and 0 <= y <= self.N):
                raise DomainError(f"{z} is not a vertex of the box")
            return np.diag(self.basis.spins[:, x]).astype(complex), y
        if kind(z) == "vedge":
            (ps, pb), y = self._extend_local(z)
        else:
            j, y = self._hedge_index(z)
            ps, pb = self._gens[j], self._gens[self.n + j]
        if kd == "psi":
            return ps, y
        if kd == "psibar":
            return pb, y
        if kd == "psi_up":
            return 0.5 * (pb - ps), y
        if kd == "psi_down":
            return 0.5j * (ps + pb), y
        raise DomainError(f"unknown insertion kind {kd!r}")

    def operator(self, ins) -> np.ndarray:
        op, y = self.local(Insertion(*ins))
        return self.at_time(op, y)

    def psi(self, z: Coord2) -> np.ndarray:
        return self.operator(("psi", z))

    def psibar(self, z: Coord2) -> np.ndarray:
        return self.operator(("psibar", z))

    def sigma(self, v: Coord2) -> np.ndarray:
        return self.operator(("sigma", v))

    def _extend_local(self, z: Coord2):
        if kind(z) != "vedge":
            raise DomainError(f"{z} is not a vertical edge")
        x, y = z[0] // 2, z[1] // 2
        if not (0 <= x <= self.n and 0 <= y < self.N):
            raise DomainError(f"{z} is not a vertical edge of the box")
        if z in self._ext:
            return self._ext[z], y
        rows, rhs = [], []
        for face in ((z[0] - 1, z[1]), (z[0] + 1, z[1])):
            j = (face[0] - 1) // 2
            if not 0 <= j < self.n:
                continue
            s_edge = (face[0], face[1] - 1)
            for rel in face_relations(face, self.k):
                coef = {t[0]: t[1:] for t in rel.terms}
                if set(coef) == {z, s_edge}:
                    a, b = coef[s_edge]
                    rows.append(coef[z])
                    rhs.append(-(a * self._gens[j] + b * self._gens[self.n + j]))
        if x == 0 or x == self.n:
            # psi + i psibar = 0 on the left, psi - i psibar = 0 on the right
            l2 = I_LINE["left" if x == 0 else "right"] ** 2
            rows.append((1, -l2))
            rhs.append(np.zeros_like(self._gens[0]))
        inv = np.linalg.inv(np.array(rows, dtype=complex))
        ops = (inv[0, 0] * rhs[0] + inv[0, 1] * rhs[1], inv[1, 0] * rhs[0] + inv[1, 1] * rhs[1])
        self._ext[z] = ops
        return ops, y

    def extend_vertical(self, z: Coord2) -> tuple[np.ndarray, np.ndarray]:
        """``(psi(z), psibar(z))`` at a vertical edge, solved from the relations with the row below."""
        (ps, pb), y = self._extend_local(z)
        return self.at_time(ps, y), self.at_time(pb, y)

    def correlation(self, insertions: Sequence) -> complex:
        """Operators applied as written; consecutive time gaps avoid negative powers when time ordered."""
        plus = self.basis.plus()
        denom = plus @ self.power(self.N) @ plus
        vec = plus.astype(complex)
        t = 0
        for ins in reversed(list(insertions)):
            op, y = self.local(Insertion(*ins))
            vec = op @ (self.power(y - t) @ vec)
            t = y
        return complex(plus @ self.power(self.N - t) @ vec / denom)

    def partition_function(self) -> float:
        plus = self.basis.plus()
        return float(math.exp(self.k.beta * self.n) * (plus @ self.power(self.N) @ plus))


def fermion_correlation(box: Union[RectangleSpec, TransferSystem], insertions: Sequence,
                        k: IsingCoupling = None) -> complex:
    """``<e+| V^N Phi_1 ... Phi_m |e+> / <e+| V^N |e+>`` with operators applied as written."""
    ts = box if isinstance(box, TransferSystem) else TransferSystem(box, k)
    return ts.correlation(insertions)


def extend_fermion_to_vertical(box: Union[RectangleSpec, TransferSystem], z: Coord2,
                               k: IsingCoupling = None) -> tuple[np.ndarray, np.ndarray]:
    ts = box if isinstance(box, TransferSystem) else TransferSystem(box, k)
    return ts.extend_vertical(z)


def tm_spectrum(v: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``V`` sorted descending."""
    return np.sort(sym_eig(v)[0])[::-1]


def physical_vacuum(v: np.ndarray) -> tuple[float, np.ndarray]:
    """Top eigenvalue and normalized eigenvector (sign fixed by a positive largest entry)."""
    w, q = sym_eig(v)
    if w.shape[0] > 1 and (w[-1] - w[-2]) <= 1e-12 * abs(w[-1]):
        raise RankError("top eigenvalue of the transfer matrix is degenerate")
    vec = q[:, -1]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return float(w[-1]), vec


def partition_function_tm(box: RectangleSpec, k: IsingCoupling) -> float:
    return TransferSystem(box, k).partition_function()


def spin_correlation(box: Union[RectangleSpec, TransferSystem], vertices: Sequence,
                     k: IsingCoupling = None) -> float:
    ts = box if isinstance(box, TransferSystem) else TransferSystem(box, k)
    return ts.correlation([Insertion("sigma", v) for v in vertices]).real


def operator_relation_residual(ts: TransferSystem, face: Coord2) -> float:
    """Largest matrix-norm residual of the four face relations with operators in place of values.

    The relations are conjugated by ``V^{y0}`` (``y0`` the row below the face),
    which leaves them equivalent but keeps every operator within one time step
    and so avoids the growth of ``V^{-y}``.
    """
    y0 = face[1] // 2
    worst = 0.0
    for rel in face_relations(face, ts.k):
        tot = 0
        for e, a, b in rel.terms:
            ps, y = ts.local(("psi", e))
            pb, _ = ts.local(("psibar", e))
            op = a * ps + b * pb
            tot = tot + (op if y == y0 else ts.at_time(op, y - y0))
        worst = max(worst, float(np.linalg.norm(tot, 2)))
    return worst


class LadderReport(NamedTuple):
    eigenvalues: np.ndarray
    annihilates: np.ndarray
    max_residual: float


def ladder_check(v: np.ndarray, basis: SpinBasis) -> LadderReport:
    """Apply each eigenoperator ``a`` of ``w -> V w V^{-1}`` to the vacuum.

    With ``V a V^{-1} = lam a`` the vector ``a v_vac`` is either zero or an
    eigenvector of ``V`` with eigenvalue ``lam * Lambda_0``. The residual is
    relative: ``|a v|/|a|`` in the first case, the eigen-equation mismatch over
    ``lam Lambda_0 |a v|`` in the second. ``annihilates[i]`` records which case held.
    """
    gens = generators(basis)
    lam0, vac = physical_vacuum(v)
    mu, c = np.linalg.eig(induced_rotation_bruteforce(v, basis).T)
    lams = 1 / mu
    ann = np.zeros(len(lams), dtype=bool)
    worst = 0.0
    for i in range(len(lams)):
        a = sum(ci * g for ci, g in zip(c[:, i], gens))
        av = a @ vac
        size = np.linalg.norm(av)
        if size <= 1e-8 * np.linalg.norm(a, 2):
            ann[i] = True
            worst = max(worst, size / np.linalg.norm(a, 2))
            continue
        res = np.linalg.norm(v @ av - lams[i] * lam0 * av) / (abs(lams[i]) * lam0 * size)
        worst = max(worst, float(res))
    order = np.argsort(-lams.real)
    return LadderReport(lams[order].real, ann[order], worst)


def time_ordered_correlation(ts: TransferSystem, insertions: Sequence) -> complex:
    """Fermion correlation with insertions listed earliest first, reordered latest-leftmost.

    Ties are broken by the horizontal coordinate. Each transposition of two
    fermions contributes a sign, so the result is the usual time-ordered
    product expressed in the listed order.
    """
    ins = [Insertion(*i) for i in insertions]
    order = sorted(range(len(ins)), key=lambda i: (ins[i].pos[1], ins[i].pos[0]), reverse=True)
    # parity of the permutation taking the reversed listing to `order`
    target = order[::-1]
    sign = 1
    for i in range(len(target)):
        for j in range(i + 1, len(target)):
            if target[i] > target[j]:
                sign = -sign
    return sign * ts.correlation([ins[i] for i in order])


def two_point_from_transfer(ts: TransferSystem, a: Coord2) -> tuple[dict, dict]:
    """``(f_a^up, f_a^down)`` on every edge ``z != a`` from fermion correlations.

    Inverts ``<psi(z) psibar(a)> = f_up + i f_down`` and
    ``<psi(z) psi(a)> = -f_up + i f_down``; targets below ``a`` use the
    time-ordered product.
    """
    ts._hedge_index(a)
    up, down = {}, {}
    for z in ts_edges(ts):
        if z == a:
            continue
        if z[1] >= a[1]:
            c1 = ts.correlation([("psi", z), ("psibar", a)])
            c2 = ts.correlation([("psi", z), ("psi", a)])
        else:
            c1 = -ts.correlation([("psibar", a), ("psi", z)])
            c2 = -ts.correlation([("psi", a), ("psi", z)])
        up[z] = (c1 - c2) / 2
        down[z] = (c1 + c2) / 2j
    return up, down


def ts_edges(ts: TransferSystem) -> list[Coord2]:
    r = ts.rect
    hs = [r.hedge(j, y) for y in range(r.N + 1) for j in range(r.n)]
    vs = [r.vedge(x, y) for y in range(r.N) for x in range(r.n + 1)]
    return sorted(hs + vs, key=lambda e: (e[1], e[0]))
