"""Row-to-row massive s-holomorphic propagator and its spectrum."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PairingError
from .lattice import RectangleSpec, build_rectangle
from .numerics import sym_eig
from .shol_core import I_LINE, IsingCoupling, solve_edge_value


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """Real ``2n x 2n`` matrix of ``P_beta`` in split layout (all Re, then all Im).

    ``A`` and ``B`` are the complex coefficient matrices with
    ``(P f)(k) = sum_l A[k, l] f(l) + B[k, l] conj f(l)``.
    """

    n: int
    coupling: IsingCoupling
    A: np.ndarray
    B: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return split_layout(self.A, self.B)

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        return self.A @ f + self.B @ np.conj(f)

    def complexified(self) -> np.ndarray:
        """``[[A, B], [conj B, conj A]]`` acting on ``(f, conj f)``."""
        return np.block([[self.A, self.B], [np.conj(self.B), np.conj(self.A)]])


def split_layout(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    P, M = A + B, A - B
    return np.block([[P.real, -M.imag], [P.imag, M.real]])


def to_split(f) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    return np.concatenate([f.real, f.imag])


def from_split(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def involution(n: int) -> np.ndarray:
    """Split-layout matrix of ``f -> i conj f`` (swap Re and Im)."""
    z, e = np.zeros((n, n)), np.eye(n)
    return np.block([[z, e], [e, z]])


def propagator_matrix(n: int, k: IsingCoupling) -> PropagatorMatrix:
    if n < 2:
        raise DomainError("propagator needs at least two edges per row")
    S, C = k.S, k.C
    A = np.zeros((n, n), dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    left, right = (-S - 1j) / (2 * S), (-S + 1j) / (2 * S)
    for j in range(n):
        if 0 < j < n - 1:
            A[j, j] = C * C / S
            B[j, j] = -C
        if j > 0:
            A[j, j - 1] = left
            B[j, j - 1] = C / (2 * S)
        if j < n - 1:
            A[j, j + 1] = right
            B[j, j + 1] = C / (2 * S)
    edge = (S + C) * C / (2 * S)
    A[0, 0] = A[n - 1, n - 1] = edge
    B[0, 0] = (-(S + C) * S + 1j * (C - S)) / (2 * S)
    B[n - 1, n - 1] = (-(S + C) * S - 1j * (C - S)) / (2 * S)
    return PropagatorMatrix(n, k, A, B)


def critical_propagator_coefficients(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(A, B)`` of the propagator at the critical point, written with powers of ``lambda``."""
    lam = np.exp(1j * np.pi / 4)
    r = 1 / math.sqrt(2)
    A = np.zeros((n, n), dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    for j in range(n):
        if j > 0:
            A[j, j - 1] = lam ** -3 * r
            B[j, j - 1] = r
        if j < n - 1:
            A[j, j + 1] = lam ** 3 * r
            B[j, j + 1] = r
        A[j, j] = 2
        B[j, j] = -math.sqrt(2)
    A[0, 0] = A[n - 1, n - 1] = 1 + r
    B[0, 0] = lam ** 3 + lam ** -3 * r
    B[n - 1, n - 1] = lam ** -3 + lam ** 3 * r
    return A, B


def _strip(n: int) -> RectangleSpec:
    return RectangleSpec(n + 1, 2)


def propagate_row(f, k: IsingCoupling) -> tuple[np.ndarray, np.ndarray]:
    """Extend row values one step up using only the face relations and side lines.

    Parameters
    ----------
    f : array_like
        Complex values on the ``n`` horizontal edges of row 0.

    Returns
    -------
    half : ndarray
        Values on the ``n + 1`` vertical edges between rows 0 and 1.
    top : ndarray
        Values on the ``n`` horizontal edges of row 1.
    """
    f = np.asarray(f, dtype=complex)
    n = f.shape[0]
    if n < 2:
        raise DomainError("need at least two edges per row")
    r = _strip(n)
    known = {r.hedge(j, 0): f[j] for j in range(n)}
    half = np.zeros(n + 1, dtype=complex)
    for x in range(n + 1):
        z = r.vedge(x, 0)
        vals = []
        if x > 0:
            vals.append(_relation_rows((z[0] - 1, 1), z, known, k))
        if x < n:
            vals.append(_relation_rows((z[0] + 1, 1), z, known, k))
        if x == 0:
            vals.append(_line_row(I_LINE["left"]))
        if x == n:
            vals.append(_line_row(I_LINE["right"]))
        rows = np.array([v[0] for v in vals])
        rhs = np.array([v[1] for v in vals])
        sol = np.linalg.solve(rows, rhs)
        half[x] = complex(sol[0], sol[1])
    for x in range(n + 1):
        known[r.vedge(x, 0)] = half[x]
    top = np.array([solve_edge_value((2 * j + 1, 1), r.hedge(j, 1), known, k) for j in range(n)])
    return half, top


def _relation_rows(face, edge, known, k):
    """The single relation of ``face`` linking ``edge`` to already known values."""
    from .shol_core import face_relations

    for rel in face_relations(face, k):
        edges = [t[0] for t in rel.terms]
        if edge in edges and all(e == edge or e in known for e in edges):
            row = [0.0, 0.0]
            b = 0.0
            for e, cx, cy in rel.real_row():
                if e == edge:
                    row[0] += cx
                    row[1] += cy
                else:
                    b -= cx * known[e].real + cy * known[e].imag
            return row, b
    raise DomainError(f"no usable relation on {face} for {edge}")


def _line_row(line: complex):
    u = np.conj(line)
    return [u.imag, u.real], 0.0


def propagator_by_rows(n: int, k: IsingCoupling) -> np.ndarray:
    """Split-layout matrix assembled column by column with :func:`propagate_row`."""
    cols = []
    for j in range(2 * n):
        e = np.zeros(2 * n)
        e[j] = 1
        cols.append(to_split(propagate_row(from_split(e), k)[1]))
    return np.array(cols).T


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Reciprocal-pair spectrum of a propagator.

    ``lambdas`` holds the eigenvalues above one in decreasing order.
    ``small_vectors`` are complexified eigenvectors ``(f, conj f)`` spanning the
    sum of eigenspaces with eigenvalue below one, as columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lambdas: np.ndarray
    small_vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]


PAIR_RTOL = 1e-8
GAP_TOL = 1e-9


def spectral_split(p) -> SpectralSplit:
    """Split the spectrum of a propagator into pairs ``lambda, 1/lambda``.

    Raises
    ------
    PairingError
        If some eigenvalue has no reciprocal partner, one is an eigenvalue or
        the large eigenvalues are not distinct.
    """
    m = p.matrix if isinstance(p, PropagatorMatrix) else np.asarray(p, dtype=float)
    w, v = sym_eig(m)
    if np.any(w <= 0):
        raise PairingError("propagator is not positive definite")
    if np.min(np.abs(w - 1)) <= GAP_TOL:
        raise PairingError("1 is an eigenvalue")
    nn = w.shape[0] // 2
    # two-pointer matching: smallest with largest
    lo, hi = 0, w.shape[0] - 1
    while lo < hi:
        if abs(w[lo] * w[hi] - 1) > PAIR_RTOL:
            raise PairingError(f"eigenvalue {w[hi]:.6g} has no reciprocal partner (got {w[lo]:.6g})")
        lo += 1
        hi -= 1
    large = w[nn:][::-1]
    if nn > 1 and np.min(-np.diff(large)) <= GAP_TOL:
        raise PairingError("eigenvalues above one are not distinct")
    order = np.argsort(w)[::-1]
    small = v[:, :nn]
    f = small[:nn] + 1j * small[nn:]
    return SpectralSplit(w[order], v[:, order], large, np.vstack([f, np.conj(f)]))


def gamma_spectrum(s, lambda0: float) -> np.ndarray:
    """``{lambda0 * prod_{a in S} 1/lambda_a}`` over all subsets, sorted descending."""
    lambdas = np.asarray(s.lambdas if isinstance(s, SpectralSplit) else s, dtype=float)
    vals = np.array([lambda0])
    for lam in lambdas:
        vals = np.concatenate([vals, vals / lam])
    return np.sort(vals)[::-1]


def spectrum_json(p: PropagatorMatrix) -> dict:
    try:
        s = spectral_split(p)
        ok, lambdas = True, s.lambdas
    except PairingError:
        ok, lambdas = False, np.sort(sym_eig(p.matrix)[0])[::-1]
    return {"n": p.n, "beta": float(f"{p.coupling.beta:.17g}"),
            "lambdas": [float(f"{x:.17g}") for x in lambdas], "pairing_ok": ok}
