"""Dense linear-algebra kernel: symmetric eigensolve, least squares, Pfaffians."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankError, SymmetryError

RANK_RTOL = 1e-10


def _inf_norm(m: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(m), axis=1))) if m.size else 0.0


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric matrix.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    v : ndarray
        Orthonormal eigenvectors as columns.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = _inf_norm(m)
    if _inf_norm(m - m.T) >= 1e-10 * max(scale, 1e-300):
        raise SymmetryError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return w, v


@dataclass
class LsqReport:
    solution: np.ndarray
    residual: float
    rank: int
    sigma_min: float
    sigma_max: float

    @property
    def full_rank(self) -> bool:
        return self.rank == self.solution.shape[0]


def least_squares(a, b) -> LsqReport:
    """Minimize ``||a x - b||`` via SVD, reporting rank and smallest singular value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"degenerate matrix shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError("right-hand side length does not match row count")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    smax = float(s[0])
    keep = s > RANK_RTOL * smax
    rank = int(np.count_nonzero(keep))
    coef = (u.T @ b)[keep] / s[keep]
    x = vt[keep].T @ coef
    resid = float(np.linalg.norm(a @ x - b))
    smin = float(s[-1]) if a.shape[0] >= a.shape[1] else 0.0
    return LsqReport(x, resid, rank, smin, smax)


def solve(a, b) -> np.ndarray:
    """Square solve that raises :class:`RankError` instead of returning garbage."""
    a = np.asarray(a)
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise RankError(str(exc)) from exc


def pfaffian(a) -> complex:
    """Pfaffian of an antisymmetric matrix by Parlett-Reid elimination.

    Uses Gauss transformations with symmetric pivoting on the first column,
    so ``Pf`` changes sign with every row/column swap.

    Parameters
    ----------
    a : array_like
        Complex or real antisymmetric ``(n, n)`` matrix.
    """
    a = np.array(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = _inf_norm(a)
    if scale > 0 and _inf_norm(a + a.T) >= 1e-10 * scale:
        raise SymmetryError("matrix is not antisymmetric")
    if n % 2:
        return 0j
    a = 0.5 * (a - a.T)
    pf = 1 + 0j
    for k in range(0, n - 1, 2):
        p = k + 1 + int(np.argmax(np.abs(a[k + 1:, k])))
        if p != k + 1:
            a[[k + 1, p], :] = a[[p, k + 1], :]
            a[:, [k + 1, p]] = a[:, [p, k + 1]]
            pf = -pf
        piv = a[k + 1, k]
        if piv == 0:
            return 0j
        pf *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2:] / a[k, k + 1]
            # eliminate row/column k using row/column k+1
            a[k + 2:, k + 2:] += np.outer(tau, a[k + 2:, k + 1]) - np.outer(a[k + 2:, k + 1], tau)
    return complex(pf)


def pfaffian_by_matchings(a) -> complex:
    """Reference Pfaffian as a signed sum over perfect matchings (small n only)."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n % 2:
        return 0j

    def rec(items: tuple) -> complex:
        if not items:
            return 1 + 0j
        i = items[0]
        total = 0j
        for pos in range(1, len(items)):
            j = items[pos]
            rest = items[1:pos] + items[pos + 1:]
            total += (-1) ** (pos - 1) * a[i, j] * rec(rest)
        return total

    return rec(tuple(range(n)))
