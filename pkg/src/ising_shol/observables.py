"""Low-temperature contour expansions and brute-force spin enumeration.

Contour configurations are subsets of dual edges (pairs of adjacent faces)
stored as integer bitmasks over ``Domain.dual_edges``. A configuration with
prescribed odd faces is enumerated as a particular solution plus the span of
a fundamental cycle basis of the dual graph, which is exactly the set of
parity-valid subsets.

Source/target stubs are half dual edges from an edge midpoint ``z`` to an
adjacent face ``z + o/2``; the full dual edge through ``z`` is then excluded
from the configuration.
"""
from __future__ import annotations

import cmath
import math
import os
from collections import defaultdict, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import CapExceededError, DomainError
from .lattice import Coord2, Domain, RectangleSpec, dual_edge_crossing, kind, shift
from .shol_core import LAM, IsingCoupling

DUAL_EDGE_CAP = 24
FREE_SPIN_CAP = 20
# e^{-i pi k / 4}
PHASE8 = tuple(cmath.exp(-1j * math.pi * q / 4) for q in range(8))
QUARTER = {1: 0, 1j: 1, -1j: -1}


def _unit(v: complex) -> complex:
    return complex(round(v.real), round(v.imag))


def _direction(src: Coord2, dst: Coord2) -> complex:
    return _unit(complex(dst[0] - src[0], dst[1] - src[1]) / 2)


def _check_cap(d: Domain, cap: Optional[int]):
    cap = DUAL_EDGE_CAP if cap is None else cap
    if len(d.dual_edges) > cap:
        raise CapExceededError(f"{len(d.dual_edges)} dual edges exceed the enumeration cap {cap}")


class _DualGraph:
    """Dual graph of a domain with adjacency lists and edge indices."""

    def __init__(self, d: Domain):
        self.d = d
        self.index = {e: i for i, e in enumerate(d.dual_edges)}
        self.adj: dict = defaultdict(list)
        for i, (p, q) in enumerate(d.dual_edges):
            self.adj[p].append((_direction(p, q), i, q))
            self.adj[q].append((_direction(q, p), i, p))

    def affine_space(self, odd: Sequence[Coord2], excluded: set) -> Optional[tuple[int, list[int]]]:
        """Particular subset with odd degree exactly at ``odd`` plus a cycle basis, or None."""
        root_mask: dict = {}
        comp: dict = {}
        basis = []
        for start in sorted(self.d.faces):
            if start in root_mask:
                continue
            root_mask[start] = 0
            comp[start] = start
            queue = deque([start])
            while queue:
                f = queue.popleft()
                for _, i, g in self.adj[f]:
                    if i in excluded:
                        continue
                    if g not in root_mask:
                        root_mask[g] = root_mask[f] ^ (1 << i)
                        comp[g] = start
                        queue.append(g)
        for i, (p, q) in enumerate(self.d.dual_edges):
            if i in excluded:
                continue
            c = (1 << i) ^ root_mask[p] ^ root_mask[q]
            if c:  # tree edges give 0
                basis.append(c)
        parity: dict = defaultdict(int)
        part = 0
        for f in odd:
            parity[comp[f]] ^= 1
            part ^= root_mask[f]
        if any(parity.values()):
            return None
        return part, basis


def _gray(part: int, basis: list[int]) -> Iterator[int]:
    m = part
    yield m
    for i in range(1, 1 << len(basis)):
        m ^= basis[(i & -i).bit_length() - 1]
        yield m


_GRAPHS: dict = {}


def _graph(d: Domain) -> _DualGraph:
    g = _GRAPHS.get(id(d))
    if g is None or g.d is not d:
        g = _DualGraph(d)
        _GRAPHS[id(d)] = g
    return g


# partition function -------------------------------------------------------

_Z_HIST: dict = {}


def _loop_histogram(d: Domain) -> dict:
    key = id(d)
    hit = _Z_HIST.get(key)
    if hit is not None and hit[0] is d:
        return hit[1]
    g = _graph(d)
    part, basis = g.affine_space([], set())
    hist: dict = defaultdict(int)
    for m in _gray(part, basis):
        hist[m.bit_count()] += 1
    _Z_HIST[key] = (d, dict(hist))
    return _Z_HIST[key][1]


def partition_function_contour(d: Domain, k: IsingCoupling, cap: Optional[int] = None) -> float:
    """``sum over even subgraphs of alpha^|omega|``."""
    _check_cap(d, cap)
    a = k.alpha
    return float(sum(c * a ** L for L, c in sorted(_loop_histogram(d).items())))


# paths --------------------------------------------------------------------

class Stub(NamedTuple):
    edge: Coord2
    o: complex  # direction from the edge midpoint into its face

    @property
    def face(self) -> Coord2:
        return shift(self.edge, self.o)


@dataclass
class PathData:
    pairs: list  # (s, d) index pairs with s < d
    quarters: list  # quarter-turn count per path
    sign: int


def crossing_sign(pairs: Sequence[tuple[int, int]]) -> int:
    """``(-1)^{number of crossing pairs s_j < s_k < d_j < d_k}``."""
    c = 0
    for (s1, d1), (s2, d2) in product(pairs, pairs):
        if s1 < s2 < d1 < d2:
            c += 1
    return -1 if c % 2 else 1


def extract_paths(d: Domain, mask: int, stubs: Sequence[Stub], rule: str = "left") -> PathData:
    """Walk the configuration from each stub, resolving crossings by a fixed turn rule.

    Parameters
    ----------
    rule : {"left", "right"}
        Which outgoing edge to take at a face with four incident edges.
    """
    g = _graph(d)
    turn = 1j if rule == "left" else -1j
    items: dict = defaultdict(list)
    for i, (p, q) in enumerate(d.dual_edges):
        if mask >> i & 1:
            items[p].append((_direction(p, q), ("e", i), q))
            items[q].append((_direction(q, p), ("e", i), p))
    for j, st in enumerate(stubs):
        items[st.face].append((-st.o, ("s", j), None))
    used = set()
    unpaired = list(range(len(stubs)))
    pairs, quarters = [], []
    while unpaired:
        s = unpaired.pop(0)
        used.add(("s", s))
        face, heading, q = stubs[s].face, stubs[s].o, 0
        while True:
            opts = [t for t in items[face] if t[1] not in used]
            if len(opts) == 1:
                step = opts[0]
            elif len(opts) == 3:
                step = next(t for t in opts if t[0] == heading * turn)
            else:
                raise DomainError(f"walk broke down at face {face}: parity violation")
            q += QUARTER[_unit(step[0] / heading)]
            used.add(step[1])
            if step[1][0] == "s":
                t = step[1][1]
                unpaired.remove(t)
                pairs.append((s, t))
                quarters.append(q)
                break
            face, heading = step[2], step[0]
    return PathData(pairs, quarters, crossing_sign(pairs))


def _config_histogram(d: Domain, stubs: tuple, rule: str = "left") -> dict:
    """``{(length, pairs, sign, quarters mod 8): count}`` over all configurations for these stubs."""
    g = _graph(d)
    excluded = set()
    for st in stubs:
        if st.face not in d.faces:
            return {}
        f1, f2 = dual_edge_crossing(st.edge)
        if (f1, f2) in g.index:
            excluded.add(g.index[(f1, f2)])
    space = g.affine_space([st.face for st in stubs], excluded)
    if space is None:
        return {}
    hist: dict = defaultdict(int)
    half = len(stubs) // 2
    for m in _gray(*space):
        pd = extract_paths(d, m, stubs, rule)
        hist[(m.bit_count() + half, tuple(pd.pairs), pd.sign, sum(pd.quarters) % 8)] += 1
    return dict(hist)


_HIST_CACHE: dict = {}


def _cached_histogram(d: Domain, stubs: tuple) -> dict:
    key = (id(d), stubs)
    hit = _HIST_CACHE.get(key)
    if hit is None or hit[0] is not d:
        hit = (d, _config_histogram(d, stubs))
        _HIST_CACHE[key] = hit
    return hit[1]


def clear_caches():
    _GRAPHS.clear()
    _Z_HIST.clear()
    _HIST_CACHE.clear()


# two-point observables ----------------------------------------------------

class SourceSpec(NamedTuple):
    edge: Coord2
    direction: str = "up"  # or "down"


def _two_point_value(d: Domain, src: SourceSpec, z: Coord2, alpha: float) -> complex:
    o = 1j if src.direction == "up" else -1j
    extra = 0 if src.direction == "up" else 2
    total = 0j
    normal = 1j if kind(z) == "hedge" else 1
    for oz in (normal, -normal):
        hist = _cached_histogram(d, (Stub(src.edge, o), Stub(z, oz)))
        for (L, _, _, q), c in hist.items():
            total += c * alpha ** L * PHASE8[(q + extra) % 8]
    return total


def _two_point_worker(args):
    d, src, targets, alpha = args
    return [_two_point_value(d, src, z, alpha) for z in targets]


def _workers() -> int:
    raw = os.environ.get("ISING_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return os.cpu_count() or 1 if n == 0 else max(1, n)


def two_point_observable(d: Domain, src: SourceSpec, k: IsingCoupling, cap: Optional[int] = None,
                         workers: Optional[int] = None) -> dict:
    """``f_a^up`` or ``f_a^down`` on every edge ``z != a``.

    Each target face next to ``z`` is a separate class of configurations; the
    phase is ``exp(-i W / 2)`` (shifted by ``pi`` inside the exponent for the
    downward source), and the sum is divided by the contour partition function.
    """
    _check_cap(d, cap)
    a = src.edge
    if kind(a) != "hedge" or a not in d.edges:
        raise DomainError(f"source {a} must be a horizontal edge of the domain")
    if src.direction not in ("up", "down"):
        raise DomainError("source direction must be 'up' or 'down'")
    alpha = k.alpha
    targets = [z for z in d.sorted_edges() if z != a]
    workers = _workers() if workers is None else workers
    if workers > 1 and len(targets) > 1:
        chunks = [targets[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_two_point_worker, [(d, src, c, alpha) for c in chunks]))
        vals = {}
        for c, p in zip(chunks, parts):
            vals.update(zip(c, p))
    else:
        vals = {z: _two_point_value(d, src, z, alpha) for z in targets}
    Z = partition_function_contour(d, k, cap=10 ** 9)
    return {z: vals[z] / Z for z in targets}


# multipoint observables ---------------------------------------------------

EPS_TABLE = tuple(s * LAM ** p for s in (1, -1) for p in range(-3, 4)) + (1, -1, 1j, -1j)


@dataclass(frozen=True)
class MultiSourceSpec:
    edges: tuple
    orientations: tuple
    eps: tuple

    def __post_init__(self):
        if not (len(self.edges) == len(self.orientations) == len(self.eps)):
            raise DomainError("edges, orientations and eps must have equal length")
        for e, o, s in zip(self.edges, self.orientations, self.eps):
            normal = 1j if kind(e) == "hedge" else 1
            if o not in (normal, -normal):
                raise DomainError(f"orientation {o} is not the dual-edge direction at {e}")
            if abs(s * s - o) > 1e-12:
                raise DomainError(f"eps {s} is not a square root of {o}")


def multipoint_observable(d: Domain, spec: MultiSourceSpec, k: IsingCoupling, cap: Optional[int] = None,
                          phase: str = "half") -> complex:
    """``f^eps(z_1, .., z_2m)`` normalized by the contour partition function.

    Parameters
    ----------
    phase : {"half", "full"}
        Use ``exp(-i W / 2)`` (default) or ``exp(-i W)`` per path; the second
        reading is kept only to test which one matches the operator side.
    """
    _check_cap(d, cap)
    if len(spec.edges) % 2:
        raise DomainError("multipoint observable needs an even number of points")
    if len(set(spec.edges)) != len(spec.edges):
        raise DomainError("points must be distinct edges")
    stubs = tuple(Stub(e, o) for e, o in zip(spec.edges, spec.orientations))
    hist = _cached_histogram(d, stubs)
    alpha = k.alpha
    total = 0j
    for (L, pairs, sign, q), c in hist.items():
        ratio = 1 + 0j
        for s, t in pairs:
            ratio *= spec.eps[t] / spec.eps[s]
        ph = PHASE8[q % 8] if phase == "half" else PHASE8[(2 * q) % 8]
        total += c * alpha ** L * sign * ratio * ph
    return total / partition_function_contour(d, k, cap=10 ** 9)


def observable_combination_g(d: Domain, edges: Sequence[Coord2], orientations: Sequence[complex],
                             eps: Sequence[complex], z: Coord2, k: IsingCoupling,
                             last_roots: Optional[tuple] = None, cap: Optional[int] = None) -> complex:
    """``(lambda/eps) f^eps + (lambda/eps~) f^eps~`` over the two orientations at the last point ``z``.

    ``last_roots`` picks the square roots used for the two orientations
    (default: principal roots); the value does not depend on this choice.
    """
    normal = 1j if kind(z) == "hedge" else 1
    os_ = (normal, -normal)
    roots = last_roots or tuple(cmath.sqrt(o) for o in os_)
    total = 0j
    for o, r in zip(os_, roots):
        if shift(z, o) not in d.faces:
            continue
        spec = MultiSourceSpec(tuple(edges) + (z,), tuple(orientations) + (o,), tuple(eps) + (r,))
        total += LAM / r * multipoint_observable(d, spec, k, cap=cap)
    return total


# spin enumeration ---------------------------------------------------------

def spin_enum_oracle(box: RectangleSpec, k: IsingCoupling, cap: int = FREE_SPIN_CAP):
    """Exact ``Z+`` and single-site magnetizations by enumerating interior spins.

    Returns
    -------
    Z : float
        ``sum exp(beta sum_edges s_u s_v)`` with all boundary spins ``+1``.
    mag : dict
        Vertex -> ``E+[s_v]``.
    """
    w, h = box.width, box.height
    free = [(x, y) for y in range(1, h - 1) for x in range(1, w - 1)]
    if len(free) > cap:
        raise CapExceededError(f"{len(free)} free spins exceed the cap {cap}")
    idx = {v: i for i, v in enumerate(free)}
    m = len(free)
    conf = np.arange(1 << m)
    spins = 1 - 2 * ((conf[:, None] >> np.arange(m)) & 1) if m else np.zeros((1, 0), dtype=int)

    def col(v):
        return spins[:, idx[v]] if v in idx else np.ones(spins.shape[0])

    energy = np.zeros(spins.shape[0])
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                energy = energy + col((x, y)) * col((x + 1, y))
            if y + 1 < h:
                energy = energy + col((x, y)) * col((x, y + 1))
    # shift by the maximum to avoid overflow, restore afterwards
    emax = energy.max()
    wts = np.exp(k.beta * (energy - emax))
    Zs = wts.sum()
    Z = float(Zs * math.exp(k.beta * emax))
    mag = {}
    for y in range(h):
        for x in range(w):
            mag[box.vertex(x, y)] = float((col((x, y)) * wts).sum() / Zs)
    return Z, mag
