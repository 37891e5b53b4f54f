"""Square-grid domains in doubled integer coordinates.

A point ``(x2, y2)`` stands for ``(x2/2, y2/2)``. Parity classifies it:
(even, even) is a vertex, (odd, even) the midpoint of a horizontal edge,
(even, odd) the midpoint of a vertical edge and (odd, odd) a face center.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import DomainError

Coord2 = tuple[int, int]

# unit steps in doubled coordinates, indexed by direction as a complex unit
STEP = {1: (1, 0), 1j: (0, 1), -1: (-1, 0), -1j: (0, -1)}
SIDES = ("top", "bottom", "left", "right")
OUTWARD = {"top": 1j, "bottom": -1j, "left": -1, "right": 1}
# tangent of a clockwise traversal (interior on the right)
CW_TANGENT = {"top": 1, "bottom": -1, "left": 1j, "right": -1j}
OPPOSITE = {"top": "bottom", "bottom": "top", "left": "right", "right": "left"}


def kind(c: Coord2) -> str:
    x, y = c
    return {(0, 0): "vertex", (1, 0): "hedge", (0, 1): "vedge", (1, 1): "face"}[(x % 2, y % 2)]


def is_edge(c: Coord2) -> bool:
    return (c[0] + c[1]) % 2 == 1


def to_complex(c: Coord2) -> complex:
    return complex(c[0] / 2, c[1] / 2)


def shift(c: Coord2, d: complex, times: int = 1) -> Coord2:
    dx, dy = STEP[d]
    return (c[0] + times * dx, c[1] + times * dy)


def face_edges(f: Coord2) -> dict[str, Coord2]:
    """Edges of a face keyed by compass letter."""
    x, y = f
    return {"E": (x + 1, y), "N": (x, y + 1), "W": (x - 1, y), "S": (x, y - 1)}


def edge_faces(e: Coord2) -> tuple[Coord2, Coord2]:
    """The two faces touching an edge (in or out of any domain)."""
    x, y = e
    if kind(e) == "hedge":
        return (x, y - 1), (x, y + 1)
    if kind(e) == "vedge":
        return (x - 1, y), (x + 1, y)
    raise DomainError(f"{e} is not an edge midpoint")


def format_coord(c: Coord2) -> str:
    return f"{c[0]},{c[1]}"


def parse_coord(s: str) -> Coord2:
    try:
        x, y = (int(t) for t in s.split(","))
    except ValueError as exc:
        raise DomainError(f"bad coordinate {s!r}, expected 'x2,y2'") from exc
    return (x, y)


@dataclass(frozen=True)
class RectangleSpec:
    """Box ``I x {0..N}`` with ``width = |I|`` vertex columns and ``height = N+1`` rows.

    ``x0``/``y0`` give the doubled coordinates of the lower-left vertex.
    """

    width: int
    height: int
    x0: int = 0
    y0: int = 0

    def __post_init__(self):
        if self.width < 3 or self.height < 2:
            raise DomainError(
                f"rectangle too small: width={self.width} (need >= 3), height={self.height} (need >= 2)")
        if self.x0 % 2 or self.y0 % 2:
            raise DomainError("rectangle origin must be a vertex (even, even)")

    @property
    def n(self) -> int:
        """Number of horizontal edges per row, ``|I*|``."""
        return self.width - 1

    @property
    def N(self) -> int:
        return self.height - 1

    def hedge(self, j: int, y: int) -> Coord2:
        """Horizontal edge number ``j`` (0-based from the left) in row ``y``."""
        return (self.x0 + 2 * j + 1, self.y0 + 2 * y)

    def vedge(self, x: int, y: int) -> Coord2:
        """Vertical edge at column ``x`` between rows ``y`` and ``y+1``."""
        return (self.x0 + 2 * x, self.y0 + 2 * y + 1)

    def vertex(self, x: int, y: int) -> Coord2:
        return (self.x0 + 2 * x, self.y0 + 2 * y)

    def row_edges(self, y: int) -> list[Coord2]:
        return [self.hedge(j, y) for j in range(self.n)]

    def locate(self, c: Coord2) -> tuple[int, int]:
        """Integer (column, row) of a vertex or horizontal edge; vertical edges give the row below."""
        x, y = c[0] - self.x0, c[1] - self.y0
        return x // 2, y // 2

    def faces(self) -> list[Coord2]:
        return [(self.x0 + 2 * i + 1, self.y0 + 2 * j + 1)
                for j in range(self.height - 1) for i in range(self.width - 1)]


@dataclass(frozen=True)
class BoundaryEdge:
    edge: Coord2
    side: str
    normal: complex


@dataclass(frozen=True)
class CutSpec:
    row: int


@dataclass(frozen=True, eq=False)
class Domain:
    """Validated simply connected union of unit faces.

    Use :func:`build_rectangle` or :func:`build_from_faces` to construct.
    """

    faces: frozenset
    edges: frozenset
    boundary: tuple
    dual_edges: tuple
    vertices: frozenset
    rect: Optional[RectangleSpec] = None
    _side: dict = field(default_factory=dict, repr=False)

    @property
    def boundary_edges(self) -> list[Coord2]:
        return [b.edge for b in self.boundary]

    @property
    def interior_edges(self) -> list[Coord2]:
        return sorted(e for e in self.edges if e not in self._side)

    @property
    def dual_vertices(self) -> frozenset:
        return self.faces

    @property
    def interior_vertices(self) -> list[Coord2]:
        on_boundary = set()
        for b in self.boundary:
            t = CW_TANGENT[b.side]
            on_boundary.add(shift(b.edge, t))
            on_boundary.add(shift(b.edge, -t))
        return sorted(v for v in self.vertices if v not in on_boundary)

    def is_boundary(self, e: Coord2) -> bool:
        return e in self._side

    def side(self, e: Coord2) -> str:
        try:
            return self._side[e]
        except KeyError:
            raise DomainError(f"{e} is not a boundary edge") from None

    def faces_of(self, e: Coord2) -> list[Coord2]:
        return [f for f in edge_faces(e) if f in self.faces]

    def sorted_edges(self) -> list[Coord2]:
        return sorted(self.edges, key=lambda c: (c[1], c[0]))

    def to_json(self) -> dict:
        if self.rect is not None and self.rect.x0 == 0 and self.rect.y0 == 0:
            return {"type": "rectangle", "width": self.rect.width, "height": self.rect.height}
        return {"type": "faces", "faces": [list(f) for f in sorted(self.faces)]}


def _side_of(e: Coord2, inner: Coord2) -> str:
    if kind(e) == "hedge":
        return "bottom" if inner[1] > e[1] else "top"
    return "left" if inner[0] > e[0] else "right"


def build_from_faces(faces: Iterable[Coord2], rect: Optional[RectangleSpec] = None) -> Domain:
    faces = [tuple(int(t) for t in f) for f in faces]
    if not faces:
        raise DomainError("empty face set")
    for f in faces:
        if kind(f) != "face":
            raise DomainError(f"{f} is not a face center (odd, odd)")
    fset = frozenset(faces)
    if len(fset) != len(faces):
        raise DomainError("duplicate faces")

    count: dict[Coord2, int] = {}
    inner: dict[Coord2, Coord2] = {}
    vertices = set()
    for f in fset:
        for e in face_edges(f).values():
            count[e] = count.get(e, 0) + 1
            inner[e] = f
        for dx in (-1, 1):
            for dy in (-1, 1):
                vertices.add((f[0] + dx, f[1] + dy))

    # edge-connectivity of faces
    start = next(iter(fset))
    seen = {start}
    queue = deque([start])
    while queue:
        f = queue.popleft()
        for e in face_edges(f).values():
            for g in edge_faces(e):
                if g in fset and g not in seen:
                    seen.add(g)
                    queue.append(g)
    if len(seen) != len(fset):
        raise DomainError("face set is disconnected")

    euler = len(vertices) - len(count) + len(fset)
    if euler != 1:
        raise DomainError(f"face set is not simply connected (V-E+F = {euler})")

    side = {e: _side_of(e, inner[e]) for e, c in count.items() if c == 1}
    # boundary cycle: each boundary edge is traversed clockwise from its start vertex
    outgoing: dict[Coord2, list[Coord2]] = {}
    for e, s in side.items():
        t = CW_TANGENT[s]
        outgoing.setdefault(shift(e, -t), []).append(e)
    if any(len(v) != 1 for v in outgoing.values()):
        raise DomainError("boundary is not a simple closed curve (pinched vertex)")
    first = min(side, key=lambda c: (c[1], c[0]))
    cycle = [first]
    cur = first
    while True:
        nxt = outgoing[shift(cur, CW_TANGENT[side[cur]])][0]
        if nxt == first:
            break
        cycle.append(nxt)
        cur = nxt
    if len(cycle) != len(side):
        raise DomainError("boundary does not form a single cycle")

    boundary = tuple(BoundaryEdge(e, side[e], OUTWARD[side[e]]) for e in cycle)
    dual = []
    for e, c in count.items():
        if c == 2:
            p, q = edge_faces(e)
            dual.append((p, q))
    dual.sort()
    return Domain(fset, frozenset(count), boundary, tuple(dual), frozenset(vertices), rect, side)


def build_rectangle(spec: RectangleSpec) -> Domain:
    return build_from_faces(spec.faces(), rect=spec)


def dual_edge_crossing(e: Coord2) -> tuple[Coord2, Coord2]:
    """Dual edge (pair of faces, sorted) crossing the primal edge ``e``."""
    p, q = edge_faces(e)
    return (min(p, q), max(p, q))


def split_domain(d: Domain, cut: CutSpec) -> tuple[Domain, Domain, list[Coord2]]:
    """Split a rectangle along the horizontal row ``cut.row``.

    Returns the lower part (rows ``0..k``), the upper part (rows ``k..N``)
    and the shared edges ordered left to right. Both parts keep the
    coordinates of ``d`` so edges can be compared directly.
    """
    r = d.rect
    if r is None:
        raise DomainError("split_domain needs a rectangle")
    k = cut.row
    if not 0 < k < r.N:
        raise DomainError(f"cut row {k} must lie strictly between 0 and {r.N}")
    lower = build_rectangle(RectangleSpec(r.width, k + 1, r.x0, r.y0))
    upper = build_rectangle(RectangleSpec(r.width, r.height - k, r.x0, r.y0 + 2 * k))
    return lower, upper, r.row_edges(k)


def domain_from_json(obj) -> Domain:
    """Parse the domain JSON format (a dict or a JSON string)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    t = obj.get("type")
    if t == "rectangle":
        return build_rectangle(RectangleSpec(int(obj["width"]), int(obj["height"])))
    if t == "faces":
        return build_from_faces([tuple(f) for f in obj["faces"]])
    raise DomainError(f"unknown domain type {t!r}")
