"""Rips and colored Rips 2-skeleta over a Cayley ball, and annulus views.

Vertex ids: for the plain complex (``m == 1``) a vertex is a ball index; for
``m >= 2`` colors, vertex ``v`` is element ``v // m`` with color ``v % m``.
A colored simplex has pairwise distinct colors (the join of ``m`` discrete
copies of G) and pairwise element distance at most ``d``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .cayley import Ball
from .homotopy import (
    CellClosure,
    Closure,
    ReplayError,
    normalize_loop,
    random_loop,
    replay,
    search_filling,
    trace_from_closure,
)

__all__ = [
    "RipsSkeleton",
    "AnnulusView",
    "build_rips",
    "rescale_edge_path",
    "check_free_action",
    "export_text",
    "certify_simply_connected",
    "relator_loops",
    "interpolate_moves",
    "PreconditionError",
]


class RipsSkeleton:
    flag = True

    def __init__(self, ball: Ball, d: int, m: int = 1, served: int | None = None, materialize: bool = True):
        if d < 1:
            raise ValueError("Rips parameter d must be >= 1")
        if m < 1:
            raise ValueError("number of colors m must be >= 1")
        served = ball.radius if served is None else served
        if served > ball.radius:
            raise ValueError("served radius exceeds the ball radius")
        if d > ball.radius and not ball.exhausted:
            raise ValueError(f"Rips parameter d={d} exceeds the ball radius {ball.radius}; distances up to d are not certifiable")
        self.ball = ball
        self.d = d
        self.m = m
        self.served = served
        self.n_elements = ball.prefix(served)
        self._adj: list[list[int]] | None = None
        self._adj_sets: list[set[int]] | None = None
        self._dist_cache: dict[tuple[int, int], int | None] = {}
        if materialize:
            self.materialize()

    # vertices

    def vid(self, elem: int, color: int = 0) -> int:
        return elem if self.m == 1 else elem * self.m + color

    def elem(self, v: int) -> int:
        return v if self.m == 1 else v // self.m

    def color(self, v: int) -> int:
        return 0 if self.m == 1 else v % self.m

    def vertex_dist(self, v: int) -> int:
        return self.ball.dist[self.elem(v)]

    def vertices(self) -> range:
        return range(self.n_elements * self.m)

    def has_vertex(self, v: int) -> bool:
        return 0 <= v < self.n_elements * self.m

    # metric

    def element_distance(self, a: int, b: int) -> int | None:
        if a == b:
            return 0
        key = (a, b) if a < b else (b, a)
        if key not in self._dist_cache:
            self._dist_cache[key] = self.ball.pair_distance(*key)
        return self._dist_cache[key]

    def _close(self, a: int, b: int) -> bool:
        dist = self.element_distance(a, b)
        return dist is not None and dist <= self.d

    def is_edge(self, v: int, w: int) -> bool:
        if v == w:
            return False
        if self._adj_sets is not None:
            return w in self._adj_sets[v]
        if self.m > 1 and self.color(v) == self.color(w):
            return False
        return self._close(self.elem(v), self.elem(w))

    def is_simplex(self, vs: Iterable[int]) -> bool:
        """Distinct vertices pairwise joined (degenerate tuples allowed)."""
        s = sorted(set(vs))
        if not all(self.has_vertex(v) for v in s):
            return False
        return all(self.is_edge(a, b) for a, b in itertools.combinations(s, 2))

    # materialized adjacency

    @property
    def materialized(self) -> bool:
        return self._adj is not None

    def materialize(self) -> None:
        if self._adj is not None:
            return
        n = self.n_elements
        near: list[list[int]] = []
        for u in range(n):
            near.append([w for w in self.ball.neighborhood(u, self.d) if w < n and w != u])
        if self.m == 1:
            adj = near
        else:
            m = self.m
            adj = []
            for u in range(n):
                elems = sorted(near[u] + [u])
                for c in range(m):
                    adj.append([w * m + c2 for w in elems for c2 in range(m) if c2 != c])
        self._adj = adj
        self._adj_sets = [set(a) for a in adj]

    def neighbors(self, v: int) -> list[int]:
        if self._adj is None:
            raise RuntimeError("adjacency not materialized for this skeleton")
        return self._adj[v]

    def edges(self) -> Iterator[tuple[int, int]]:
        for v in self.vertices():
            for w in self.neighbors(v):
                if v < w:
                    yield (v, w)

    def triangles(self) -> Iterator[tuple[int, int, int]]:
        """Triangles (u < v < w) by intersecting neighbor sets along edges."""
        sets = self._adj_sets
        for u in self.vertices():
            su = sets[u]
            for v in self.neighbors(u):
                if v <= u:
                    continue
                for w in sorted(su & sets[v]):
                    if w > v:
                        yield (u, v, w)

    def full(self) -> "AnnulusView":
        return AnnulusView(self, -1, self.served)

    def annulus(self, inner: int, outer: int | None = None) -> "AnnulusView":
        return AnnulusView(self, inner, self.served if outer is None else outer)

    def counts(self) -> dict:
        e = sum(1 for _ in self.edges())
        t = sum(1 for _ in self.triangles())
        return {"vertices": len(self.vertices()), "edges": e, "triangles": t}

    def describe(self) -> dict:
        return {"d": self.d, "colors": self.m, "served_radius": self.served, "ball_radius": self.ball.radius}


@dataclass
class AnnulusView:
    """Full subcomplex on vertices whose element distance lies in (inner, outer]."""

    flag = True

    parent: RipsSkeleton
    inner: int
    outer: int
    _verts: list[int] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.outer > self.parent.served:
            raise ValueError("view outer radius exceeds the served radius")

    def has_vertex(self, v: int) -> bool:
        if not self.parent.has_vertex(v):
            return False
        r = self.parent.vertex_dist(v)
        return self.inner < r <= self.outer

    def vertices(self) -> list[int]:
        if self._verts is None:
            p = self.parent
            lo = p.ball.prefix(self.inner) if self.inner >= 0 else 0
            hi = p.ball.prefix(self.outer)
            self._verts = list(range(lo * p.m, hi * p.m))
        return self._verts

    def is_edge(self, v: int, w: int) -> bool:
        return self.has_vertex(v) and self.has_vertex(w) and self.parent.is_edge(v, w)

    def is_simplex(self, vs: Iterable[int]) -> bool:
        vs = list(vs)
        return all(self.has_vertex(v) for v in vs) and self.parent.is_simplex(vs)

    def neighbors(self, v: int) -> list[int]:
        lo, hi = self._bounds()
        return [w for w in self.parent.neighbors(v) if lo <= w < hi]

    def _bounds(self) -> tuple[int, int]:
        p = self.parent
        lo = p.ball.prefix(self.inner) if self.inner >= 0 else 0
        return lo * p.m, p.ball.prefix(self.outer) * p.m

    def edges(self) -> Iterator[tuple[int, int]]:
        for v in self.vertices():
            for w in self.neighbors(v):
                if v < w:
                    yield (v, w)

    def triangles(self) -> Iterator[tuple[int, int, int]]:
        lo, hi = self._bounds()
        sets = self.parent._adj_sets
        for u in self.vertices():
            su = sets[u]
            for v in self.neighbors(u):
                if v <= u:
                    continue
                for w in sorted(su & sets[v]):
                    if v < w < hi:
                        yield (u, v, w)

    def contains_view(self, other: "AnnulusView") -> bool:
        return other.parent is self.parent and self.inner <= other.inner and other.outer <= self.outer

    def describe(self) -> dict:
        return {"inner": self.inner, "outer": self.outer, **self.parent.describe()}


def build_rips(ball: Ball, d: int, m: int = 1, served: int | None = None, materialize: bool = True) -> RipsSkeleton:
    return RipsSkeleton(ball, d, m, served, materialize)


def rescale_edge_path(ball: Ball, u: int, v: int, d: int, D: int) -> tuple[list[int], list[tuple[int, int, int]]] | None:
    """Subdivide an edge of P_D along a geodesic witness into steps of length <= d.

    Returns the path ``[u, ..., v]`` (at most D/d + 1 steps) and the triangle
    fan ``{u, p_j, p_j+1}`` in P_D bounded by the edge and the path, or
    ``None`` when the geodesic leaves the ball.
    """
    if d > D:
        raise ValueError("need d <= D")
    rel = ball.relative(u, v)
    if rel < 0:
        return None
    w = ball.word(rel)
    if len(w) > D:
        raise ValueError("not an edge of P_D")
    path = [u]
    for k in range(d, len(w), d):
        p = ball.locate(w[:k], u)
        if p < 0:
            return None
        path.append(p)
    if v != u:
        path.append(v)
    fan = [(u, path[j], path[j + 1]) for j in range(1, len(path) - 1)]
    return path, fan


def check_free_action(skel: RipsSkeleton, support_radius: int | None = None) -> dict:
    """Look for a nontrivial g fixing a vertex, edge or triangle setwise.

    Every simplex with all elements within ``support_radius`` (default: the
    whole served ball when the group is finite, else served - d) is tested
    against each candidate g sending its first vertex to a same-colored vertex.
    """
    ball = skel.ball
    if support_radius is None:
        support_radius = skel.served if ball.exhausted else skel.served - skel.d
    limit = ball.prefix(support_radius) * skel.m
    checked = {"vertices": 0, "edges": 0, "triangles": 0}
    tested = 0

    def act(g: int, v: int) -> int:
        e = ball.translate(g, skel.elem(v))
        return -1 if e < 0 else skel.vid(e, skel.color(v))

    def fixer(simplex: Sequence[int]):
        nonlocal tested
        v0 = simplex[0]
        inv0 = ball.inverse_of(skel.elem(v0))
        target = set(simplex)
        for w in simplex:
            if skel.color(w) != skel.color(v0):
                continue
            g = ball.translate(skel.elem(w), inv0)
            if g <= 0:
                continue
            tested += 1
            if {act(g, x) for x in simplex} == target:
                return g
        return None

    def report(g, simplex):
        return {
            "free": False,
            "checked": checked,
            "candidates_tested": tested,
            "witness": {
                "g": ball.engine.presentation.format(ball.word(g)),
                "g_index": g,
                "simplex": list(simplex),
                "elements": [ball.engine.presentation.format(ball.word(skel.elem(v))) for v in simplex],
                "colors": [skel.color(v) for v in simplex],
            },
        }

    skel.materialize()
    for v in range(limit):
        checked["vertices"] += 1
        g = fixer((v,))
        if g is not None:
            return report(g, (v,))
    for u, v in skel.edges():
        if v < limit:
            checked["edges"] += 1
            g = fixer((u, v))
            if g is not None:
                return report(g, (u, v))
    for u, v, w in skel.triangles():
        if w < limit:
            checked["triangles"] += 1
            g = fixer((u, v, w))
            if g is not None:
                return report(g, (u, v, w))
    return {"free": True, "checked": checked, "candidates_tested": tested, "witness": None}


def export_text(skel: RipsSkeleton) -> str:
    """Line-oriented export: ``v id dist color``, ``e i j``, ``t i j k``."""
    out = []
    for v in skel.vertices():
        out.append(f"v {v} {skel.vertex_dist(v)} {skel.color(v)}")
    for u, v in skel.edges():
        out.append(f"e {u} {v}")
    for u, v, w in skel.triangles():
        out.append(f"t {u} {v} {w}")
    return "\n".join(out) + "\n"


class PreconditionError(ValueError):
    pass


def relator_loops(skel: RipsSkeleton) -> list[tuple[int, ...]]:
    """Each relator traced from the identity, as a loop of unit steps."""
    ball = skel.ball
    out = []
    for rel in ball.engine.presentation.relators:
        poly = [0]
        for x in rel[:-1]:
            poly.append(ball.locate((x,), poly[-1]))
        if min(poly) < 0:
            raise PreconditionError("relator loop leaves the ball")
        out.append(normalize_loop(skel.vid(v) for v in poly))
    return out


def interpolate_moves(skel: RipsSkeleton, loop: Sequence[int]) -> tuple[list, list[int]] | None:
    """Expand every edge of length k >= 2 along its geodesic witness.

    Each inserted vertex uses the triangle {x, p_j, p_j+1} (pairwise <= k <= d).
    Returns the moves and the resulting unit-step loop, or ``None`` if a
    geodesic leaves the served ball.
    """
    ball = skel.ball
    L = list(loop)
    moves = []
    i = 0
    while i < len(L):
        x, y = L[i], L[(i + 1) % len(L)]
        rel = ball.relative(x, y)
        w = ball.word(rel) if rel >= 0 else None
        if w is None:
            return None
        pts = []
        for k in range(1, len(w)):
            p = ball.locate(w[:k], x)
            if p < 0 or p >= skel.n_elements:
                return None
            pts.append(p)
        for p in reversed(pts):
            moves.append(("expand", i, p))
            L.insert(i + 1, p)
        i += len(pts) + 1
    return moves, L


def certify_simply_connected(
    skel: RipsSkeleton,
    loops: Sequence[Sequence[int]] | None = None,
    n_random: int = 200,
    max_length: int = 12,
    seed: int = 0,
    budget: int = 10**6,
    region_radius: int | None = None,
) -> dict:
    """Fill relator loops and seeded random loops, replaying every trace.

    Plain complexes: interpolate each loop to unit steps, then contract the
    Cayley loop through relator cells inside the served ball (each cell is a
    simplex of P_d once 2d exceeds the longest relator).  Colored complexes
    use the triangle closure of the materialized skeleton.
    """
    ball = skel.ball
    pres = ball.engine.presentation
    r = pres.max_relator_length
    if 2 * skel.d <= r:
        raise PreconditionError(f"simple connectivity needs 2d > r: d={skel.d}, longest relator r={r}")
    if region_radius is None:
        region_radius = max(0, skel.served - (skel.d + 1) // 2)
    rng = random.Random(seed)
    sample: list[tuple[str, tuple[int, ...]]] = []
    if loops is None:
        for k, L in enumerate(relator_loops(skel)):
            if skel.m > 1:
                L = tuple(skel.vid(skel.elem(v), j % skel.m) for j, v in enumerate(L))
                if len(L) > 1 and skel.color(L[0]) == skel.color(L[-1]):
                    L = L[:-1] + (skel.vid(skel.elem(L[-1]), (skel.color(L[-1]) + 1) % skel.m),)
            sample.append((f"relator{k}", L))
        for k in range(n_random):
            sample.append((f"random{k}", random_loop(rng, skel, region_radius, max_length)))
    else:
        for k, L in enumerate(loops):
            sample.append((f"loop{k}", tuple(L)))

    closure = None
    if skel.m == 1:
        closure = CellClosure(ball, skel.served)
    else:
        closure = Closure(skel)
    results = []
    counts = {"filled": 0, "inconclusive": 0}
    for name, L in sample:
        entry: dict = {"name": name, "loop": list(L), "length": len(L)}
        moves = None
        conj = []
        if skel.m == 1:
            got = interpolate_moves(skel, L)
            if got is not None:
                pre, unit = got
                tr = trace_from_closure(unit, closure, max_moves=budget)
                if tr is not None:
                    moves = pre + tr[0]
                    for u, v in tr[1]:
                        g, ri, _ = closure.cell_of(u, v)
                        conj.append({"conjugator": pres.format(ball.word(g)), "relator": ri})
        else:
            tr = trace_from_closure(L, closure, max_moves=budget)
            if tr is not None:
                moves = tr[0]
        method = "relator-cells" if skel.m == 1 else "closure"
        states = 0
        if moves is None and skel.materialized:
            moves, states = search_filling(L, skel, budget)
            method = "search"
        if moves is None:
            entry["status"] = "inconclusive"
            counts["inconclusive"] += 1
        else:
            try:
                replay(L, moves, skel)
            except ReplayError as exc:
                entry["status"] = "replay-failed"
                entry["error"] = str(exc)
                counts["replay-failed"] = counts.get("replay-failed", 0) + 1
            else:
                entry["status"] = "filled"
                counts["filled"] += 1
            entry["moves"] = [list(m) for m in moves]
            entry["move_count"] = len(moves)
            entry["method"] = method
            if conj:
                entry["relator_conjugates"] = conj
            if states:
                entry["states"] = states
        results.append(entry)
    return {
        "schema": "scirate.certify/1",
        "group": pres.to_text(),
        "d": skel.d,
        "colors": skel.m,
        "max_relator_length": r,
        "served_radius": skel.served,
        "region_radius": region_radius,
        "seed": seed,
        "budget_states": budget,
        "counts": counts,
        "all_filled": counts["filled"] == len(sample),
        "loops": results,
        "truncation": f"relative to truncation B({skel.served})",
    }
