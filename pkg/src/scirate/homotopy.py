"""Simplicial loops, disk fillings as move traces, and filling search.

A loop is a cyclic tuple of vertex ids, consecutive ones equal or joined by
an edge (simplicial maps may be degenerate); a constant loop is trivial.
A filling is a list of moves:

* ``("spur", i)``: ``L[i] == L[i+2]``, drop ``L[i+1]`` and ``L[i+2]``;
* ``("collapse", i)``: ``{L[i], L[i+1], L[i+2]}`` is a simplex, drop ``L[i+1]``;
* ``("expand", i, y)``: ``{L[i], y, L[i+1]}`` is a simplex, insert ``y`` after ``L[i]``.

Indices are cyclic; simplices are vertex *sets*, so repeated vertices are
allowed.  Searches emit nondegenerate traces ending at a single vertex.  :func:`replay` checks a trace against any complex that
offers ``has_vertex`` and ``is_simplex``.

Searches start from an edge *closure*: a spanning forest of the complex, then
every edge whose fundamental cycle is forced trivial by a 2-cell whose other
edges are already known.  Walking a loop through those derivations and
cancelling backtracks yields a move trace.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .presentations import Presentation, cyclic_reduce

__all__ = [
    "Move",
    "normalize_loop",
    "apply_move",
    "replay",
    "ReplayError",
    "Closure",
    "CellClosure",
    "trace_from_closure",
    "FillResult",
    "fill_loop",
    "search_filling",
    "pi1_presentation",
    "fundamental_cycle",
    "random_loop",
    "loop_in",
]

Move = tuple


class ReplayError(ValueError):
    pass


def normalize_loop(loop: Iterable[int]) -> tuple[int, ...]:
    """Drop cyclically repeated consecutive vertices (a reparametrization)."""
    out: list[int] = []
    for v in loop:
        if not out or out[-1] != v:
            out.append(v)
    while len(out) > 1 and out[-1] == out[0]:
        out.pop()
    return tuple(out)


def loop_in(loop: Sequence[int], complex_) -> bool:
    n = len(loop)
    if n == 0 or not all(complex_.has_vertex(v) for v in loop):
        return False
    if n == 1:
        return True
    return all(complex_.is_simplex((loop[i], loop[(i + 1) % n])) for i in range(n))


def apply_move(loop: list[int], move: Move) -> list[int]:
    """Apply one move without checking simplices (callers validate)."""
    n = len(loop)
    kind, i = move[0], move[1]
    if not 0 <= i < n:
        raise ReplayError(f"move index {i} out of range for loop of length {n}")
    if kind == "spur":
        if n == 2:
            return [loop[i]]
        if n < 2 or loop[i] != loop[(i + 2) % n]:
            raise ReplayError(f"no spur at {i}")
        drop = {(i + 1) % n, (i + 2) % n}
        return [v for k, v in enumerate(loop) if k not in drop]
    if kind == "collapse":
        if n < 3:
            raise ReplayError("collapse needs length >= 3")
        j = (i + 1) % n
        return loop[:j] + loop[j + 1:]
    if kind == "expand":
        return loop[:i + 1] + [move[2]] + loop[i + 1:]
    raise ReplayError(f"unknown move {kind!r}")


def replay(loop: Sequence[int], moves: Sequence[Move], complex_) -> None:
    """Independent checker: raises :class:`ReplayError` unless the moves
    take ``loop`` to a trivial loop through simplices of ``complex_``."""
    cur = list(loop)
    if not loop_in(cur, complex_):
        raise ReplayError("input loop does not lie in the complex")
    for step, mv in enumerate(moves):
        n = len(cur)
        kind, i = mv[0], mv[1]
        if not 0 <= i < n:
            raise ReplayError(f"step {step}: index {i} out of range")
        a, b = cur[i], cur[(i + 1) % n]
        if kind == "spur":
            if n != 2 and cur[i] != cur[(i + 2) % n]:
                raise ReplayError(f"step {step}: no spur at {i}")
        elif kind == "collapse":
            c = cur[(i + 2) % n]
            if n < 3 or not complex_.is_simplex((a, b, c)):
                raise ReplayError(f"step {step}: {(a, b, c)} is not a simplex")
        elif kind == "expand":
            y = mv[2]
            if not complex_.has_vertex(y) or not complex_.is_simplex((a, y, b)):
                raise ReplayError(f"step {step}: {(a, y, b)} is not a simplex")
        else:
            raise ReplayError(f"step {step}: unknown move {kind!r}")
        cur = apply_move(cur, mv)
    if len(set(cur)) != 1:
        raise ReplayError(f"final loop {cur[:8]}... is not constant")


def apexes(view, common, u: int, v: int) -> list[int]:
    """Vertices of ``common`` spanning a triangle with edge ``(u, v)``.
    Flag complexes (Rips views) need no check; others are asked."""
    if getattr(view, "flag", False):
        return sorted(common)
    return sorted(w for w in common if view.is_simplex((u, v, w)))


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class Closure:
    """Spanning forest plus triangle-derived edges of a materialized complex.

    ``reason[e]`` is ``None`` for forest edges and otherwise the apex ``w``
    of the triangle ``{u, v, w}`` whose other two edges were known first.
    """

    def __init__(self, view, vertices: Iterable[int] | None = None):
        self.view = view
        verts = list(view.vertices() if vertices is None else vertices)
        self.vertex_set = set(verts)
        self.nb: dict[int, set[int]] = {v: set(view.neighbors(v)) & self.vertex_set if vertices is not None else set(view.neighbors(v)) for v in verts}
        self.parent: dict[int, int] = {}
        self.root: dict[int, int] = {}
        self.depth: dict[int, int] = {}
        self.reason: dict[tuple[int, int], int | None] = {}
        self.order: list[tuple[int, int, int]] = []
        self._forest(verts)
        self._propagate()

    def _forest(self, verts):
        for s in verts:
            if s in self.root:
                continue
            self.root[s] = s
            self.parent[s] = s
            self.depth[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for w in sorted(self.nb[u]):
                    if w not in self.root:
                        self.root[w] = s
                        self.parent[w] = u
                        self.depth[w] = self.depth[u] + 1
                        self.reason[_key(u, w)] = None
                        q.append(w)

    def _propagate(self):
        known = self.reason
        nb = self.nb
        q = deque(sorted(known))
        while q:
            u, v = q.popleft()
            for w in apexes(self.view, nb[u] & nb[v], u, v):
                k1, k2 = _key(u, w), _key(v, w)
                if k1 in known:
                    if k2 not in known:
                        known[k2] = u
                        self.order.append((k2[0], k2[1], u))
                        q.append(k2)
                elif k2 in known:
                    known[k1] = v
                    self.order.append((k1[0], k1[1], v))
                    q.append(k1)

    def is_tree(self, u: int, v: int) -> bool:
        return self.parent.get(u) == v or self.parent.get(v) == u

    def known(self, u: int, v: int) -> bool:
        return _key(u, v) in self.reason

    def path(self, u: int, v: int) -> tuple[int, ...]:
        """Intermediate vertices of the path that replaces the edge u -> v."""
        return (self.reason[_key(u, v)],)

    def unknown_edges(self) -> list[tuple[int, int]]:
        out = []
        for u in sorted(self.nb):
            for w in self.nb[u]:
                if u < w and (u, w) not in self.reason:
                    out.append((u, w))
        out.sort()
        return out

    def tree_path(self, x: int) -> list[int]:
        """Forest path from the root of x's component to x."""
        out = [x]
        while self.parent[x] != x:
            x = self.parent[x]
            out.append(x)
        out.reverse()
        return out

    def certificate(self) -> dict:
        forest = sorted(k for k, r in self.reason.items() if r is None)
        return {"forest": [list(e) for e in forest], "derived": [list(t) for t in self.order]}


def verify_closure_certificate(cert: dict, complex_) -> set[tuple[int, int]]:
    """Check a closure certificate; returns the set of certified edges.

    The forest must be acyclic and made of complex edges; each derived edge
    must close a complex triangle whose other two edges were certified earlier.
    """
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    known: set[tuple[int, int]] = set()
    for u, v in cert["forest"]:
        if not complex_.is_simplex((u, v)) or u == v:
            raise ReplayError(f"forest edge {(u, v)} is not an edge")
        ru, rv = find(u), find(v)
        if ru == rv:
            raise ReplayError(f"forest edge {(u, v)} closes a cycle")
        parent[ru] = rv
        known.add(_key(u, v))
    for u, v, w in cert["derived"]:
        if _key(u, w) not in known or _key(v, w) not in known:
            raise ReplayError(f"derived edge {(u, v)} cites unknown edges")
        if not complex_.is_simplex((u, v, w)):
            raise ReplayError(f"derived edge {(u, v)} cites non-triangle {(u, v, w)}")
        known.add(_key(u, v))
    return known


class CellClosure:
    """Closure of the Cayley 2-complex inside a ball, using relator cells.

    Vertices are ball indices with distance <= ``radius``; the forest is the
    BFS parent tree; a relator cell whose edges are all known but one makes
    that edge known, the rest of the cell boundary being its replacement path.
    """

    def __init__(self, ball, radius: int | None = None):
        self.ball = ball
        self.radius = ball.radius if radius is None else radius
        n = ball.prefix(self.radius)
        self.n = n
        self.parent = {i: ball.parent[i] for i in range(n)}
        self.reason: dict[tuple[int, int], tuple[int, ...] | None] = {}
        self.cells: list[tuple[int, int, tuple[int, ...]]] = []
        self.used_cells: dict[tuple[int, int], int] = {}
        for i in range(1, n):
            self.reason[_key(i, ball.parent[i])] = None
        self._build_cells()
        self._propagate()

    def _build_cells(self):
        ball, n = self.ball, self.n
        rels = ball.engine.presentation.relators
        slot = ball._slot
        for g in range(n):
            for ri, rel in enumerate(rels):
                poly = [g]
                cur = g
                ok = True
                for x in rel[:-1]:
                    cur = ball.nbr[cur][slot[x]]
                    if cur < 0 or cur >= n:
                        ok = False
                        break
                    poly.append(cur)
                if ok and len(set(poly)) == len(poly):
                    self.cells.append((g, ri, tuple(poly)))

    def _propagate(self):
        known = self.reason
        edge_cells: dict[tuple[int, int], list[int]] = {}
        missing = []
        for c, (_, _, poly) in enumerate(self.cells):
            k = len(poly)
            cnt = 0
            for j in range(k):
                e = _key(poly[j], poly[(j + 1) % k])
                edge_cells.setdefault(e, []).append(c)
                if e not in known:
                    cnt += 1
            missing.append(cnt)
        q = deque(c for c in range(len(self.cells)) if missing[c] == 1)
        while q:
            c = q.popleft()
            _, _, poly = self.cells[c]
            k = len(poly)
            target = None
            for j in range(k):
                if _key(poly[j], poly[(j + 1) % k]) not in known:
                    target = j
                    break
            if target is None:
                continue
            a, b = poly[target], poly[(target + 1) % k]
            # replacement for a -> b walks the rest of the cell backwards
            rest = tuple(poly[(target - s) % k] for s in range(1, k - 1))
            e = _key(a, b)
            known[e] = rest if a < b else tuple(reversed(rest))
            self.used_cells[e] = c
            for c2 in edge_cells[e]:
                missing[c2] -= 1
                if missing[c2] == 1:
                    q.append(c2)

    def is_tree(self, u: int, v: int) -> bool:
        return self.parent.get(u) == v or self.parent.get(v) == u

    def known(self, u: int, v: int) -> bool:
        return _key(u, v) in self.reason

    def path(self, u: int, v: int) -> tuple[int, ...]:
        p = self.reason[_key(u, v)]
        return p if u < v else tuple(reversed(p))

    def cell_of(self, u: int, v: int) -> tuple[int, int, tuple[int, ...]]:
        return self.cells[self.used_cells[_key(u, v)]]


def trace_from_closure(loop: Sequence[int], closure, max_moves: int = 10**6) -> tuple[list[Move], list] | None:
    """Moves contracting ``loop`` through the closure's derivations.

    Returns ``(moves, expansions)`` where ``expansions`` lists the derived
    edges expanded in order, or ``None`` if some edge is not known or the
    move budget runs out.
    """
    L = list(normalize_loop(loop))
    moves: list[Move] = []
    expansions = []
    if len(L) == 1:
        return moves, expansions
    p = 0
    while True:
        n = len(L)
        if n == 1:
            return moves, expansions
        if len(moves) > max_moves:
            return None
        if p >= n - 1:
            # everything but the closing edge is a reduced forest path
            u, v = L[n - 1], L[0]
            if closure.is_tree(u, v):
                if n == 2:
                    moves.append(("spur", 0))
                    return moves, expansions
                if L[n - 2] == v:
                    moves.append(("spur", n - 2))
                    L = apply_move(L, ("spur", n - 2))
                    # removed L[n-1] and L[0]; the new loop starts at the old L[1]
                    p = max(0, p - 2)
                    continue
                return None
            if not closure.known(u, v):
                return None
            expansions.append((u, v))
            for y in reversed(closure.path(u, v)):
                moves.append(("expand", n - 1, y))
                L.insert(n, y)
            p = n - 1
            continue
        u, v = L[p], L[p + 1]
        if closure.is_tree(u, v):
            if p >= 1 and L[p - 1] == v:
                moves.append(("spur", p - 1))
                del L[p:p + 2]
                p -= 1
            else:
                p += 1
            continue
        if not closure.known(u, v):
            return None
        expansions.append((u, v))
        for y in reversed(closure.path(u, v)):
            moves.append(("expand", p, y))
            L.insert(p + 1, y)


@dataclass
class FillResult:
    status: str  # "filled", "obstructed", "inconclusive"
    loop: tuple[int, ...]
    moves: list[Move] | None = None
    certificate: dict | None = None
    states: int = 0
    method: str = ""
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"status": self.status, "loop": list(self.loop), "method": self.method, "states": self.states}
        if self.moves is not None:
            out["moves"] = [list(m) for m in self.moves]
            out["move_count"] = len(self.moves)
        if self.certificate is not None:
            out["certificate"] = self.certificate
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _canonical_rotation(loop: tuple[int, ...]) -> tuple[int, ...]:
    n = len(loop)
    m = min(loop)
    best = None
    for i in range(n):
        if loop[i] == m:
            r = loop[i:] + loop[:i]
            if best is None or r < best:
                best = r
    return best


def search_filling(loop: Sequence[int], view, budget: int = 10**6) -> tuple[list[Move] | None, int]:
    """Best-first search over loop states (shorter first), deduplicated by rotation.

    Spurs are applied greedily; a state's successors are collapses and
    slides (replace a vertex by a common neighbor of it and its two
    neighbors).  Returns ``(moves or None, states expanded)``.
    """
    start = list(normalize_loop(loop))
    flag = getattr(view, "flag", False)

    def greedy(L, moves):
        changed = True
        while changed and len(L) > 1:
            changed = False
            n = len(L)
            for i in range(n):
                if n == 2 or L[i] == L[(i + 2) % n]:
                    moves.append(("spur", i))
                    L = apply_move(L, ("spur", i))
                    changed = True
                    break
        return L

    moves0: list[Move] = []
    start = greedy(start, moves0)
    if len(start) == 1:
        return moves0, 1
    seen = {_canonical_rotation(tuple(start)): None}
    back: dict[tuple, tuple[tuple | None, list[Move]]] = {tuple(start): (None, moves0)}
    heap = [(len(start), 0, tuple(start))]
    counter = 1
    expanded = 0
    while heap and expanded < budget:
        _, _, state = heapq.heappop(heap)
        expanded += 1
        L = list(state)
        n = len(L)
        succ = []
        for i in range(n):
            a, x, b = L[i], L[(i + 1) % n], L[(i + 2) % n]
            if n >= 3 and a != b and view.is_simplex((a, x, b)):
                succ.append([("collapse", i)])
            if n >= 3:
                common = set(view.neighbors(a)) & set(view.neighbors(x)) & set(view.neighbors(b))
                for y in sorted(common - {a, x, b}):
                    if not flag and not (view.is_simplex((a, y, x)) and view.is_simplex((y, x, b))):
                        continue
                    succ.append([("expand", i, y), ("collapse", (i + 1) % (n + 1))])
        for mv in succ:
            cur = L
            ms = list(mv)
            for m in mv:
                cur = apply_move(cur, m)
            cur = greedy(cur, ms)
            t = tuple(cur)
            if len(cur) == 1:
                back[t] = (state, ms)
                path: list[Move] = []
                s = t
                while s is not None:
                    prev, m2 = back[s]
                    path[:0] = m2
                    s = prev
                return path, expanded
            key = _canonical_rotation(t)
            if key in seen:
                continue
            seen[key] = None
            back[t] = (state, ms)
            counter += 1
            heapq.heappush(heap, (len(cur), counter, t))
    return None, expanded


def fill_loop(
    loop: Sequence[int],
    view,
    budget: int = 10**6,
    closure=None,
    homology=None,
) -> FillResult:
    """Try to bound ``loop`` by a disk in ``view``.

    Order: closure-derived trace; homology obstruction (when ``homology``,
    an :class:`scirate.homology.ViewHomology` of ``view``, is given); then
    best-first loop-state search within ``budget`` states.
    """
    L = normalize_loop(loop)
    if not loop_in(L, view):
        raise ValueError("loop does not lie in the ambient complex")
    if len(L) == 1:
        return FillResult("filled", L, [], method="trivial")
    if closure is None and getattr(view, "parent", view).materialized:
        closure = Closure(view)
    if closure is not None:
        got = trace_from_closure(L, closure, max_moves=budget)
        if got is not None:
            moves, _ = got
            replay(L, moves, view)
            return FillResult("filled", L, moves, method="closure")
    if homology is not None:
        cert = homology.obstruction(L)
        if cert is not None:
            return FillResult("obstructed", L, certificate=cert, method="h1")
    moves, states = search_filling(L, view, budget)
    if moves is not None:
        replay(L, moves, view)
        return FillResult("filled", L, moves, states=states, method="search")
    return FillResult("inconclusive", L, states=states, method="search", notes=[f"budget {budget} states exhausted"])


def fundamental_cycle(closure: Closure, u: int, v: int) -> tuple[int, ...]:
    """Loop: forest path root -> u, edge u -> v, forest path v -> root."""
    a = closure.tree_path(u)
    b = closure.tree_path(v)
    return normalize_loop(a + list(reversed(b))[:-1]) if len(b) > 1 else normalize_loop(a)


def pi1_presentation(view, basepoint: int) -> tuple[Presentation, list[tuple[int, int]]]:
    """Spanning-tree presentation of pi_1 of the basepoint's component.

    Generators are the non-tree edges (oriented from smaller id); relators
    are triangle boundaries with tree edges deleted.  Returns the
    presentation and the edge of each generator.
    """
    if not view.has_vertex(basepoint):
        raise ValueError("basepoint not in view")
    parent = {basepoint: basepoint}
    q = deque([basepoint])
    comp = [basepoint]
    while q:
        u = q.popleft()
        for w in sorted(view.neighbors(u)):
            if w not in parent:
                parent[w] = u
                comp.append(w)
                q.append(w)
    tree = {_key(w, p) for w, p in parent.items() if w != p}
    comp_set = set(comp)
    gens: list[tuple[int, int]] = []
    gid: dict[tuple[int, int], int] = {}
    for u in sorted(comp_set):
        for w in sorted(view.neighbors(u)):
            if u < w and (u, w) not in tree:
                gid[(u, w)] = len(gens)
                gens.append((u, w))

    def letter(a, b):
        k = _key(a, b)
        if k in tree:
            return ()
        g = gid[k] + 1
        return (g,) if a < b else (-g,)

    rels = []
    for u in sorted(comp_set):
        su = set(view.neighbors(u))
        for v in sorted(view.neighbors(u)):
            if v <= u:
                continue
            for w in apexes(view, su & set(view.neighbors(v)), u, v):
                if w > v:
                    word = cyclic_reduce(letter(u, v) + letter(v, w) + letter(w, u))
                    if word:
                        rels.append(word)
    names = [f"e{i}" for i in range(len(gens))]
    return Presentation.from_names(names, rels), gens


def random_loop(
    rng: random.Random,
    skel,
    region_radius: int,
    max_length: int = 12,
    min_length: int = 3,
    color: int | None = None,
) -> tuple[int, ...]:
    """Seeded random closed walk in P_d inside B(region_radius).

    A random walk whose steps are random offsets of length <= d, closed by a
    geodesic subdivided into steps of length <= d.
    """
    ball = skel.ball
    d = skel.d
    region = ball.prefix(region_radius)
    offsets = ball.prefix(d)
    for _ in range(10000):
        start = rng.randrange(region)
        walk_len = rng.randint(max(1, min_length - 1), max_length - 1)
        walk = [start]
        cur = start
        while len(walk) < walk_len:
            h = rng.randrange(1, offsets)
            nxt = ball.translate(cur, h)
            if 0 <= nxt < region:
                walk.append(nxt)
                cur = nxt
        rel = ball.relative(cur, start)
        if rel < 0:
            continue
        w = ball.word(rel)
        back = []
        for k in range(d, len(w), d):
            p = ball.locate(w[:k], cur)
            back.append(p)
        if any(p < 0 or p >= region for p in back):
            continue
        loop = normalize_loop(walk + back)
        if min_length <= len(loop) <= max_length:
            if skel.m > 1:
                cols = [rng.randrange(skel.m) if color is None else color for _ in loop]
                for i in range(len(cols)):
                    if cols[i] == cols[i - 1] and len(cols) > 1:
                        cols[i] = (cols[i - 1] + 1) % skel.m
                if len(cols) > 1 and cols[0] == cols[-1]:
                    continue
                loop = tuple(skel.vid(e, c) for e, c in zip(loop, cols))
            return loop
    raise RuntimeError("could not sample a loop in the region")
