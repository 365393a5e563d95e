"""Integer first homology of Rips views, inclusion maps, and cocycle certificates.

H1 of a view is computed on the edges the closure leaves unknown: every
forest or closure-derived edge is null-homologous, so the chain complex
reduces to the unknown edges with one relation per triangle that touches
them.  Unit pivots are eliminated sparsely; what remains goes through a
dense Smith normal form that tracks its column transform, so every edge
gets a class vector in the invariant-factor basis.

An obstruction certificate is an integer 1-cocycle (mod ``m``) on the view:
its values on the edges of any triangle sum to zero, so it vanishes on every
loop that bounds a disk in the view.  Certificates are checked by
:func:`verify_cocycle`, which only looks at the complex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .homotopy import Closure, apexes, normalize_loop
from .presentations import Presentation

__all__ = [
    "smith_normal_form",
    "ViewHomology",
    "H1Map",
    "h1_map",
    "verify_cocycle",
    "abelian_invariants",
    "CertificateError",
]


class CertificateError(ValueError):
    pass


def smith_normal_form(rows: Sequence[Sequence[int]], ncols: int):
    """Return ``(diag, Q, Qinv)`` with ``P A Q`` diagonal for some unimodular P.

    ``diag`` lists the nonzero invariant factors (each divides the next);
    columns ``len(diag):`` of the diagonal form are zero.
    """
    A = [list(r) for r in rows]
    m, n = len(A), ncols
    Q = [[int(i == j) for j in range(n)] for i in range(n)]
    Qi = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_cols(a, b):
        if a == b:
            return
        for row in A:
            row[a], row[b] = row[b], row[a]
        for row in Q:
            row[a], row[b] = row[b], row[a]
        Qi[a], Qi[b] = Qi[b], Qi[a]

    def add_col(dst, src, q):
        # col_dst += q * col_src
        if q == 0:
            return
        for row in A:
            if row[src]:
                row[dst] += q * row[src]
        for row in Q:
            if row[src]:
                row[dst] += q * row[src]
        rs, rd = Qi[src], Qi[dst]
        for k in range(n):
            if rd[k]:
                rs[k] -= q * rd[k]

    diag = []
    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            row = A[i]
            for j in range(t, n):
                x = row[j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        A[t], A[i] = A[i], A[t]
        swap_cols(t, j)
        while True:
            p = A[t][t]
            dirty = False
            for i in range(t + 1, m):
                x = A[i][t]
                if x:
                    q = x // p
                    if q:
                        ri, rt = A[i], A[t]
                        for k in range(t, n):
                            if rt[k]:
                                ri[k] -= q * rt[k]
                    if A[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                x = A[t][j]
                if x:
                    add_col(j, t, -(x // p))
                    if A[t][j]:
                        dirty = True
            if dirty:
                best = None
                for i in range(t, m):
                    x = A[i][t]
                    if x and (best is None or abs(x) < best[0]):
                        best = (abs(x), i, None)
                for j in range(t, n):
                    x = A[t][j]
                    if x and (best is None or abs(x) < best[0]):
                        best = (abs(x), None, j)
                _, i, j = best
                if i is not None:
                    A[t], A[i] = A[i], A[t]
                else:
                    swap_cols(t, j)
                continue
            bad = None
            for i in range(t + 1, m):
                if any(x % p for x in A[i][t + 1:]):
                    bad = i
                    break
            if bad is None:
                break
            rt, rb = A[t], A[bad]
            for k in range(t, n):
                rt[k] += rb[k]
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
        diag.append(A[t][t])
        t += 1
    return diag, Q, Qi


def abelian_invariants(p: Presentation) -> tuple[int, list[int]]:
    """Free rank and torsion coefficients of the abelianization of ``p``."""
    rows = []
    for r in p.relators:
        row = [0] * p.rank
        for x in r:
            row[abs(x) - 1] += 1 if x > 0 else -1
        if any(row):
            rows.append(row)
    diag, _, _ = smith_normal_form(rows, p.rank)
    return p.rank - len(diag), [x for x in diag if x > 1]


class ViewHomology:
    """H1(view; Z) with class vectors for every edge.

    ``invariants`` lists one entry per nontrivial coordinate: 0 for a free
    summand, ``k > 1`` for a ``Z/k`` summand.
    """

    def __init__(self, view, closure: Closure | None = None):
        self.view = view
        self.closure = closure if closure is not None else Closure(view)
        self.unknown = self.closure.unknown_edges()
        self.gen_of = {e: i for i, e in enumerate(self.unknown)}
        self._eliminate()
        self._smith()

    # chain-level reduction

    def _relations(self):
        nb = self.closure.nb
        seen = set()
        for u, v in self.unknown:
            for w in apexes(self.view, nb[u] & nb[v], u, v):
                tri = tuple(sorted((u, v, w)))
                if tri in seen:
                    continue
                seen.add(tri)
                a, b, c = tri
                row: dict[int, int] = {}
                for (x, y), s in (((a, b), 1), ((b, c), 1), ((a, c), -1)):
                    g = self.gen_of.get((x, y))
                    if g is not None:
                        row[g] = row.get(g, 0) + s
                row = {g: c for g, c in row.items() if c}
                if row:
                    yield row

    def _eliminate(self):
        expr: dict[int, dict[int, int]] = {}
        deps: dict[int, set[int]] = {}
        hard: dict[int, dict[int, int]] = {}
        hard_deps: dict[int, set[int]] = {}
        next_id = 0

        def substitute(row):
            out: dict[int, int] = {}
            for g, c in row.items():
                e = expr.get(g)
                if e is None:
                    out[g] = out.get(g, 0) + c
                else:
                    for h, c2 in e.items():
                        out[h] = out.get(h, 0) + c * c2
            return {g: c for g, c in out.items() if c}

        def unlink(table, index, key, row):
            for g in row:
                s = index.get(g)
                if s is not None:
                    s.discard(key)

        def link(index, key, row):
            for g in row:
                index.setdefault(g, set()).add(key)

        queue = list(self._relations())
        queue.reverse()
        self.n_relations = len(queue)
        while queue:
            row = substitute(queue.pop())
            if not row:
                continue
            pivot = None
            for g in sorted(row):
                if abs(row[g]) == 1:
                    pivot = g
                    break
            if pivot is None:
                hard[next_id] = row
                link(hard_deps, next_id, row)
                next_id += 1
                continue
            cp = row[pivot]
            # pivot = -cp * (rest), since cp = +-1
            e = {g: -cp * c for g, c in row.items() if g != pivot}
            expr[pivot] = e
            link(deps, pivot, e)
            for g in list(deps.get(pivot, ())):
                if g == pivot:
                    continue
                old = expr[g]
                unlink(expr, deps, g, old)
                new = substitute(old)
                expr[g] = new
                link(deps, g, new)
            deps.pop(pivot, None)
            for h in list(hard_deps.get(pivot, ())):
                old = hard.pop(h)
                unlink(hard, hard_deps, h, old)
                queue.append(old)
            hard_deps.pop(pivot, None)
        self.expr = expr
        self.survivors = [g for g in range(len(self.unknown)) if g not in expr]
        self.hard_rows = [hard[k] for k in sorted(hard)]

    def _smith(self):
        col = {g: k for k, g in enumerate(self.survivors)}
        n = len(self.survivors)
        rows = []
        for r in self.hard_rows:
            row = [0] * n
            for g, c in r.items():
                row[col[g]] = c
            rows.append(row)
        diag, Q, Qi = smith_normal_form(rows, n)
        full = diag + [0] * (n - len(diag))
        self.coords = [i for i in range(n) if full[i] != 1]
        self.invariants = [full[i] for i in self.coords]
        self._Q = Q
        self._Qi = Qi
        self._col = col
        self._class: dict[int, tuple[int, ...]] = {}
        for g in self.survivors:
            qrow = Q[col[g]]
            self._class[g] = self._reduce([qrow[i] for i in self.coords])

    def _reduce(self, vec) -> tuple[int, ...]:
        return tuple(x % k if k > 1 else x for x, k in zip(vec, self.invariants))

    # public queries

    @property
    def rank(self) -> int:
        return sum(1 for k in self.invariants if k == 0)

    @property
    def torsion(self) -> list[int]:
        return [k for k in self.invariants if k > 1]

    def is_zero(self) -> bool:
        return not self.invariants

    def generator_class(self, g: int) -> tuple[int, ...]:
        c = self._class.get(g)
        if c is None:
            acc = [0] * len(self.invariants)
            for h, k in self.expr[g].items():
                for i, x in enumerate(self._class[h]):
                    acc[i] += k * x
            c = self._reduce(acc)
            self._class[g] = c
        return c

    def edge_class(self, u: int, v: int) -> tuple[int, ...]:
        """Class of the oriented edge u -> v (zero on forest and derived edges)."""
        if u < v:
            g = self.gen_of.get((u, v))
            return self.generator_class(g) if g is not None else self.zero()
        g = self.gen_of.get((v, u))
        return self._reduce([-x for x in self.generator_class(g)]) if g is not None else self.zero()

    def zero(self) -> tuple[int, ...]:
        return (0,) * len(self.invariants)

    def loop_class(self, loop: Sequence[int]) -> tuple[int, ...]:
        L = normalize_loop(loop)
        acc = [0] * len(self.invariants)
        n = len(L)
        if n > 1:
            for i in range(n):
                for k, x in enumerate(self.edge_class(L[i], L[(i + 1) % n])):
                    acc[k] += x
        return self._reduce(acc)

    def basis_cycle(self, i: int) -> dict[int, int]:
        """Chain on generators representing the i-th nontrivial basis class."""
        row = self._Qi[self.coords[i]]
        return {self.survivors[k]: c for k, c in enumerate(row) if c}

    def cocycle(self, i: int) -> dict[tuple[int, int], int]:
        """Values (on edges oriented low -> high) of the i-th coordinate functional."""
        k = self.invariants[i]
        out = {}
        for g, e in enumerate(self.unknown):
            x = self.generator_class(g)[i]
            if k > 1:
                x %= k
            if x:
                out[e] = x
        return out

    def obstruction(self, loop: Sequence[int], extra: dict | None = None) -> dict | None:
        """Cocycle certificate that ``loop`` bounds no disk in the view, or ``None``."""
        c = self.loop_class(loop)
        for i, x in enumerate(c):
            if x:
                cert = make_certificate(self, i, loop, extra)
                verify_cocycle(cert, self.view, loop)
                return cert
        return None

    def summary(self) -> dict:
        return {
            "rank": self.rank,
            "torsion": self.torsion,
            "unknown_edges": len(self.unknown),
            "relations": self.n_relations,
            "survivors": len(self.survivors),
            "hard_relations": len(self.hard_rows),
        }


def _loop_value(values: dict, loop: Sequence[int]) -> int:
    L = normalize_loop(loop)
    n = len(L)
    s = 0
    if n > 1:
        for i in range(n):
            a, b = L[i], L[(i + 1) % n]
            if a < b:
                s += values.get((a, b), 0)
            else:
                s -= values.get((b, a), 0)
    return s


def make_certificate(hom: ViewHomology, i: int, loop: Sequence[int], extra: dict | None = None) -> dict:
    values = hom.cocycle(i)
    k = hom.invariants[i]
    val = _loop_value(values, loop)
    view = hom.view
    cert = {
        "schema": "scirate.h1cert/1",
        "view": {"inner": getattr(view, "inner", None), "outer": getattr(view, "outer", None)},
        "invariants": list(hom.invariants),
        "class_vector": list(hom.loop_class(loop)),
        "coordinate": i,
        "modulus": k,
        "cocycle": [[u, v, x] for (u, v), x in sorted(values.items())],
        "loop": list(normalize_loop(loop)),
        "loop_value": val % k if k > 1 else val,
        "truncation_R": getattr(view, "outer", None),
    }
    if extra:
        cert.update(extra)
    return cert


def verify_cocycle(cert: dict, view, loop: Sequence[int] | None = None) -> None:
    """Raise :class:`CertificateError` unless ``cert`` is a cocycle on ``view``
    that is nonzero on the loop (the certificate's own loop by default)."""
    k = cert["modulus"]
    values = {}
    for u, v, x in cert["cocycle"]:
        if not u < v or not view.is_edge(u, v):
            raise CertificateError(f"cocycle support {(u, v)} is not an oriented view edge")
        values[(u, v)] = x
    for (u, v) in values:
        nu, nv = set(view.neighbors(u)), set(view.neighbors(v))
        for w in apexes(view, nu & nv, u, v):
            a, b, c = sorted((u, v, w))
            s = values.get((a, b), 0) + values.get((b, c), 0) - values.get((a, c), 0)
            if (s % k if k else s) != 0:
                raise CertificateError(f"cocycle condition fails on triangle {(a, b, c)}")
    L = cert["loop"] if loop is None else loop
    if not all(view.has_vertex(v) for v in L):
        raise CertificateError("certificate loop leaves the view")
    val = _loop_value(values, L)
    if (val % k if k else val) == 0:
        raise CertificateError("cocycle vanishes on the loop")


@dataclass
class H1Map:
    source_invariants: list[int]
    target_invariants: list[int]
    matrix: list[list[int]]  # rows: target coordinates, columns: source coordinates
    images: dict = field(default_factory=dict)
    witness: dict | None = None

    @property
    def is_zero(self) -> bool:
        return not any(any(r) for r in self.matrix) and not any(any(v) for v in self.images.values())

    @property
    def rank(self) -> int:
        """Rank over the rationals of the free-to-free block."""
        rows = [[Fraction(x) for x, ks in zip(r, self.source_invariants) if ks == 0]
                for r, kt in zip(self.matrix, self.target_invariants) if kt == 0]
        rank = 0
        ncols = len(rows[0]) if rows else 0
        for c in range(ncols):
            piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
            if piv is None:
                continue
            rows[rank], rows[piv] = rows[piv], rows[rank]
            for i in range(len(rows)):
                if i != rank and rows[i][c] != 0:
                    f = rows[i][c] / rows[rank][c]
                    rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
            rank += 1
        return rank

    def to_json(self) -> dict:
        out = {
            "source_invariants": self.source_invariants,
            "target_invariants": self.target_invariants,
            "matrix": [[i, j, x] for i, r in enumerate(self.matrix) for j, x in enumerate(r) if x],
            "shape": [len(self.target_invariants), len(self.source_invariants)],
            "zero": self.is_zero,
            "rank": self.rank,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def forest_potentials(view, target: ViewHomology) -> tuple[dict[int, tuple], dict[int, int]]:
    """BFS forest of ``view`` with the target class of each root-to-vertex path."""
    pot: dict[int, tuple] = {}
    parent: dict[int, int] = {}
    zero = target.zero()
    for s in view.vertices():
        if s in pot:
            continue
        pot[s] = zero
        parent[s] = s
        queue = [s]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for w in sorted(view.neighbors(u)):
                if w not in pot:
                    c = target.edge_class(u, w)
                    pot[w] = target._reduce([a + b for a, b in zip(pot[u], c)])
                    parent[w] = u
                    queue.append(w)
    return pot, parent


def edge_images(view, target: ViewHomology):
    """Yield ``(u, v, image)`` for edges of ``view`` whose fundamental cycle
    maps to a nonzero class of ``target`` (u < v)."""
    pot, parent = forest_potentials(view, target)
    for u in view.vertices():
        for v in view.neighbors(u):
            if v <= u or parent.get(v) == u or parent.get(u) == v:
                continue
            c = target.edge_class(u, v)
            img = target._reduce([a + b - e for a, b, e in zip(pot[u], c, pot[v])])
            if any(img):
                yield u, v, img, parent


def _path_to_root(parent: dict[int, int], x: int) -> list[int]:
    out = [x]
    while parent[x] != x:
        x = parent[x]
        out.append(x)
    out.reverse()
    return out


def cycle_of(parent: dict[int, int], u: int, v: int) -> tuple[int, ...]:
    a = _path_to_root(parent, u)
    b = _path_to_root(parent, v)
    return normalize_loop(a + list(reversed(b)))


def find_obstructed_loop(view, target: ViewHomology, extra: dict | None = None) -> dict | None:
    """A loop of ``view`` whose class in ``target`` is nonzero, with a certificate."""
    for u, v, img, parent in edge_images(view, target):
        loop = cycle_of(parent, u, v)
        return target.obstruction(loop, extra)
    return None


def h1_map(outer_view, inner_view, inner_hom: ViewHomology | None = None, outer_hom: ViewHomology | None = None) -> H1Map:
    """Matrix of H1(outer) -> H1(inner) induced by inclusion, in SNF bases."""
    if hasattr(inner_view, "contains_view") and not inner_view.contains_view(outer_view):
        raise ValueError("outer view must be contained in the inner view")
    tgt = inner_hom if inner_hom is not None else ViewHomology(inner_view)
    src = outer_hom if outer_hom is not None else ViewHomology(outer_view)
    parent = src.closure.parent
    pot: dict[int, tuple] = {}
    for x in sorted(parent, key=lambda y: (src.closure.depth[y], y)):
        p = parent[x]
        pot[x] = tgt.zero() if p == x else tgt._reduce([a + b for a, b in zip(pot[p], tgt.edge_class(p, x))])
    images = {}
    for g, (u, v) in enumerate(src.unknown):
        c = tgt.edge_class(u, v)
        images[g] = tgt._reduce([a + b - e for a, b, e in zip(pot[u], c, pot[v])])
    ns, nt = len(src.invariants), len(tgt.invariants)
    matrix = [[0] * ns for _ in range(nt)]
    for j in range(ns):
        acc = [0] * nt
        for g, c in src.basis_cycle(j).items():
            for i, x in enumerate(images[g]):
                acc[i] += c * x
        acc = tgt._reduce(acc)
        for i in range(nt):
            matrix[i][j] = acc[i]
    hm = H1Map(list(src.invariants), list(tgt.invariants), matrix)
    # the survivor images determine the map; the other unknown edges are checked too
    hm.images = {g: img for g, img in images.items() if any(img)}
    if hm.images:
        g = min(hm.images)
        loop = cycle_of(parent, *src.unknown[g])
        extra = {"outer_view": {"inner": getattr(outer_view, "inner", None), "outer": getattr(outer_view, "outer", None)}}
        hm.witness = tgt.obstruction(loop, extra)
    return hm
