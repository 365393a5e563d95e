"""Small abstract 2-complexes for homology and homotopy tests."""

from __future__ import annotations

import itertools


class SimpleComplex:
    """Simplicial complex given by its maximal triangles and extra edges."""

    flag = False

    def __init__(self, triangles=(), edges=(), vertices=()):
        self.tris = {tuple(sorted(t)) for t in triangles}
        self.edge_set = {tuple(sorted(e)) for e in edges}
        for t in self.tris:
            for e in itertools.combinations(t, 2):
                self.edge_set.add(e)
        self.verts = sorted({v for e in self.edge_set for v in e} | set(vertices))
        self.nb = {v: set() for v in self.verts}
        for u, v in self.edge_set:
            self.nb[u].add(v)
            self.nb[v].add(u)
        self.inner = None
        self.outer = None

    def vertices(self):
        return list(self.verts)

    def neighbors(self, v):
        return sorted(self.nb[v])

    def has_vertex(self, v):
        return v in self.nb

    def is_edge(self, u, v):
        return tuple(sorted((u, v))) in self.edge_set

    def is_simplex(self, vs):
        s = tuple(sorted(set(vs)))
        if not all(self.has_vertex(v) for v in s):
            return False
        if len(s) <= 1:
            return True
        if len(s) == 2:
            return s in self.edge_set
        if len(s) == 3:
            return s in self.tris
        return False


def circle(n):
    return SimpleComplex(edges=[(i, (i + 1) % n) for i in range(n)])


def octahedron():
    # boundary of the octahedron: a 2-sphere
    top, bot = 0, 5
    ring = [1, 2, 3, 4]
    tris = []
    for i in range(4):
        a, b = ring[i], ring[(i + 1) % 4]
        tris += [(top, a, b), (bot, a, b)]
    return SimpleComplex(tris)


def rp2():
    # six-vertex real projective plane (hemi-icosahedron)
    tris = [(1, 2, 3), (1, 3, 4), (1, 4, 5), (1, 5, 6), (1, 6, 2),
            (2, 3, 5), (3, 4, 6), (4, 5, 2), (5, 6, 3), (6, 2, 4)]
    return SimpleComplex(tris)


def torus():
    # seven-vertex torus (Mobius-Csaszar)
    tris = []
    for i in range(7):
        tris.append((i, (i + 1) % 7, (i + 3) % 7))
        tris.append((i, (i + 2) % 7, (i + 3) % 7))
    return SimpleComplex(tris)
