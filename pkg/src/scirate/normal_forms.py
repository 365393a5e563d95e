"""Word-problem engines: canonical keys for group elements.

Every engine keeps an internal hashable *state* per element and exposes

* ``identity()`` and ``step(state, letter)`` (right multiplication by a letter),
* ``evaluate(word)`` and ``canonical(word)`` (the :class:`CanonicalKey` bytes).

States of two words agree iff the words represent the same element, except
for a non-confluent :class:`RewritingEngine`, which is flagged ``exact=False``.
Canonical keys are never used as distances; the word metric comes from
breadth-first search in :mod:`scirate.cayley`.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Hashable, Iterable, Sequence

from .presentations import Presentation, Word, commutator, free_reduce, inverse, power
from .rewriting import Budget, RewriteSystem, knuth_bendix

__all__ = [
    "NormalFormEngine",
    "FreeAbelianEngine",
    "FreeGroupEngine",
    "HeisenbergEngine",
    "SolLatticeEngine",
    "SurfaceGroupEngine",
    "ProductZ2Engine",
    "RewritingEngine",
    "make_builtin",
    "engine_from_name",
    "FAMILY_NAMES",
]

State = Hashable
_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class NormalFormEngine:
    kind = "abstract"
    exact = True

    def __init__(self, presentation: Presentation):
        self.presentation = presentation

    @property
    def letters(self) -> list[int]:
        return self.presentation.letters()

    def identity(self) -> State:
        raise NotImplementedError

    def step(self, state: State, letter: int) -> State:
        raise NotImplementedError

    def evaluate(self, word: Iterable[int], state: State | None = None) -> State:
        s = self.identity() if state is None else state
        for x in word:
            s = self.step(s, x)
        return s

    def key(self, state: State) -> bytes:
        return repr(state).encode()

    def canonical(self, word: Iterable[int]) -> bytes:
        return self.key(self.evaluate(word))

    # Optional fast group operations on states; ``None`` means use words.
    multiply = None
    invert = None

    def describe(self) -> dict:
        return {"kind": self.kind, "exact": self.exact}

    def __repr__(self):
        return f"<{type(self).__name__} {self.describe()}>"


def _names(k: int, skip: str = "") -> list[str]:
    pool = [c for c in _ALPHABET if c not in skip]
    if k <= len(pool):
        return pool[:k]
    return [f"x{i}" for i in range(1, k + 1)]


class FreeAbelianEngine(NormalFormEngine):
    """Z^n with arbitrary generating vectors; the state is the coordinate vector.

    The first ``n`` vectors must be linearly independent; any further vector
    must be an integer combination of them (it gets a defining relator).
    """

    kind = "free_abelian"

    def __init__(self, vectors: Sequence[Sequence[int]] | int, names: Sequence[str] | None = None):
        if isinstance(vectors, int):
            if vectors < 1:
                raise ValueError("rank must be positive")
            vectors = [tuple(int(i == j) for j in range(vectors)) for i in range(vectors)]
        vecs = [tuple(int(x) for x in v) for v in vectors]
        dim = len(vecs[0])
        if dim < 1 or any(len(v) != dim for v in vecs) or len(vecs) < dim:
            raise ValueError("need at least n generating vectors of common length n")
        basis = vecs[:dim]
        if _det(basis) == 0:
            raise ValueError("the first n vectors must be linearly independent")
        names = list(names) if names else _names(len(vecs))
        rels: list[Word] = []
        for i, j in itertools.combinations(range(len(vecs)), 2):
            if i < dim and j < dim:
                rels.append(commutator((i + 1,), (j + 1,)))
        for j in range(dim, len(vecs)):
            coeffs = _solve(basis, vecs[j])
            if any(c.denominator != 1 for c in coeffs):
                raise ValueError(f"vector {vecs[j]} is not an integer combination of the basis")
            combo: Word = ()
            for i, c in enumerate(coeffs):
                combo += power((i + 1,), int(c))
            rels.append(free_reduce((j + 1,) + inverse(combo)))
            for i in range(dim):
                rels.append(commutator((i + 1,), (j + 1,)))
        super().__init__(Presentation.from_names(names, rels))
        self.vectors = vecs
        self.dim = dim
        self._delta = {}
        for i, v in enumerate(vecs):
            self._delta[i + 1] = v
            self._delta[-(i + 1)] = tuple(-x for x in v)

    def identity(self):
        return (0,) * self.dim

    def step(self, state, letter):
        d = self._delta[letter]
        return tuple(a + b for a, b in zip(state, d))

    def multiply(self, s, t):
        return tuple(a + b for a, b in zip(s, t))

    def invert(self, s):
        return tuple(-a for a in s)

    def describe(self):
        return {"kind": self.kind, "exact": True, "vectors": [list(v) for v in self.vectors]}


def _det(m: Sequence[Sequence[int]]) -> Fraction:
    a = [[Fraction(x) for x in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            for k in range(c, n):
                a[r][k] -= f * a[c][k]
    return det


def _solve(basis: Sequence[Sequence[int]], target: Sequence[int]) -> list[Fraction]:
    """Coefficients c with sum_i c_i basis[i] = target (basis vectors as rows)."""
    n = len(basis)
    a = [[Fraction(basis[i][r]) for i in range(n)] + [Fraction(target[r])] for r in range(n)]
    for c in range(n):
        p = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [x / piv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [a[r][n] for r in range(n)]


class FreeGroupEngine(NormalFormEngine):
    kind = "free_group"

    def __init__(self, rank: int, names: Sequence[str] | None = None):
        if rank < 1:
            raise ValueError("rank must be positive")
        super().__init__(Presentation.from_names(list(names) if names else _names(rank)))
        self.rank = rank

    def identity(self):
        return ()

    def step(self, state, letter):
        if state and state[-1] == -letter:
            return state[:-1]
        return state + (letter,)

    def multiply(self, s, t):
        return free_reduce(s + t)

    def invert(self, s):
        return inverse(s)

    def describe(self):
        return {"kind": self.kind, "exact": True, "rank": self.rank}


class HeisenbergEngine(NormalFormEngine):
    """Discrete Heisenberg group on generators x, y.

    The state ``(a, b, c)`` is the unitriangular matrix [[1,a,c],[0,1,b],[0,0,1]];
    the central element ``z = [x, y]`` is ``(0, 0, 1)``.
    """

    kind = "heisenberg"

    def __init__(self):
        x, y = 1, 2
        z = commutator((x,), (y,))
        super().__init__(Presentation.from_names(["x", "y"], [commutator(z, (x,)), commutator(z, (y,))]))

    def identity(self):
        return (0, 0, 0)

    def step(self, s, letter):
        a, b, c = s
        if letter == 1:
            return (a + 1, b, c)
        if letter == -1:
            return (a - 1, b, c)
        if letter == 2:
            return (a, b + 1, c + a)
        return (a, b - 1, c - a)

    def multiply(self, s, t):
        return (s[0] + t[0], s[1] + t[1], s[2] + t[2] + s[0] * t[1])

    def invert(self, s):
        a, b, c = s
        return (-a, -b, a * b - c)


def _mat_mul(p, q):
    return (
        (p[0][0] * q[0][0] + p[0][1] * q[1][0], p[0][0] * q[0][1] + p[0][1] * q[1][1]),
        (p[1][0] * q[0][0] + p[1][1] * q[1][0], p[1][0] * q[0][1] + p[1][1] * q[1][1]),
    )


class SolLatticeEngine(NormalFormEngine):
    """Z^2 semidirect Z with t v t^-1 = A v; the state is ``(v1, v2, k)``.

    Product: (v, k)(w, l) = (v + A^k w, k + l).
    """

    kind = "sol"

    def __init__(self, matrix: Sequence[Sequence[int]] = ((2, 1), (1, 1))):
        A = tuple(tuple(int(x) for x in row) for row in matrix)
        if len(A) != 2 or any(len(r) != 2 for r in A):
            raise ValueError("Sol matrix must be 2x2")
        if A[0][0] * A[1][1] - A[0][1] * A[1][0] != 1:
            raise ValueError("Sol matrix must have determinant 1")
        if A[0][0] + A[1][1] <= 2:
            raise ValueError("Sol matrix must have trace > 2")
        self.A = A
        self.A_inv = ((A[1][1], -A[0][1]), (-A[1][0], A[0][0]))
        a, b, t = 1, 2, 3
        rels = [commutator((a,), (b,))]
        for j, gen in ((0, a), (1, b)):
            image = power((a,), A[0][j]) + power((b,), A[1][j])
            rels.append(free_reduce((t, gen, -t) + inverse(image)))
        super().__init__(Presentation.from_names(["a", "b", "t"], rels))
        self._powers = {0: ((1, 0), (0, 1))}

    def power_of_A(self, k: int):
        P = self._powers.get(k)
        if P is None:
            step = self.A if k > 0 else self.A_inv
            prev = self.power_of_A(k - 1 if k > 0 else k + 1)
            P = _mat_mul(prev, step)
            self._powers[k] = P
        return P

    def identity(self):
        return (0, 0, 0)

    def step(self, s, letter):
        v1, v2, k = s
        if abs(letter) == 3:
            return (v1, v2, k + (1 if letter > 0 else -1))
        P = self.power_of_A(k)
        col = 0 if abs(letter) == 1 else 1
        sgn = 1 if letter > 0 else -1
        return (v1 + sgn * P[0][col], v2 + sgn * P[1][col], k)

    def multiply(self, s, t):
        P = self.power_of_A(s[2])
        return (s[0] + P[0][0] * t[0] + P[0][1] * t[1], s[1] + P[1][0] * t[0] + P[1][1] * t[1], s[2] + t[2])

    def invert(self, s):
        P = self.power_of_A(-s[2])
        return (-(P[0][0] * s[0] + P[0][1] * s[1]), -(P[1][0] * s[0] + P[1][1] * s[1]), -s[2])

    def describe(self):
        return {"kind": self.kind, "exact": True, "matrix": [list(r) for r in self.A]}


class _CyclotomicRing:
    """Arithmetic in Z[theta] for theta = 2 cos(pi / n), elements as coefficient tuples."""

    def __init__(self, n: int):
        import sympy

        x = sympy.Symbol("x")
        poly = sympy.Poly(sympy.minimal_polynomial(2 * sympy.cos(sympy.pi / n), x), x)
        coeffs = [int(c) for c in poly.all_coeffs()]
        if coeffs[0] != 1:
            raise ArithmeticError("minimal polynomial of 2cos(pi/n) should be monic")
        self.deg = len(coeffs) - 1
        self.tail = [-c for c in reversed(coeffs[1:])]

    def const(self, k: int):
        return (k,) + (0,) * (self.deg - 1)

    def theta(self):
        if self.deg == 1:
            return (self.tail[0],)
        return (0, 1) + (0,) * (self.deg - 2)

    def add(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def neg(self, a):
        return tuple(-x for x in a)

    def mul(self, a, b):
        deg = self.deg
        prod = [0] * (2 * deg - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        prod[i + j] += ai * bj
        for k in range(2 * deg - 2, deg - 1, -1):
            c = prod[k]
            if c:
                prod[k] = 0
                for i, r in enumerate(self.tail):
                    prod[k - deg + i] += c * r
        return tuple(prod[:deg])


class SurfaceGroupEngine(NormalFormEngine):
    """Closed orientable surface group of genus g >= 2.

    The group is realized as the side-pairing subgroup of the hyperbolic
    triangle reflection group with angles (pi/2, pi/4g, pi/4g), acting on
    its integral Tits cone.  An element ``h`` is stored as ``h^-1 . v0`` for
    a point ``v0`` of the open fundamental chamber, whose stabilizer is
    trivial, so states are exact canonical keys.  :meth:`dehn_reduce`
    provides an independent solution of the word problem.
    """

    kind = "surface"

    def __init__(self, genus: int = 2):
        if genus < 2:
            raise ValueError("surface group genus must be >= 2")
        self.genus = genus
        k = 2 * genus
        names = _names(k)
        rel: Word = ()
        for i in range(genus):
            rel += commutator((2 * i + 1,), (2 * i + 2,))
        super().__init__(Presentation.from_names(names, [rel]))
        n = 4 * genus
        self.ring = R = _CyclotomicRing(n)
        minus_theta = R.neg(R.theta())
        two_b = {}
        for i in range(3):
            for j in range(3):
                if i == j:
                    two_b[i, j] = R.const(2)
                elif {i, j} == {0, 2}:
                    two_b[i, j] = R.const(0)
                else:
                    two_b[i, j] = minus_theta
        self._two_b = two_b
        self.v0 = (R.const(1),) * 3
        words = self._side_pairings(rel, n)
        # right multiplication: state_{hx} = x^-1 . state_h, a Z-linear map on
        # the flattened coefficients, compiled to straight-line code per letter
        self._steps = {}
        for letter in words:
            self._steps[letter] = self._compile(self._matrix(words[-letter]))
        self.reflection_words = words

    def _compile(self, M):
        R = self.ring
        deg = R.deg
        rows: list[list[int]] = [[0] * (3 * deg) for _ in range(3 * deg)]
        for j in range(3):
            for q in range(deg):
                basis = tuple(int(k == q) for k in range(deg))
                for i in range(3):
                    col = R.mul(M[i][j], basis)
                    for p in range(deg):
                        rows[i * deg + p][j * deg + q] = col[p]
        terms = []
        for row in rows:
            parts = [f"{c}*s[{k}]" if c != 1 else f"s[{k}]" for k, c in enumerate(row) if c]
            terms.append("+".join(parts) or "0")
        src = "lambda s: (" + ", ".join(terms) + ",)"
        return eval(src)

    def _reflect(self, i, phi):
        R = self.ring
        return tuple(R.add(phi[j], R.neg(R.mul(self._two_b[i, j], phi[i]))) for j in range(3))

    def _act_word(self, word, phi):
        for i in reversed(word):
            phi = self._reflect(i, phi)
        return phi

    def _matrix(self, word):
        R = self.ring
        cols = []
        for j in range(3):
            e = tuple(R.const(int(i == j)) for i in range(3))
            cols.append(self._act_word(word, e))
        return tuple(tuple(cols[j][i] for j in range(3)) for i in range(3))

    def _side_pairings(self, rel: Word, n: int) -> dict[int, list[int]]:
        def rho(k):
            return [0, 1] * (k % n)

        def pairing(i, j):
            return rho(i) + [2] + rho(j) + [0]

        def reduce(w):
            out = []
            for a in w:
                if out and out[-1] == a:
                    out.pop()
                else:
                    out.append(a)
            return out

        gens = sorted({abs(x) for x in rel})
        for choice in itertools.product((0, 1), repeat=len(gens)):
            words = {}
            for g, c in zip(gens, choice):
                i = rel.index(g)
                j = rel.index(-g)
                w = pairing(i, j) if c == 0 else pairing(j, i)
                words[g] = reduce(w)
                words[-g] = list(reversed(words[g]))
            full = []
            for x in rel:
                full += words[x]
            if self._act_word(reduce(full), self.v0) == self.v0:
                return words
        raise ArithmeticError("no side pairing realizes the surface relator")

    def identity(self):
        return tuple(c for coord in self.v0 for c in coord)

    def step(self, state, letter):
        return self._steps[letter](state)

    @lru_cache(maxsize=None)
    def _pieces(self):
        rel = self.presentation.relators[0]
        perms = []
        for w in (rel, inverse(rel)):
            for i in range(len(w)):
                perms.append(w[i:] + w[:i])
        return perms

    def dehn_reduce(self, word: Iterable[int]) -> Word:
        """Dehn's algorithm: shorten any subword that is more than half a relator."""
        w = list(free_reduce(word))
        rel_len = len(self.presentation.relators[0])
        half = rel_len // 2
        changed = True
        while changed:
            changed = False
            for i in range(len(w)):
                for p in self._pieces():
                    k = 0
                    while k < rel_len and i + k < len(w) and w[i + k] == p[k]:
                        k += 1
                    if k > half:
                        replacement = list(inverse(p[k:]))
                        w = list(free_reduce(w[:i] + replacement + w[i + k:]))
                        changed = True
                        break
                if changed:
                    break
        return tuple(w)

    def describe(self):
        return {"kind": self.kind, "exact": True, "genus": self.genus}


class ProductZ2Engine(NormalFormEngine):
    """G x Z^2: the inner engine's generators plus two central generators."""

    kind = "product_z2"

    def __init__(self, inner: NormalFormEngine):
        p = inner.presentation
        taken = set(p.names)
        for pair in (("c", "d"), ("p", "q"), ("z1", "z2")):
            if not taken & set(pair):
                extra = list(pair)
                break
        n = p.rank
        u, v = n + 1, n + 2
        rels = list(p.relators)
        for x in range(1, n + 1):
            rels.append(commutator((x,), (u,)))
            rels.append(commutator((x,), (v,)))
        rels.append(commutator((u,), (v,)))
        super().__init__(Presentation.from_names(p.names + extra, rels))
        self.inner = inner
        self.exact = inner.exact
        self._n = n

    def identity(self):
        return (self.inner.identity(), 0, 0)

    def step(self, s, letter):
        g, p, q = s
        a = abs(letter)
        if a <= self._n:
            return (self.inner.step(g, letter), p, q)
        sgn = 1 if letter > 0 else -1
        if a == self._n + 1:
            return (g, p + sgn, q)
        return (g, p, q + sgn)

    def key(self, s):
        return repr((self.inner.key(s[0]), s[1], s[2])).encode()

    def describe(self):
        return {"kind": self.kind, "exact": self.exact, "inner": self.inner.describe()}


class RewritingEngine(NormalFormEngine):
    """Normal forms from a shortlex rewrite system (exact only when confluent)."""

    kind = "rewriting"

    def __init__(self, presentation: Presentation, system: RewriteSystem):
        super().__init__(presentation)
        self.system = system
        self.exact = system.confluent

    @classmethod
    def complete(cls, presentation: Presentation, budget: Budget | None = None, order=None) -> "RewritingEngine":
        return cls(presentation, knuth_bendix(presentation, budget, order))

    def identity(self):
        return ()

    def step(self, state, letter):
        return self.system.extend(state, (letter,))

    def multiply(self, s, t):
        return self.system.extend(s, t)

    def invert(self, s):
        return self.system.reduce(inverse(s))

    def describe(self):
        return {"kind": self.kind, "exact": self.exact, "rules": len(self.system.rules), "confluent": self.system.confluent}


FAMILY_NAMES = (
    "z<n>", "z<n>-altgens", "free<n>", "cyclic<n>", "heisenberg", "sol", "surface<g>", "f2xz2",
)


def make_builtin(family: str, **params) -> NormalFormEngine:
    """Build a built-in engine.

    ``family`` is one of ``free_abelian`` (``rank`` or ``vectors``),
    ``free_group`` (``rank``), ``heisenberg``, ``sol`` (``matrix``),
    ``surface`` (``genus``) and ``product_z2`` (``inner``: an engine).
    """
    if family == "free_abelian":
        return FreeAbelianEngine(params.get("vectors", params.get("rank", 2)), params.get("names"))
    if family == "free_group":
        return FreeGroupEngine(params.get("rank", 2), params.get("names"))
    if family == "heisenberg":
        return HeisenbergEngine()
    if family == "sol":
        return SolLatticeEngine(params.get("matrix", ((2, 1), (1, 1))))
    if family == "surface":
        return SurfaceGroupEngine(params.get("genus", 2))
    if family == "product_z2":
        inner = params.get("inner")
        if not isinstance(inner, NormalFormEngine):
            raise ValueError("product_z2 needs an inner engine")
        return ProductZ2Engine(inner)
    raise ValueError(f"unknown family {family!r}")


def engine_from_name(name: str) -> NormalFormEngine:
    """Parse CLI family names such as ``z3``, ``z3-altgens``, ``free2``, ``f2xz2``."""
    s = name.strip().lower()
    if s.endswith("xz2"):
        return ProductZ2Engine(engine_from_name(s[:-3]))
    if s.startswith("z") and s.endswith("-altgens") and s[1:-8].isdigit():
        n = int(s[1:-8])
        vecs = [tuple(int(i == j) for j in range(n)) for i in range(n)]
        vecs.append(tuple(int(j < 2) for j in range(n)))
        return FreeAbelianEngine(vecs)
    if s.startswith("z") and s[1:].isdigit():
        return FreeAbelianEngine(int(s[1:]))
    for prefix in ("free", "f"):
        if s.startswith(prefix) and s[len(prefix):].isdigit():
            return FreeGroupEngine(int(s[len(prefix):]))
    if s.startswith("cyclic") and s[6:].isdigit() and int(s[6:]) >= 1:
        n = int(s[6:])
        return RewritingEngine.complete(Presentation.from_names(["a"], [(1,) * n]))
    if s == "heisenberg":
        return HeisenbergEngine()
    if s == "sol":
        return SolLatticeEngine()
    if s.startswith("surface") and s[7:].isdigit():
        return SurfaceGroupEngine(int(s[7:]))
    raise ValueError(f"unknown family {name!r}; expected one of {', '.join(FAMILY_NAMES)}")
