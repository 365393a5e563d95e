"""Quasi-isometries between Cayley balls and transport of disk fillings.

A :class:`QiMap` holds vertex maps ``f: H -> G`` and ``g: G -> H`` given on
normal-form states, the balls they are served on, and constants fitted by
an exhaustive pair audit.  Distances come from the balls' exact pair
distances; a pair whose distance is not certified inside a ball is Unknown
and skipped (and counted).

Transport follows the filling-transport construction: refine a loop of
``P_a(H)`` to steps of length <= eps, push it to ``P_d(G)``, fill there,
and pull each filling vertex back with ``g`` (loop vertices go back to
themselves).  The pulled-back trace is replayed in ``P_a(H)``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .cayley import Ball
from .homotopy import Move, apply_move, normalize_loop, replay
from .rips import RipsSkeleton, rescale_edge_path

__all__ = [
    "QiMap",
    "builtin_qi",
    "fit_constants",
    "audit",
    "compose",
    "m_radius",
    "epsilon_for",
    "required_a",
    "interpolate_loop",
    "transport_disk",
    "TransportedDisk",
    "TransportError",
    "TableGap",
    "sample_annulus_loop",
    "QI_KINDS",
]

QI_KINDS = ("identity", "change_of_generators", "finite_index", "product_embedding")


class TableGap(LookupError):
    def __init__(self, argument: int):
        self.argument = argument
        super().__init__(f"table has no entry at {argument}")


class TransportError(RuntimeError):
    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


@dataclass
class QiMap:
    kind: str
    H: Ball  # domain of f
    G: Ball  # codomain of f
    f_state: Callable
    g_state: Callable
    lam: Fraction = Fraction(1)
    C: int = 0
    fit_radius: int = 0
    params: dict = field(default_factory=dict)
    fit_stats: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return math.ceil(self.lam)

    def f(self, x: int) -> int:
        return self.G.index.get(self.f_state(self.H.states[x]), -1)

    def g(self, y: int) -> int:
        return self.H.index.get(self.g_state(self.G.states[y]), -1)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "parameters": self.params,
            "lambda": str(self.lam),
            "k": self.k,
            "C": self.C,
            "audited_radius": self.fit_radius,
            "domain": self.H.engine.presentation.digest(),
            "codomain": self.G.engine.presentation.digest(),
            "fit": self.fit_stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True, indent=2)


def _pairs_exhaustive(n: int):
    for i in range(n):
        for j in range(i + 1, n):
            yield i, j


def fit_constants(q: QiMap, radius: int) -> QiMap:
    """Fit lambda (as a rational, over C-free ratios) then the least integer C.

    Pairs are all pairs of the balls of the given radius on both sides.
    """
    H, G = q.H, q.G
    nh, ng = H.prefix(radius), G.prefix(radius)
    fx = [q.f(x) for x in range(nh)]
    gy = [q.g(y) for y in range(ng)]
    if min(fx, default=0) < 0 or min(gy, default=0) < 0:
        raise ValueError("map leaves the served ball; enlarge the codomain ball")
    samples = []  # (d_source, d_image)
    unknown = 0
    for src, img, n in ((H, G, nh), (G, H, ng)):
        mp = fx if src is H else gy
        for i, j in _pairs_exhaustive(n):
            a = src.pair_distance(i, j)
            b = img.pair_distance(mp[i], mp[j])
            if a is None or b is None:
                unknown += 1
                continue
            samples.append((a, b))
    comp = 0
    for x in range(nh):
        dd = H.pair_distance(q.g(fx[x]), x)
        if dd is None:
            unknown += 1
        else:
            comp = max(comp, dd)
    for y in range(ng):
        dd = G.pair_distance(q.f(gy[y]), y)
        if dd is None:
            unknown += 1
        else:
            comp = max(comp, dd)
    lam = Fraction(1)
    for a, b in samples:
        if a > 0:
            lam = max(lam, Fraction(b, a))
    C = comp
    for a, b in samples:
        C = max(C, math.ceil(b - lam * a))
    q.lam = lam
    q.C = C
    q.fit_radius = radius
    q.fit_stats = {"pairs": len(samples), "unknown": unknown, "composition_max": comp}
    return q


def audit(q: QiMap, n_pairs: int = 10_000, radius: int | None = None, seed: int = 0) -> dict:
    """Check the four quasi-isometry inequalities and the derived lower bound.

    Exhaustive when the number of pairs is at most ``n_pairs``; otherwise
    ``n_pairs`` seeded random pairs on each side.
    """
    H, G = q.H, q.G
    radius = q.fit_radius if radius is None else radius
    lam, C, k = q.lam, q.C, q.k
    rng = random.Random(seed)
    out = {"checked": 0, "unknown": 0, "violations": [], "lambda": str(lam), "C": C, "k": k, "radius": radius}

    def pairs(n):
        total = n * (n - 1) // 2
        if total <= n_pairs:
            return list(_pairs_exhaustive(n))
        got = []
        while len(got) < n_pairs:
            i, j = rng.randrange(n), rng.randrange(n)
            if i != j:
                got.append((min(i, j), max(i, j)))
        return got

    def bad(kind, **kw):
        if len(out["violations"]) < 20:
            out["violations"].append({"inequality": kind, **kw})

    nh, ng = H.prefix(radius), G.prefix(radius)
    for i, j in pairs(nh):
        a = H.pair_distance(i, j)
        fi, fj = q.f(i), q.f(j)
        b = None if fi < 0 or fj < 0 else G.pair_distance(fi, fj)
        if a is None or b is None:
            out["unknown"] += 1
            continue
        out["checked"] += 1
        if b > lam * a + C:
            bad("f_upper", x=i, y=j, d=a, d_image=b)
        if Fraction(b) < Fraction(a - 3 * C, k):
            bad("f_lower_derived", x=i, y=j, d=a, d_image=b)
    for i, j in pairs(ng):
        a = G.pair_distance(i, j)
        gi, gj = q.g(i), q.g(j)
        b = None if gi < 0 or gj < 0 else H.pair_distance(gi, gj)
        if a is None or b is None:
            out["unknown"] += 1
            continue
        out["checked"] += 1
        if b > lam * a + C:
            bad("g_upper", x=i, y=j, d=a, d_image=b)
    for x in range(nh):
        fx = q.f(x)
        back = q.g(fx) if fx >= 0 else -1
        dd = H.pair_distance(back, x) if back >= 0 else None
        if dd is None:
            out["unknown"] += 1
        elif dd > C:
            bad("gf_close", x=x, d=dd)
    for y in range(ng):
        gy = q.g(y)
        back = q.f(gy) if gy >= 0 else -1
        dd = G.pair_distance(back, y) if back >= 0 else None
        if dd is None:
            out["unknown"] += 1
        elif dd > C:
            bad("fg_close", y=y, d=dd)
    out["passed"] = not out["violations"]
    return out


def compose(q1: QiMap, q2: QiMap, radius: int | None = None) -> QiMap:
    """``q2 . q1``: f = f2 f1 and g = g1 g2, refitted on the given radius."""
    if q1.G.engine.presentation.digest() != q2.H.engine.presentation.digest():
        raise ValueError("maps do not compose")
    q = QiMap(
        f"{q2.kind}.{q1.kind}",
        q1.H,
        q2.G,
        lambda s: q2.f_state(q1.f_state(s)),
        lambda s: q1.g_state(q2.g_state(s)),
        params={"first": q1.descriptor(), "second": q2.descriptor()},
    )
    return fit_constants(q, min(q1.fit_radius, q2.fit_radius) if radius is None else radius)


def builtin_qi(kind: str, H: Ball, G: Ball, fit_radius: int, **params) -> QiMap:
    """Built-in maps, fitted on balls of radius ``fit_radius``.

    * ``identity`` / ``change_of_generators``: same normal-form states on both
      sides (free abelian models with different generating vectors);
    * ``finite_index``: H = Z included in G = Z as the multiples of
      ``index``; g sends m to floor(m / index);
    * ``product_embedding``: H -> H x Z^2, x -> (x, 0), g the projection.
      This is not a quasi-isometry; the fitted C grows with the radius.
    """
    if kind in ("identity", "change_of_generators"):
        ident = lambda s: s
        q = QiMap(kind, H, G, ident, ident, params=dict(params))
    elif kind == "finite_index":
        n = params.get("index", 2)
        q = QiMap(kind, H, G, lambda s: tuple(n * x for x in s), lambda s: tuple(x // n for x in s), params={"index": n})
    elif kind == "product_embedding":
        q = QiMap(kind, H, G, lambda s: (s, 0, 0), lambda s: s[0], params=dict(params))
    else:
        raise ValueError(f"unknown QI kind {kind!r}; expected one of {', '.join(QI_KINDS)}")
    return fit_constants(q, fit_radius)


def _lookup(table, x: int) -> int:
    if callable(table):
        v = table(x)
    else:
        v = table.get(x)
    if v is None:
        raise TableGap(x)
    return v


def m_radius(k: int, C, table, R: int) -> int:
    """M(R) = k N(kR + kC + 3C) + 3C, rounded up."""
    C = Fraction(C)
    arg = k * R + k * C + 3 * C
    arg_i = math.ceil(arg)  # N is nondecreasing, so rounding the argument up is conservative
    return math.ceil(k * _lookup(table, arg_i) + 3 * C)


def epsilon_for(k: int, C, d: int) -> int:
    """Largest integer eps with k eps + C <= d."""
    eps = math.floor(Fraction(d - Fraction(C), k))
    if eps < 1:
        raise ValueError(f"need d >= k + C = {k + C} for a refinement step eps >= 1 (got d = {d})")
    return eps


def required_a(k: int, C, eps: int) -> int:
    return math.ceil(k * k * eps + (k + 2) * Fraction(C))


def interpolate_loop(ball: Ball, loop: Sequence[int], eps: int) -> tuple[list[int], list[Move]]:
    """Refine ``loop`` along geodesic witnesses to steps of length <= eps.

    Returns the refined loop and expand moves taking the loop to it
    (read in reverse they collapse it back).
    """
    if eps < 1:
        raise ValueError("eps must be >= 1")
    L = list(normalize_loop(loop))
    n = len(L)
    out: list[int] = []
    moves: list[Move] = []
    if n == 1:
        return L, moves
    for i in range(n):
        u, v = L[i], L[(i + 1) % n]
        d = ball.pair_distance(u, v)
        if d is None:
            raise ValueError(f"step {i} leaves the ball; distance not certified")
        out.append(u)
        if d <= eps:
            continue
        got = rescale_edge_path(ball, u, v, eps, d)
        if got is None:
            raise ValueError(f"geodesic of step {i} leaves the ball")
        path, _ = got
        # fan from u: insert p_1, then p_2 after p_1, ...
        base = len(out) - 1
        for j, p in enumerate(path[1:-1]):
            moves.append(("expand", base + j, p))
            out.append(p)
    return out, moves


def sample_annulus_loop(rng: random.Random, ball: Ball, step: int, lo: int, hi: int, length: int) -> tuple[int, ...] | None:
    """Random loop with steps of length <= ``step`` and all vertices in dist (lo, hi]."""
    start_range = range(ball.prefix(lo), ball.prefix(hi))
    if not start_range:
        return None
    offsets = ball.prefix(step)
    for _ in range(200):
        start = start_range[rng.randrange(len(start_range))]
        walk = [start]
        cur = start
        tries = 0
        while len(walk) < length and tries < 50 * length:
            tries += 1
            nxt = ball.translate(cur, rng.randrange(1, offsets))
            if nxt >= 0 and lo < ball.dist[nxt] <= hi:
                walk.append(nxt)
                cur = nxt
        rel = ball.relative(cur, start)
        if rel < 0:
            continue
        w = ball.word(rel)
        back = [ball.locate(w[:k], cur) for k in range(step, len(w), step)]
        if all(p >= 0 and lo < ball.dist[p] <= hi for p in back):
            return normalize_loop(walk + back)
    return None


@dataclass
class TransportedDisk:
    source_loop: list[int]
    refined_loop: list[int]
    image_loop: list[int]
    source_moves: list[Move]  # filling of the image loop in P_d(G)
    moves: list[Move]  # transported filling of the source loop in P_a(H)
    a: int
    eps: int
    vertex_checks: int
    min_distance: int
    avoidance_bound: Fraction
    max_triangle: int

    def to_json(self) -> dict:
        return {
            "source_loop": self.source_loop,
            "refined_loop": self.refined_loop,
            "image_loop": self.image_loop,
            "source_move_count": len(self.source_moves),
            "moves": [list(m) for m in self.moves],
            "a": self.a,
            "eps": self.eps,
            "vertex_checks": self.vertex_checks,
            "min_distance_to_basepoint": self.min_distance,
            "guaranteed_avoidance": str(self.avoidance_bound),
            "max_triangle_side": self.max_triangle,
        }


def transport_disk(
    q: QiMap,
    loop: Sequence[int],
    a: int,
    d: int,
    fill: Callable[[tuple[int, ...]], list[Move] | None],
    g_complex,
) -> TransportedDisk:
    """Transport a filling of f(loop) in P_d(G) back to a filling of ``loop`` in P_a(H).

    ``fill`` returns a move trace for a loop of G-vertices (or ``None``);
    ``g_complex`` is the G-side complex the trace is replayed in.
    """
    k, C = q.k, q.C
    eps = epsilon_for(k, C, d)
    need = required_a(k, C, eps)
    if a < need:
        raise ValueError(f"a = {a} is below k^2 eps + (k+2) C = {need}")
    H, G = q.H, q.G
    src = list(normalize_loop(loop))
    refined, pre_moves = interpolate_loop(H, src, eps)
    image = [q.f(x) for x in refined]
    if min(image) < 0:
        raise TransportError("image of the loop leaves the codomain ball")
    for i in range(len(image)):
        dd = G.pair_distance(image[i], image[(i + 1) % len(image)])
        if dd is None or dd > d:
            raise TransportError(f"image step {i} has length {dd} > d = {d}")
    image_loop = normalize_loop(image)
    if len(image_loop) != len(image):
        raise TransportError("f identifies consecutive refined vertices; image loop degenerates")
    phi = fill(tuple(image))
    if phi is None:
        raise TransportError("no filling of the image loop was found")
    replay(image, phi, g_complex)

    psi: dict[int, int] = {}
    for x in refined:
        psi.setdefault(q.f(x), x)

    if [psi[q.f(x)] for x in refined] != refined:
        raise TransportError("f is not injective on the refined loop")

    def pull(y: int) -> int:
        if y not in psi:
            x = q.g(y)
            if x < 0:
                raise TransportError("g of a filling vertex leaves the domain ball", {"y": y})
            psi[y] = x
        return psi[y]

    moves = list(pre_moves)
    used = set(image)
    for mv in phi:
        if mv[0] == "expand":
            used.add(mv[2])
            moves.append(("expand", mv[1], pull(mv[2])))
        else:
            moves.append(tuple(mv))

    # distance audit of every cited triangle, with a witness on failure
    cur = list(src)
    max_side = 0
    for step, mv in enumerate(moves):
        n = len(cur)
        i = mv[1]
        if mv[0] == "expand":
            tri = (cur[i], mv[2], cur[(i + 1) % n])
        elif mv[0] == "collapse":
            tri = (cur[i], cur[(i + 1) % n], cur[(i + 2) % n])
        else:
            tri = None
        if tri is not None:
            for s, t in ((0, 1), (1, 2), (0, 2)):
                dd = H.pair_distance(tri[s], tri[t])
                if dd is None or dd > a:
                    raise TransportError(
                        f"step {step}: transported triangle side {dd} exceeds a = {a}",
                        {"step": step, "triangle": list(tri), "distance": dd},
                    )
                max_side = max(max_side, dd)
        cur = apply_move(cur, mv)
    h_complex = RipsSkeleton(H, a, materialize=False)
    replay(src, moves, h_complex)

    # per-vertex avoidance bound and the forward lower bound on loop vertices
    x0 = 0
    fx0 = q.f(x0)
    checks = 0
    bound_min = None
    min_dist = None
    for y in sorted(used):
        dy = G.pair_distance(fx0, y)
        gy = pull(y) if y in psi else q.g(y)
        dx = H.pair_distance(x0, q.g(y))
        if dy is None or dx is None:
            raise TransportError("distance not certified in the served balls", {"y": y})
        bound = Fraction(dy - 3 * C, k) - C
        if dx < bound:
            raise TransportError(f"vertex {y}: d(x0, g(y)) = {dx} < {bound}", {"y": y, "d": dx, "bound": str(bound)})
        checks += 1
        bound_min = bound if bound_min is None else min(bound_min, bound)
        dpsi = H.pair_distance(x0, gy)
        min_dist = dpsi if min_dist is None else min(min_dist, dpsi)
    for i in range(len(refined)):
        for j in range(i + 1, len(refined)):
            dxy = H.pair_distance(refined[i], refined[j])
            dfy = G.pair_distance(q.f(refined[i]), q.f(refined[j]))
            if dxy is None or dfy is None:
                continue
            checks += 1
            if Fraction(dfy) < Fraction(dxy - 3 * C, k):
                raise TransportError("forward lower bound fails on loop vertices", {"pair": [refined[i], refined[j]]})
    return TransportedDisk(
        src, refined, list(image), list(phi), moves, a, eps, checks,
        min_dist if min_dist is not None else 0, bound_min if bound_min is not None else Fraction(0), max_side,
    )
