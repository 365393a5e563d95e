"""Brackets on the vanishing rate V(r) over a finite truncation.

For an inner radius r the fill region is the view ``dist in (r, R_fill]``
and loops are drawn from ``dist in (N, R_loop]`` with ``R_loop <= R_fill``.

* Upper bound N+(r): the least N such that every edge of the loop region at
  level N is known to the closure of the fill region.  Every loop there is
  then a product of conjugated fundamental cycles of known edges, so it
  bounds a disk in the fill region; the closure derivation is an explicit
  certificate.  On top of that a seeded sample of generator loops and
  random loops is filled and replay-verified.
* Lower bound N-(r): the greatest N for which some loop of the level-N loop
  region has nonzero H1 class in the fill region, witnessed by a cocycle.

Both are relative to the truncation: a disk leaving B(R_fill) is not seen.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .homology import ViewHomology, cycle_of, find_obstructed_loop, forest_potentials, verify_cocycle
from .homotopy import fill_loop, normalize_loop, verify_closure_certificate

__all__ = [
    "VRow",
    "VRateEstimate",
    "estimate_v_rate",
    "EquivalenceWitness",
    "compare_v_rates",
    "qi_predicted_bound",
    "ConsistencyError",
    "MarginError",
    "random_view_loop",
]

SAMPLING_NOTE = (
    "upper bounds: closure certificate over all edges of the loop region, plus "
    "replay-verified fillings of sampled generator loops and seeded random loops; "
    "all bounds are relative to the truncation"
)


class ConsistencyError(RuntimeError):
    pass


class MarginError(ValueError):
    pass


@dataclass
class VRow:
    r: int
    n_lower: int | None
    n_upper: int | None
    inconclusive: int = 0
    undecided_levels: int = 0
    obstructed_levels: list[int] = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    homology: dict = field(default_factory=dict)
    closure: dict = field(default_factory=dict)
    adjusted: list[str] = field(default_factory=list)

    @property
    def inconclusive_count(self) -> int:
        return self.inconclusive + self.undecided_levels

    def lower_value(self) -> int:
        """Certified lower bound on V(r): V(r) >= r, and > N- when obstructed."""
        return self.r if self.n_lower is None else max(self.r, self.n_lower + 1)

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "N_lower": self.n_lower,
            "N_upper": self.n_upper,
            "upper_found": self.n_upper is not None,
            "inconclusive_count": self.inconclusive_count,
            "inconclusive_samples": self.inconclusive,
            "undecided_levels": self.undecided_levels,
            "obstructed_levels": self.obstructed_levels,
            "witnesses": {str(k): v for k, v in sorted(self.witnesses.items())},
            "samples": self.samples,
            "homology": self.homology,
            "closure": self.closure,
            "adjusted": self.adjusted,
        }


@dataclass
class VRateEstimate:
    rows: list[VRow]
    truncation_R: int
    loop_radius: int
    d: int
    m: int
    group: dict
    policy: dict

    def row(self, r: int) -> VRow | None:
        for x in self.rows:
            if x.r == r:
                return x
        return None

    def upper_table(self) -> dict[int, int]:
        return {x.r: x.n_upper for x in self.rows if x.n_upper is not None}

    def lower_table(self) -> dict[int, int]:
        return {x.r: x.lower_value() for x in self.rows}

    def n_lower_table(self) -> dict[int, int | None]:
        return {x.r: x.n_lower for x in self.rows}

    def linear_fit(self) -> dict | None:
        pts = [(x.r, (x.lower_value() + x.n_upper) / 2) for x in self.rows if x.n_upper is not None]
        if len(pts) < 2 or len({p[0] for p in pts}) < 2:
            return None
        xs, ys = zip(*pts)
        slope, intercept = statistics.linear_regression(xs, ys)
        res = [y - (slope * x + intercept) for x, y in pts]
        return {
            "slope": round(slope, 6),
            "intercept": round(intercept, 6),
            "max_abs_residual": round(max(abs(e) for e in res), 6),
            "rms_residual": round(math.sqrt(sum(e * e for e in res) / len(res)), 6),
            "points": len(pts),
            "note": "least-squares fit over bracket midpoints; a fit, not a certificate",
        }

    def to_json(self) -> dict:
        return {
            "schema": "scirate.vrate/1",
            "group": self.group,
            "d": self.d,
            "colors": self.m,
            "truncation_R": self.truncation_R,
            "loop_radius": self.loop_radius,
            "policy": self.policy,
            "note": SAMPLING_NOTE,
            "rows": [x.to_json() for x in self.rows],
            "linear_fit": self.linear_fit(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "N_lower", "N_upper", "inconclusive_count", "truncation_R"])
        for x in self.rows:
            w.writerow([
                x.r,
                "" if x.n_lower is None else x.n_lower,
                "" if x.n_upper is None else x.n_upper,
                x.inconclusive_count,
                self.truncation_R,
            ])
        return buf.getvalue()


def random_view_loop(rng: random.Random, view, steps: int, vertices: Sequence[int] | None = None) -> tuple[int, ...]:
    """Random walk of ``steps`` edges in ``view`` closed by a BFS path back."""
    verts = list(view.vertices()) if vertices is None else list(vertices)
    start = verts[rng.randrange(len(verts))]
    walk = [start]
    cur = start
    for _ in range(steps):
        nb = sorted(view.neighbors(cur))
        if not nb:
            break
        cur = nb[rng.randrange(len(nb))]
        walk.append(cur)
    prev = {cur: cur}
    queue = [cur]
    head = 0
    while head < len(queue) and start not in prev:
        u = queue[head]
        head += 1
        for w in sorted(view.neighbors(u)):
            if w not in prev:
                prev[w] = u
                queue.append(w)
    back = []
    x = start
    while x != cur:
        x = prev[x]
        back.append(x)
    return normalize_loop(walk + list(reversed(back[:-1])))


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _row(skel, r: int, loop_radius: int, policy: dict, seed: int, budget: int) -> VRow:
    fill_view = skel.annulus(r, skel.served)
    hom = ViewHomology(fill_view)
    dist = skel.vertex_dist
    row = VRow(r, None, None)
    row.homology = hom.summary()
    levels = list(range(r, loop_radius))

    # upper bound from the closure
    worst = None
    for u, v in hom.unknown:
        if max(dist(u), dist(v)) <= loop_radius:
            lo = min(dist(u), dist(v))
            worst = lo if worst is None else max(worst, lo)
    n_up = r if worst is None else max(r, worst)
    if n_up < loop_radius:
        row.n_upper = n_up
        if policy.get("verify_closure", True):
            cert = hom.closure.certificate()
            certified = verify_closure_certificate(cert, fill_view)
            region = skel.annulus(n_up, loop_radius)
            for e in region.edges():
                if e not in certified:
                    raise ConsistencyError(f"edge {e} of the loop region is not certified")
            row.closure = {
                "forest_edges": len(cert["forest"]),
                "derived_edges": len(cert["derived"]),
                "digest": _digest(cert),
                "verified": True,
            }

    # lower bound: obstructed levels, each with its own certificate
    if not hom.is_zero():
        for N in levels:
            region = skel.annulus(N, loop_radius)
            cert = find_obstructed_loop(region, hom, {"N": N, "r": r, "R": skel.served})
            if cert is None:
                continue
            verify_cocycle(cert, fill_view)
            got = fill_loop(cert["loop"], fill_view, budget=1000, closure=hom.closure, homology=hom)
            if got.status == "filled":
                raise ConsistencyError(f"loop with nonzero H1 class got a filling at r={r}, N={N}")
            row.obstructed_levels.append(N)
            row.witnesses[N] = cert if policy.get("full_certificates") else {
                "loop": cert["loop"],
                "modulus": cert["modulus"],
                "loop_value": cert["loop_value"],
                "cocycle_support": len(cert["cocycle"]),
                "digest": _digest(cert),
                "verified": True,
            }
        if row.obstructed_levels:
            row.n_lower = max(row.obstructed_levels)
    if row.n_upper is not None and row.n_lower is not None and row.n_lower >= row.n_upper:
        raise ConsistencyError(f"obstruction at N={row.n_lower} above the certified bound {row.n_upper} (r={r})")

    lo = r if row.n_lower is None else row.n_lower + 1
    hi = loop_radius if row.n_upper is None else row.n_upper
    row.undecided_levels = max(0, hi - lo)

    # sampled fillings at the upper bound
    if row.n_upper is not None:
        rng = random.Random(seed * 1_000_003 + r)
        region = skel.annulus(row.n_upper, loop_radius)
        verts = region.vertices()
        loops = []
        if verts:
            pot, parent = forest_potentials(region, hom)
            gens = [(u, v) for u in verts for v in region.neighbors(u)
                    if u < v and parent.get(v) != u and parent.get(u) != v]
            k = policy.get("max_generators", 100)
            pick = gens if len(gens) <= k else sorted(rng.sample(range(len(gens)), k))
            if len(gens) > k:
                pick = [gens[i] for i in pick]
            loops = [cycle_of(parent, u, v) for u, v in pick]
            for _ in range(policy.get("random_loops", 20)):
                loops.append(random_view_loop(rng, region, rng.randint(2, policy.get("max_walk", 12)), verts))
        stats = {"generators_total": 0, "tested": 0, "filled": 0, "inconclusive": 0, "max_moves": 0, "digest": ""}
        if verts:
            stats["generators_total"] = len(gens)
        traces = []
        for L in loops:
            res = fill_loop(L, fill_view, budget=budget, closure=hom.closure, homology=hom)
            stats["tested"] += 1
            if res.status == "filled":
                stats["filled"] += 1
                stats["max_moves"] = max(stats["max_moves"], len(res.moves))
                traces.append([list(L), [list(m) for m in res.moves]])
            elif res.status == "obstructed":
                raise ConsistencyError(f"sampled loop obstructed below the certified bound (r={r})")
            else:
                stats["inconclusive"] += 1
        stats["digest"] = _digest(traces)
        row.samples = stats
        row.inconclusive = stats["inconclusive"]
    return row


def estimate_v_rate(
    skel,
    r_values: Iterable[int],
    loop_radius: int | None = None,
    seed: int = 0,
    budget: int = 10**6,
    policy: Mapping | None = None,
    threads: int = 1,
) -> VRateEstimate:
    """Bracket V(r) for each r; see the module docstring for the semantics."""
    pol = {"max_generators": 100, "random_loops": 20, "max_walk": 12, "verify_closure": True, "full_certificates": False}
    pol.update(policy or {})
    R = skel.served
    loop_radius = R - skel.d if loop_radius is None else loop_radius
    if loop_radius > R:
        raise MarginError("loop radius exceeds the truncation")
    rs = sorted(set(r_values))
    if not rs:
        raise MarginError("empty range of inner radii")
    for r in rs:
        if r < 0 or r + 1 >= loop_radius:
            raise MarginError(f"inner radius {r} leaves no loop levels below the loop radius {loop_radius}")
    if not skel.materialized:
        skel.materialize()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda r: _row(skel, r, loop_radius, pol, seed, budget), rs))
    else:
        rows = [_row(skel, r, loop_radius, pol, seed, budget) for r in rs]
    _enforce_monotone(rows)
    ball = skel.ball
    group = {"presentation": ball.engine.presentation.to_text(), "digest": ball.engine.presentation.digest(), "engine": ball.engine.kind}
    pol["loop_radius"] = loop_radius
    pol["seed"] = seed
    return VRateEstimate(rows, R, loop_radius, skel.d, skel.m, group, pol)


def _enforce_monotone(rows: list[VRow]) -> None:
    # a disk outside B(r+1) is outside B(r): upper bounds propagate downward
    for a, b in zip(reversed(rows[:-1]), reversed(rows[1:])):
        if b.r == a.r + 1 and b.n_upper is not None and (a.n_upper is None or b.n_upper < a.n_upper):
            a.n_upper = b.n_upper
            a.adjusted.append(f"N_upper from r={b.r}")
    # an obstructed loop outside B(r+1) stays obstructed in the smaller region
    for a, b in zip(rows[:-1], rows[1:]):
        if b.r == a.r + 1 and a.n_lower is not None and a.n_lower >= b.r and (b.n_lower is None or a.n_lower > b.n_lower):
            b.n_lower = a.n_lower
            b.adjusted.append(f"N_lower from r={a.r}")
    for a, b in zip(rows[:-1], rows[1:]):
        for x, y in ((a.n_upper, b.n_upper), (a.n_lower, b.n_lower)):
            if x is not None and y is not None and x > y:
                raise ConsistencyError(f"bounds not monotone between r={a.r} and r={b.r}")
    for x in rows:
        if x.n_lower is not None and x.n_upper is not None and x.n_lower >= x.n_upper:
            raise ConsistencyError(f"empty bracket at r={x.r}")


@dataclass
class EquivalenceWitness:
    shown: bool
    c: tuple | None  # (c1, c2, c3)
    C: tuple | None  # (C1, C2, C3)
    sampled: list[int]
    margin_lower: Fraction | None
    margin_upper: Fraction | None
    mode: str

    def to_json(self) -> dict:
        fmt = lambda t: None if t is None else [str(x) for x in t]
        return {
            "shown": self.shown,
            "c": fmt(self.c),
            "C": fmt(self.C),
            "sampled_R": self.sampled,
            "margin_lower": None if self.margin_lower is None else str(self.margin_lower),
            "margin_upper": None if self.margin_upper is None else str(self.margin_upper),
            "mode": self.mode,
        }


MULTIPLIERS = tuple(sorted({Fraction(a, b) for a in (1, 2, 3, 4) for b in (1, 2, 3, 4)}))
SCALES = (Fraction(1, 2), Fraction(1), Fraction(2))
SHIFTS = tuple(range(-8, 9))


def _as_tables(est) -> tuple[dict, dict]:
    if isinstance(est, VRateEstimate):
        return est.lower_table(), est.upper_table()
    lower, upper = est
    return dict(lower), dict(upper)


def _at(table: Mapping[int, int], x: Fraction, side: str) -> int | None:
    # tables are nondecreasing: f(x) <= f(ceil x) and f(x) >= f(floor x)
    k = math.ceil(x) if side == "up" else math.floor(x)
    return table.get(k)


def compare_v_rates(f, g, mode: str = "conservative", multipliers=MULTIPLIERS, scales=SCALES, shifts=SHIFTS) -> EquivalenceWitness:
    """Search for c1 f(c2 R) + c3 <= g(R) <= C1 f(C2 R) + C3 on sampled R.

    ``f`` and ``g`` are estimates or ``(lower_table, upper_table)`` pairs.
    In conservative mode the left side uses f's upper and g's lower
    brackets and the right side g's upper and f's lower brackets; in
    ``upper`` mode both sides use the upper tables.
    """
    fl, fu = _as_tables(f)
    gl, gu = _as_tables(g)
    if mode == "upper":
        fl, gl = fu, gu
    elif mode != "conservative":
        raise ValueError("mode must be 'conservative' or 'upper'")
    Rs = sorted(set(gl) & set(gu))

    def rank(c):
        return (abs(c[0] - 1) + abs(c[1] - 1), abs(c[2]), c)

    def side(check):
        best, best_margin, best_pts = None, None, []
        for a in multipliers:
            for s in scales:
                pts = []
                vals = []
                for R in Rs:
                    v = check(a, s, R)
                    if v is not None:
                        pts.append(R)
                        vals.append(v)
                if not pts:
                    continue
                # choose the shift that makes the worst slack nonnegative
                for c3 in sorted(shifts, key=abs):
                    margin = min(v(c3) for v in vals)
                    cand = (a, s, c3)
                    if margin >= 0:
                        key = (True, len(pts), -rank(cand)[0], -rank(cand)[1])
                    else:
                        key = (False, margin)
                    if best is None or key > best[0]:
                        best = (key, cand)
                        best_margin = margin
                        best_pts = pts
        return (best[1] if best else None), best_margin, best_pts

    def lower_check(a, s, R):
        fv = _at(fu, s * R, "up")
        gv = gl.get(R)
        if fv is None or gv is None:
            return None
        return lambda c3: gv - (a * fv + c3)

    def upper_check(a, s, R):
        fv = _at(fl, s * R, "down")
        gv = gu.get(R)
        if fv is None or gv is None:
            return None
        return lambda c3: (a * fv + c3) - gv

    c, ml, pl = side(lower_check)
    C, mu, pu = side(upper_check)
    shown = c is not None and C is not None and ml >= 0 and mu >= 0 and len(pl) > 0 and len(pu) > 0
    return EquivalenceWitness(shown, c, C, sorted(set(pl) | set(pu)), ml, mu, mode)


def qi_predicted_bound(source, k: int, C: int, radii: Iterable[int], measured=None) -> dict:
    """Table R -> M(R) = k N(kR + kC + 3C) + 3C from the source's upper bounds.

    ``measured`` (an estimate for the target group) is cross-checked:
    the prediction must not fall below its lower bound N-.
    """
    from .qi import m_radius, TableGap

    table = source.upper_table() if isinstance(source, VRateEstimate) else dict(source)
    rows = []
    ok = True
    for R in sorted(set(radii)):
        entry = {"R": R}
        try:
            entry["M"] = m_radius(k, C, table, R)
        except TableGap as e:
            entry["M"] = None
            entry["unknown"] = f"needs N({e.argument})"
        if measured is not None:
            row = measured.row(R) if isinstance(measured, VRateEstimate) else None
            nl = row.n_lower if row is not None else None
            entry["measured_N_lower"] = nl
            if entry["M"] is not None and row is not None:
                entry["consistent"] = nl is None or entry["M"] >= nl
                ok = ok and entry["consistent"]
        rows.append(entry)
    return {"k": k, "C": C, "rows": rows, "consistent": ok}
