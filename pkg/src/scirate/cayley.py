"""Balls in Cayley graphs by breadth-first search.

Vertices are numbered in BFS order with letters tried in presentation order,
so the ball of any smaller radius is an index prefix.  Each vertex keeps a
parent pointer, which gives a geodesic witness word for it.
"""

from __future__ import annotations

import hashlib
import json
import pickle
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .normal_forms import NormalFormEngine
from .presentations import Word, inverse

__all__ = ["Ball", "build_ball", "BudgetExceeded", "HeuristicEngineError", "save_ball", "load_ball", "CACHE_VERSION"]

CACHE_VERSION = 1


class BudgetExceeded(RuntimeError):
    def __init__(self, budget: int, radius_reached: int):
        self.budget = budget
        self.radius_reached = radius_reached
        super().__init__(f"ball exceeds the state budget {budget} (complete up to radius {radius_reached})")


class HeuristicEngineError(ValueError):
    pass


@dataclass
class Ball:
    engine: NormalFormEngine
    radius: int
    states: list
    index: dict
    dist: list[int]
    parent: list[int]
    parent_letter: list[int]
    nbr: list[list[int]]
    exhausted: bool = False
    heuristic: bool = False
    _inv: dict = field(default_factory=dict, repr=False)

    @property
    def letters(self) -> list[int]:
        return self.engine.letters

    def __len__(self) -> int:
        return len(self.states)

    def size(self, radius: int | None = None) -> int:
        if radius is None or radius >= self.radius:
            return len(self.states)
        return self.prefix(radius)

    def prefix(self, radius: int) -> int:
        """Number of vertices at distance <= radius (an index prefix)."""
        lo, hi = 0, len(self.dist)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.dist[mid] <= radius:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def sphere_sizes(self) -> list[int]:
        out = [0] * (self.radius + 1)
        for d in self.dist:
            out[d] += 1
        return out

    def word(self, i: int) -> Word:
        """Geodesic witness word from the identity to vertex ``i``."""
        if i < 0:
            raise IndexError("vertex outside the ball has no witness word")
        out = []
        while i:
            out.append(self.parent_letter[i])
            i = self.parent[i]
        out.reverse()
        return tuple(out)

    def locate(self, word: Iterable[int], start: int = 0) -> int:
        """Index of ``start . word`` or -1 if it lies outside the ball."""
        cur = start
        state = None
        for x in word:
            if state is None:
                nxt = self.nbr[cur][self._slot[x]]
                if nxt >= 0:
                    cur = nxt
                    continue
                state = self.states[cur]
            state = self.engine.step(state, x)
        if state is None:
            return cur
        return self.index.get(state, -1)

    def inverse_of(self, i: int) -> int:
        j = self._inv.get(i)
        if j is None:
            j = self.locate(inverse(self.word(i)))
            self._inv[i] = j
        return j

    def relative(self, i: int, j: int) -> int:
        """Index of ``g_i^-1 g_j`` or -1 (it can be as long as twice the radius)."""
        return self.locate(self.word(j), self.inverse_of(i))

    def translate(self, i: int, j: int) -> int:
        """Index of ``g_i g_j`` or -1."""
        return self.locate(self.word(j), i)

    def pair_distance(self, i: int, j: int) -> int | None:
        """Exact word distance, or ``None`` when it exceeds the ball radius."""
        if i == j:
            return 0
        k = self.relative(i, j)
        return None if k < 0 else self.dist[k]

    def restricted_distance(self, i: int, j: int, limit: int | None = None) -> int | None:
        """BFS distance inside the ball's induced graph (an upper bound on the word distance)."""
        if i == j:
            return 0
        seen = {i: 0}
        q = deque([i])
        while q:
            u = q.popleft()
            du = seen[u]
            if limit is not None and du >= limit:
                continue
            for v in self.nbr[u]:
                if v >= 0 and v not in seen:
                    seen[v] = du + 1
                    if v == j:
                        return du + 1
                    q.append(v)
        return None

    def offsets(self, d: int) -> list[int]:
        return list(range(self.prefix(d)))

    def neighborhood(self, i: int, d: int) -> list[int]:
        """Vertices of the ball within distance ``d`` of ``i`` (sorted)."""
        if d > self.radius:
            raise ValueError("neighborhood radius exceeds the ball radius")
        out = []
        for h in range(self.prefix(d)):
            k = self.locate(self.word(h), i)
            if k >= 0:
                out.append(k)
        out.sort()
        return out

    def stamp(self) -> dict:
        return {
            "presentation": self.engine.presentation.digest(),
            "engine": self.engine.kind,
            "radius": self.radius,
            "size": len(self),
            "exhausted": self.exhausted,
            "heuristic": self.heuristic,
        }

    def _init_slots(self):
        self._slot = {x: k for k, x in enumerate(self.letters)}


def build_ball(
    engine: NormalFormEngine,
    radius: int,
    budget_states: int | None = None,
    allow_heuristic: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> Ball:
    """Breadth-first ball of the given radius around the identity."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if not engine.exact and not allow_heuristic:
        raise HeuristicEngineError("normal forms are not certified (rewrite system not confluent)")
    letters = engine.letters
    e = engine.identity()
    states = [e]
    index = {e: 0}
    dist = [0]
    parent = [0]
    parent_letter = [0]
    nbr: list[list[int]] = []
    start, end = 0, 1
    escaped = False
    for r in range(radius + 1):
        for i in range(start, end):
            s = states[i]
            row = []
            for x in letters:
                t = engine.step(s, x)
                j = index.get(t)
                if j is None:
                    if r == radius:
                        row.append(-1)
                        escaped = True
                        continue
                    j = len(states)
                    if budget_states is not None and j >= budget_states:
                        raise BudgetExceeded(budget_states, r)
                    index[t] = j
                    states.append(t)
                    dist.append(r + 1)
                    parent.append(i)
                    parent_letter.append(x)
                row.append(j)
            nbr.append(row)
        if progress:
            progress(r, len(states))
        start, end = end, len(states)
        if start == end:
            break
    exhausted = not escaped
    ball = Ball(engine, radius, states, index, dist, parent, parent_letter, nbr, exhausted, not engine.exact)
    ball._init_slots()
    return ball


def save_ball(ball: Ball, path: str) -> None:
    """Write a versioned cache: a JSON header line, then a checksummed pickle."""
    body = pickle.dumps(
        (ball.states, ball.dist, ball.parent, ball.parent_letter, ball.nbr, ball.exhausted),
        protocol=pickle.HIGHEST_PROTOCOL,
    )
    header = {"version": CACHE_VERSION, "stamp": ball.stamp(), "sha256": hashlib.sha256(body).hexdigest()}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(body)


def load_ball(path: str, engine: NormalFormEngine, radius: int) -> Ball | None:
    """Load a cached ball; ``None`` on a version, key or checksum mismatch.

    Only load caches this tool wrote itself: the body is a pickle.
    """
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            body = fh.read()
        st = header["stamp"]
        if header["version"] != CACHE_VERSION or hashlib.sha256(body).hexdigest() != header["sha256"]:
            return None
        if st["presentation"] != engine.presentation.digest() or st["engine"] != engine.kind or st["radius"] != radius:
            return None
        states, dist, parent, parent_letter, nbr, exhausted = pickle.loads(body)
    except (OSError, ValueError, KeyError, TypeError, pickle.UnpicklingError, EOFError):
        return None
    index = {s: i for i, s in enumerate(states)}
    ball = Ball(engine, radius, states, index, dist, parent, parent_letter, nbr, exhausted, not engine.exact)
    ball._init_slots()
    return ball
