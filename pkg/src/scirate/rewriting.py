"""Shortlex string rewriting for group presentations.

Knuth-Bendix completion over the alphabet of generators and their inverses.
Completion is bounded; running out of budget leaves ``confluent=False``
and the resulting system only certifies equality, never inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .presentations import Presentation, Word, format_word, inverse, parse_word

__all__ = ["RewriteSystem", "Budget", "knuth_bendix", "shortlex_key"]


@dataclass(frozen=True)
class Budget:
    max_rules: int = 5000
    max_rule_length: int = 40
    max_passes: int = 200


def _ranks(order: Sequence[int]) -> dict[int, int]:
    """Letter ranks for shortlex with each generator followed by its inverse."""
    rank = {}
    for pos, g in enumerate(order):
        rank[g + 1] = 2 * pos
        rank[-(g + 1)] = 2 * pos + 1
    return rank


def shortlex_key(w: Sequence[int], rank: dict[int, int]) -> tuple:
    return (len(w), tuple(rank[x] for x in w))


@dataclass
class RewriteSystem:
    """An ordered rule set ``lhs -> rhs`` with ``lhs`` shortlex-greater."""

    names: tuple[str, ...]
    order: tuple[int, ...]
    rules: list[tuple[Word, Word]] = field(default_factory=list)
    confluent: bool = False

    def __post_init__(self):
        self._rank = _ranks(self.order)
        self._reindex()

    def _reindex(self):
        self._by_len: dict[int, dict[Word, Word]] = {}
        for lhs, rhs in self.rules:
            self._by_len.setdefault(len(lhs), {})[lhs] = rhs
        self._lengths = sorted(self._by_len)

    def key(self, w: Sequence[int]) -> tuple:
        return shortlex_key(w, self._rank)

    def reduce(self, w: Iterable[int]) -> Word:
        return self.extend((), w)

    def extend(self, nf: Sequence[int], letters: Iterable[int]) -> Word:
        """Normal form of ``nf . letters`` where ``nf`` is already irreducible."""
        stack = list(nf)
        todo = list(letters)
        todo.reverse()
        by_len, lengths = self._by_len, self._lengths
        while todo:
            stack.append(todo.pop())
            n = len(stack)
            for k in lengths:
                if k > n:
                    break
                rhs = by_len[k].get(tuple(stack[n - k:]))
                if rhs is not None:
                    del stack[n - k:]
                    todo.extend(reversed(rhs))
                    break
        return tuple(stack)

    def critical_pairs(self) -> Iterable[tuple[Word, Word, Word]]:
        """Yield ``(overlap, left_result, right_result)`` for every overlap."""
        for l1, r1 in self.rules:
            for l2, r2 in self.rules:
                for k in range(1, min(len(l1), len(l2))):
                    if l1[-k:] == l2[:k]:
                        yield l1 + l2[k:], r1 + l2[k:], l1[:-k] + r2

    def check_confluence(self) -> bool:
        """Independent local-confluence test by critical-pair enumeration."""
        for _, a, b in self.critical_pairs():
            if self.reduce(a) != self.reduce(b):
                return False
        for l1, r1 in self.rules:
            for l2, r2 in self.rules:
                if l1 == l2 or len(l2) >= len(l1):
                    continue
                i = _find(l1, l2)
                if i >= 0 and self.reduce(r1) != self.reduce(l1[:i] + r2 + l1[i + len(l2):]):
                    return False
        return True

    def to_text(self) -> str:
        head = f"# order: {' '.join(self.names[g] for g in self.order)}\n# confluent: {str(self.confluent).lower()}\n"
        return head + "".join(
            f"{format_word(l, self.names)} -> {format_word(r, self.names)}\n" for l, r in self.rules
        )

    @classmethod
    def from_text(cls, text: str, names: Sequence[str]) -> "RewriteSystem":
        order = list(range(len(names)))
        confluent = False
        rules = []
        for line in text.splitlines():
            s = line.strip()
            if s.startswith("# order:"):
                order = [list(names).index(x) for x in s.split(":", 1)[1].split()]
            elif s.startswith("# confluent:"):
                confluent = s.split(":", 1)[1].strip() == "true"
            elif s and not s.startswith("#"):
                l, r = s.split("->")
                rules.append((parse_word(l.strip(), names, reduce=False), parse_word(r.strip(), names, reduce=False)))
        return cls(tuple(names), tuple(order), rules, confluent)


def _find(hay: Sequence[int], needle: Sequence[int]) -> int:
    n, m = len(hay), len(needle)
    for i in range(n - m + 1):
        if tuple(hay[i:i + m]) == tuple(needle):
            return i
    return -1


class _Completion:
    def __init__(self, names, order, budget: Budget):
        self.names = tuple(names)
        self.order = tuple(order)
        self.rank = _ranks(order)
        self.budget = budget
        self.rules: dict[Word, Word] = {}
        self.system = RewriteSystem(self.names, self.order, [], False)

    def key(self, w):
        return shortlex_key(w, self.rank)

    def sync(self):
        self.system.rules = list(self.rules.items())
        self.system._reindex()

    def reduce(self, w):
        return self.system.reduce(w)

    def orient(self, a: Word, b: Word) -> tuple[Word, Word] | None:
        a, b = self.reduce(a), self.reduce(b)
        if a == b:
            return None
        return (a, b) if self.key(a) > self.key(b) else (b, a)

    def add(self, a: Word, b: Word) -> Word | None:
        """Add equation a = b with interreduction; return the new lhs or None."""
        pending = [(a, b)]
        added = None
        while pending:
            rule = self.orient(*pending.pop())
            if rule is None:
                continue
            lhs, rhs = rule
            if len(lhs) > self.budget.max_rule_length:
                raise _OutOfBudget
            self.rules[lhs] = rhs
            self.sync()
            added = lhs
            # interreduce: rules whose lhs contains the new lhs become equations
            for l2, r2 in list(self.rules.items()):
                if l2 == lhs:
                    continue
                if _find(l2, lhs) >= 0:
                    del self.rules[l2]
                    pending.append((l2, r2))
            self.sync()
            for l2, r2 in list(self.rules.items()):
                nr = self.reduce(r2)
                if nr != r2:
                    self.rules[l2] = nr
            self.sync()
            if len(self.rules) > self.budget.max_rules:
                raise _OutOfBudget
        return added


class _OutOfBudget(Exception):
    pass


def _initial_equations(p: Presentation) -> list[tuple[Word, Word]]:
    eqs = []
    for g in range(p.rank):
        x = g + 1
        eqs.append(((x, -x), ()))
        eqs.append(((-x, x), ()))
    for r in p.relators:
        for w in (r, inverse(r)):
            for i in range(len(w)):
                c = w[i:] + w[:i]
                h = (len(c) + 1) // 2
                eqs.append((c[:h], inverse(c[h:])))
    return eqs


def knuth_bendix(p: Presentation, budget: Budget | None = None, order: Sequence[int] | None = None) -> RewriteSystem:
    """Complete ``p`` under shortlex; ``order`` lists generator ids, lowest first."""
    budget = budget or Budget()
    if budget.max_rules <= 0 or budget.max_rule_length <= 0 or budget.max_passes <= 0:
        raise ValueError("budget must be positive")
    order = tuple(range(p.rank)) if order is None else tuple(order)
    if sorted(order) != list(range(p.rank)):
        raise ValueError("order must be a permutation of the generator ids")
    comp = _Completion(p.names, order, budget)
    confluent = False
    try:
        eqs = _initial_equations(p)
        eqs.sort(key=lambda e: (comp.key(e[0]), comp.key(e[1])))
        for a, b in eqs:
            comp.add(a, b)
        for _ in range(budget.max_passes):
            new = []
            snapshot = list(comp.rules.items())
            seen = set()
            for l1, r1 in snapshot:
                for l2, r2 in snapshot:
                    for k in range(1, min(len(l1), len(l2))):
                        if l1[-k:] != l2[:k]:
                            continue
                        a = comp.reduce(r1 + l2[k:])
                        b = comp.reduce(l1[:-k] + r2)
                        if a != b:
                            pair = (a, b) if comp.key(a) > comp.key(b) else (b, a)
                            if pair not in seen:
                                seen.add(pair)
                                new.append(pair)
            if not new:
                confluent = True
                break
            new.sort(key=lambda e: (comp.key(e[0]), comp.key(e[1])))
            for a, b in new:
                comp.add(a, b)
    except _OutOfBudget:
        confluent = False
    rules = sorted(comp.rules.items(), key=lambda r: (comp.key(r[0]), comp.key(r[1])))
    return RewriteSystem(tuple(p.names), order, rules, confluent)
