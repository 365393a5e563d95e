"""Finite group presentations and words over signed generator letters.

A letter is a nonzero integer: ``i + 1`` stands for generator ``i`` and
``-(i + 1)`` for its inverse.  A :data:`Word` is a tuple of letters.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Word = tuple[int, ...]

__all__ = [
    "Word",
    "Generator",
    "Presentation",
    "PresentationSyntaxError",
    "free_reduce",
    "cyclic_reduce",
    "inverse",
    "conjugate",
    "commutator",
    "power",
    "parse_presentation",
    "parse_word",
    "format_word",
]


class PresentationSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Generator:
    id: int
    name: str


def free_reduce(w: Iterable[int]) -> Word:
    out: list[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def cyclic_reduce(w: Iterable[int]) -> Word:
    w = free_reduce(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return w[i:j]


def inverse(w: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(w))


def conjugate(w: Sequence[int], g: Sequence[int]) -> Word:
    """Return the freely reduced form of ``g^-1 w g``."""
    return free_reduce(inverse(g) + tuple(w) + tuple(g))


def commutator(u: Sequence[int], v: Sequence[int]) -> Word:
    """``[u, v] = u v u^-1 v^-1`` (the convention the input grammar uses)."""
    return free_reduce(tuple(u) + tuple(v) + inverse(u) + inverse(v))


def power(w: Sequence[int], k: int) -> Word:
    base = tuple(w) if k >= 0 else inverse(w)
    return free_reduce(base * abs(k))


@dataclass(frozen=True)
class Presentation:
    generators: tuple[Generator, ...]
    relators: tuple[Word, ...] = ()
    max_relator_length: int = field(init=False)

    def __post_init__(self):
        names = [g.name for g in self.generators]
        if [g.id for g in self.generators] != list(range(len(names))):
            raise ValueError("generator ids must be dense 0..n-1")
        if len(set(names)) != len(names):
            raise ValueError("duplicate generator name")
        for name in names:
            if not name or any(c.isspace() for c in name):
                raise ValueError(f"invalid generator name {name!r}")
        n = len(names)
        rels = []
        for r in self.relators:
            r = cyclic_reduce(r)
            if not r:
                raise ValueError("relator is trivial after reduction")
            if any(x == 0 or abs(x) > n for x in r):
                raise ValueError("relator uses an unknown generator")
            rels.append(r)
        object.__setattr__(self, "relators", tuple(rels))
        object.__setattr__(self, "max_relator_length", max((len(r) for r in rels), default=0))

    @classmethod
    def from_names(cls, names: Sequence[str], relators: Iterable[Sequence[int]] = ()) -> "Presentation":
        gens = tuple(Generator(i, s) for i, s in enumerate(names))
        return cls(gens, tuple(tuple(r) for r in relators))

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.generators]

    def letters(self) -> list[int]:
        """All 2n letters, each generator followed by its inverse."""
        out = []
        for g in self.generators:
            out += [g.id + 1, -(g.id + 1)]
        return out

    def word(self, text: str) -> Word:
        return parse_word(text, self.names)

    def format(self, w: Sequence[int]) -> str:
        return format_word(w, self.names)

    def to_text(self) -> str:
        lines = ["gens: " + " ".join(self.names)]
        lines += ["rel: " + self.format(r) for r in self.relators]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def format_word(w: Sequence[int], names: Sequence[str]) -> str:
    if not w:
        return "1"
    parts = []
    i = 0
    while i < len(w):
        j = i
        while j < len(w) and w[j] == w[i]:
            j += 1
        name = names[abs(w[i]) - 1]
        k = (j - i) * (1 if w[i] > 0 else -1)
        parts.append(name if k == 1 else f"{name}^{k}")
        i = j
    sep = " " if any(len(s) > 1 for s in names) else ""
    return sep.join(parts)


_POWER = re.compile(r"\s*\^\s*([+-]?\d+)")


class _WordParser:
    def __init__(self, text: str, names: Sequence[str], line: int = 1, col0: int = 0, reduce: bool = True):
        self.text = text
        self.reduce = reduce
        self.names = sorted(names, key=len, reverse=True)
        self.index = {s: i for i, s in enumerate(names)}
        self.pos = 0
        self.line = line
        self.col0 = col0

    def error(self, msg: str):
        raise PresentationSyntaxError(msg, self.line, self.col0 + self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t*.":
            self.pos += 1

    def parse_word(self, closers: str = "") -> Word:
        out: list[int] = []
        while True:
            self.skip_ws()
            if self.pos >= len(self.text) or self.text[self.pos] in closers:
                return free_reduce(out) if self.reduce else tuple(out)
            out += self.parse_atom()

    def parse_atom(self) -> Word:
        ch = self.text[self.pos]
        if ch == "[":
            self.pos += 1
            u = self.parse_word(",")
            if self.pos >= len(self.text) or self.text[self.pos] != ",":
                self.error("expected ',' in commutator")
            self.pos += 1
            v = self.parse_word("]")
            if self.pos >= len(self.text) or self.text[self.pos] != "]":
                self.error("expected ']' closing commutator")
            self.pos += 1
            base = commutator(u, v)
        elif ch == "(":
            self.pos += 1
            base = self.parse_word(")")
            if self.pos >= len(self.text):
                self.error("expected ')'")
            self.pos += 1
        elif ch == "1":
            self.pos += 1
            base = ()
        else:
            for s in self.names:
                if self.text.startswith(s, self.pos):
                    self.pos += len(s)
                    base = (self.index[s] + 1,)
                    break
            else:
                self.error(f"unknown symbol {self.text[self.pos:].split()[0]!r}")
        m = _POWER.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            base = power(base, int(m.group(1)))
        return base


def parse_word(text: str, names: Sequence[str], reduce: bool = True) -> Word:
    """Parse a word; ``reduce=False`` keeps cancelling pairs (rewrite rules need them)."""
    p = _WordParser(text, names, reduce=reduce)
    w = p.parse_word()
    if p.pos < len(text):
        p.error(f"unexpected {text[p.pos]!r}")
    return w


def parse_presentation(text: str) -> Presentation:
    """Parse the ``gens:`` / ``rel:`` text format.

    >>> parse_presentation("gens: a b\\nrel: [a,b]").max_relator_length
    4
    """
    names: list[str] | None = None
    relators: list[Word] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        head, sep, body = line.partition(":")
        key = head.strip()
        if not sep or key not in ("gens", "rel"):
            raise PresentationSyntaxError("expected 'gens:' or 'rel:'", lineno, 1)
        col0 = len(head) + 1
        if key == "gens":
            if names is not None:
                raise PresentationSyntaxError("second 'gens:' line", lineno, 1)
            names = []
            for m in re.finditer(r"\S+", body):
                s = m.group()
                if s in names:
                    raise PresentationSyntaxError(f"duplicate generator name {s!r}", lineno, col0 + m.start() + 1)
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", s):
                    raise PresentationSyntaxError(f"invalid generator name {s!r}", lineno, col0 + m.start() + 1)
                names.append(s)
            continue
        if names is None:
            raise PresentationSyntaxError("'rel:' before 'gens:'", lineno, 1)
        if not body.strip():
            continue
        p = _WordParser(body, names, lineno, col0)
        w = p.parse_word()
        if p.pos < len(body):
            p.error(f"unexpected {body[p.pos]!r}")
        w = cyclic_reduce(w)
        if not w:
            raise PresentationSyntaxError("relator is trivial after free reduction", lineno, col0 + len(body) - len(body.lstrip()) + 1)
        relators.append(w)
    if names is None:
        raise PresentationSyntaxError("missing 'gens:' line", 1, 1)
    return Presentation.from_names(names, relators)
