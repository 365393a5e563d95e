import itertools

import pytest
from hypothesis import given, strategies as st

from scirate.cayley import HeuristicEngineError, build_ball
from scirate.normal_forms import FreeAbelianEngine, RewritingEngine, engine_from_name
from scirate.presentations import Presentation, free_reduce, parse_presentation
from scirate.rewriting import Budget, RewriteSystem, knuth_bendix


def all_words(letters, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(letters, repeat=n)


def test_cyclic_three_rules():
    p = parse_presentation("gens: a\nrel: a^3")
    rs = knuth_bendix(p)
    assert rs.confluent and rs.check_confluence()
    assert rs.reduce((1, 1, 1)) == ()
    assert rs.reduce((-1,)) == (-1,)
    assert rs.reduce((1, 1)) == (-1,)
    nfs = {rs.reduce(w) for w in all_words([1, -1], 6)}
    assert nfs == {(), (1,), (-1,)}


def test_z2_agrees_with_builtin_on_all_short_words():
    p = parse_presentation("gens: a b\nrel: [a,b]")
    rw = RewritingEngine.complete(p)
    fa = FreeAbelianEngine(2)
    assert rw.exact
    words = list(all_words([1, -1, 2, -2], 6))
    by_rw, by_fa = {}, {}
    for w in words:
        by_rw.setdefault(rw.evaluate(w), set()).add(fa.evaluate(w))
        by_fa.setdefault(fa.evaluate(w), set()).add(rw.evaluate(w))
    assert all(len(s) == 1 for s in by_rw.values())
    assert all(len(s) == 1 for s in by_fa.values())


@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8), st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8))
def test_free_group_rewriting_matches_free_reduction(u, v):
    rw = RewritingEngine.complete(Presentation.from_names(["a", "b"]))
    same = rw.evaluate(u) == rw.evaluate(v)
    assert same == (free_reduce(u) == free_reduce(v))


def perm_of(word):
    # S3 acting on {0,1,2}: a = transposition (0 1), b = 3-cycle (0 1 2)
    a = (1, 0, 2)
    b = (1, 2, 0)
    b_inv = (2, 0, 1)
    gens = {1: a, -1: a, 2: b, -2: b_inv}
    cur = (0, 1, 2)
    for x in word:
        g = gens[x]
        cur = tuple(g[i] for i in cur)
    return cur


def test_s3_against_permutation_oracle():
    p = parse_presentation("gens: a b\nrel: a^2\nrel: b^3\nrel: (ab)^2")
    rw = RewritingEngine.complete(p)
    assert rw.exact
    seen = {}
    for w in all_words([1, -1, 2, -2], 7):
        seen.setdefault(rw.evaluate(w), set()).add(perm_of(w))
    assert len(seen) == 6
    assert all(len(s) == 1 for s in seen.values())
    ball = build_ball(rw, 4)
    assert ball.size() == 6 and ball.exhausted


def test_cyclic_family_matches_modular_oracle():
    eng = engine_from_name("cyclic4")
    for w in all_words([1, -1], 8):
        assert (eng.evaluate(w) == eng.identity()) == (sum(w) % 4 == 0)


def test_budget_exhaustion_is_reported():
    # Baumslag-Solitar BS(1,2) has no finite shortlex system
    p = parse_presentation("gens: a t\nrel: t a t^-1 a^-2")
    rs = knuth_bendix(p, Budget(max_rules=30, max_rule_length=12, max_passes=5))
    assert not rs.confluent
    eng = RewritingEngine(p, rs)
    assert not eng.exact
    with pytest.raises(HeuristicEngineError):
        build_ball(eng, 2)
    ball = build_ball(eng, 2, allow_heuristic=True)
    assert ball.heuristic


def test_bad_budget():
    with pytest.raises(ValueError):
        knuth_bendix(parse_presentation("gens: a"), Budget(max_rules=0))


def test_text_roundtrip():
    p = parse_presentation("gens: a b\nrel: a^2\nrel: b^3\nrel: (ab)^2")
    rs = knuth_bendix(p)
    back = RewriteSystem.from_text(rs.to_text(), p.names)
    assert back.rules == rs.rules
    assert back.confluent == rs.confluent
    assert back.check_confluence()
    for w in all_words([1, -1, 2, -2], 5):
        assert back.reduce(w) == rs.reduce(w)


def test_rules_decrease_in_shortlex():
    rs = knuth_bendix(parse_presentation("gens: a b\nrel: a^2\nrel: b^3\nrel: (ab)^2"))
    for lhs, rhs in rs.rules:
        assert rs.key(rhs) < rs.key(lhs)
