import os

import pytest
from hypothesis import given, strategies as st

from scirate.cayley import BudgetExceeded, build_ball, load_ball, save_ball
from scirate.normal_forms import engine_from_name
from scirate.presentations import free_reduce


def octahedral(r):
    return (2 * r + 1) * (2 * r * r + 2 * r + 3) // 3


def test_z2_counts():
    ball = build_ball(engine_from_name("z2"), 12)
    for r in range(13):
        assert ball.size(r) == 2 * r * r + 2 * r + 1


def test_z3_counts():
    ball = build_ball(engine_from_name("z3"), 8)
    assert [ball.size(r) for r in range(9)] == [octahedral(r) for r in range(9)]
    assert ball.sphere_sizes()[:4] == [1, 6, 18, 38]


def test_free_group_counts():
    ball = build_ball(engine_from_name("free2"), 8)
    assert [ball.size(r) for r in range(9)] == [2 * 3**r - 1 for r in range(9)]


def test_altgens_z2_sphere_is_hexagonal():
    ball = build_ball(engine_from_name("z2-altgens"), 6)
    assert ball.sphere_sizes() == [1] + [6 * r for r in range(1, 7)]


def test_geodesic_witness_words():
    ball = build_ball(engine_from_name("heisenberg"), 5)
    eng = ball.engine
    for i in range(ball.size()):
        w = ball.word(i)
        assert len(w) == ball.dist[i]
        assert eng.evaluate(w) == ball.states[i]
        assert ball.locate(w) == i


def test_prefix_property():
    ball = build_ball(engine_from_name("surface2"), 3)
    assert ball.dist == sorted(ball.dist)
    for r in range(4):
        assert ball.prefix(r) == sum(ball.sphere_sizes()[: r + 1])


@given(st.integers(0, 60), st.integers(0, 60))
def test_pair_distance_is_translation_invariant_metric(i, j):
    ball = build_ball(engine_from_name("z2"), 5)
    d = ball.pair_distance(i, j)
    a, b = ball.states[i], ball.states[j]
    true = abs(a[0] - b[0]) + abs(a[1] - b[1])
    assert d == (true if true <= 5 else None)
    assert ball.pair_distance(j, i) == d


def test_pair_distance_vs_restricted_bfs():
    # restricted BFS inside the ball is an upper bound, exact for nearby pairs near the centre
    ball = build_ball(engine_from_name("free2"), 6)
    for i in range(ball.prefix(2)):
        for j in range(ball.prefix(2)):
            d = ball.pair_distance(i, j)
            assert d == ball.restricted_distance(i, j)
    ball = build_ball(engine_from_name("heisenberg"), 6)
    for i in range(0, ball.prefix(3), 7):
        for j in range(0, ball.prefix(3), 5):
            d = ball.pair_distance(i, j)
            r = ball.restricted_distance(i, j)
            if d is not None and r is not None:
                assert d <= r


def test_free_group_distances_are_reduced_lengths():
    ball = build_ball(engine_from_name("free2"), 6)
    for i in range(0, ball.prefix(3), 3):
        for j in range(0, ball.prefix(3), 4):
            u, v = ball.states[i], ball.states[j]
            k = len(free_reduce(tuple(-x for x in reversed(u)) + v))
            assert ball.pair_distance(i, j) == (k if k <= 6 else None)


def test_neighborhood():
    ball = build_ball(engine_from_name("z2"), 6)
    centre = ball.index[(2, 1)]
    nb = ball.neighborhood(centre, 2)
    expected = sorted(ball.index[(2 + x, 1 + y)] for x in range(-2, 3) for y in range(-2, 3) if abs(x) + abs(y) <= 2)
    assert nb == expected
    with pytest.raises(ValueError):
        ball.neighborhood(centre, 7)


def test_finite_group_exhausts():
    ball = build_ball(engine_from_name("cyclic4"), 5)
    assert ball.exhausted
    assert ball.sphere_sizes() == [1, 2, 1, 0, 0, 0]
    assert not build_ball(engine_from_name("z2"), 3).exhausted
    assert not build_ball(engine_from_name("cyclic6"), 2).exhausted
    assert build_ball(engine_from_name("cyclic6"), 3).exhausted


def test_budget():
    with pytest.raises(BudgetExceeded):
        build_ball(engine_from_name("free2"), 8, budget_states=1000)
    assert build_ball(engine_from_name("free2"), 5, budget_states=485).size() == 485


def test_bad_radius():
    with pytest.raises(ValueError):
        build_ball(engine_from_name("z2"), -1)


def test_cache_roundtrip(tmp_path):
    eng = engine_from_name("heisenberg")
    ball = build_ball(eng, 4)
    path = str(tmp_path / "b.cache")
    save_ball(ball, path)
    back = load_ball(path, eng, 4)
    assert back is not None
    assert back.states == ball.states and back.dist == ball.dist and back.nbr == ball.nbr
    assert back.pair_distance(5, 30) == ball.pair_distance(5, 30)
    assert load_ball(path, eng, 5) is None
    assert load_ball(path, engine_from_name("z2"), 4) is None
    assert load_ball(str(tmp_path / "missing"), eng, 4) is None


def test_cache_rejects_corruption(tmp_path):
    eng = engine_from_name("z2")
    path = str(tmp_path / "b.cache")
    save_ball(build_ball(eng, 3), path)
    size = os.path.getsize(path)
    with open(path, "r+b") as fh:
        fh.seek(size - 5)
        fh.write(b"\x00\x01")
    assert load_ball(path, eng, 3) is None
    with open(path, "wb") as fh:
        fh.write(b"not a cache")
    assert load_ball(path, eng, 3) is None
