import random
from fractions import Fraction

import pytest

from scirate.cayley import build_ball
from scirate.homotopy import Closure, replay, trace_from_closure
from scirate.normal_forms import engine_from_name
from scirate.qi import (
    TableGap,
    TransportError,
    audit,
    builtin_qi,
    compose,
    epsilon_for,
    interpolate_loop,
    m_radius,
    required_a,
    sample_annulus_loop,
    transport_disk,
)
from scirate.rips import build_rips


@pytest.fixture(scope="module")
def balls():
    return {
        "z2": build_ball(engine_from_name("z2"), 20),
        "z2alt": build_ball(engine_from_name("z2-altgens"), 20),
        "z1": build_ball(engine_from_name("z1"), 41),
    }


def test_change_of_generators_fit(balls):
    q = builtin_qi("change_of_generators", balls["z2"], balls["z2alt"], 10)
    assert (q.lam, q.C, q.k) == (2, 0, 2)
    rep = audit(q, n_pairs=10_000)
    assert rep["passed"] and rep["checked"] > 0


def test_identity_fit(balls):
    q = builtin_qi("identity", balls["z2"], balls["z2"], 10)
    assert (q.lam, q.C) == (1, 0)
    assert audit(q)["passed"]


def test_finite_index_fit(balls):
    q = builtin_qi("finite_index", balls["z1"], balls["z1"], 20, index=2)
    assert (q.lam, q.C) == (2, 1)
    assert audit(q)["passed"]


def test_audit_catches_understated_constants(balls):
    q = builtin_qi("change_of_generators", balls["z2"], balls["z2alt"], 6)
    q.lam = Fraction(3, 2)
    rep = audit(q)
    assert not rep["passed"]
    assert {v["inequality"] for v in rep["violations"]} >= {"g_upper"}


def test_product_embedding_is_not_a_qi():
    H = build_ball(engine_from_name("free2"), 6)
    G = build_ball(engine_from_name("f2xz2"), 6)
    Cs = [builtin_qi("product_embedding", H, G, r).C for r in (2, 3, 4)]
    assert Cs == sorted(Cs) and Cs[0] < Cs[-1]


def test_compose_bounds(balls):
    q1 = builtin_qi("change_of_generators", balls["z2"], balls["z2alt"], 8)
    q2 = builtin_qi("identity", balls["z2alt"], balls["z2alt"], 8)
    q = compose(q1, q2)
    assert q.lam <= q1.lam * q2.lam
    assert q.C <= q2.lam * q1.C + q2.C + q2.lam * q1.C + q1.C
    with pytest.raises(ValueError):
        compose(q2, builtin_qi("identity", balls["z1"], balls["z1"], 3))


def test_unknown_kind(balls):
    with pytest.raises(ValueError):
        builtin_qi("bilipschitz", balls["z2"], balls["z2"], 2)


def test_m_radius():
    ident = lambda r: r
    assert m_radius(2, 1, ident, 5) == 33
    for R in range(6):
        assert m_radius(1, 0, ident, R) == R
    table = {15: 9}
    assert m_radius(2, 1, table, 5) == 2 * 9 + 3
    with pytest.raises(TableGap) as exc:
        m_radius(2, 1, table, 6)
    assert exc.value.argument == 17
    # fractional C rounds the argument up
    assert m_radius(2, Fraction(1, 2), ident, 2) == 16  # N(ceil(6.5)) = 7, then ceil(14 + 3/2)


def test_epsilon_and_required_a():
    assert epsilon_for(2, 0, 4) == 2
    assert epsilon_for(2, 1, 4) == 1
    assert required_a(2, 0, 2) == 8
    assert required_a(2, 1, 1) == 8
    with pytest.raises(ValueError):
        epsilon_for(2, 1, 2)


def test_interpolation(balls):
    ball = balls["z2"]
    idx = ball.index
    loop = [idx[(0, 0)], idx[(1, 0)], idx[(1, 1)]]
    refined, moves = interpolate_loop(ball, loop, 2)
    assert refined == loop and moves == []
    # a step of length 5 at eps = 2 becomes 3 steps
    refined, moves = interpolate_loop(ball, [idx[(0, 0)], idx[(5, 0)]], 2)
    steps = [ball.pair_distance(refined[i], refined[i + 1]) for i in range(len(refined) - 1)]
    assert steps[:3] == [2, 2, 1]
    # commutator loop at scale 4 with eps = 2
    sq = [idx[(0, 0)], idx[(4, 0)], idx[(4, 4)], idx[(0, 4)]]
    refined, moves = interpolate_loop(ball, sq, 2)
    assert len(refined) == 8
    assert all(ball.pair_distance(refined[i], refined[(i + 1) % 8]) <= 2 for i in range(8))
    # the expand moves take the loop to the refined one through triangles of P_4
    cur = list(sq)
    from scirate.homotopy import apply_move

    for m in moves:
        cur = apply_move(cur, m)
    assert cur == refined


def _closure_fill(closure):
    def fill(loop):
        got = trace_from_closure(loop, closure)
        return None if got is None else got[0]

    return fill


def test_transport_identity_is_trivial(balls):
    ball = balls["z2"]
    q = builtin_qi("identity", ball, ball, 6)
    skel = build_rips(ball, 2, served=12)
    closure = Closure(skel)
    idx = ball.index
    loop = [idx[(3, 0)], idx[(4, 1)], idx[(3, 2)], idx[(2, 1)]]
    td = transport_disk(q, loop, 2, 2, _closure_fill(closure), skel)
    assert td.refined_loop == loop and td.image_loop == loop
    assert td.moves == td.source_moves
    assert td.max_triangle <= 2


def test_transport_change_of_generators(balls):
    H, G = balls["z2"], balls["z2alt"]
    q = builtin_qi("change_of_generators", H, G, 8)
    d = 4
    eps = epsilon_for(q.k, q.C, d)
    a = required_a(q.k, q.C, eps)
    g_skel = build_rips(G, d, served=14)
    closure = Closure(g_skel.annulus(1, 14))
    idx = H.index
    loop = [idx[(4, 0)], idx[(8, 0)], idx[(8, 4)], idx[(4, 4)]]
    td = transport_disk(q, loop, a, d, _closure_fill(closure), g_skel)
    assert td.max_triangle <= a
    replay(loop, td.moves, build_rips(H, a, served=20, materialize=False))
    assert td.min_distance >= td.avoidance_bound
    js = td.to_json()
    assert js["a"] == a and js["eps"] == eps


def test_transport_rejects_small_a(balls):
    q = builtin_qi("change_of_generators", balls["z2"], balls["z2alt"], 6)
    with pytest.raises(ValueError):
        transport_disk(q, [0, 1], 3, 4, lambda loop: [], None)


def test_transport_reports_failed_fill(balls):
    q = builtin_qi("identity", balls["z2"], balls["z2"], 6)
    skel = build_rips(balls["z2"], 2, served=10)
    idx = balls["z2"].index
    loop = [idx[(3, 0)], idx[(4, 1)], idx[(3, 2)], idx[(2, 1)]]
    with pytest.raises(TransportError):
        transport_disk(q, loop, 2, 2, lambda loop: None, skel)


def test_sample_annulus_loop(balls):
    ball = balls["z2"]
    rng = random.Random(0)
    for _ in range(10):
        loop = sample_annulus_loop(rng, ball, 3, 4, 7, 6)
        assert loop is not None
        assert all(4 < ball.dist[v] <= 7 for v in loop)
        n = len(loop)
        assert all(ball.pair_distance(loop[i], loop[(i + 1) % n]) <= 3 for i in range(n))
