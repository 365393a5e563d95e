import itertools

import pytest
import sympy
from hypothesis import given, strategies as st

from scirate.cayley import build_ball
from scirate.normal_forms import (
    FreeAbelianEngine,
    FreeGroupEngine,
    HeisenbergEngine,
    ProductZ2Engine,
    SolLatticeEngine,
    SurfaceGroupEngine,
    engine_from_name,
    make_builtin,
)
from scirate.presentations import commutator, conjugate, free_reduce, inverse


def words_over(n_gens, max_size=10):
    letters = [s * g for g in range(1, n_gens + 1) for s in (1, -1)]
    return st.lists(st.sampled_from(letters), max_size=max_size).map(tuple)


# Heisenberg: unitriangular integer matrices

HX = sympy.Matrix([[1, 1, 0], [0, 1, 0], [0, 0, 1]])
HY = sympy.Matrix([[1, 0, 0], [0, 1, 1], [0, 0, 1]])
H_GENS = {1: HX, -1: HX.inv(), 2: HY, -2: HY.inv()}


def heis_matrix(w):
    m = sympy.eye(3)
    for x in w:
        m = m * H_GENS[x]
    return m


@given(words_over(2, 12))
def test_heisenberg_matches_matrices(w):
    a, b, c = HeisenbergEngine().evaluate(w)
    assert heis_matrix(w) == sympy.Matrix([[1, a, c], [0, 1, b], [0, 0, 1]])


@given(words_over(2, 8), words_over(2, 8))
def test_heisenberg_multiply_invert(u, v):
    e = HeisenbergEngine()
    s, t = e.evaluate(u), e.evaluate(v)
    assert e.multiply(s, t) == e.evaluate(u + v)
    assert e.invert(s) == e.evaluate(inverse(u))


def test_heisenberg_commutator_is_central_at_distance_four():
    e = HeisenbergEngine()
    z = e.evaluate(commutator((1,), (2,)))
    assert z == (0, 0, 1)
    for g in (1, -1, 2, -2):
        assert e.evaluate((g,) + commutator((1,), (2,)) + (-g,)) == z
    ball = build_ball(e, 4)
    assert ball.dist[ball.index[z]] == 4


def test_heisenberg_sphere_sizes_match_matrix_bfs():
    radius = 5
    seen = {heis_matrix(()).as_immutable()}
    frontier = list(seen)
    sizes = [1]
    for _ in range(radius):
        nxt = []
        for m in frontier:
            for g in H_GENS.values():
                k = (m * g).as_immutable()
                if k not in seen:
                    seen.add(k)
                    nxt.append(k)
        sizes.append(len(nxt))
        frontier = nxt
    assert build_ball(HeisenbergEngine(), radius).sphere_sizes() == sizes


# Sol lattice: affine maps v -> A^k v + w

SOL_A = sympy.Matrix([[2, 1], [1, 1]])


def sol_gen(x):
    if abs(x) == 3:
        lin, tr = (SOL_A if x > 0 else SOL_A.inv()), sympy.zeros(2, 1)
    else:
        lin = sympy.eye(2)
        tr = sympy.Matrix([1, 0] if abs(x) == 1 else [0, 1]) * (1 if x > 0 else -1)
    m = sympy.eye(3)
    m[:2, :2] = lin
    m[:2, 2] = tr
    return m


def sol_matrix(w):
    m = sympy.eye(3)
    for x in w:
        m = m * sol_gen(x)
    return m


@given(words_over(3, 10))
def test_sol_matches_affine_matrices(w):
    e = SolLatticeEngine()
    v1, v2, k = e.evaluate(w)
    m = sol_matrix(w)
    assert m[:2, :2] == SOL_A ** k
    assert list(m[:2, 2]) == [v1, v2]


def test_sol_conjugation_relation():
    e = SolLatticeEngine()
    # t a t^-1 = a^2 b for A = [[2,1],[1,1]]
    assert e.evaluate((3, 1, -3)) == e.evaluate((1, 1, 2))
    assert e.evaluate((3, 2, -3)) == e.evaluate((1, 2))
    for r in e.presentation.relators:
        assert e.evaluate(r) == e.identity()


@pytest.mark.parametrize("matrix", [((1, 1), (0, 1)), ((2, 0), (0, 2)), ((1, 0), (0, 1))])
def test_sol_rejects_non_anosov(matrix):
    with pytest.raises(ValueError):
        SolLatticeEngine(matrix)


# surface groups: Tits-cone states against Dehn's algorithm


@given(words_over(4, 12))
def test_surface_tits_agrees_with_dehn(w):
    e = SurfaceGroupEngine(2)
    assert (e.evaluate(w) == e.identity()) == (e.dehn_reduce(w) == ())


@given(words_over(4, 5), words_over(4, 5), st.booleans())
def test_surface_conjugated_relators_are_trivial(g, h, sign):
    e = SurfaceGroupEngine(2)
    rel = e.presentation.relators[0]
    r = rel if sign else inverse(rel)
    w = conjugate(r, g) + conjugate(inverse(rel), h) + conjugate(rel, h)
    assert e.evaluate(w) == e.identity()
    assert e.dehn_reduce(w) == ()


def test_surface_ball_elements_distinct_under_dehn():
    e = SurfaceGroupEngine(2)
    ball = build_ball(e, 2)
    assert ball.sphere_sizes() == [1, 8, 56]
    words = [ball.word(i) for i in range(ball.size())]
    for u, v in itertools.combinations(words, 2):
        assert e.dehn_reduce(inverse(u) + v) != ()


def test_surface_genus_checks():
    with pytest.raises(ValueError):
        SurfaceGroupEngine(1)
    assert SurfaceGroupEngine(3).presentation.max_relator_length == 12


# abelian, free and product engines


@given(words_over(3, 12))
def test_free_abelian_is_exponent_sum(w):
    s = FreeAbelianEngine(3).evaluate(w)
    assert s == tuple(sum(1 if x == g else -1 if x == -g else 0 for x in w) for g in (1, 2, 3))


def test_altgens_share_states():
    e = engine_from_name("z3-altgens")
    assert e.presentation.rank == 4
    assert e.evaluate((4,)) == e.evaluate((1, 2)) == (1, 1, 0)
    for r in e.presentation.relators:
        assert e.evaluate(r) == e.identity()


@given(words_over(2, 12))
def test_free_group_state_is_reduced_word(w):
    assert FreeGroupEngine(2).evaluate(w) == free_reduce(w)


@given(words_over(4, 10))
def test_product_engine_splits(w):
    e = engine_from_name("f2xz2")
    g, p, q = e.evaluate(w)
    assert g == free_reduce([x for x in w if abs(x) <= 2])
    assert p == sum(1 if x == 3 else -1 if x == -3 else 0 for x in w)
    assert q == sum(1 if x == 4 else -1 if x == -4 else 0 for x in w)
    for r in e.presentation.relators:
        assert e.evaluate(r) == e.identity()


def test_builtin_relators_evaluate_to_identity():
    for name in ("z2", "z3", "free2", "heisenberg", "sol", "surface2", "cyclic3", "f2xz2", "z2-altgens"):
        e = engine_from_name(name)
        for r in e.presentation.relators:
            assert e.evaluate(r) == e.identity(), name


def test_unknown_family():
    with pytest.raises(ValueError):
        engine_from_name("lamplighter")
    with pytest.raises(ValueError):
        make_builtin("nope")
    assert isinstance(make_builtin("product_z2", inner=FreeGroupEngine(2)), ProductZ2Engine)
