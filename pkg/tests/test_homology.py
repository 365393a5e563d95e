import copy

import pytest
import sympy
from hypothesis import given, strategies as st
from sympy.matrices.normalforms import smith_normal_form as sympy_snf
from sympy.polys.domains import ZZ

from complexes import SimpleComplex, circle, octahedron, rp2, torus
from scirate.cayley import build_ball
from scirate.homology import (
    CertificateError,
    ViewHomology,
    abelian_invariants,
    find_obstructed_loop,
    h1_map,
    smith_normal_form,
    verify_cocycle,
)
from scirate.homotopy import fill_loop, pi1_presentation
from scirate.normal_forms import engine_from_name
from scirate.presentations import parse_presentation
from scirate.rips import build_rips

matrices = st.integers(1, 5).flatmap(
    lambda m: st.integers(1, 5).flatmap(
        lambda n: st.lists(st.lists(st.integers(-6, 6), min_size=n, max_size=n), min_size=m, max_size=m)
    )
)


def oracle_diag(rows):
    s = sympy_snf(sympy.Matrix(rows), domain=ZZ)
    return [abs(s[i, i]) for i in range(min(s.shape)) if s[i, i] != 0]


def matmul(a, b):
    return [[sum(x * y for x, y in zip(r, c)) for c in zip(*b)] for r in a]


@given(matrices)
def test_snf_matches_sympy(rows):
    n = len(rows[0])
    diag, Q, Qi = smith_normal_form(rows, n)
    assert diag == oracle_diag(rows)
    for a, b in zip(diag, diag[1:]):
        assert b % a == 0
    eye = [[int(i == j) for j in range(n)] for i in range(n)]
    assert matmul(Q, Qi) == eye
    AQ = matmul(rows, Q)
    for j in range(len(diag), n):
        assert all(r[j] == 0 for r in AQ)


def test_snf_edge_cases():
    assert smith_normal_form([], 3)[0] == []
    assert smith_normal_form([[0, 0]], 2)[0] == []
    assert smith_normal_form([[2, 0], [0, 3]], 2)[0] == [1, 6]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("gens: a b\nrel: [a,b]", (2, [])),
        ("gens: a\nrel: a^6", (0, [6])),
        ("gens: a b\nrel: a^2\nrel: b^3\nrel: (ab)^2", (0, [2])),
        ("gens: a b c d\nrel: [a,b][c,d]", (4, [])),
        ("gens: a b\nrel: a^2 b^4", (1, [2])),
    ],
)
def test_abelian_invariants(text, expected):
    assert abelian_invariants(parse_presentation(text)) == expected


@pytest.mark.parametrize(
    "make, rank, torsion",
    [
        (lambda: circle(5), 1, []),
        (lambda: SimpleComplex([(0, 1, 2)]), 0, []),
        (octahedron, 0, []),
        (rp2, 0, [2]),
        (torus, 2, []),
    ],
)
def test_small_complexes(make, rank, torsion):
    c = make()
    hom = ViewHomology(c)
    assert (hom.rank, hom.torsion) == (rank, torsion)
    p, _ = pi1_presentation(c, c.vertices()[0])
    assert abelian_invariants(p) == (rank, torsion)


def test_rp2_cocycle_is_mod_two():
    c = rp2()
    hom = ViewHomology(c)
    loop = find_obstructed_loop(c, hom)
    assert loop is not None
    assert loop["modulus"] == 2
    verify_cocycle(loop, c)


def test_torus_loops_obstructed():
    c = torus()
    hom = ViewHomology(c)
    cert = find_obstructed_loop(c, hom)
    verify_cocycle(cert, c)
    res = fill_loop(cert["loop"], c, closure=hom.closure, homology=hom, budget=100)
    assert res.status == "obstructed"


@pytest.fixture(scope="module")
def z2_skel():
    ball = build_ball(engine_from_name("z2"), 8)
    return build_rips(ball, 2, served=8)


@pytest.fixture(scope="module")
def z3_skel():
    ball = build_ball(engine_from_name("z3"), 8)
    return build_rips(ball, 2, served=8)


def test_z2_annulus_map_nonzero(z2_skel):
    outer = z2_skel.annulus(5, 8)
    inner = z2_skel.annulus(2, 8)
    hm = h1_map(outer, inner)
    assert hm.source_invariants == [0] and hm.target_invariants == [0]
    assert not hm.is_zero and hm.rank == 1
    assert hm.matrix[0][0] in (1, -1)
    verify_cocycle(hm.witness, inner)
    js = hm.to_json()
    assert js["rank"] == 1 and js["shape"] == [1, 1]


def test_z3_annulus_map_zero(z3_skel):
    hm = h1_map(z3_skel.annulus(4, 8), z3_skel.annulus(2, 8))
    assert hm.is_zero
    assert hm.witness is None


def test_h1_map_requires_containment(z2_skel):
    with pytest.raises(ValueError):
        h1_map(z2_skel.annulus(2, 8), z2_skel.annulus(4, 8))


def test_loop_class_is_additive(z2_skel):
    view = z2_skel.annulus(2, 8)
    hom = ViewHomology(view)
    ball = z2_skel.ball
    ring = [ball.index[p] for p in [(4, 0), (3, 1), (2, 2), (1, 3), (0, 4), (-1, 3), (-2, 2), (-3, 1),
                                    (-4, 0), (-3, -1), (-2, -2), (-1, -3), (0, -4), (1, -3), (2, -2), (3, -1)]]
    c1 = hom.loop_class(ring)
    assert c1 != hom.zero()
    assert hom.loop_class(ring + ring) == tuple(2 * x for x in c1)
    assert hom.loop_class(list(reversed(ring))) == tuple(-x for x in c1)


def test_cocycle_tampering_detected(z2_skel):
    view = z2_skel.annulus(2, 8)
    hom = ViewHomology(view)
    cert = find_obstructed_loop(view, hom)
    verify_cocycle(cert, view)
    bad = copy.deepcopy(cert)
    bad["cocycle"][0][2] += 1
    with pytest.raises(CertificateError):
        verify_cocycle(bad, view)
    bad = copy.deepcopy(cert)
    bad["cocycle"] = []
    with pytest.raises(CertificateError):
        verify_cocycle(bad, view)
    bad = copy.deepcopy(cert)
    bad["cocycle"][0][:2] = [0, 1]
    with pytest.raises(CertificateError):
        verify_cocycle(bad, view)
    # the certificate does not apply to a loop that bounds
    tri = list(next(view.triangles()))
    with pytest.raises(CertificateError):
        verify_cocycle(cert, view, tri)


def test_summary_fields(z2_skel):
    s = ViewHomology(z2_skel.annulus(3, 8)).summary()
    assert s["rank"] == 1 and s["torsion"] == []
    assert s["unknown_edges"] >= s["survivors"]
