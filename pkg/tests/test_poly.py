"""Exact polytope engine: conversions, membership, certification.

Cross-checks run along independent routes: facet lists against known
combinatorial families, vertex extremality against an LP characterization
(a vertex is a point not in the hull of the others), and both conversion
directions against each other via round-trips.
"""

from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellscope.errors import ResourceCapError, UnboundedPolytopeError
from bellscope.poly import (
    LinearEquality,
    LinearInequality,
    RationalPolytope,
    affine_rank,
    affinely_independent_subset,
    contains,
    enumerate_vertices,
    facets_to_text,
    hull_facets,
    is_facet_defining,
    linear_rank,
    matrix_rank,
    polytope_from_json,
    polytope_to_json,
    primitive_int_vector,
)


def cube_vertices(k):
    return [tuple(v) for v in product((0, 1), repeat=k)]


def cross_vertices(k):
    out = []
    for i in range(k):
        for sgn in (1, -1):
            v = [0] * k
            v[i] = sgn
            out.append(tuple(v))
    return out


# ---------------------------------------------------------------------------
# exact linear algebra
# ---------------------------------------------------------------------------


def test_matrix_rank_basics():
    assert matrix_rank([]) == 0
    assert matrix_rank([(0, 0)]) == 0
    assert matrix_rank([(1, 2), (2, 4)]) == 1
    assert matrix_rank([(1, 2), (2, 5)]) == 2
    assert matrix_rank([(Fraction(1, 3), 0), (0, Fraction(1, 7))]) == 2


def test_affine_rank_conventions():
    # identical points count once: rank 1, affine dimension 0
    assert affine_rank([(3, 4), (3, 4), (3, 4)]) == 1
    assert affine_rank([]) == 0
    # a k-simplex has k+1 affinely independent vertices
    assert affine_rank([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]) == 4
    # cube vertices span affine dimension 3, so rank 4
    assert affine_rank(cube_vertices(3)) == 4
    # translation invariance separates affine from linear rank
    assert linear_rank([(1, 1), (2, 2)]) == 1
    assert affine_rank([(1, 1), (2, 2)]) == 2


def test_affinely_independent_subset():
    pts = cube_vertices(3)
    sub = affinely_independent_subset(pts, 4)
    assert len(sub) == 4 and affine_rank(sub) == 4
    assert affinely_independent_subset([(0, 0), (1, 1), (2, 2)], 3) is None


def test_primitive_int_vector():
    assert primitive_int_vector((Fraction(1, 2), Fraction(1, 3))) == (3, 2)
    assert primitive_int_vector((4, -6)) == (2, -3)
    assert primitive_int_vector((0, 0)) == (0, 0)


# ---------------------------------------------------------------------------
# facet enumeration against known families
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_cube_facets(k):
    poly = hull_facets(cube_vertices(k))
    assert len(poly.facets) == 2 * k
    assert poly.affine_hull_dim == k
    assert not poly.equalities


@pytest.mark.parametrize("k", [2, 3, 4])
def test_cross_polytope_facets(k):
    poly = hull_facets(cross_vertices(k))
    assert len(poly.facets) == 2 ** k
    # every facet of the cross polytope is sum_i eps_i x_i <= 1
    for f in poly.facets:
        assert f.rhs == 1 and sorted(map(abs, f.coeffs)) == [1] * k


def test_simplex_facets():
    pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    poly = hull_facets(pts)
    assert len(poly.facets) == 4


def test_lower_dimensional_hull_reports_equalities():
    # unit square inside the plane z = 2
    pts = [(0, 0, 2), (1, 0, 2), (0, 1, 2), (1, 1, 2)]
    poly = hull_facets(pts)
    assert poly.affine_hull_dim == 2
    assert len(poly.equalities) == 1
    eq = poly.equalities[0]
    assert (eq.coeffs, eq.rhs) == ((0, 0, 1), 2)
    assert len(poly.facets) == 4


def test_single_point_hull():
    poly = hull_facets([(3, 5)])
    assert poly.affine_hull_dim == 0
    assert len(poly.equalities) == 2
    assert all(e.holds((3, 5)) for e in poly.equalities)


def test_interior_points_do_not_change_hull():
    pts = cube_vertices(2) + [(Fraction(1, 2), Fraction(1, 2))]
    poly = hull_facets(pts)
    assert len(poly.facets) == 4


def test_hull_duplicate_points_collapse():
    poly = hull_facets([(0, 0), (1, 0), (0, 1), (1, 0)])
    assert len(poly.vertices) == 3


def test_ray_cap_raises_with_progress():
    with pytest.raises(ResourceCapError) as exc:
        hull_facets(cube_vertices(4), cap_rays=3)
    assert exc.value.unit == "constraints"
    assert exc.value.progress >= 1


# ---------------------------------------------------------------------------
# vertex enumeration
# ---------------------------------------------------------------------------


def test_cube_vertex_enumeration():
    k = 3
    ineqs = []
    for i in range(k):
        e = [0] * k
        e[i] = 1
        ineqs.append((tuple(e), 1))
        ineqs.append((tuple(-x for x in e), 0))
    verts = enumerate_vertices(ineqs)
    assert set(verts) == set(tuple(map(Fraction, v)) for v in cube_vertices(k))


def test_vertex_enumeration_with_equalities():
    # triangle cut out of the simplex plane x + y + z = 1
    ineqs = [((-1, 0, 0), 0), ((0, -1, 0), 0), ((0, 0, -1), 0)]
    eqs = [((1, 1, 1), 1)]
    verts = enumerate_vertices(ineqs, equalities=eqs)
    assert set(verts) == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}


def test_vertex_enumeration_single_point():
    verts = enumerate_vertices([((1, 0), 1), ((0, 1), 1)],
                               equalities=[((1, 0), 1), ((0, 1), 1)])
    assert verts == ((1, 1),)


def test_vertex_enumeration_infeasible():
    assert enumerate_vertices([((1, 0), 0), ((-1, 0), -1)], dim=2) == ()
    # contradictory equalities
    assert enumerate_vertices([((0, 1), 1)],
                              equalities=[((1, 0), 0), ((1, 0), 1)]) == ()


def test_vertex_enumeration_unbounded_raises():
    with pytest.raises(UnboundedPolytopeError):
        enumerate_vertices([((-1, 0), 0), ((0, -1), 0)], dim=2)
    with pytest.raises(UnboundedPolytopeError):
        # a full line: |y| <= 1 leaves x free
        enumerate_vertices([((0, 1), 1), ((0, -1), 1)], dim=2)


def test_roundtrip_cube_and_cross():
    for pts in (cube_vertices(3), cross_vertices(3)):
        poly = hull_facets(pts)
        back = enumerate_vertices(poly.facets, equalities=poly.equalities,
                                  dim=poly.dim_ambient)
        assert set(back) == {tuple(map(Fraction, p)) for p in pts}


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def test_contains_facet_route_vs_lp_route():
    pts = cube_vertices(3)
    with_facets = hull_facets(pts)
    vertex_only = RationalPolytope(dim_ambient=3, vertices=tuple(
        tuple(map(Fraction, p)) for p in pts))
    samples = [(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)),
               (0, 0, 0), (1, 1, 1),
               (Fraction(1, 3), 0, 1),
               (Fraction(3, 2), 0, 0),
               (1, 1, Fraction(1_000_001, 1_000_000)),
               (-Fraction(1, 10 ** 12), 0, 0)]
    for p in samples:
        assert contains(with_facets, p) == contains(vertex_only, p)
    assert contains(with_facets, (1, 1, 1))
    assert not contains(with_facets, (1, 1, Fraction(1_000_001, 1_000_000)))


def test_contains_exact_on_boundary():
    poly = RationalPolytope(dim_ambient=2, vertices=(
        (Fraction(0), Fraction(0)), (Fraction(1), Fraction(0)),
        (Fraction(0), Fraction(1))))
    assert contains(poly, (Fraction(1, 2), Fraction(1, 2)))
    assert not contains(poly, (Fraction(1, 2) + Fraction(1, 2 ** 60),
                               Fraction(1, 2)))


def test_contains_dimension_mismatch():
    poly = hull_facets(cube_vertices(2))
    with pytest.raises(ValueError):
        contains(poly, (0, 0, 0))


# ---------------------------------------------------------------------------
# facet certification
# ---------------------------------------------------------------------------


def test_is_facet_defining_on_cube():
    poly = hull_facets(cube_vertices(3))
    for f in poly.facets:
        chk = is_facet_defining(f, poly)
        assert chk.is_facet and chk.valid
        assert len(chk.certificate) == 3
        assert affine_rank(chk.certificate) == 3
        assert all(f.is_tight(v) for v in chk.certificate)


def test_is_facet_defining_rejects_valid_non_facet():
    poly = hull_facets(cube_vertices(3))
    # valid but tight only on one vertex (a corner cut)
    corner = LinearInequality((1, 1, 1), 3)
    chk = is_facet_defining(corner, poly)
    assert chk.valid and not chk.is_facet
    assert chk.tight_count == 1
    # not valid at all
    bad = LinearInequality((1, 0, 0), 0)
    chk2 = is_facet_defining(bad, poly)
    assert not chk2.valid and not chk2.is_facet


def test_is_facet_defining_rejects_affine_hull():
    # square in the z = 0 plane: z <= 0 is tight everywhere, not a facet
    pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)]
    poly = hull_facets(pts)
    chk = is_facet_defining(LinearInequality((0, 0, 1), 0), poly)
    assert chk.valid and not chk.is_facet
    assert chk.tight_count == 4


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_polytope_json_roundtrip():
    poly = hull_facets([(0, 0), (1, 0), (0, Fraction(1, 2))])
    back = polytope_from_json(polytope_to_json(poly))
    assert back.vertices == poly.vertices
    assert back.facets == poly.facets
    assert back.equalities == poly.equalities
    assert back.affine_hull_dim == poly.affine_hull_dim


def test_facets_text_roundtrip():
    poly = hull_facets(cube_vertices(2))
    text = facets_to_text(poly)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    assert len(lines) == 4
    parsed = sorted(LinearInequality.from_text(ln) for ln in lines)
    assert parsed == sorted(poly.facets)


# ---------------------------------------------------------------------------
# property: DD output is a correct irredundant description
# ---------------------------------------------------------------------------


def lp_extreme_points(pts):
    """Oracle: p is extreme iff p is not in the hull of the other points."""
    out = set()
    for i, p in enumerate(pts):
        others = pts[:i] + pts[i + 1:]
        poly = RationalPolytope(dim_ambient=len(p), vertices=tuple(others))
        if not others or not contains(poly, p):
            out.add(tuple(map(Fraction, p)))
    return out


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_dd_roundtrip_random_point_sets(data):
    dim = data.draw(st.integers(2, 3))
    npts = data.draw(st.integers(dim + 1, 8))
    pts = data.draw(st.lists(st.tuples(*[st.integers(-4, 4)] * dim),
                             min_size=npts, max_size=npts, unique=True))
    poly = hull_facets(pts)
    # every input point lies inside; every facet is certified
    for p in pts:
        assert contains(poly, p)
    for f in poly.facets:
        assert is_facet_defining(f, poly)
    # vertices returned by the reverse conversion = LP-extreme input points
    back = enumerate_vertices(poly.facets, equalities=poly.equalities,
                              dim=dim)
    assert set(back) == lp_extreme_points(pts)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_membership_agrees_between_routes(data):
    pts = data.draw(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
                             min_size=3, max_size=7, unique=True))
    poly = hull_facets(pts)
    vertex_only = RationalPolytope(dim_ambient=2, vertices=poly.vertices)
    q = data.draw(st.tuples(
        st.fractions(min_value=-4, max_value=4, max_denominator=8),
        st.fractions(min_value=-4, max_value=4, max_denominator=8)))
    assert contains(poly, q) == contains(vertex_only, q)
