import itertools
import json
from fractions import Fraction

import pytest

from bellscope.errors import CompositeModulusError, ResourceCapError
from bellscope.ffun import FiniteFunction, Scenario, correlator_vertex, \
    lhv_vertices
from bellscope.ineq import catalog
from bellscope.nosig import (
    CorrelatorProjection,
    FullDistribution,
    correlator_body_vertices,
    correlator_projection,
    dense_index,
    deterministic_local_boxes,
    genbox,
    ns_constraints,
    ns_vertices,
    split_box,
    svetlichny_hull,
    unique_ns_box_check,
)
from bellscope.poly import LinearInequality, affine_rank, is_facet_defining
from bellscope.qopt import ww_bound


def fn(n, c, d, rule):
    sc = Scenario(n, c, d)
    return FiniteFunction(sc, tuple(rule(s) % d for s in sc.inputs()))


PR2 = fn(2, 2, 2, lambda s: s[0] * s[1] + 1)


# ---------------------------------------------------------------------------
# constraint system
# ---------------------------------------------------------------------------

def test_ns_affine_dimensions():
    for (n, c, d), want in [((2, 2, 2), 8), ((1, 2, 2), 2),
                            ((3, 2, 2), 26), ((2, 2, 3), 24)]:
        sys = ns_constraints(Scenario(n, c, d))
        assert sys.ambient_dim == d ** n * c ** n
        assert sys.affine_dim == want
        assert len(sys.positivity) == sys.ambient_dim


def test_single_party_has_only_normalization():
    sys = ns_constraints(Scenario(1, 2, 2))
    assert len(sys.equalities) == 2
    assert all(eq.rhs == 1 for eq in sys.equalities)


def test_dimension_cross_check_against_local_span():
    # product-deterministic behaviours span the whole NS affine hull
    for n, c, d in [(2, 2, 2), (3, 2, 2), (2, 2, 3)]:
        sys = ns_constraints(Scenario(n, c, d))
        pts = [b.probs for b in deterministic_local_boxes(Scenario(n, c, d))]
        assert affine_rank(pts) - 1 == sys.affine_dim


def test_constraints_hold_on_boxes():
    sys = ns_constraints(Scenario(2, 2, 2))
    for dist in [genbox(PR2), next(deterministic_local_boxes(PR2.scenario))]:
        assert all(eq.holds(dist.probs) for eq in sys.equalities)
        assert all(iq.holds(dist.probs) for iq in sys.positivity)


def test_ambient_cap():
    with pytest.raises(ResourceCapError):
        ns_constraints(Scenario(5, 2, 4))


# ---------------------------------------------------------------------------
# FullDistribution
# ---------------------------------------------------------------------------

def test_distribution_validation():
    sc = Scenario(1, 2, 2)
    with pytest.raises(ValueError):
        FullDistribution(sc, (1, 0, 0))
    with pytest.raises(ValueError):
        FullDistribution(sc, (2, -1, 0, 1))
    with pytest.raises(ValueError):
        FullDistribution(sc, (Fraction(1, 2), 0, Fraction(1, 2), Fraction(1, 2)))
    ok = FullDistribution(sc, (1, 0, 0, 1))
    assert ok.prob((0,), (0,)) == 1
    assert ok.prob((1,), (0,)) == 0


def test_dense_index_is_output_major():
    sc = Scenario(2, 2, 2)
    assert dense_index(sc, (0, 0), (0, 0)) == 0
    assert dense_index(sc, (0, 0), (0, 1)) == 1
    assert dense_index(sc, (0, 1), (0, 0)) == 4
    assert dense_index(sc, (1, 1), (1, 1)) == 15


def test_json_round_trip():
    box = genbox(PR2)
    text = box.to_json()
    obj = json.loads(text)
    assert obj["scenario"] == {"n": 2, "c": 2, "d": 2}
    assert obj["probs"][dense_index(PR2.scenario, (0, 0), (0, 0))] == [0, 1]
    back = FullDistribution.from_json(text)
    assert back == box


def test_signalling_detected():
    # first output copies the second input: marginal over site 2 shifts
    sc = Scenario(2, 2, 2)
    probs = {((s[1], 0), s): Fraction(1) for s in sc.inputs()}
    dist = FullDistribution.from_map(sc, probs)
    assert not dist.is_nonsignalling()
    assert genbox(PR2).is_nonsignalling()


# ---------------------------------------------------------------------------
# vertex enumeration
# ---------------------------------------------------------------------------

def test_ns_vertices_222():
    verts = ns_vertices(Scenario(2, 2, 2))
    assert len(verts) == 24
    deterministic = [v for v in verts if set(v) <= {0, 1}]
    boxes = [v for v in verts if Fraction(1, 2) in set(v)]
    assert len(deterministic) == 16 and len(boxes) == 8
    for v in verts:
        assert FullDistribution(Scenario(2, 2, 2), v).is_nonsignalling()
    assert genbox(PR2).probs in set(verts)


# ---------------------------------------------------------------------------
# uniqueness of the box completion
# ---------------------------------------------------------------------------

def test_pr_vertex_has_unique_completion():
    verdict = unique_ns_box_check(PR2)
    assert verdict.unique and verdict.matches_uniform_box
    assert verdict.vertex_count == 1
    assert verdict.split_witness is None
    assert set(verdict.vertices[0]) == {Fraction(0), Fraction(1, 2)}


def test_ternary_product_vertex_unique():
    f = fn(2, 2, 3, lambda s: s[0] * s[1] + 1)
    verdict = unique_ns_box_check(f)
    assert verdict.unique and verdict.matches_uniform_box
    assert set(verdict.vertices[0]) == {Fraction(0), Fraction(1, 3)}


def test_bipartite_linear_vertex_not_unique():
    f = fn(3, 2, 2, lambda s: s[0] * s[1])
    verdict = unique_ns_box_check(f)
    assert not verdict.unique and verdict.vertex_count >= 2
    split = verdict.split_witness
    assert split is not None and split.probs != genbox(f).probs
    assert split.is_nonsignalling()
    assert set(v for v in split.probs if v) == {Fraction(1, 2)}
    assert correlator_projection(split).vector == \
        tuple(Fraction(v) for v in correlator_vertex(f))


def test_two_party_linear_vertex_has_two_completions():
    f = fn(2, 2, 2, lambda s: s[0] + s[1])
    verdict = unique_ns_box_check(f)
    assert verdict.vertex_count == 2
    # the split of a two-party linear function is a deterministic product box
    assert set(verdict.split_witness.probs) <= {Fraction(0), Fraction(1)}


def test_composite_modulus_refused():
    f = fn(2, 2, 4, lambda s: s[0] * s[1])
    with pytest.raises(CompositeModulusError):
        unique_ns_box_check(f)


def test_constrained_vertices_lie_on_ns_vertices():
    # the vertex-compatible set is a face of NS: its vertices are NS vertices
    sc = Scenario(2, 2, 2)
    ns_set = set(ns_vertices(sc))
    for table in itertools.product((0, 1), repeat=4):
        verdict = unique_ns_box_check(FiniteFunction(sc, table))
        assert set(verdict.vertices) <= ns_set


# ---------------------------------------------------------------------------
# reachability of correlator vertices
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,c,d", [(2, 2, 2), (2, 2, 3), (3, 2, 2)])
def test_every_correlator_vertex_reachable(n, c, d):
    sc = Scenario(n, c, d)
    for table in itertools.product(range(d), repeat=sc.input_count):
        f = FiniteFunction(sc, table)
        box = genbox(f)
        assert box.is_nonsignalling()
        assert correlator_projection(box).vector == \
            tuple(Fraction(v) for v in correlator_vertex(f))


def test_projection_is_affine_in_the_behaviour():
    a, b = genbox(PR2), genbox(fn(2, 2, 2, lambda s: 0))
    mix = FullDistribution(PR2.scenario, tuple(
        Fraction(1, 3) * x + Fraction(2, 3) * y
        for x, y in zip(a.probs, b.probs)))
    pa, pb, pm = (correlator_projection(t).vector for t in (a, b, mix))
    assert pm == tuple(Fraction(1, 3) * x + Fraction(2, 3) * y
                       for x, y in zip(pa, pb))


def test_split_box_requires_a_split():
    with pytest.raises(ValueError):
        split_box(PR2)


# ---------------------------------------------------------------------------
# the partial-separability hull
# ---------------------------------------------------------------------------

def test_svetlichny_hull_three_parties():
    sc = Scenario(3, 2, 2)
    hull = svetlichny_hull(sc, with_facets=True)
    assert len(hull.vertices) == 64
    assert len(hull.facets) == 208
    assert hull.affine_hull_dim == 8

    sv = catalog("svetlichny3")
    values = [sum(b * x for b, x in zip(sv.beta, v)) for v in hull.vertices]
    assert max(values) == 2
    chk = is_facet_defining(LinearInequality.normalized(sv.beta, sv.rhs), hull)
    assert chk.is_facet and chk.valid

    # local polytope strictly inside: every LHV vertex present, and some
    # hull vertex breaks an LHV-facet bound
    local = set(lhv_vertices(sc))
    assert local <= set(hull.vertices)
    mer = catalog("mermin", n=3)
    assert max(sum(b * x for b, x in zip(mer.beta, v))
               for v in hull.vertices) == 3 > mer.rhs

    # hull strictly inside the correlator body: the algebraic-max vertex
    # scores 4 on the partial-separability expression, above the hull max 2
    body = correlator_body_vertices(sc)
    assert max(sum(b * x for b, x in zip(sv.beta, v)) for v in body) == 4


def test_svetlichny_hull_four_parties():
    sc = Scenario(4, 2, 2)
    hull = svetlichny_hull(sc)
    assert len(hull.vertices) == 1856
    assert set(lhv_vertices(sc)) <= set(hull.vertices)


def test_partial_separability_quantum_value():
    # the closed-form optimum over product measurements on GHZ is 2*sqrt(2),
    # corroborated by the dense tripartite oracle in the qopt tests
    report = ww_bound(catalog("svetlichny3"), restarts=8, seed=11)
    assert abs(report.value - 2 * 2 ** 0.5) < 1e-6


def test_body_enumeration_cap():
    with pytest.raises(ResourceCapError):
        correlator_body_vertices(Scenario(3, 2, 2), cap=10)
