"""Relabeling group: algebra, grid action, invariants, orbits."""

import random
from fractions import Fraction

import pytest

from bellscope.errors import ResourceCapError, ScenarioMismatchError
from bellscope.ffun import Scenario, lhv_vertices
from bellscope.sym import (
    SymmetryOp,
    apply_to_inequality,
    apply_to_point,
    canonical_form,
    compose,
    generators,
    grid_permutation,
    identity_op,
    inverse,
    orbit_of,
    orbit_partition,
)

CHSH = ((1, 1, 1, -1), 2)


def random_op(sc, rng):
    """A random group element as a word in the generators."""
    gens = generators(sc)
    op = identity_op(sc)
    for _ in range(rng.randint(1, 6)):
        op = compose(rng.choice(gens), op)
    return op


# ---------------------------------------------------------------------------
# group algebra
# ---------------------------------------------------------------------------


def test_validation():
    sc = Scenario(2, 2, 2)
    with pytest.raises(ValueError):
        SymmetryOp(sc, (0, 0), (0, 0), ((0, 0), (0, 0)))
    with pytest.raises(ValueError):
        SymmetryOp(sc, (0, 1), (0, 2), ((0, 0), (0, 0)))
    with pytest.raises(ValueError):
        SymmetryOp(sc, (0, 1), (0, 0), ((0,), (0, 0)))
    with pytest.raises(ScenarioMismatchError):
        compose(identity_op(sc), identity_op(Scenario(2, 2, 3)))


@pytest.mark.parametrize("n,c,d", [(2, 2, 2), (2, 2, 3), (3, 2, 2), (2, 3, 3)])
def test_compose_matches_grid_permutations(n, c, d):
    sc = Scenario(n, c, d)
    rng = random.Random(7 * n + 3 * c + d)
    for _ in range(25):
        g1, g2 = random_op(sc, rng), random_op(sc, rng)
        p1, p2 = grid_permutation(g1), grid_permutation(g2)
        composed = grid_permutation(compose(g2, g1))
        assert composed == tuple(p2[p1[i]] for i in range(len(p1)))


@pytest.mark.parametrize("n,c,d", [(2, 2, 2), (3, 2, 2), (2, 3, 3)])
def test_inverse_and_identity(n, c, d):
    sc = Scenario(n, c, d)
    ident = identity_op(sc)
    assert grid_permutation(ident) == tuple(range(sc.d * sc.input_count))
    rng = random.Random(n * 100 + c * 10 + d)
    for _ in range(25):
        g = random_op(sc, rng)
        assert compose(inverse(g), g) == ident
        assert compose(g, inverse(g)) == ident
        p, pi = grid_permutation(g), grid_permutation(inverse(g))
        assert all(pi[p[i]] == i for i in range(len(p)))


@pytest.mark.parametrize("n,c,d,size", [(2, 2, 2, 128), (2, 2, 3, 648)])
def test_generators_generate_whole_group(n, c, d, size):
    # |group| = n! * c^n * d^(n c)
    sc = Scenario(n, c, d)
    gens = generators(sc)
    seen = {identity_op(sc)}
    frontier = [identity_op(sc)]
    while frontier:
        nxt = []
        for g in frontier:
            for h in gens:
                gh = compose(h, g)
                if gh not in seen:
                    seen.add(gh)
                    nxt.append(gh)
        frontier = nxt
    assert len(seen) == size


# ---------------------------------------------------------------------------
# action on behaviors and inequalities
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n,c,d", [(2, 2, 3), (3, 2, 2), (2, 3, 2)])
def test_vertex_set_invariance(n, c, d):
    sc = Scenario(n, c, d)
    verts = {tuple(map(Fraction, v)) for v in lhv_vertices(sc)}
    for g in generators(sc):
        image = {apply_to_point(g, v) for v in verts}
        assert image == verts


def test_evaluation_invariant_exact():
    rng = random.Random(11)
    for n, c, d in [(2, 2, 2), (2, 2, 3), (3, 2, 2), (2, 3, 3)]:
        sc = Scenario(n, c, d)
        for _ in range(20):
            g = random_op(sc, rng)
            coeffs = tuple(rng.randint(-5, 5) for _ in range(sc.reduced_dim))
            rhs = rng.randint(-3, 6)
            point = tuple(Fraction(rng.randint(0, 4), 7)
                          for _ in range(sc.reduced_dim))
            c2, r2 = apply_to_inequality(g, coeffs, rhs)
            p2 = apply_to_point(g, point)
            lhs_before = sum(a * x for a, x in zip(coeffs, point)) - rhs
            lhs_after = sum(a * x for a, x in zip(c2, p2)) - r2
            assert lhs_after == lhs_before


def test_transform_roundtrip_via_inverse():
    sc = Scenario(2, 2, 3)
    rng = random.Random(5)
    for _ in range(20):
        g = random_op(sc, rng)
        coeffs = tuple(rng.randint(-4, 4) for _ in range(sc.reduced_dim))
        rhs = rng.randint(-2, 5)
        c2, r2 = apply_to_inequality(g, coeffs, rhs)
        c3, r3 = apply_to_inequality(inverse(g), c2, r2)
        assert (c3, r3) == (coeffs, rhs)
        point = tuple(Fraction(rng.randint(0, 3), 5)
                      for _ in range(sc.reduced_dim))
        assert apply_to_point(inverse(g), apply_to_point(g, point)) == point


def test_output_shift_reflects_parity_expression():
    # shifting one party's outputs at every input on a d = 2 inequality
    # negates the coefficients and moves the bound by their sum
    sc = Scenario(3, 2, 2)
    mermin = (1, 0, 0, 1, 0, 1, -1, 0)
    g = SymmetryOp(sc, (0, 1, 2), (0, 0, 0),
                   ((1, 1), (0, 0), (0, 0)))
    c2, r2 = apply_to_inequality(g, mermin, 2)
    assert c2 == tuple(-v for v in mermin)
    assert r2 == 0


def test_mismatched_lengths_raise():
    sc = Scenario(2, 2, 2)
    g = identity_op(sc)
    with pytest.raises(ScenarioMismatchError):
        apply_to_inequality(g, (1, 2, 3), 1)
    with pytest.raises(ScenarioMismatchError):
        apply_to_point(g, (1, 2, 3))


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------


def test_chsh_orbit_contents():
    sc = Scenario(2, 2, 2)
    orb = orbit_of(*CHSH, sc)
    assert len(orb) == 8
    # the reflected form lies in the same orbit
    assert canonical_form((-2, -2, -2, 2), 0, sc) == canonical_form(*CHSH, sc)
    # positivity facets do not
    assert canonical_form((-1, 0, 0, 0), 0, sc) != canonical_form(*CHSH, sc)


def test_orbit_cap():
    sc = Scenario(2, 2, 2)
    with pytest.raises(ResourceCapError):
        orbit_of(*CHSH, sc, cap=3)


def test_orbit_partition_chsh_polytope(lhv):
    sc = Scenario(2, 2, 2)
    poly = lhv.hull(2, 2, 2)
    items = [(f.coeffs, f.rhs) for f in poly.facets]
    orbits = orbit_partition(items, sc)
    assert sorted(len(o) for o in orbits) == [8, 8]
    # canonical forms agree within an orbit and differ across orbits
    reps = []
    for orbit in orbits:
        forms = {canonical_form(*items[i], sc) for i in orbit}
        assert len(forms) == 1
        reps.append(forms.pop())
    assert len(set(reps)) == 2


def test_orbit_partition_respects_input_closure():
    sc = Scenario(2, 2, 2)
    # CHSH alone is not a symmetry-closed list
    with pytest.raises(ValueError):
        orbit_partition([CHSH], sc)
    with pytest.raises(ValueError):
        orbit_partition([CHSH, CHSH], sc)  # duplicates rejected


@pytest.mark.parametrize("n,c,d,norbits,trivial_size", [
    (2, 2, 3, 2, 12),
    (3, 2, 2, 5, 16),
])
def test_orbit_partition_small_scenarios(lhv, n, c, d, norbits, trivial_size):
    sc = Scenario(n, c, d)
    poly = lhv.hull(n, c, d)
    items = [(f.coeffs, f.rhs) for f in poly.facets]
    orbits = orbit_partition(items, sc)
    assert len(orbits) == norbits
    assert sum(len(o) for o in orbits) == len(items)
    # output relabelings merge all positivity/normalization facets into one
    # orbit; find it via the first positivity facet -p(1|0...0) <= 0
    pos = ([0] * sc.reduced_dim, 0)
    pos[0][sc.beta_index(1, (0,) * n)] = -1
    key = (tuple(pos[0]), 0)
    idx = items.index(key)
    trivial = next(o for o in orbits if idx in o)
    assert len(trivial) == trivial_size
