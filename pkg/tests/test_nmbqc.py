import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from bellscope.errors import ResourceCapError
from bellscope.ffun import FiniteFunction, Scenario
from bellscope.ineq import BellInequality
from bellscope.nmbqc import (
    PMatrix,
    decide_deterministic,
    generalized_pr_box,
    ghz_paradox,
    minimal_n,
)
from bellscope.qopt import ghz_expectation, ww_bound


def boolf(k, table):
    return FiniteFunction(Scenario(k, 2, 2), tuple(table))


def nand(k):
    sc = Scenario(k, 2, 2)
    return FiniteFunction(sc, tuple(1 - math.prod(s) for s in sc.inputs()))


MERMIN_P = PMatrix(((0, 1), (1, 0), (1, 1)))


# ---------------------------------------------------------------------------
# P matrix and decision basics
# ---------------------------------------------------------------------------

def test_pmatrix_validation():
    with pytest.raises(ValueError):
        PMatrix(((0, 0), (1, 0)))
    with pytest.raises(ValueError):
        PMatrix(((1, 0), (1,)))
    with pytest.raises(ValueError):
        PMatrix(((1, 2),))
    with pytest.raises(ValueError):
        PMatrix(())
    p = MERMIN_P
    assert (p.n, p.xbits) == (3, 2)
    assert p.s_of((1, 1)) == (1, 1, 0)


def test_decide_function_shape_gates():
    with pytest.raises(ValueError):
        decide_deterministic(MERMIN_P, nand(3))
    f3 = FiniteFunction(Scenario(2, 2, 3), (0, 1, 2, 0))
    with pytest.raises(ValueError):
        decide_deterministic(MERMIN_P, f3)


def test_nand2_achievable_with_three_sites():
    v = decide_deterministic(MERMIN_P, nand(2))
    assert v.achievable and bool(v)
    assert v.obstruction is None
    # exact parity: S theta' - b is even entrywise
    b = [t ^ nand(2).table[0] for t in nand(2).table]
    for i, s in enumerate(MERMIN_P.image()):
        resid = sum(sv * tv for sv, tv in zip(s, v.witness_exact)) - b[i]
        assert resid.denominator == 1 and resid.numerator % 2 == 0
    # the angles reproduce f through the GHZ correlator
    for i, s in enumerate(MERMIN_P.image()):
        e = math.cos(MERMIN_P.n * v.phi
                     + sum(t * sv for t, sv in zip(v.witness, s)))
        assert abs(e - (1.0 - 2.0 * nand(2).table[i])) < 1e-9


def test_linear_function_single_site():
    f = boolf(2, [s and 1 for s in (0, 1, 1, 0)])
    v = decide_deterministic(PMatrix(((1, 1),)), f)
    assert v.achievable
    assert minimal_n(f) == 1


def test_nand3_refuted_at_six_sites_accepted_at_seven():
    rows = [r for r in itertools.product((0, 1), repeat=3) if any(r)]
    f = nand(3)
    b = [t ^ f.table[0] for t in f.table]
    for combo in itertools.combinations(rows, 6):
        v = decide_deterministic(PMatrix(combo), f)
        assert not v.achievable
        u = v.obstruction
        image = PMatrix(combo).image()
        for col in zip(*image):
            assert sum(ui * ci for ui, ci in zip(u, col)) == 0
        assert sum(ui * bi for ui, bi in zip(u, b)) % 2 == 1
    assert decide_deterministic(PMatrix(tuple(rows)), f).achievable


def test_achievability_monotone_under_added_sites():
    v = decide_deterministic(MERMIN_P, nand(2))
    assert v.achievable
    widened = PMatrix(MERMIN_P.rows + ((0, 1), (1, 1)))
    assert decide_deterministic(widened, nand(2)).achievable


# ---------------------------------------------------------------------------
# minimal_n
# ---------------------------------------------------------------------------

def test_minimal_n_known_values():
    assert minimal_n(nand(2)) == 3
    assert minimal_n(nand(3)) == 7
    par = boolf(3, [sum(s) % 2 for s in
                    itertools.product((0, 1), repeat=3)])
    assert minimal_n(par) == 1


def test_minimal_n_cap():
    sc = Scenario(5, 2, 2)
    f = FiniteFunction(sc, tuple(1 - math.prod(s) for s in sc.inputs()))
    with pytest.raises(ResourceCapError):
        minimal_n(f)


# ---------------------------------------------------------------------------
# GHZ paradox
# ---------------------------------------------------------------------------

def test_mermin_paradox():
    rep = ghz_paradox(MERMIN_P, nand(2))
    assert not rep.degenerate
    assert rep.assignments == (
        ((0, 0), (0, 0, 0), 1),
        ((0, 1), (1, 0, 1), 1),
        ((1, 0), (0, 1, 1), 1),
        ((1, 1), (1, 1, 0), 0))
    assert rep.forced_input == (1, 1)
    assert rep.forced_value == 1
    assert rep.quantum_value == 0


def test_paradox_degenerate_for_linear_f():
    f = boolf(2, (0, 1, 1, 0))
    rep = ghz_paradox(PMatrix(((1, 1),)), f)
    assert rep.degenerate
    assert rep.forced_input is None


def test_paradox_requires_achievability():
    rows = [r for r in itertools.product((0, 1), repeat=3) if any(r)]
    with pytest.raises(ValueError):
        ghz_paradox(PMatrix(tuple(rows[:6])), nand(3))


# ---------------------------------------------------------------------------
# generalized PR boxes
# ---------------------------------------------------------------------------

def test_pr_box_from_product_function():
    f = boolf(2, (1, 1, 1, 0))  # s1 s2 + 1
    box = generalized_pr_box(PMatrix(((1, 0), (0, 1))), f)
    assert len(box) == 16
    for (m, s), val in box.items():
        want = Fraction(1, 2) if (m[0] + m[1]) % 2 == f((s[0], s[1])) \
            else Fraction(0)
        assert val == want


def test_pr_box_collision_conflict():
    f = boolf(2, (0, 1, 0, 0))  # f(01) != f(10) but s collides through P
    with pytest.raises(ValueError):
        generalized_pr_box(PMatrix(((1, 1),)), f)


def test_even_parity_box_for_constant_zero():
    f = boolf(2, (0, 0, 0, 0))
    box = generalized_pr_box(PMatrix(((0, 1), (1, 0), (1, 1))), f)
    for (m, s), val in box.items():
        assert val == (Fraction(1, 4) if sum(m) % 2 == 0 else Fraction(0))


def test_unphysical_box_materializes_for_refuted_case():
    rows = [r for r in itertools.product((0, 1), repeat=3) if any(r)][:6]
    box = generalized_pr_box(PMatrix(tuple(rows)), nand(3))
    weights = {v for v in box.values() if v}
    assert weights == {Fraction(1, 32)}


# ---------------------------------------------------------------------------
# oracle agreement with the closed-form quantum bound
# ---------------------------------------------------------------------------

def induced_game(p, f):
    """(inequality, offset): quantum success = offset + value(expression)."""
    sc = Scenario(p.n, 2, 2)
    beta = [Fraction(0)] * sc.reduced_dim
    offset = Fraction(0)
    w = Fraction(1, 2 ** p.xbits)
    for i, s in enumerate(p.image()):
        if f.table[i]:
            beta[sc.beta_index(1, s)] += w
        else:
            offset += w
            beta[sc.beta_index(1, s)] -= w
    return BellInequality(sc, beta, 0), offset


def witness_success(p, f, verdict):
    total = 0.0
    w = 1.0 / 2 ** p.xbits
    for i, s in enumerate(p.image()):
        e = math.cos(p.n * verdict.phi
                     + sum(t * sv for t, sv in zip(verdict.witness, s)))
        p1 = (1.0 - e) / 2.0
        total += w * (p1 if f.table[i] else 1.0 - p1)
    return total


def oracle_check(p, f, restarts, seed):
    verdict = decide_deterministic(p, f)
    if verdict.achievable:
        assert witness_success(p, f, verdict) >= 1.0 - 1e-9
    else:
        iq, offset = induced_game(p, f)
        got = float(offset) + ww_bound(iq, restarts=restarts,
                                       seed=seed).value
        assert got <= 1.0 - 1e-3
    return verdict.achievable


def test_oracle_agreement_exhaustive_two_bits():
    rowtypes = [r for r in itertools.product((0, 1), repeat=2) if any(r)]
    ps = [combo for size in range(1, 5)
          for combo in
          itertools.combinations_with_replacement(rowtypes, size)]
    assert len(ps) == 34
    wins = 0
    for pi, rows in enumerate(ps):
        for table in itertools.product((0, 1), repeat=4):
            wins += oracle_check(PMatrix(rows), boolf(2, table),
                                 restarts=4, seed=pi)
    assert wins > 0


def test_oracle_agreement_random_three_bits():
    rng = np.random.default_rng(101)
    rowtypes = [r for r in itertools.product((0, 1), repeat=3) if any(r)]
    for case in range(200):
        n = int(rng.integers(1, 8))
        rows = tuple(rowtypes[i] for i in rng.integers(0, len(rowtypes), n))
        table = tuple(int(b) for b in rng.integers(0, 2, 8))
        oracle_check(PMatrix(rows), boolf(3, table), restarts=3, seed=case)
