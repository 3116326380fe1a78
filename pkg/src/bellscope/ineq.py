"""Correlator Bell inequalities: the core class, a named catalog, games.

Every inequality is stored in the reduced probability picture:

    sum_{s} sum_{k=1}^{d-1} beta_{k,s} p(k|s)  <=  rhs

with beta ordered s-major (integer value of the input string), k-minor.
The local bound is never trusted from a transcription: the catalog
recomputes it by enumerating deterministic vertices and refuses to hand out
an inequality whose stated bound disagrees (CatalogError), which catches
transcription slips in either the coefficients or the bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import CatalogError, ScenarioMismatchError
from .ffun import (
    FiniteFunction,
    Scenario,
    classify,
    correlator_vertex,
    enumerate_lhv_vertex_functions,
    lhv_vertices,
    max_overlap,
)
from .poly import primitive_int_vector


class BellInequality:
    """One reduced-picture inequality with lazily certified bounds.

    beta: rational coefficients in beta order; rhs: the local bound.
    lhv_bound recomputes the exact deterministic maximum on first use and is
    the authoritative bound; rhs is what the source of the inequality
    claimed.  algebraic_bound is the no-signalling-free ceiling
    sum_s max(0, max_k beta_{k,s}).
    """

    def __init__(self, scenario: Scenario, beta, rhs, name=None,
                 tags=frozenset()):
        beta = tuple(Fraction(x) for x in beta)
        if len(beta) != scenario.reduced_dim:
            raise ScenarioMismatchError(
                f"expected {scenario.reduced_dim} coefficients for "
                f"{scenario}, got {len(beta)}")
        self.scenario = scenario
        self.beta = beta
        self.rhs = Fraction(rhs)
        self.name = name
        self.tags = frozenset(tags)
        self._lhv_bound = None

    def beta_at(self, k: int, s) -> Fraction:
        return self.beta[self.scenario.beta_index(k, s)]

    def evaluate(self, point) -> Fraction:
        if len(point) != len(self.beta):
            raise ScenarioMismatchError("point/coefficient length mismatch")
        return sum((b * Fraction(x) for b, x in zip(self.beta, point) if b),
                   Fraction(0))

    def violated_by(self, point) -> bool:
        return self.evaluate(point) > self.rhs

    @property
    def lhv_bound(self) -> Fraction:
        if self._lhv_bound is None:
            self._lhv_bound = max(self.evaluate(v)
                                  for v in lhv_vertices(self.scenario))
        return self._lhv_bound

    @property
    def algebraic_bound(self) -> Fraction:
        sc = self.scenario
        d = sc.d
        total = Fraction(0)
        for si in range(sc.input_count):
            row = self.beta[si * (d - 1): (si + 1) * (d - 1)]
            total += max(Fraction(0), max(row))
        return total

    def scaled_primitive(self):
        """(integer coeffs, integer rhs) scaled by a positive rational."""
        vec = primitive_int_vector(self.beta + (self.rhs,))
        return vec[:-1], vec[-1]

    @staticmethod
    def from_facet(scenario: Scenario, facet) -> "BellInequality":
        return BellInequality(scenario, facet.coeffs, facet.rhs)

    def __eq__(self, other):
        return (isinstance(other, BellInequality)
                and self.scenario == other.scenario
                and self.beta == other.beta and self.rhs == other.rhs)

    def __hash__(self):
        return hash((self.scenario, self.beta, self.rhs))

    def __repr__(self):
        label = self.name or "BellInequality"
        sc = self.scenario
        return f"<{label} ({sc.n},{sc.c},{sc.d}) rhs={self.rhs}>"

    def to_json(self) -> str:
        sc = self.scenario
        return json.dumps({
            "n": sc.n, "c": sc.c, "d": sc.d,
            "beta": [[b.numerator, b.denominator] for b in self.beta],
            "rhs": [self.rhs.numerator, self.rhs.denominator],
            "name": self.name,
            "tags": sorted(self.tags)}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "BellInequality":
        obj = json.loads(text)
        return BellInequality(
            Scenario(obj["n"], obj["c"], obj["d"]),
            [Fraction(a, b) for a, b in obj["beta"]],
            Fraction(*obj["rhs"]), name=obj.get("name"),
            tags=frozenset(obj.get("tags", ())))


# ---------------------------------------------------------------------------
# named catalog
# ---------------------------------------------------------------------------

def _pairs_parity(s) -> int:
    tot = 0
    n = len(s)
    for j in range(n):
        if s[j]:
            for k in range(j + 1, n):
                tot += s[k]
    return tot % 2


def _chsh():
    return Scenario(2, 2, 2), (1, 1, 1, -1), 2


def _cglmp(d):
    if not 2 <= d <= 5:
        raise CatalogError("cglmp is catalogued for 2 <= d <= 5")
    sc = Scenario(2, 2, d)
    beta = [0] * sc.reduced_dim
    for s in sc.inputs():
        sign = (-1) ** (s[0] + s[1])
        for k in range(1, d):
            val = 0
            if k == 1:
                val += d * (1 if s == (0, 0) else 0) - sign
            if k >= 2:
                val += sign * (d - k)
            beta[sc.beta_index(k, s)] = val
    return sc, tuple(beta), d


def _mermin(n):
    if n != 3:
        raise CatalogError("mermin is catalogued for n = 3 only")
    sc = Scenario(3, 2, 2)
    support = {(0, 0, 0): 1, (0, 1, 1): 1, (1, 0, 1): 1, (1, 1, 0): -1}
    beta = [0] * sc.reduced_dim
    for s, v in support.items():
        beta[sc.beta_index(1, s)] = v
    return sc, tuple(beta), 2


def _mermin_klyshko(n):
    if not 2 <= n <= 10:
        raise CatalogError("mermin_klyshko is catalogued for 2 <= n <= 10")
    sc = Scenario(n, 2, 2)
    lam = 2 ** (n // 2 - 1) if n % 2 == 0 else 2 ** ((n - 1) // 2 - 1)
    beta = [Fraction(0)] * sc.reduced_dim
    for s in sc.inputs():
        if n % 2 == 1 and s[n - 1] != (sum(s[:n - 1]) % 2):
            continue
        sign = (-1) ** _pairs_parity(s)
        beta[sc.beta_index(1, s)] = Fraction(-2 * sign, lam)
    rhs = 2 + sum(beta) / 2
    return sc, tuple(beta), rhs


def _svetlichny3():
    sc = Scenario(3, 2, 2)
    coeffs = (1, 1, 1, -1, 1, -1, -1, -1)
    return sc, coeffs, 2


def _gen_new(n):
    if not 2 <= n <= 10:
        raise CatalogError("gen_new is catalogued for 2 <= n <= 10")
    sc = Scenario(n, 2, 2)
    hi = 2 ** (n - 1)
    beta = [Fraction(1, hi)] * sc.reduced_dim
    beta[sc.beta_index(1, (1,) * n)] = Fraction(1 - hi, hi)
    return sc, tuple(beta), 1


_TABLE4 = {
    # (2, 4, 2): full-input-grid coefficients, 16 entries, bound
    "b1": ((2, 4, 2), (2, 2, 1, 1, 2, -1, -1, -2, 1, -1, -2, 2, 1, -2, 2, 1), 8),
    "b2": ((2, 4, 2), (2, 2, 1, 1, 2, -1, -1, -2, 1, -2, 2, 1, 1, -1, -2, 2), 8),
    "b3": ((2, 4, 2), (2, 2, 1, 1, 2, -1, -2, -1, 1, -2, 1, 2, 1, -1, 2, -2), 8),
    "b4": ((2, 4, 2), (2, 2, 1, 1, 1, -1, 2, -2, 1, -2, 1, 2, 2, -1, -2, -1), 8),
    "b5": ((2, 4, 2), (2, 2, 1, 1, 1, -2, 2, 1, 1, -1, -2, 2, 2, -1, -1, -2), 8),
    "b6": ((2, 4, 2), (2, 1, 1, 0, 1, -1, -1, 1, 1, -1, -1, -1, 0, 1, -1, 0), 4),
    "b7": ((2, 4, 2), (2, 1, 1, 0, 1, -1, -1, 1, 0, 1, -1, 0, 1, -1, -1, -1), 4),
    "b8": ((2, 4, 2), (2, 1, 1, 0, 0, 1, -1, 0, 1, -1, -1, 1, 1, -1, -1, -1), 4),
    "b9": ((2, 4, 2), (2, 1, 0, 1, 1, -1, 1, -1, 0, 1, 0, -1, 1, -1, -1, -1), 4),
    "b10": ((2, 4, 2), (2, 1, 0, 1, 0, 1, 0, -1, 1, -1, 1, -1, 1, -1, -1, -1), 4),
    "b11": ((2, 4, 2), (2, 0, 1, 1, 0, 0, 1, -1, 1, 1, -1, -1, 1, -1, -1, -1), 4),
    "c1_c4": ((2, 4, 2), (1, 1, 0, 0, 1, -1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0), 2),
    "c2_c4": ((2, 4, 2), (1, 1, 0, 0, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, 0, 0), 2),
    "c3_c4": ((2, 4, 2), (1, 0, 1, 0, 0, 0, 0, 0, 1, 0, -1, 0, 0, 0, 0, 0), 2),
    # (2, 3, 2): a CHSH lift using two of the three inputs
    "c_c3": ((2, 3, 2), (1, 1, 0, 1, -1, 0, 0, 0, 0), 2),
    # (2, 2, 4)
    "c1_d4": ((2, 2, 4), (1, 0, 1, 1, 0, 1, 1, 0, 1, -1, 0, -1), 2),
    "c2_d4": ((2, 2, 4), (1, 2, 1, 1, 2, 1, 1, 2, 1, -1, -2, -1), 4),
    # (2, 2, 5)
    "i1_d5": ((2, 2, 5),
              tuple(Fraction(v, 2) for v in
                    (6, 2, 3, 4, 4, -2, 2, 1, 4, -2, 2, 1, -4, 2, -2, -1)), 5),
    "i2_d5": ((2, 2, 5),
              (3, 1, -1, -3, 2, -1, -4, -2, 2, -1, -4, -2, -2, 1, 4, 2), 5),
    "i3_d5": ((2, 2, 5),
              (2, -1, 1, -2, 3, 1, -1, 2, 3, 1, -1, 2, -3, -1, 1, -2), 5),
}


def _table4(id):
    if id not in _TABLE4:
        raise CatalogError(
            f"unknown table4 id {id!r}; known: {sorted(_TABLE4)}")
    (n, c, d), coeffs, rhs = _TABLE4[id]
    return Scenario(n, c, d), coeffs, rhs


_CATALOG = {
    "chsh": _chsh,
    "cglmp": _cglmp,
    "mermin": _mermin,
    "mermin_klyshko": _mermin_klyshko,
    "svetlichny3": _svetlichny3,
    "gen_new": _gen_new,
    "table4": _table4,
}


def catalog_names():
    return sorted(_CATALOG)


def table4_ids():
    return sorted(_TABLE4)


def catalog(name: str, **params) -> BellInequality:
    """Construct a named inequality and certify its stated local bound.

    The deterministic maximum is recomputed from scratch; a mismatch with
    the transcribed bound raises CatalogError rather than returning a wrong
    inequality."""
    if name not in _CATALOG:
        raise CatalogError(f"unknown inequality {name!r}; "
                           f"known: {catalog_names()}")
    try:
        sc, beta, rhs = _CATALOG[name](**params)
    except TypeError as e:
        raise CatalogError(f"bad parameters for {name!r}: {e}") from None
    label = name if not params else \
        f"{name}({','.join(f'{k}={v}' for k, v in sorted(params.items()))})"
    ineq = BellInequality(sc, beta, rhs, name=label)
    if ineq.lhv_bound != Fraction(rhs):
        raise CatalogError(
            f"{label}: recomputed local bound {ineq.lhv_bound} != stated "
            f"{rhs}; transcription error")
    return ineq


# ---------------------------------------------------------------------------
# nonlocal games
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlocalGame:
    """Win when the outputs sum to f(s) mod d; inputs drawn with the given
    weights (aligned to input order, non-negative, summing to 1)."""

    f: FiniteFunction
    weights: tuple = field(default=None)

    def __post_init__(self):
        sc = self.f.scenario
        if self.weights is None:
            w = tuple(Fraction(1, sc.input_count)
                      for _ in range(sc.input_count))
            object.__setattr__(self, "weights", w)
        else:
            w = tuple(Fraction(x) for x in self.weights)
            if len(w) != sc.input_count:
                raise ValueError("weights length must equal c^n")
            if any(x < 0 for x in w):
                raise ValueError("weights must be non-negative")
            if sum(w) != 1:
                raise ValueError("weights must sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def scenario(self) -> Scenario:
        return self.f.scenario


def nlg_success(game: NonlocalGame, point) -> Fraction:
    """Success probability of a behavior (reduced correlators) in the game.

    For inputs with f(s) = 0 the winning probability is the k = 0 entry
    recovered by normalization."""
    sc = game.scenario
    d = sc.d
    if len(point) != sc.reduced_dim:
        raise ScenarioMismatchError("point length mismatch")
    total = Fraction(0)
    for si, w in enumerate(game.weights):
        if not w:
            continue
        row = point[si * (d - 1): (si + 1) * (d - 1)]
        target = game.f.table[si]
        if target == 0:
            total += w * (1 - sum(Fraction(x) for x in row))
        else:
            total += w * Fraction(row[target - 1])
    return total


def nontrivial_from_function(f: FiniteFunction, weights=None) -> BellInequality:
    """Game inequality sum beta_{k,s} p(k|s) <= classical bound from f.

    beta_{k,s} = w(s) ([f(s) = k] - [f(s) = 0]); the game success equals
    this expression plus the constant sum of weights on f(s) = 0.  For
    n-partite linear f the game is won with certainty classically: with all
    weights positive that is refused outright; with some zero weights the
    inequality is returned tagged 'not-certified' since it cannot separate
    quantum from classical."""
    game = NonlocalGame(f, weights)
    sc = f.scenario
    d = sc.d
    rep = classify(f)
    if rep.is_npartite_linear:
        if all(w > 0 for w in game.weights):
            raise ValueError(
                "f is n-partite linear: the game has a perfect classical "
                "strategy and yields no inequality")
        tags = frozenset({"not-certified"})
    else:
        tags = frozenset()
    beta = [Fraction(0)] * sc.reduced_dim
    offset = Fraction(0)
    for si, w in enumerate(game.weights):
        target = f.table[si]
        s = sc.input_at(si)
        if target == 0:
            offset += w
            for k in range(1, d):
                beta[sc.beta_index(k, s)] = -w
        else:
            beta[sc.beta_index(target, s)] = w
    value, _ = max_overlap(f, weights=game.weights)
    rhs = value - offset
    return BellInequality(sc, beta, rhs,
                          name=f"game({f.table})", tags=tags)
