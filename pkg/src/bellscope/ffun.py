"""Finite functions f: Z_c^n -> Z_d and their linearity structure.

A deterministic n-party strategy with c inputs and d outputs per site is a
total map f: Z_c^n -> Z_d, stored as a truth table over input strings in
integer-value order (party 0 is the most significant digit).  Three nested
classes matter downstream:

* n-partite linear: f(s) = [alpha + sum_j sum_{k=1}^{c-1} beta_{j,k}
  delta(s_j = k)]_d, i.e. a sum of arbitrary single-site maps.  These are in
  bijection with the deterministic vertices of the correlator polytope.
* affine: f(s) = [alpha + sum_j beta_j * s_j]_d with a single multiplier per
  site (input digits read mod d).  For c = 2 this coincides with the
  n-partite linear class.
* bipartite linear: f(s) = [f1(s_J) + f2(s_{J^c})]_d for a proper bipartition
  J of the parties.  These index the hybrid (two-group) model vertices.

Every f decomposes uniquely as linear part + nonlinear part (mod d) where the
linear part interpolates f on the strings with at most one non-zero digit and
the nonlinear part vanishes there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import CompositeModulusError, ResourceCapError

# Hard ceiling on truth-table length; everything in this module is exhaustive.
TABLE_CAP = 1 << 20
# Ceiling on the number of functions an enumeration may yield.
ENUM_CAP = 1 << 22


def _is_prime(m: int) -> bool:
    if m < 2:
        return False
    p = 2
    while p * p <= m:
        if m % p == 0:
            return False
        p += 1
    return True


@dataclass(frozen=True, order=True)
class Scenario:
    """A Bell scenario: n parties, c inputs per site, d outputs per site."""

    n: int
    c: int
    d: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("scenario needs at least one party")
        if self.c < 1 or self.d < 2:
            raise ValueError("need c >= 1 inputs and d >= 2 outputs per site")
        if self.c ** self.n > TABLE_CAP:
            raise ResourceCapError(
                f"input space c^n = {self.c}^{self.n} exceeds cap {TABLE_CAP}",
                progress=0, unit="table entries")

    @property
    def input_count(self) -> int:
        return self.c ** self.n

    @property
    def d_is_prime(self) -> bool:
        return _is_prime(self.d)

    def require_prime_d(self, operation: str) -> None:
        if not self.d_is_prime:
            raise CompositeModulusError(
                f"{operation} requires prime output modulus, got d={self.d}")

    def inputs(self):
        """All input strings in integer-value order (party 0 most significant)."""
        return product(range(self.c), repeat=self.n)

    def input_index(self, s) -> int:
        idx = 0
        for v in s:
            idx = idx * self.c + v
        return idx

    def input_at(self, idx: int):
        digits = []
        for _ in range(self.n):
            digits.append(idx % self.c)
            idx //= self.c
        return tuple(reversed(digits))

    # Reduced correlator coordinates: beta ordering is s-major (integer value
    # of the input string), k-minor with k = 1..d-1.
    @property
    def reduced_dim(self) -> int:
        return (self.d - 1) * self.input_count

    def beta_index(self, k: int, s) -> int:
        if not 1 <= k <= self.d - 1:
            raise ValueError(f"reduced coordinate needs 1 <= k <= d-1, got {k}")
        return self.input_index(s) * (self.d - 1) + (k - 1)


@dataclass(frozen=True)
class FiniteFunction:
    """Total map Z_c^n -> Z_d as a truth table in input integer-value order."""

    scenario: Scenario
    table: tuple

    def __post_init__(self):
        if len(self.table) != self.scenario.input_count:
            raise ValueError(
                f"table length {len(self.table)} != c^n = {self.scenario.input_count}")
        coerced = []
        for v in self.table:
            iv = int(v)
            if iv != v or not (0 <= iv < self.scenario.d):
                raise ValueError("table entries must be integers in Z_d")
            coerced.append(iv)
        object.__setattr__(self, "table", tuple(coerced))

    def __call__(self, s) -> int:
        return self.table[self.scenario.input_index(s)]

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.table)

    def add(self, other: "FiniteFunction") -> "FiniteFunction":
        d = self.scenario.d
        return FiniteFunction(self.scenario, tuple(
            (a + b) % d for a, b in zip(self.table, other.table)))

    def sub(self, other: "FiniteFunction") -> "FiniteFunction":
        d = self.scenario.d
        return FiniteFunction(self.scenario, tuple(
            (a - b) % d for a, b in zip(self.table, other.table)))

    def to_json(self) -> str:
        sc = self.scenario
        return json.dumps({"n": sc.n, "c": sc.c, "d": sc.d,
                           "table": list(self.table)}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FiniteFunction":
        obj = json.loads(text)
        return FiniteFunction(Scenario(obj["n"], obj["c"], obj["d"]),
                              tuple(obj["table"]))


@dataclass(frozen=True)
class FunctionClassReport:
    """Classification of one finite function."""

    is_npartite_linear: bool
    is_affine: bool
    bipartite_linear_partitions: tuple  # frozensets of party indices, 0-side
    linear_part: FiniteFunction
    nonlinear_part: FiniteFunction

    @property
    def is_bipartite_linear(self) -> bool:
        return len(self.bipartite_linear_partitions) > 0


# ---------------------------------------------------------------------------
# linear class: parametrization and enumeration
# ---------------------------------------------------------------------------

def linear_function(scenario: Scenario, alpha: int, beta) -> FiniteFunction:
    """Build f(s) = [alpha + sum_j beta[j][s_j - 1]]_d, beta[j][k-1] for k>=1."""
    n, c, d = scenario.n, scenario.c, scenario.d
    table = []
    for s in scenario.inputs():
        v = alpha
        for j in range(n):
            if s[j] != 0:
                v += beta[j][s[j] - 1]
        table.append(v % d)
    return FiniteFunction(scenario, tuple(table))


def linear_params(f: FiniteFunction):
    """Inverse of linear_function on the linear class: (alpha, beta) with
    alpha = f(0) and beta_{j,k} = f(k e_j) - alpha.  Defined for every f;
    f is n-partite linear iff linear_function(params) reproduces it."""
    sc = f.scenario
    n, c, d = sc.n, sc.c, sc.d
    zero = (0,) * n
    alpha = f(zero)
    beta = []
    for j in range(n):
        row = []
        for k in range(1, c):
            s = list(zero)
            s[j] = k
            row.append((f(tuple(s)) - alpha) % d)
        beta.append(tuple(row))
    return alpha, tuple(beta)


def linear_part(f: FiniteFunction) -> FiniteFunction:
    alpha, beta = linear_params(f)
    return linear_function(f.scenario, alpha, beta)


def enumerate_lhv_vertex_functions(scenario: Scenario, cap: int = ENUM_CAP):
    """Yield all n-partite linear functions in lexicographic (alpha, beta)
    parameter order.  There are d^(n(c-1)+1) of them; the parametrization by
    (alpha, beta) is injective, so the count identity is structural."""
    n, c, d = scenario.n, scenario.c, scenario.d
    total = d ** (n * (c - 1) + 1)
    if total > cap:
        raise ResourceCapError(
            f"linear class has d^(n(c-1)+1) = {total} members, cap {cap}",
            progress=0, unit="functions")
    nb = n * (c - 1)
    for params in product(range(d), repeat=1 + nb):
        alpha = params[0]
        beta = tuple(params[1 + j * (c - 1): 1 + (j + 1) * (c - 1)]
                     for j in range(n))
        yield linear_function(scenario, alpha, beta)


def linear_class_size(scenario: Scenario) -> int:
    n, c, d = scenario.n, scenario.c, scenario.d
    return d ** (n * (c - 1) + 1)


# ---------------------------------------------------------------------------
# bipartite linear class
# ---------------------------------------------------------------------------

def _proper_bipartitions(n: int):
    """Proper bipartitions (J, J^c) of range(n), one orientation each:
    J is the side containing party 0."""
    if n < 2:
        return
    rest = list(range(1, n))
    for mask in range(2 ** (n - 1)):
        side = frozenset([0] + [rest[i] for i in range(n - 1) if mask >> i & 1])
        if len(side) < n:
            yield side


def splits_over(f: FiniteFunction, side) -> bool:
    """True iff f(s) = [f1(s_J) + f2(s_{J^c})]_d for some f1, f2 with J = side.

    The test uses the closed identity f(s) = f(s_J, 0) + f(0, s_{J^c}) - f(0):
    if a split exists the identity holds (both sides equal f1(s_J)+f2(s_{J^c})
    up to the same constants), and the identity itself exhibits a split.
    """
    sc = f.scenario
    d = sc.d
    zero = (0,) * sc.n
    f0 = f(zero)
    for s in sc.inputs():
        sj = tuple(v if j in side else 0 for j, v in enumerate(s))
        sjc = tuple(v if j not in side else 0 for j, v in enumerate(s))
        if f(s) != (f(sj) + f(sjc) - f0) % d:
            return False
    return True


def bipartite_linear_partitions(f: FiniteFunction) -> tuple:
    return tuple(sorted((side for side in _proper_bipartitions(f.scenario.n)
                         if splits_over(f, side)), key=sorted))


def enumerate_bipartite_linear_functions(scenario: Scenario, cap: int = ENUM_CAP):
    """All functions splitting over some proper bipartition, deduplicated,
    in truth-table lexicographic order.  Generated from (J, f1, f2) triples
    rather than filtered from all d^(c^n) functions."""
    n, c, d = scenario.n, scenario.c, scenario.d
    if n < 2:
        return []
    seen = set()
    for side in _proper_bipartitions(n):
        j_list = sorted(side)
        jc_list = sorted(set(range(n)) - side)
        sub1 = Scenario(len(j_list), c, d)
        sub2 = Scenario(len(jc_list), c, d)
        budget = d ** sub1.input_count * d ** sub2.input_count
        if len(seen) + budget > cap:
            raise ResourceCapError(
                f"bipartite enumeration would exceed cap {cap}",
                progress=len(seen), unit="functions")
        for t1 in product(range(d), repeat=sub1.input_count):
            for t2 in product(range(d), repeat=sub2.input_count):
                table = []
                for s in scenario.inputs():
                    v1 = t1[sub1.input_index(tuple(s[j] for j in j_list))]
                    v2 = t2[sub2.input_index(tuple(s[j] for j in jc_list))]
                    table.append((v1 + v2) % d)
                seen.add(tuple(table))
    return [FiniteFunction(scenario, t) for t in sorted(seen)]


# ---------------------------------------------------------------------------
# classification and overlap
# ---------------------------------------------------------------------------

def classify(f: FiniteFunction) -> FunctionClassReport:
    sc = f.scenario
    n, c, d = sc.n, sc.c, sc.d
    lin = linear_part(f)
    nonlin = f.sub(lin)
    is_linear = nonlin.is_zero()

    # affine: single multiplier per site, digits read mod d
    zero = (0,) * n
    alpha = f(zero)
    betas = []
    for j in range(n):
        if c >= 2:
            s = list(zero)
            s[j] = 1
            betas.append((f(tuple(s)) - alpha) % d)
        else:
            betas.append(0)
    is_aff = all(
        f(s) == (alpha + sum(b * v for b, v in zip(betas, s))) % d
        for s in sc.inputs())

    parts = bipartite_linear_partitions(f) if n >= 2 else ()
    return FunctionClassReport(
        is_npartite_linear=is_linear,
        is_affine=is_aff,
        bipartite_linear_partitions=parts,
        linear_part=lin,
        nonlinear_part=nonlin)


def max_overlap(f: FiniteFunction, weights=None):
    """Maximize sum_s w(s) [f(s) = g(s)] over n-partite linear g.

    weights: sequence aligned with input order (default all 1).  Returns
    (value, argmax g); ties resolve to the earliest g in enumeration order.
    """
    sc = f.scenario
    if weights is None:
        w = [Fraction(1)] * sc.input_count
    else:
        w = [Fraction(x) for x in weights]
        if len(w) != sc.input_count:
            raise ValueError("weights length must equal c^n")
    best_val = None
    best_g = None
    for g in enumerate_lhv_vertex_functions(sc):
        val = sum((wi for wi, a, b in zip(w, f.table, g.table) if a == b),
                  Fraction(0))
        if best_val is None or val > best_val:
            best_val, best_g = val, g
    return best_val, best_g


# ---------------------------------------------------------------------------
# correlator embedding
# ---------------------------------------------------------------------------

def correlator_vertex(f: FiniteFunction) -> tuple:
    """Reduced correlator vector of the deterministic box for f:
    entry (k, s) is delta(f(s) = k) for k = 1..d-1, beta ordering."""
    sc = f.scenario
    vec = [0] * sc.reduced_dim
    for idx, v in enumerate(f.table):
        if v != 0:
            vec[idx * (sc.d - 1) + (v - 1)] = 1
    return tuple(vec)


def lhv_vertices(scenario: Scenario, cap: int = ENUM_CAP):
    """Deduplicated reduced correlator vertices of the LHV polytope.

    Distinct linear functions give distinct tables, hence distinct vertices;
    the dedupe guards the identity rather than assuming it.
    """
    seen = set()
    out = []
    for g in enumerate_lhv_vertex_functions(scenario, cap=cap):
        v = correlator_vertex(g)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out
