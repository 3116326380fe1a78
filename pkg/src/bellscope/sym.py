"""Relabeling symmetries of correlator Bell inequalities.

An operation g = (sigma, a, b) relabels a scenario: party j is renamed to
sigma(j), its input is shifted by a_j (mod c), and its output is shifted by
b_j(s_j) (mod d) where the shift may depend on the party's own original
input.  On the full coefficient grid (k, s), k in Z_d, this induces the
bijection

    G(k, s) = (k + sum_j b_j(s_j) mod d,  u)   with u_{sigma(j)} = s_j + a_j.

Behaviors and inequality tables both push forward along G; the pairing
<B, p> over the full grid is preserved.  Reduced (k >= 1) vectors are
handled by lifting to the full grid, pushing forward, and renormalizing
back to the B(0, s) = 0 gauge, which changes the bound by the subtracted
column constants.  In the reduced picture the invariant is

    beta' . p' - rhs' = beta . p - rhs.

Orbit machinery works on raw (coeffs, rhs) integer keys rather than richer
objects: partitioning a 28k-facet list must not build 28k wrapper instances
per generator application.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ResourceCapError, ScenarioMismatchError
from .ffun import Scenario
from .poly import primitive_int_vector

ORBIT_CAP = 1 << 20


@dataclass(frozen=True)
class SymmetryOp:
    """One relabeling: party permutation, input shifts, output shift tables.

    sigma: tuple, party j is renamed sigma(j)
    a: tuple of input shifts, a[j] in Z_c
    b: tuple of per-party output shift tables, b[j][v] in Z_d for v in Z_c
    """

    scenario: Scenario
    sigma: tuple
    a: tuple
    b: tuple

    def __post_init__(self):
        n, c, d = self.scenario.n, self.scenario.c, self.scenario.d
        if sorted(self.sigma) != list(range(n)):
            raise ValueError(f"sigma must permute range({n})")
        if len(self.a) != n or any(not 0 <= v < c for v in self.a):
            raise ValueError("input shifts must be in Z_c, one per party")
        if len(self.b) != n or any(len(row) != c for row in self.b) or \
                any(not 0 <= v < d for row in self.b for v in row):
            raise ValueError("output shifts need an entry in Z_d per input")


def identity_op(scenario: Scenario) -> SymmetryOp:
    n, c = scenario.n, scenario.c
    return SymmetryOp(scenario, tuple(range(n)), (0,) * n,
                      tuple((0,) * c for _ in range(n)))


def compose(g2: SymmetryOp, g1: SymmetryOp) -> SymmetryOp:
    """The operation 'apply g1, then g2'."""
    if g1.scenario != g2.scenario:
        raise ScenarioMismatchError("cannot compose across scenarios")
    sc = g1.scenario
    n, c, d = sc.n, sc.c, sc.d
    sigma = tuple(g2.sigma[g1.sigma[j]] for j in range(n))
    a = tuple((g1.a[j] + g2.a[g1.sigma[j]]) % c for j in range(n))
    b = tuple(tuple((g1.b[j][v] + g2.b[g1.sigma[j]][(v + g1.a[j]) % c]) % d
                    for v in range(c)) for j in range(n))
    return SymmetryOp(sc, sigma, a, b)


def inverse(g: SymmetryOp) -> SymmetryOp:
    sc = g.scenario
    n, c, d = sc.n, sc.c, sc.d
    inv_sigma = [0] * n
    for j in range(n):
        inv_sigma[g.sigma[j]] = j
    sigma = tuple(inv_sigma)
    a = tuple((-g.a[sigma[i]]) % c for i in range(n))
    b = tuple(tuple((-g.b[sigma[i]][(v - g.a[sigma[i]]) % c]) % d
                    for v in range(c)) for i in range(n))
    return SymmetryOp(sc, sigma, a, b)


def generators(scenario: Scenario):
    """Adjacent transpositions, unit input shifts, single-point output shifts.

    These generate the full relabeling group; single-point output shifts
    (+1 on one party at one input value) generate all shift tables.
    """
    n, c, d = scenario.n, scenario.c, scenario.d
    ident = identity_op(scenario)
    out = []
    for j in range(n - 1):
        sigma = list(range(n))
        sigma[j], sigma[j + 1] = sigma[j + 1], sigma[j]
        out.append(SymmetryOp(scenario, tuple(sigma), ident.a, ident.b))
    if c > 1:
        for j in range(n):
            a = [0] * n
            a[j] = 1
            out.append(SymmetryOp(scenario, ident.sigma, tuple(a), ident.b))
    for j in range(n):
        for v in range(c):
            b = [[0] * c for _ in range(n)]
            b[j][v] = 1
            out.append(SymmetryOp(scenario, ident.sigma, ident.a,
                                  tuple(tuple(row) for row in b)))
    return out


# ---------------------------------------------------------------------------
# the induced permutation of the full (k, s) grid
# ---------------------------------------------------------------------------

def full_grid_size(scenario: Scenario) -> int:
    return scenario.d * scenario.input_count


def full_grid_index(scenario: Scenario, k: int, s) -> int:
    return scenario.input_index(s) * scenario.d + k


def grid_permutation(g: SymmetryOp) -> tuple:
    """perm[idx(k, s)] = idx(G(k, s)); a bijection on the full grid."""
    sc = g.scenario
    n, c, d = sc.n, sc.c, sc.d
    perm = [0] * full_grid_size(sc)
    for s in sc.inputs():
        u = [0] * n
        for j in range(n):
            u[g.sigma[j]] = (s[j] + g.a[j]) % c
        shift = sum(g.b[j][s[j]] for j in range(n)) % d
        base_src = sc.input_index(s) * d
        base_dst = sc.input_index(tuple(u)) * d
        for k in range(d):
            perm[base_src + k] = base_dst + (k + shift) % d
    return tuple(perm)


# ---------------------------------------------------------------------------
# action on reduced vectors
# ---------------------------------------------------------------------------

def _reduced_to_full(scenario: Scenario, reduced, fill):
    """Lift a reduced (k >= 1) vector to the full grid.  fill(s_index, row)
    supplies the k = 0 entry from the reduced row of that input."""
    d = scenario.d
    full = [0] * full_grid_size(scenario)
    for si in range(scenario.input_count):
        row = reduced[si * (d - 1): (si + 1) * (d - 1)]
        full[si * d] = fill(row)
        for k in range(1, d):
            full[si * d + k] = row[k - 1]
    return full


def apply_to_inequality(g: SymmetryOp, coeffs, rhs):
    """Transform reduced inequality coefficients covariantly.

    Returns (coeffs', rhs') back in the B(0, s) = 0 gauge, unscaled, so
    beta' . p' - rhs' = beta . p - rhs holds exactly for every behavior p.
    Orbit machinery normalizes separately."""
    sc = g.scenario
    d = sc.d
    if len(coeffs) != sc.reduced_dim:
        raise ScenarioMismatchError(
            f"expected {sc.reduced_dim} reduced coefficients, got {len(coeffs)}")
    full = _reduced_to_full(sc, list(coeffs), lambda row: 0)
    perm = grid_permutation(g)
    image = [0] * len(full)
    for idx, val in enumerate(full):
        image[perm[idx]] = val
    out = []
    total_shift = 0
    for si in range(sc.input_count):
        c0 = image[si * d]
        total_shift += c0
        for k in range(1, d):
            out.append(image[si * d + k] - c0)
    return tuple(out), rhs - total_shift


def apply_to_point(g: SymmetryOp, point):
    """Transform a reduced correlator behavior; k = 0 entries are recovered
    by normalization before the pushforward and dropped after."""
    sc = g.scenario
    d = sc.d
    if len(point) != sc.reduced_dim:
        raise ScenarioMismatchError(
            f"expected {sc.reduced_dim} reduced coordinates, got {len(point)}")
    full = _reduced_to_full(sc, [Fraction(x) for x in point],
                            lambda row: 1 - sum(row))
    perm = grid_permutation(g)
    image = [0] * len(full)
    for idx, val in enumerate(full):
        image[perm[idx]] = val
    out = []
    for si in range(sc.input_count):
        for k in range(1, d):
            out.append(image[si * d + k])
    return tuple(out)


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

def _normalize_key(coeffs, rhs):
    vec = primitive_int_vector(tuple(coeffs) + (rhs,))
    return vec[:-1], vec[-1]


def orbit_of(coeffs, rhs, scenario: Scenario, cap: int = ORBIT_CAP):
    """The full orbit of one inequality as a set of normalized keys."""
    gens = generators(scenario)
    perms = [grid_permutation(g) for g in gens]
    start = _normalize_key(coeffs, rhs)
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for key in frontier:
            for perm in perms:
                img = _apply_perm_key(scenario, key, perm)
                if img not in seen:
                    seen.add(img)
                    nxt.append(img)
                    if len(seen) > cap:
                        raise ResourceCapError(
                            f"orbit exceeded cap {cap}",
                            progress=len(seen), unit="orbit members")
        frontier = nxt
    return seen


def _apply_perm_key(scenario: Scenario, key, perm):
    """apply_to_inequality specialised to integer keys and a precomputed
    grid permutation (the hot loop of orbit partitioning)."""
    coeffs, rhs = key
    d = scenario.d
    nin = scenario.input_count
    image = [0] * (d * nin)
    for si in range(nin):
        base = si * d
        row_off = si * (d - 1)
        for k in range(1, d):
            image[perm[base + k]] = coeffs[row_off + k - 1]
        # k = 0 sources carry 0 in this gauge; their image slots stay 0
    out = []
    total = 0
    for si in range(nin):
        c0 = image[si * d]
        total += c0
        if c0:
            for k in range(1, d):
                out.append(image[si * d + k] - c0)
        else:
            out.extend(image[si * d + 1: si * d + d])
    return _normalize_key(out, rhs - total)


def canonical_form(coeffs, rhs, scenario: Scenario, cap: int = ORBIT_CAP):
    """Lexicographically smallest (coeffs, rhs) key over the orbit."""
    orb = orbit_of(coeffs, rhs, scenario, cap=cap)
    return min(orb)


def orbit_partition(items, scenario: Scenario):
    """Partition a closed list of (coeffs, rhs) keys into symmetry orbits.

    Every generator image of a member must itself be a member (true for the
    complete facet list of an invariant polytope); a stray image raises.
    Returns a list of orbits, each a sorted list of indices into items.
    """
    keys = [_normalize_key(c, r) for c, r in items]
    index = {}
    for i, k in enumerate(keys):
        index.setdefault(k, i)
    if len(index) != len(keys):
        raise ValueError("duplicate inequalities in orbit partition input")
    gens = generators(scenario)
    perms = [grid_permutation(g) for g in gens]
    unassigned = set(range(len(keys)))
    orbits = []
    while unassigned:
        seed = min(unassigned)
        group = {seed}
        frontier = [keys[seed]]
        while frontier:
            nxt = []
            for key in frontier:
                for perm in perms:
                    img = _apply_perm_key(scenario, key, perm)
                    j = index.get(img)
                    if j is None:
                        raise ValueError(
                            "orbit escapes the input list; the list is not "
                            "symmetry-closed")
                    if j in unassigned and j not in group:
                        group.add(j)
                        nxt.append(img)
            frontier = nxt
        unassigned -= group
        orbits.append(sorted(group))
    return orbits
