"""No-signalling behaviours on full conditional distributions.

A behaviour assigns a probability p(m|s) to every output tuple m in Z_d^n
given every input tuple s in Z_c^n.  No-signalling requires every marginal
over a subset of parties to be independent of the discarded parties'
inputs.  This module builds that constraint system exactly, projects
behaviours onto the mod-d sum correlator p(k|s) = p([sum_j m_j]_d = k|s),
and decides when a deterministic correlator vertex pins the behaviour down
completely.

For prime d the only no-signalling completion of the vertex of a function f
is the uniform box p(m|s) = d^(1-n) on the support [sum_j m_j]_d = f(s),
unless f splits linearly across some bipartition of the parties, in which
case the product of the two block boxes is a second completion with entries
d^(2-n).  The convex hull of the bipartite-splitting vertices sits strictly
between the local polytope and the full correlator body and carries the
hybrid-model bound 2 for the three-party partial-separability expression.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
import json

from .errors import ResourceCapError
from .ffun import (
    FiniteFunction,
    Scenario,
    bipartite_linear_partitions,
    correlator_vertex,
    enumerate_bipartite_linear_functions,
)
from .poly import (
    DEFAULT_RAY_CAP,
    LinearEquality,
    LinearInequality,
    RationalPolytope,
    enumerate_vertices,
    hull_facets,
)

AMBIENT_CAP = 4096
BODY_ENUM_CAP = 1 << 16


def _require_ambient(scenario: Scenario, operation: str) -> int:
    ambient = scenario.d ** scenario.n * scenario.input_count
    if ambient > AMBIENT_CAP:
        raise ResourceCapError(
            f"{operation}: ambient dimension d^n c^n = {ambient} "
            f"exceeds cap {AMBIENT_CAP}", progress=0, unit="variables")
    return ambient


def _outputs(scenario: Scenario):
    return product(range(scenario.d), repeat=scenario.n)


def _out_index(scenario: Scenario, m) -> int:
    idx = 0
    for v in m:
        idx = idx * scenario.d + v
    return idx


def dense_index(scenario: Scenario, m, s) -> int:
    """Position of p(m|s) in the dense layout: m-major, s-minor."""
    return _out_index(scenario, m) * scenario.input_count \
        + scenario.input_index(s)


@dataclass(frozen=True)
class FullDistribution:
    """Dense behaviour p(m|s), exact rationals, (m, s) lexicographic order."""

    scenario: Scenario
    probs: tuple

    def __post_init__(self):
        sc = self.scenario
        vals = tuple(Fraction(v) for v in self.probs)
        if len(vals) != sc.d ** sc.n * sc.input_count:
            raise ValueError(
                f"need d^n c^n = {sc.d ** sc.n * sc.input_count} entries, "
                f"got {len(vals)}")
        if any(v < 0 for v in vals):
            raise ValueError("probabilities must be non-negative")
        for s_idx in range(sc.input_count):
            total = sum(vals[m_idx * sc.input_count + s_idx]
                        for m_idx in range(sc.d ** sc.n))
            if total != 1:
                raise ValueError(
                    f"column s index {s_idx} sums to {total}, not 1")
        object.__setattr__(self, "probs", vals)

    @staticmethod
    def from_map(scenario: Scenario, mapping) -> "FullDistribution":
        """Build from a {(m, s): value} map; absent entries are zero."""
        dense = [Fraction(0)] * (scenario.d ** scenario.n
                                 * scenario.input_count)
        for (m, s), v in mapping.items():
            dense[dense_index(scenario, m, s)] = Fraction(v)
        return FullDistribution(scenario, tuple(dense))

    def prob(self, m, s) -> Fraction:
        return self.probs[dense_index(self.scenario, m, s)]

    def is_nonsignalling(self) -> bool:
        """Exact check of the single-site marginal conditions.

        Marginal independence for every single dropped party implies the
        condition for all subsets (iterate the marginalization), so only
        singletons are tested.
        """
        sc = self.scenario
        for j in range(sc.n):
            others_m = product(range(sc.d), repeat=sc.n - 1)
            for rest_m in others_m:
                for rest_s in product(range(sc.c), repeat=sc.n - 1):
                    ref = None
                    for sj in range(sc.c):
                        s = rest_s[:j] + (sj,) + rest_s[j:]
                        tot = sum(
                            self.prob(rest_m[:j] + (mj,) + rest_m[j:], s)
                            for mj in range(sc.d))
                        if ref is None:
                            ref = tot
                        elif tot != ref:
                            return False
        return True

    def to_json(self) -> str:
        sc = self.scenario
        return json.dumps(
            {"scenario": {"n": sc.n, "c": sc.c, "d": sc.d},
             "probs": [[v.numerator, v.denominator] for v in self.probs]},
            sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FullDistribution":
        obj = json.loads(text)
        sc = obj["scenario"]
        return FullDistribution(
            Scenario(sc["n"], sc["c"], sc["d"]),
            tuple(Fraction(num, den) for num, den in obj["probs"]))


@dataclass(frozen=True)
class CorrelatorProjection:
    """Reduced correlator vector of a behaviour, exact."""

    source: FullDistribution
    vector: tuple


def correlator_projection(dist: FullDistribution) -> CorrelatorProjection:
    sc = dist.scenario
    vec = [Fraction(0)] * sc.reduced_dim
    for m in _outputs(sc):
        k = sum(m) % sc.d
        if k == 0:
            continue
        for s in sc.inputs():
            p = dist.prob(m, s)
            if p:
                vec[sc.beta_index(k, s)] += p
    return CorrelatorProjection(dist, tuple(vec))


# ---------------------------------------------------------------------------
# constraint system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NsSystem:
    """Irredundant H-description of the no-signalling polytope."""

    scenario: Scenario
    equalities: tuple
    positivity: tuple
    ambient_dim: int
    affine_dim: int


def _proper_subsets(n: int):
    """Nonempty proper subsets of range(n), smallest first, sorted members."""
    parties = list(range(n))
    for size in range(1, n):
        yield from (tuple(c) for c in combinations(parties, size))


def _independent_rows(rows):
    """Indices of rows forming a maximal independent subset, first wins."""
    basis = []  # list of (pivot_col, reduced_row)
    keep = []
    for idx, row in enumerate(rows):
        work = [Fraction(v) for v in row]
        for piv, base in basis:
            if work[piv] != 0:
                f = work[piv]
                work = [a - f * b for a, b in zip(work, base)]
        piv = next((i for i, v in enumerate(work) if v != 0), None)
        if piv is None:
            continue
        lead = work[piv]
        work = [v / lead for v in work]
        basis.append((piv, work))
        keep.append(idx)
    return keep


def ns_constraints(scenario: Scenario) -> NsSystem:
    """Normalization, positivity, and subset-marginal equalities.

    One marginal equality is generated per dropped subset J, retained output
    value, retained input value, and non-baseline input on J; the list is
    then cut down to an independent subset by exact Gaussian elimination.
    Single-party scenarios have no proper subset to signal across, so only
    normalization survives.
    """
    ambient = _require_ambient(scenario, "ns_constraints")
    sc = scenario
    raw = []
    for s in sc.inputs():
        row = [0] * ambient
        for m in _outputs(sc):
            row[dense_index(sc, m, s)] = 1
        raw.append((tuple(row), 1))
    for dropped in _proper_subsets(sc.n):
        kept = tuple(j for j in range(sc.n) if j not in dropped)
        for m_kept in product(range(sc.d), repeat=len(kept)):
            for s_kept in product(range(sc.c), repeat=len(kept)):
                base = None
                for s_drop in product(range(sc.c), repeat=len(dropped)):
                    s = [0] * sc.n
                    for j, v in zip(kept, s_kept):
                        s[j] = v
                    for j, v in zip(dropped, s_drop):
                        s[j] = v
                    cols = []
                    for m_drop in product(range(sc.d), repeat=len(dropped)):
                        m = [0] * sc.n
                        for j, v in zip(kept, m_kept):
                            m[j] = v
                        for j, v in zip(dropped, m_drop):
                            m[j] = v
                        cols.append(dense_index(sc, tuple(m), tuple(s)))
                    if base is None:
                        base = cols
                        continue
                    row = [0] * ambient
                    for i in base:
                        row[i] += 1
                    for i in cols:
                        row[i] -= 1
                    raw.append((tuple(row), 0))
    keep = _independent_rows(
        [row + (rhs,) for row, rhs in raw])
    equalities = tuple(LinearEquality.normalized(raw[i][0], raw[i][1])
                       for i in keep)
    positivity = tuple(
        LinearInequality.normalized(
            tuple(-1 if j == i else 0 for j in range(ambient)), 0)
        for i in range(ambient))
    return NsSystem(scenario=sc, equalities=equalities,
                    positivity=positivity, ambient_dim=ambient,
                    affine_dim=ambient - len(equalities))


def ns_vertices(scenario: Scenario, cap_rays: int = DEFAULT_RAY_CAP) -> tuple:
    """All vertices of the no-signalling polytope as dense rational tuples."""
    sys = ns_constraints(scenario)
    return enumerate_vertices(sys.positivity, sys.equalities,
                              dim=sys.ambient_dim, cap_rays=cap_rays)


def deterministic_local_boxes(scenario: Scenario):
    """Product-deterministic behaviours, one per tuple of per-site maps.

    These span the full no-signalling affine hull, which makes them the
    cheap cross-check for the rank of the equality system.
    """
    sc = scenario
    site_maps = list(product(range(sc.d), repeat=sc.c))
    for assignment in product(site_maps, repeat=sc.n):
        probs = {}
        for s in sc.inputs():
            m = tuple(assignment[j][s[j]] for j in range(sc.n))
            probs[(m, s)] = Fraction(1)
        yield FullDistribution.from_map(sc, probs)


# ---------------------------------------------------------------------------
# boxes attached to a correlator vertex
# ---------------------------------------------------------------------------

def genbox(f: FiniteFunction) -> FullDistribution:
    """Uniform box p(m|s) = d^(1-n) on the support [sum_j m_j]_d = f(s).

    Single-site marginals are uniform by construction, so the box is
    no-signalling and projects exactly onto the correlator vertex of f.
    """
    sc = f.scenario
    w = Fraction(1, sc.d ** (sc.n - 1))
    probs = {}
    for s in sc.inputs():
        target = f(s)
        for m in _outputs(sc):
            if sum(m) % sc.d == target:
                probs[(m, s)] = w
    return FullDistribution.from_map(sc, probs)


def split_box(f: FiniteFunction, side=None) -> FullDistribution:
    """Product of the two block boxes of a bipartite-linear function.

    With f(s) = f1(s_J) + f2(s_{J^c}) mod d, the box enforcing the block
    sums separately has entries d^(2-n) and the same correlator projection,
    so it witnesses non-uniqueness whenever it differs from genbox(f).
    """
    sc = f.scenario
    if side is None:
        parts = bipartite_linear_partitions(f)
        if not parts:
            raise ValueError("function does not split over any bipartition")
        side = parts[0]
    side = frozenset(side)
    zero = (0,) * sc.n

    def f1(s):
        return f(tuple(v if j in side else 0 for j, v in enumerate(s)))

    def f2(s):
        return (f(tuple(v if j not in side else 0 for j, v in enumerate(s)))
                - f(zero)) % sc.d

    w = Fraction(1, sc.d ** (sc.n - 2))
    probs = {}
    for s in sc.inputs():
        t1, t2 = f1(s), f2(s)
        for m in _outputs(sc):
            in_sum = sum(v for j, v in enumerate(m) if j in side) % sc.d
            out_sum = sum(v for j, v in enumerate(m) if j not in side) % sc.d
            if in_sum == t1 and out_sum == t2:
                probs[(m, s)] = w
    box = FullDistribution.from_map(sc, probs)
    if correlator_projection(box).vector != \
            tuple(Fraction(v) for v in correlator_vertex(f)):
        raise AssertionError("split box projection disagrees with vertex")
    return box


@dataclass(frozen=True)
class UniquenessVerdict:
    """Outcome of the constrained vertex enumeration for one function."""

    function: FiniteFunction
    vertex_count: int
    unique: bool
    matches_uniform_box: bool
    split_witness: FullDistribution
    vertices: tuple

    def __bool__(self) -> bool:
        return self.unique


def unique_ns_box_check(f: FiniteFunction,
                        cap_rays: int = DEFAULT_RAY_CAP) -> UniquenessVerdict:
    """Enumerate {no-signalling} cut down to the correlator vertex of f.

    The support condition p(m|s) = 0 off [sum_j m_j]_d = f(s) pins the
    correlator projection to the vertex (normalization supplies the
    remaining unit entry).  Requires prime d; the uniqueness statement
    fails over composite moduli.
    """
    sc = f.scenario
    sc.require_prime_d("unique_ns_box_check")
    ambient = _require_ambient(sc, "unique_ns_box_check")
    sys = ns_constraints(sc)
    support_eqs = []
    for s in sc.inputs():
        target = f(s)
        for m in _outputs(sc):
            if sum(m) % sc.d != target:
                row = tuple(1 if j == dense_index(sc, m, s) else 0
                            for j in range(ambient))
                support_eqs.append(LinearEquality(row, 0))
    verts = enumerate_vertices(sys.positivity,
                               sys.equalities + tuple(support_eqs),
                               dim=ambient, cap_rays=cap_rays)
    box = genbox(f)
    parts = bipartite_linear_partitions(f)
    split = None
    if parts:
        split = split_box(f, parts[0])
        if split.probs == box.probs or len(verts) < 2:
            raise AssertionError(
                "bipartite-linear function must admit a second completion")
    return UniquenessVerdict(
        function=f,
        vertex_count=len(verts),
        unique=len(verts) == 1,
        matches_uniform_box=len(verts) == 1 and verts[0] == box.probs,
        split_witness=split,
        vertices=verts)


# ---------------------------------------------------------------------------
# correlator-space polytopes
# ---------------------------------------------------------------------------

def correlator_body_vertices(scenario: Scenario,
                             cap: int = BODY_ENUM_CAP) -> tuple:
    """Vertices of the full correlator body: one per function table."""
    sc = scenario
    count = sc.d ** sc.input_count
    if count > cap:
        raise ResourceCapError(
            f"correlator body has {count} vertices, cap {cap}",
            progress=0, unit="vertices")
    return tuple(correlator_vertex(FiniteFunction(sc, table))
                 for table in product(range(sc.d), repeat=sc.input_count))


def svetlichny_hull(scenario: Scenario, with_facets: bool = False,
                    cap_rays: int = DEFAULT_RAY_CAP) -> RationalPolytope:
    """Hull of the correlator vertices of bipartite-splitting functions.

    This is the correlator-space model of partial separability: each vertex
    is a behaviour where some bipartition of the parties acts as two
    non-communicating blocks.  V-representation always; facets on request.
    """
    verts = sorted({correlator_vertex(g)
                    for g in enumerate_bipartite_linear_functions(scenario)})
    if with_facets:
        return hull_facets(verts, cap_rays=cap_rays)
    return RationalPolytope(dim_ambient=scenario.reduced_dim,
                            vertices=tuple(verts))
