"""Exact convex polytope computations over the rationals.

Both conversion directions run through one double-description pass on a
halfspace cone {y : y . q_i <= 0}:

* facet enumeration: the dual cone of the homogenized vertices (1, v); its
  extreme rays are the facets, its lineality the affine-hull equalities.
* vertex enumeration: the homogenization cone of an H-representation; its
  extreme rays with positive first coordinate are the vertices.

All arithmetic on coordinates is integer/rational and exact; numpy enters
only for (a) int64 dot products behind an explicit magnitude guard with a
python-int fallback and (b) uint64 bitset operations on tight-set masks.
No floating point is used anywhere in this module.

Incremental insertion follows Fukuda-Prodon: while the current cone still
has a lineality direction not orthogonal to the new constraint, pivot on it;
otherwise split rays by sign and combine adjacent (negative, positive) pairs.
Adjacency is the combinatorial test (no third ray's tight set contains the
pair's common tight set) with a popcount prefilter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ResourceCapError, UnboundedPolytopeError

DEFAULT_RAY_CAP = 500_000

# int64 dot products are safe while |coef| * |entry| * dim < 2^62
_INT64_GUARD = 1 << 62


# ---------------------------------------------------------------------------
# small exact helpers
# ---------------------------------------------------------------------------

def _fracs(seq):
    return tuple(Fraction(x) for x in seq)


def _tuple_gcd(vals):
    g = 0
    for v in vals:
        g = math.gcd(g, abs(v))
        if g == 1:
            return 1
    return g


def primitive_int_vector(vec):
    """Scale a rational vector by a positive rational into coprime integers."""
    fr = [Fraction(x) for x in vec]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    ints = [int(f * den) for f in fr]
    g = _tuple_gcd(ints)
    if g > 1:
        ints = [v // g for v in ints]
    return tuple(ints)


@dataclass(frozen=True, order=True)
class LinearInequality:
    """coeffs . x <= rhs with coprime integer data, orientation preserved."""

    coeffs: tuple
    rhs: int

    @staticmethod
    def normalized(coeffs, rhs) -> "LinearInequality":
        vec = primitive_int_vector(tuple(coeffs) + (rhs,))
        return LinearInequality(vec[:-1], vec[-1])

    def evaluate(self, point) -> Fraction:
        return sum((Fraction(c) * Fraction(x)
                    for c, x in zip(self.coeffs, point) if c), Fraction(0))

    def holds(self, point) -> bool:
        return self.evaluate(point) <= self.rhs

    def is_tight(self, point) -> bool:
        return self.evaluate(point) == self.rhs

    def to_text(self) -> str:
        return "{} <= {}".format(" ".join(str(c) for c in self.coeffs), self.rhs)

    @staticmethod
    def from_text(line: str) -> "LinearInequality":
        lhs, rhs = line.split("<=")
        return LinearInequality(tuple(int(t) for t in lhs.split()),
                                int(rhs.strip()))


@dataclass(frozen=True, order=True)
class LinearEquality:
    """coeffs . x == rhs, coprime integers, first non-zero coefficient > 0."""

    coeffs: tuple
    rhs: int

    @staticmethod
    def normalized(coeffs, rhs) -> "LinearEquality":
        vec = primitive_int_vector(tuple(coeffs) + (rhs,))
        lead = next((v for v in vec if v != 0), 0)
        if lead < 0:
            vec = tuple(-v for v in vec)
        return LinearEquality(vec[:-1], vec[-1])

    def evaluate(self, point) -> Fraction:
        return sum((Fraction(c) * Fraction(x)
                    for c, x in zip(self.coeffs, point) if c), Fraction(0))

    def holds(self, point) -> bool:
        return self.evaluate(point) == self.rhs


# ---------------------------------------------------------------------------
# exact linear algebra
# ---------------------------------------------------------------------------

def matrix_rank(rows) -> int:
    """Rank of a rational matrix by fraction-free Gaussian elimination."""
    mat = [list(map(Fraction, r)) for r in rows]
    if not mat:
        return 0
    ncols = len(mat[0])
    rank = 0
    row = 0
    for col in range(ncols):
        piv = next((i for i in range(row, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[row], mat[piv] = mat[piv], mat[row]
        pv = mat[row][col]
        for i in range(row + 1, len(mat)):
            if mat[i][col] != 0:
                f = mat[i][col] / pv
                for j in range(col, ncols):
                    mat[i][j] -= f * mat[row][j]
        row += 1
        rank += 1
        if row == len(mat):
            break
    return rank


def linear_rank(points) -> int:
    return matrix_rank(list(points))


def affine_rank(points) -> int:
    """Maximum number of affinely independent points among the input
    (= dimension of the affine hull plus one; a single point has rank 1)."""
    pts = list(points)
    if not pts:
        return 0
    return matrix_rank([(1,) + tuple(p) for p in pts])


def affinely_independent_subset(points, size):
    """Greedy subset of `size` affinely independent points, or None."""
    chosen = []
    basis = []  # echelon rows over Fraction

    def try_add(vec):
        v = list(map(Fraction, vec))
        for brow in basis:
            lead = next(j for j, x in enumerate(brow) if x != 0)
            if v[lead] != 0:
                f = v[lead] / brow[lead]
                for j in range(lead, len(v)):
                    v[j] -= f * brow[j]
        if any(x != 0 for x in v):
            basis.append(v)
            basis.sort(key=lambda r: next(j for j, x in enumerate(r) if x != 0))
            return True
        return False

    for p in points:
        if try_add((1,) + tuple(p)):
            chosen.append(tuple(p))
            if len(chosen) == size:
                return chosen
    return None


def solve_rational(rows, rhs):
    """One solution of rows . x = rhs plus a null-space basis, or None.

    Returns (particular, null_basis) with rational tuples; None if the
    system is inconsistent.
    """
    if not rows:
        return None
    m, n = len(rows), len(rows[0])
    aug = [[Fraction(x) for x in rows[i]] + [Fraction(rhs[i])] for i in range(m)]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((i for i in range(row, m) if aug[i][col] != 0), None)
        if piv is None:
            continue
        aug[row], aug[piv] = aug[piv], aug[row]
        pv = aug[row][col]
        aug[row] = [x / pv for x in aug[row]]
        for i in range(m):
            if i != row and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[row])]
        pivots.append(col)
        row += 1
        if row == m:
            break
    for i in range(row, m):
        if aug[i][n] != 0:
            return None
    particular = [Fraction(0)] * n
    for r, col in enumerate(pivots):
        particular[col] = aug[r][n]
    free = [c for c in range(n) if c not in pivots]
    null_basis = []
    for fc in free:
        vec = [Fraction(0)] * n
        vec[fc] = Fraction(1)
        for r, col in enumerate(pivots):
            vec[col] = -aug[r][fc]
        null_basis.append(tuple(vec))
    return tuple(particular), null_basis


# ---------------------------------------------------------------------------
# the double-description core
# ---------------------------------------------------------------------------

class _ConeDD:
    """DD representation of {y : y . q_i <= 0} built incrementally."""

    def __init__(self, dim, nconstraints, cap_rays, use_card_filter):
        self.dim = dim
        self.nwords = max(1, (nconstraints + 63) // 64)
        self.cap = cap_rays
        self.use_card_filter = use_card_filter
        self.lineality = [tuple(1 if j == i else 0 for j in range(dim))
                          for i in range(dim)]
        self.rays = []          # list of int tuples, primitive
        self.masks = []         # per-ray python int bitmask of tight constraints
        self.inserted = 0
        self.max_entry = 1
        self._masks_dirty = True
        self._rays_dirty = True
        self._rays_np = None
        self._masks_np = None

    # -- numpy mirrors -----------------------------------------------------

    def _sync_masks(self):
        if not self._masks_dirty:
            return
        n = len(self.rays)
        buf = np.zeros((n, self.nwords), dtype=np.uint64)
        for i, m in enumerate(self.masks):
            w = 0
            while m:
                buf[i, w] = m & 0xFFFFFFFFFFFFFFFF
                m >>= 64
                w += 1
        self._masks_np = buf
        self._masks_dirty = False

    def _dots(self, q):
        """Exact y . q for every ray (int64 fast path with magnitude guard)."""
        if not self.rays:
            return []
        qmax = max((abs(x) for x in q), default=0)
        if qmax and self.max_entry * qmax * self.dim < _INT64_GUARD:
            if self._rays_dirty:
                self._rays_np = np.array(self.rays, dtype=np.int64).reshape(
                    len(self.rays), self.dim)
                self._rays_dirty = False
            w = self._rays_np @ np.array(q, dtype=np.int64)
            return [int(x) for x in w]
        return [sum(a * b for a, b in zip(r, q) if b) for r in self.rays]

    # -- insertion ---------------------------------------------------------

    def insert(self, q):
        t = self.inserted
        pivot = w0 = None
        for l in self.lineality:
            wl = sum(a * b for a, b in zip(l, q))
            if wl != 0:
                pivot, w0 = l, wl
                break
        if pivot is not None:
            self._insert_pivot(q, pivot, w0, t)
        else:
            self._insert_split(q, t)
        self.inserted = t + 1
        if self.cap is not None and len(self.rays) > self.cap:
            raise ResourceCapError(
                f"ray count {len(self.rays)} exceeded cap {self.cap} "
                f"after {self.inserted} constraints",
                progress=self.inserted, unit="constraints")

    def _insert_pivot(self, q, l0, w0, t):
        new_lin = []
        for l in self.lineality:
            if l is l0:
                continue
            wl = sum(a * b for a, b in zip(l, q))
            if wl == 0:
                new_lin.append(l)
            else:
                vec = tuple(w0 * a - wl * b for a, b in zip(l, l0))
                g = _tuple_gcd(vec)
                new_lin.append(tuple(v // g for v in vec) if g > 1 else vec)
        new_rays = []
        new_masks = []
        for r, m in zip(self.rays, self.masks):
            wr = sum(a * b for a, b in zip(r, q))
            if wr == 0:
                vec = r
            else:
                vec = tuple(abs(w0) * a - (wr if w0 > 0 else -wr) * b
                            for a, b in zip(r, l0))
                g = _tuple_gcd(vec)
                if g > 1:
                    vec = tuple(v // g for v in vec)
            new_rays.append(vec)
            new_masks.append(m | (1 << t))
        # the pivot direction itself becomes an extreme ray, oriented into
        # the new halfspace; it was tight on every earlier constraint
        ray0 = l0 if w0 < 0 else tuple(-v for v in l0)
        new_rays.append(ray0)
        new_masks.append((1 << t) - 1)
        self.lineality = new_lin
        self.rays = new_rays
        self.masks = new_masks
        self.max_entry = max((max(abs(v) for v in r) for r in new_rays),
                             default=1)
        self._masks_dirty = True
        self._rays_dirty = True

    def _insert_split(self, q, t):
        w = self._dots(q)
        neg = [i for i, x in enumerate(w) if x < 0]
        zero = [i for i, x in enumerate(w) if x == 0]
        pos = [i for i, x in enumerate(w) if x > 0]
        if not pos:
            for i in zero:
                self.masks[i] |= 1 << t
            self._masks_dirty = True
            return

        new_pairs = []
        if neg:
            self._sync_masks()
            masksnp = self._masks_np
            pos_np = np.array(pos)
            pd = self.dim - len(self.lineality)
            need = max(0, pd - 2) if self.use_card_filter else 0
            pos_masks = masksnp[pos_np]
            for i in neg:
                meet = masksnp[i] & pos_masks
                if need:
                    cnt = np.bitwise_count(meet).sum(axis=1)
                    cand = np.nonzero(cnt >= need)[0]
                else:
                    cand = np.arange(len(pos))
                for ci in cand:
                    j = pos[int(ci)]
                    mrow = meet[int(ci)]
                    covered = np.count_nonzero(
                        np.all((masksnp & mrow) == mrow, axis=1))
                    if covered == 2:
                        new_pairs.append((i, j, mrow))

        kept_rays = [self.rays[i] for i in neg] + [self.rays[i] for i in zero]
        kept_masks = [self.masks[i] for i in neg] + \
                     [self.masks[i] | (1 << t) for i in zero]
        new_max = self.max_entry
        for i, j, mrow in new_pairs:
            wi, wj = w[i], w[j]
            ri, rj = self.rays[i], self.rays[j]
            vec = tuple(wj * a - wi * b for a, b in zip(ri, rj))
            g = _tuple_gcd(vec)
            if g > 1:
                vec = tuple(v // g for v in vec)
            mask = 0
            for wd in range(self.nwords):
                mask |= int(mrow[wd]) << (64 * wd)
            kept_rays.append(vec)
            kept_masks.append(mask | (1 << t))
            vmax = max(abs(v) for v in vec)
            if vmax > new_max:
                new_max = vmax
        self.rays = kept_rays
        self.masks = kept_masks
        self.max_entry = new_max
        self._masks_dirty = True
        self._rays_dirty = True


def dd_cone(constraints, cap_rays=DEFAULT_RAY_CAP, full_dimensional=True):
    """Extreme rays and lineality basis of {y : y . q <= 0 for q in rows}.

    constraints: integer tuples (all the same length).  When the cone is
    known to be full-dimensional (true for dual cones of point sets) the
    popcount cardinality prefilter is enabled; otherwise only the always
    correct combinatorial adjacency test runs.
    Returns (lineality, rays) as sorted primitive integer tuples.
    """
    rows = [tuple(int(x) for x in q) for q in constraints]
    if not rows:
        raise ValueError("need at least one constraint")
    dim = len(rows[0])
    cone = _ConeDD(dim, len(rows), cap_rays, full_dimensional)
    for q in rows:
        cone.insert(q)
    lin = sorted(_sign_normalized(l) for l in cone.lineality)
    rays = sorted(cone.rays)
    return lin, rays


def _sign_normalized(vec):
    lead = next((v for v in vec if v != 0), 0)
    return tuple(-x for x in vec) if lead < 0 else tuple(vec)


# ---------------------------------------------------------------------------
# polytope container and conversions
# ---------------------------------------------------------------------------

@dataclass
class RationalPolytope:
    """A polytope carrying whichever representations have been computed.

    vertices: tuple of rational point tuples (exact), or None
    facets: tuple of LinearInequality within the affine hull, or None
    equalities: tuple of LinearEquality cutting out the affine hull
    affine_hull_dim: dimension of the affine hull (ambient dim if full)
    """

    dim_ambient: int
    vertices: tuple = None
    facets: tuple = None
    equalities: tuple = ()
    affine_hull_dim: int = None

    def affine_dim(self) -> int:
        if self.affine_hull_dim is None:
            if self.vertices is None:
                raise ValueError("no representation to measure dimension from")
            self.affine_hull_dim = affine_rank(self.vertices) - 1
        return self.affine_hull_dim


def hull_facets(vertices, cap_rays=DEFAULT_RAY_CAP) -> RationalPolytope:
    """Complete irredundant facet list of conv(vertices) in its affine hull.

    Facets come from the extreme rays of the dual cone of the homogenized
    points, affine-hull equalities from its lineality.  Output is sorted and
    normalized; insertion order is the lexicographic order of the vertices.
    """
    pts = sorted({_fracs(v) for v in vertices})
    if not pts:
        raise ValueError("need at least one vertex")
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise ValueError("vertices of mixed dimension")
    rows = [primitive_int_vector((1,) + p) for p in pts]
    lin, rays = dd_cone(rows, cap_rays=cap_rays, full_dimensional=True)
    facets = set()
    for y in rays:
        b, a = -y[0], y[1:]
        if all(v == 0 for v in a):
            continue  # 0.x <= t, never a facet
        facets.add(LinearInequality.normalized(a, b))
    equalities = set()
    for y in lin:
        b, a = -y[0], y[1:]
        equalities.add(LinearEquality.normalized(a, b))
    return RationalPolytope(
        dim_ambient=dim,
        vertices=tuple(pts),
        facets=tuple(sorted(facets)),
        equalities=tuple(sorted(equalities)),
        affine_hull_dim=dim - len(lin))


def enumerate_vertices(inequalities, equalities=(), dim=None,
                       cap_rays=DEFAULT_RAY_CAP) -> tuple:
    """All vertices of {x : ineqs, eqs}; raises on unbounded input.

    Equalities are eliminated first by rational substitution, then the
    reduced H-polytope is homogenized and run through the same DD core.
    """
    ineqs = [(_fracs(a), Fraction(b)) for a, b in
             ((i.coeffs, i.rhs) if isinstance(i, LinearInequality) else i
              for i in inequalities)]
    eqs = [(_fracs(a), Fraction(b)) for a, b in
           ((e.coeffs, e.rhs) if isinstance(e, LinearEquality) else e
            for e in equalities)]
    if dim is None:
        if ineqs:
            dim = len(ineqs[0][0])
        elif eqs:
            dim = len(eqs[0][0])
        else:
            raise ValueError("cannot infer dimension")

    if eqs:
        sol = solve_rational([a for a, _ in eqs], [b for _, b in eqs])
        if sol is None:
            return ()
        x0, null = sol
    else:
        x0, null = tuple(Fraction(0) for _ in range(dim)), \
            [tuple(Fraction(1 if j == i else 0) for j in range(dim))
             for i in range(dim)]
    k = len(null)

    rows = set()
    for a, b in ineqs:
        b_red = b - sum(ai * xi for ai, xi in zip(a, x0))
        a_red = tuple(sum(ai * nv[i] for i, ai in enumerate(a) if ai)
                      for nv in null)
        if all(v == 0 for v in a_red):
            if b_red < 0:
                return ()
            continue
        rows.add(primitive_int_vector((-b_red,) + a_red))
    rows.add(tuple([-1] + [0] * k))  # homogenization: t >= 0
    lin, rays = dd_cone(sorted(rows), cap_rays=cap_rays,
                        full_dimensional=False)
    if k == 0:
        # single candidate point x0; feasibility already established
        return (tuple(x0),)
    vert_rays = [y for y in rays if y[0] > 0]
    if not vert_rays:
        return ()  # no point with homogenizing coordinate > 0: empty
    if lin:
        raise UnboundedPolytopeError(
            f"feasible set contains a line (lineality {lin[0]})")
    for y in rays:
        if y[0] == 0 and any(v != 0 for v in y[1:]):
            raise UnboundedPolytopeError(
                f"recession direction {y[1:]} found")
    verts = set()
    for y in vert_rays:
        t, wvec = y[0], y[1:]
        w = [Fraction(v, t) for v in wvec]
        point = tuple(x0[i] + sum(w[j] * null[j][i] for j in range(k))
                      for i in range(dim))
        verts.add(point)
    return tuple(sorted(verts))


# ---------------------------------------------------------------------------
# membership and facet certification
# ---------------------------------------------------------------------------

def _phase1_feasible(cols, target) -> bool:
    """Exact phase-1 simplex: is target a convex combination of cols?"""
    m = len(target)
    n = len(cols)
    # rows: sum_i lam_i * col_i = target ; sum_i lam_i = 1 ; lam >= 0
    a = [[Fraction(cols[i][r]) for i in range(n)] for r in range(m)]
    a.append([Fraction(1)] * n)
    b = [Fraction(x) for x in target] + [Fraction(1)]
    for r in range(m + 1):
        if b[r] < 0:
            a[r] = [-x for x in a[r]]
            b[r] = -b[r]
    rows = m + 1
    ncols = n + rows  # original + artificial
    tab = [a[r] + [Fraction(1 if i == r else 0) for i in range(rows)] + [b[r]]
           for r in range(rows)]
    basis = list(range(n, n + rows))
    cost = [Fraction(0)] * ncols + [Fraction(0)]
    for r in range(rows):
        for j in range(ncols + 1):
            cost[j] += tab[r][j]
    # minimize sum of artificials = maximize -(...): reduced costs on
    # non-artificial columns are the negated sums computed above
    while True:
        enter = next((j for j in range(n) if cost[j] > 0), None)
        if enter is None:
            break
        ratios = [(tab[r][ncols] / tab[r][enter], basis[r], r)
                  for r in range(rows) if tab[r][enter] > 0]
        if not ratios:
            break  # unbounded cannot happen in phase 1
        _, _, leave = min(ratios)
        pv = tab[leave][enter]
        tab[leave] = [x / pv for x in tab[leave]]
        for r in range(rows):
            if r != leave and tab[r][enter] != 0:
                f = tab[r][enter]
                tab[r] = [x - f * y for x, y in zip(tab[r], tab[leave])]
        f = cost[enter]
        cost = [x - f * y for x, y in zip(cost, tab[leave])]
        basis[leave] = enter
    return cost[ncols] == 0


def contains(poly: RationalPolytope, point) -> bool:
    """Exact membership: facet evaluation when facets are known, otherwise a
    phase-1 simplex feasibility run over the vertices."""
    p = _fracs(point)
    if len(p) != poly.dim_ambient:
        raise ValueError("point dimension mismatch")
    if poly.facets is not None:
        return (all(e.holds(p) for e in poly.equalities)
                and all(f.holds(p) for f in poly.facets))
    if poly.vertices is None:
        raise ValueError("polytope has no representation")
    return _phase1_feasible(poly.vertices, p)


@dataclass(frozen=True)
class FacetCheck:
    is_facet: bool
    valid: bool
    tight_count: int
    certificate: tuple  # affinely independent tight vertices, or ()

    def __bool__(self):
        return self.is_facet


def is_facet_defining(ineq: LinearInequality, poly: RationalPolytope) -> FacetCheck:
    """Validity plus dimension of the tight set against the vertex list.

    A facet must be valid and tight on affine_dim-many affinely independent
    vertices (one less than the affine rank of the whole polytope); being
    tight on strictly more would make it the affine hull, not a facet.
    """
    if poly.vertices is None:
        raise ValueError("facet certification needs the vertex list")
    need = poly.affine_dim()
    tight = []
    for v in poly.vertices:
        val = ineq.evaluate(v)
        if val > ineq.rhs:
            return FacetCheck(False, False, 0, ())
        if val == ineq.rhs:
            tight.append(v)
    if affine_rank(tight) != need:
        return FacetCheck(False, True, len(tight), ())
    cert = affinely_independent_subset(tight, need)
    return FacetCheck(True, True, len(tight), tuple(cert))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def polytope_to_json(poly: RationalPolytope) -> str:
    def frac_pair(x):
        f = Fraction(x)
        return [f.numerator, f.denominator]

    obj = {"dim": poly.dim_ambient}
    if poly.vertices is not None:
        obj["vertices"] = [[frac_pair(x) for x in v] for v in poly.vertices]
    if poly.facets is not None:
        obj["facets"] = [{"coeffs": list(f.coeffs), "rhs": f.rhs}
                         for f in poly.facets]
    if poly.equalities:
        obj["equalities"] = [{"coeffs": list(e.coeffs), "rhs": e.rhs}
                             for e in poly.equalities]
    if poly.affine_hull_dim is not None:
        obj["affine_hull_dim"] = poly.affine_hull_dim
    return json.dumps(obj, sort_keys=True)


def polytope_from_json(text: str) -> RationalPolytope:
    obj = json.loads(text)
    verts = None
    if "vertices" in obj:
        verts = tuple(tuple(Fraction(n, d) for n, d in v)
                      for v in obj["vertices"])
    facets = None
    if "facets" in obj:
        facets = tuple(LinearInequality(tuple(f["coeffs"]), f["rhs"])
                       for f in obj["facets"])
    eqs = tuple(LinearEquality(tuple(e["coeffs"]), e["rhs"])
                for e in obj.get("equalities", []))
    return RationalPolytope(dim_ambient=obj["dim"], vertices=verts,
                            facets=facets, equalities=eqs,
                            affine_hull_dim=obj.get("affine_hull_dim"))


def facets_to_text(poly: RationalPolytope) -> str:
    lines = [f.to_text() for f in (poly.facets or ())]
    return "\n".join(lines) + ("\n" if lines else "")
