"""Non-adaptive parity computation on GHZ states.

A binary matrix P routes |x| input bits to n sites, s = P x mod 2; each
site measures once at a phase angle theta_j s_j and the mod-2 sum of the
outcomes is the result.  The protocol computes a Boolean f deterministically
iff the phase system

    n phi + sum_j s_j(x) theta_j  =  pi f(x)   (mod 2 pi)  for all x

has a real solution.  Dividing by pi and eliminating the GHZ phase at x = 0
leaves S theta' = b (mod 2) with b_x = f(x) xor f(0), a question about the
integer lattice spanned by the columns of S: solvable over the reals plus
2Z exactly when every integer covector killing the rows of S has even inner
product with b.  A saturated basis of that left kernel comes out of a
Hermite-style row reduction with a unimodular transform, so the decision and
both certificates (angle witness, odd-parity obstruction) are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ResourceCapError
from .ffun import FiniteFunction, Scenario

MINIMAL_N_XBITS_CAP = 4


@dataclass(frozen=True)
class PMatrix:
    """Bit matrix with n rows (sites) and |x| columns; no all-zero rows."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        if not rows:
            raise ValueError("P needs at least one row")
        width = len(rows[0])
        if width == 0:
            raise ValueError("P needs at least one column")
        for r in rows:
            if len(r) != width:
                raise ValueError("ragged P matrix")
            if any(v not in (0, 1) for v in r):
                raise ValueError("P entries must be bits")
            if not any(r):
                raise ValueError("P must not contain an all-zero row")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def xbits(self) -> int:
        return len(self.rows[0])

    def s_of(self, x) -> tuple:
        if len(x) != self.xbits:
            raise ValueError("input length mismatch")
        return tuple(sum(rv * xv for rv, xv in zip(r, x)) % 2
                     for r in self.rows)

    def image(self):
        """s(x) for every x in integer order."""
        return [self.s_of(x) for x in
                itertools.product((0, 1), repeat=self.xbits)]


@dataclass(frozen=True)
class AchievabilityVerdict:
    """Decision plus an exact certificate for whichever way it went.

    witness: measurement angles theta_j in radians; witness_exact keeps
    theta_j / pi as Fractions (S theta' - b is even integer entrywise).
    obstruction: integer covector u over the inputs with u S = 0 and
    u b odd.  phi is the GHZ phase absorbing f(0)."""

    achievable: bool
    witness: tuple | None
    witness_exact: tuple | None
    obstruction: tuple | None
    phi: float

    def __bool__(self):
        return self.achievable


def _check_boolean_function(p: PMatrix, f: FiniteFunction):
    sc = f.scenario
    if sc.c != 2 or sc.d != 2:
        raise ValueError("f must be a Boolean function of bits")
    if sc.n != p.xbits:
        raise ValueError(
            f"f takes {sc.n} bits but P has {p.xbits} columns")


def _hnf_with_transform(rows):
    """Row echelon form over Z via unimodular row operations.

    Returns (h, u) with u @ rows == h, u unimodular; the rows of u aligned
    with zero rows of h are a saturated basis of the left kernel."""
    h = [list(r) for r in rows]
    m = len(h)
    ncols = len(h[0]) if m else 0
    u = [[int(i == j) for j in range(m)] for i in range(m)]
    top = 0
    for col in range(ncols):
        # gcd-reduce the column below `top` into a single pivot
        while True:
            nz = [i for i in range(top, m) if h[i][col]]
            if not nz:
                break
            piv = min(nz, key=lambda i: abs(h[i][col]))
            if piv != top:
                h[piv], h[top] = h[top], h[piv]
                u[piv], u[top] = u[top], u[piv]
            done = True
            for i in range(top + 1, m):
                if h[i][col]:
                    q = h[i][col] // h[top][col]
                    for j in range(ncols):
                        h[i][j] -= q * h[top][j]
                    for j in range(m):
                        u[i][j] -= q * u[top][j]
                    if h[i][col]:
                        done = False
            if done:
                break
        if any(h[i][col] for i in range(top, m)):
            if h[top][col] < 0:
                h[top] = [-v for v in h[top]]
                u[top] = [-v for v in u[top]]
            top += 1
    return h, u


def decide_deterministic(p: PMatrix, f: FiniteFunction) -> AchievabilityVerdict:
    """Exact decision of deterministic achievability of f through P."""
    _check_boolean_function(p, f)
    srows = p.image()
    b = [v ^ f.table[0] for v in f.table]
    phi = math.pi * f.table[0] / p.n
    h, u = _hnf_with_transform(srows)
    m = len(srows)
    rank = sum(1 for row in h if any(row))
    for i in range(rank, m):
        parity = sum(uv * bv for uv, bv in zip(u[i], b)) % 2
        if parity:
            return AchievabilityVerdict(
                achievable=False, witness=None, witness_exact=None,
                obstruction=tuple(u[i]), phi=phi)
    # consistent: solve h theta' = (u b) - 2w on the nonzero rows by back
    # substitution, free variables zero
    ub = [sum(uv * bv for uv, bv in zip(u[i], b)) for i in range(rank)]
    theta = [Fraction(0)] * p.n
    pivots = []
    for i in range(rank):
        col = next(j for j in range(p.n) if h[i][j])
        pivots.append((i, col))
    for i, col in reversed(pivots):
        acc = Fraction(ub[i])
        for j in range(col + 1, p.n):
            if h[i][j]:
                acc -= h[i][j] * theta[j]
        theta[col] = acc / h[i][col]
    for x_idx, srow in enumerate(srows):
        resid = sum(sv * tv for sv, tv in zip(srow, theta)) - b[x_idx]
        assert resid.denominator == 1 and resid.numerator % 2 == 0
    return AchievabilityVerdict(
        achievable=True,
        witness=tuple(float(t) * math.pi for t in theta),
        witness_exact=tuple(theta),
        obstruction=None, phi=phi)


def _function_bit_symmetries(f: FiniteFunction):
    """Input-bit permutations fixing f, as column reorderings."""
    k = f.scenario.n
    xs = list(itertools.product((0, 1), repeat=k))
    index = {x: i for i, x in enumerate(xs)}
    syms = []
    for perm in itertools.permutations(range(k)):
        if all(f.table[index[tuple(x[j] for j in perm)]] == f.table[i]
               for i, x in enumerate(xs)):
            syms.append(perm)
    return syms


def minimal_n(f: FiniteFunction) -> int:
    """Smallest number of sites achieving f through some P.

    Repeated rows never help (their angles sum into one effective angle)
    and extra rows never hurt (set their angle to zero), so it suffices to
    scan subsets of distinct nonzero rows in increasing size; 2^{|x|} - 1
    rows always suffice."""
    if f.scenario.c != 2 or f.scenario.d != 2:
        raise ValueError("f must be a Boolean function of bits")
    k = f.scenario.n
    if k > MINIMAL_N_XBITS_CAP:
        raise ResourceCapError(
            f"minimal_n caps at |x| = {MINIMAL_N_XBITS_CAP}",
            progress=0, unit="input bits")
    rowtypes = [r for r in itertools.product((0, 1), repeat=k) if any(r)]
    syms = _function_bit_symmetries(f)
    for size in range(1, len(rowtypes) + 1):
        seen = set()
        for combo in itertools.combinations(rowtypes, size):
            canon = min(tuple(sorted(tuple(r[j] for j in perm)
                                     for r in combo)) for perm in syms)
            if canon in seen:
                continue
            seen.add(canon)
            if decide_deterministic(PMatrix(combo), f).achievable:
                return size
    raise AssertionError("full row set must be achievable")


# ---------------------------------------------------------------------------
# GHZ paradox
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GhzParadoxReport:
    """Deterministic quantum assignments versus the forced LHV completion.

    assignments: (x, s(x), p(1|s(x))) for every input.  If some affine
    gamma(s) = c + a . s reproduces every assignment the report is
    degenerate (no paradox).  Otherwise forced_input names an x* whose
    remaining constraints pin gamma(s(x*)) to forced_value, which differs
    from the quantum quantum_value."""

    assignments: tuple
    degenerate: bool
    forced_input: tuple | None
    forced_value: int | None
    quantum_value: int | None


def _gf2_eliminate(rows, rhs):
    """Row reduce an affine GF(2) system; returns (consistent, reduced)."""
    work = [(r.copy(), v) for r, v in zip(rows, rhs)]
    ncols = len(rows[0]) if rows else 0
    basis = []
    for col in range(ncols):
        piv = next((i for i in range(len(basis), len(work))
                    if work[i][0][col]), None)
        if piv is None:
            continue
        work[len(basis)], work[piv] = work[piv], work[len(basis)]
        prow, pval = work[len(basis)]
        for i in range(len(work)):
            if i != len(basis) and work[i][0][col]:
                work[i] = ([a ^ b for a, b in zip(work[i][0], prow)],
                           work[i][1] ^ pval)
        basis.append(col)
    consistent = all(any(r) or v == 0 for r, v in work)
    return consistent, work, basis


def _forced_value(rows, rhs, target_row):
    """Value forced for target_row by a consistent system, if pinned."""
    consistent, work, basis = _gf2_eliminate(rows, rhs)
    if not consistent:
        return None
    # reduce the target against the eliminated rows; pinned iff it lands in
    # the row span
    t = target_row.copy()
    acc = 0
    for (row, val), col in zip(work, basis):
        if t[col]:
            t = [a ^ b for a, b in zip(t, row)]
            acc ^= val
    if any(t):
        return None
    return acc


def ghz_paradox(p: PMatrix, f: FiniteFunction) -> GhzParadoxReport:
    """LHV contradiction extracted from a deterministically achievable f."""
    verdict = decide_deterministic(p, f)
    if not verdict.achievable:
        raise ValueError("f is not achievable through P; no assignments")
    xs = list(itertools.product((0, 1), repeat=p.xbits))
    srows = p.image()
    assignments = tuple((x, s, int(f.table[i]))
                        for i, (x, s) in enumerate(zip(xs, srows)))
    # cross-check the witness reproduces the assignments
    for i, s in enumerate(srows):
        angle = p.n * verdict.phi + sum(
            t * sv for t, sv in zip(verdict.witness, s))
        expect = 1.0 - 2.0 * f.table[i]
        if abs(math.cos(angle) - expect) > 1e-9:
            raise AssertionError("witness fails to reproduce an assignment")
    # an LHV model assigns gamma(s) = c + a . s; rows are (1, s)
    rows = [[1] + list(s) for s in srows]
    rhs = list(f.table)
    consistent, _, _ = _gf2_eliminate(rows, rhs)
    if consistent:
        return GhzParadoxReport(assignments=assignments, degenerate=True,
                                forced_input=None, forced_value=None,
                                quantum_value=None)
    found = None
    for drop in range(len(xs)):
        sub_rows = [r for i, r in enumerate(rows) if i != drop]
        sub_rhs = [v for i, v in enumerate(rhs) if i != drop]
        forced = _forced_value(sub_rows, sub_rhs, rows[drop])
        if forced is not None and forced != rhs[drop]:
            report = GhzParadoxReport(
                assignments=assignments, degenerate=False,
                forced_input=xs[drop], forced_value=forced,
                quantum_value=rhs[drop])
            # prefer the presentation where the LHV completion asserts the
            # event the quantum run never shows
            if forced == 1:
                return report
            if found is None:
                found = report
    if found is None:
        raise AssertionError("inconsistent system must force some input")
    return found


def generalized_pr_box(p: PMatrix, f: FiniteFunction):
    """Conditional distribution p(m | s(x)) = 2^{1-n} on parity f(x).

    Defined on the P-image input set only; raises if two inputs collide on
    the same s with conflicting f values.  The box is non-signalling on the
    image set (every proper marginal is uniform), which is verified."""
    _check_boolean_function(p, f)
    xs = list(itertools.product((0, 1), repeat=p.xbits))
    srows = p.image()
    targets = {}
    for i, s in enumerate(srows):
        val = f.table[i]
        if s in targets and targets[s] != val:
            raise ValueError(
                f"inputs colliding on s = {s} need conflicting parities")
        targets[s] = val
    n = p.n
    weight = Fraction(1, 2 ** (n - 1))
    box = {}
    for s, val in targets.items():
        for m in itertools.product((0, 1), repeat=n):
            box[(m, s)] = weight if sum(m) % 2 == val else Fraction(0)
    # non-signalling on the image set: marginals over any single dropped
    # site are uniform, hence input-independent
    for j in range(n):
        for s in targets:
            for m_rest in itertools.product((0, 1), repeat=n - 1):
                tot = sum(box[(m_rest[:j] + (mj,) + m_rest[j:], s)]
                          for mj in (0, 1))
                assert tot == Fraction(1, 2 ** (n - 1))
    return box
