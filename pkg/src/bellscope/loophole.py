"""Detection-loophole models and post-selection rule analysis.

Two post-selection mechanisms are modelled.  The first is involuntary:
detectors fire or not, and discarding no-click rounds lets a local model
correlate inputs with the shared randomness.  A site either always fires or
ties its click to a shared fair coin, t_j = s_j xor y_j; the raw maps
t_j = s_j and t_j = s_j xor 1 are excluded because they make the click rate
depend on the input, which the experimenter can monitor.  Conditioned on
joint detection the surviving parity can be any h(s) whose discrete
derivatives along non-coin sites depend on the coin sites alone, at weight
p(t=1) = 2^-|coins|.  The weighted expectation hull stays inside the CHSH
bound even though individual conditional points fake nonlinear vertices;
requiring the joint click rate to beat 1/sqrt(2) restores the test, and the
symmetric-detector model turns that into the efficiency thresholds
eta > 2/(sqrt(2)+1) (two parties) and its many-party refinements.

The second mechanism is voluntary: all detectors fire, but the experimenter
keeps only rounds whose inputs match per-site predicates s_j = g_j(x) or
s_j = g_j(x, m^{\\j}) for a chosen digit string x.  The predicate class is
computed from the truth tables: LI (inputs only, linear over Z_2), LOI
(other sites' outcomes allowed, still linear), AI (affine over Z_d) and PI
(n-partite linear over Z_d), anything else being general.  For d = 2 the
linear classes provably add nothing to the deterministic-assignment hull of
conditional correlators; for d > 2 even affine post-selection manufactures
non-linear vertices, and n-partite linear post-selection saturates the full
correlator simplex.  Output-input rules nevertheless pay off on the quantum
side: the triple-block protocol reaches the |x|-fold product function with
3(|x|-1) parties, below the nMBQC floor of 2^|x|-1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations, product

import numpy as np
from scipy.optimize import minimize

from .errors import ResourceCapError, ScenarioMismatchError
from .ffun import (
    FiniteFunction,
    Scenario,
    correlator_vertex,
    enumerate_lhv_vertex_functions,
    linear_part,
)
from .ineq import BellInequality
from .poly import _phase1_feasible
from .qopt import GhzConfig, _spawned_rngs, ghz_expectation

# postselected_lhv_points enumerates all 2^(2^n) conditional parities.
POINT_SITE_CAP = 4
# lhv_space_under_rule and the rule surveys are brute-force sweeps.
RULE_SITE_CAP = 4
RULE_XBITS_CAP = 2
RULE_D_CAP = 3
# workload ceiling for the generic (output-coupled) assignment sweep
GENERIC_SWEEP_CAP = 1 << 24
# AI/PI reachable-table enumeration: per-site budget
COMPOSED_SITE_CAP = 6


def joint_detection_probability(eta: float, n: int) -> float:
    """All n detectors fire, conditioned on the round registering at all:
    p(t=1) = eta^n / (1 - (1-eta)^n)."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("efficiency must lie in (0, 1]")
    return eta ** n / (1.0 - (1.0 - eta) ** n)


@dataclass(frozen=True)
class ThresholdReport:
    """Minimum detection requirements for a loophole-free violation."""

    n: int
    p_joint_required: float
    eta_required: float
    residual: float

    def __post_init__(self):
        if not 0.0 < self.eta_required < 1.0:
            raise ValueError("efficiency threshold must lie in (0, 1)")
        model = joint_detection_probability(self.eta_required, self.n)
        if abs(model - self.p_joint_required) > 1e-12:
            raise ValueError(
                "p_joint does not match eta under the symmetric-detector model")

    def to_jsonable(self) -> dict:
        return {"n": self.n,
                "p_joint_required": self.p_joint_required,
                "eta_required": self.eta_required,
                "residual": self.residual}


def gm_threshold() -> ThresholdReport:
    """Symmetric two-detector efficiency threshold for CHSH.

    Post-selection on joint clicks keeps every local model's weighted CHSH
    value at or below 2 while the quantum point scales as p * 2*sqrt(2), so
    the violation survives exactly when p(t=1) > 1/sqrt(2).  With two
    symmetric detectors p(t=1) = eta/(2-eta), giving eta* = 2/(sqrt(2)+1)
    in closed form.
    """
    eta = 2.0 / (math.sqrt(2.0) + 1.0)
    p = joint_detection_probability(eta, 2)
    return ThresholdReport(n=2, p_joint_required=p, eta_required=eta,
                           residual=abs(p - 2.0 ** -0.5))


def mk_threshold(n: int) -> ThresholdReport:
    """Efficiency threshold for the n-party Mermin-Klyshko post-selection.

    The protocol accepts with LHV probability 2^(1-n) while the quantum
    weighted value scales as 2^((1-n)/2), so the critical joint click rate
    is p(t=1) = 2^((1-n)/2).  Solve eta^n/(1-(1-eta)^n) = 2^((1-n)/2) by
    bisection; the left side is strictly increasing in eta (its reciprocal
    derivative reduces to 1 - (1-eta)^(n-1) > 0), so the root is unique.
    """
    if n < 2:
        raise ValueError("the protocol needs at least two parties")
    target = 2.0 ** ((1 - n) / 2.0)
    lo, hi = 0.5, 1.0
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if joint_detection_probability(mid, n) < target:
            lo = mid
        else:
            hi = mid
    eta = 0.5 * (lo + hi)
    p = joint_detection_probability(eta, n)
    return ThresholdReport(n=n, p_joint_required=p, eta_required=eta,
                           residual=abs(p - target))


# ---------------------------------------------------------------------------
# detection strategies and the post-selected expectation hull
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionStrategy:
    """One deterministic local detection model for an (n, 2, 2) test.

    coin_sites lists the sites with t_j = s_j xor y_j for a shared fair coin
    y_j; every other site always fires.  Outcomes are m_j = alpha_j s_j xor
    beta_j where alpha and beta may depend on the coin string, one row per
    coin outcome (row index treats the first coin site as the most
    significant bit, matching input-string order).  Per-site click rates are
    1/2 on coin sites and 1 elsewhere, independent of the inputs; with
    permutation_mixing set the strategy is averaged over all party
    relabellings, equalising the per-site rates without changing the joint
    acceptance probability.
    """

    n: int
    coin_sites: tuple
    alpha: tuple
    beta: tuple
    permutation_mixing: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one site")
        sites = tuple(int(j) for j in self.coin_sites)
        if sites != tuple(sorted(set(sites))) or \
                any(not 0 <= j < self.n for j in sites):
            raise ValueError("coin_sites must be strictly increasing site indices")
        object.__setattr__(self, "coin_sites", sites)
        rows = 1 << len(sites)
        for name in ("alpha", "beta"):
            table = getattr(self, name)
            if len(table) != rows:
                raise ValueError(f"{name} needs one row per coin outcome")
            coerced = []
            for row in table:
                if len(row) != self.n or any(b not in (0, 1) for b in row):
                    raise ValueError(f"{name} rows must be n bits")
                coerced.append(tuple(int(b) for b in row))
            object.__setattr__(self, name, tuple(coerced))

    @property
    def coin_count(self) -> int:
        return len(self.coin_sites)

    def joint_detection_rate(self) -> Fraction:
        """p(all t_j = 1); input-independent by construction."""
        return Fraction(1, 1 << self.coin_count)

    def site_detection_rates(self) -> tuple:
        rates = [Fraction(1, 2) if j in self.coin_sites else Fraction(1)
                 for j in range(self.n)]
        if self.permutation_mixing:
            avg = sum(rates, Fraction(0)) / self.n
            return (avg,) * self.n
        return tuple(rates)

    def _coin_row(self, s) -> int:
        row = 0
        for j in self.coin_sites:
            row = row * 2 + (s[j] ^ 1)  # accepted rounds have y_j = s_j xor 1
        return row

    def parity_table(self) -> tuple:
        """Joint outcome parity h(s) conditioned on full detection, in
        input integer-value order."""
        table = []
        for s in product((0, 1), repeat=self.n):
            row = self._coin_row(s)
            bit = 0
            for j in range(self.n):
                bit ^= (self.alpha[row][j] & s[j]) ^ self.beta[row][j]
            table.append(bit)
        return tuple(table)

    def weighted_point(self):
        """(p(t=1), p * conditional expectation vector); the permutation
        average is applied when the mixing device is switched on."""
        p = self.joint_detection_rate()
        base = self.parity_table()
        size = 1 << self.n
        if not self.permutation_mixing:
            return p, tuple(p * (1 - 2 * b) for b in base)
        strings = list(product((0, 1), repeat=self.n))
        index = {s: i for i, s in enumerate(strings)}
        total = [Fraction(0)] * size
        perms = list(permutations(range(self.n)))
        for perm in perms:
            for i, s in enumerate(strings):
                relabelled = tuple(s[perm[j]] for j in range(self.n))
                total[i] += 1 - 2 * base[index[relabelled]]
        scale = p / len(perms)
        return p, tuple(scale * t for t in total)

    @classmethod
    def from_parity(cls, n: int, table, coin_sites,
                    permutation_mixing: bool = False) -> "DetectionStrategy":
        """Strategy whose conditional parity equals the given table with the
        given coin set; ValueError when the table needs more coins."""
        sites = tuple(sorted(set(int(j) for j in coin_sites)))
        table = tuple(int(b) for b in table)
        if len(table) != 1 << n or any(b not in (0, 1) for b in table):
            raise ValueError("parity table must hold 2^n bits")
        if not _parity_realizable(n, table, sites):
            raise ValueError(
                "parity table is not realizable with that coin set: a "
                "discrete derivative along a non-coin site depends on "
                "another non-coin site")
        strings = list(product((0, 1), repeat=n))
        index = {s: i for i, s in enumerate(strings)}
        others = [j for j in range(n) if j not in sites]
        alpha, beta = [], []
        for row in range(1 << len(sites)):
            # accepted inputs on coin sites are the complements of the coins
            base = [0] * n
            for pos, j in enumerate(sites):
                base[j] = (row >> (len(sites) - 1 - pos) & 1) ^ 1
            u = table[index[tuple(base)]]
            arow, brow = [0] * n, [0] * n
            for j in others:
                bumped = list(base)
                bumped[j] = 1
                arow[j] = table[index[tuple(bumped)]] ^ u
            brow[0] = u  # one site carries the offset; coins fix its input
            alpha.append(tuple(arow))
            beta.append(tuple(brow))
        built = cls(n=n, coin_sites=sites, alpha=tuple(alpha),
                    beta=tuple(beta), permutation_mixing=permutation_mixing)
        assert built.parity_table() == table
        return built


def _parity_realizable(n: int, table, sites) -> bool:
    """h(s) = U(s_F) xor XOR_{j not in F} a_j(s_F) s_j for F = sites iff
    every discrete derivative along a non-coin site is a function of the
    coin-site values alone."""
    strings = list(product((0, 1), repeat=n))
    index = {s: i for i, s in enumerate(strings)}
    others = [j for j in range(n) if j not in sites]
    for j in others:
        seen = {}
        for i, s in enumerate(strings):
            flipped = list(s)
            flipped[j] ^= 1
            deriv = table[i] ^ table[index[tuple(flipped)]]
            key = tuple(s[k] for k in sites)
            if seen.setdefault(key, deriv) != deriv:
                return False
    return True


def asymmetric_detection_demo(n: int = 2) -> DetectionStrategy:
    """Site 0 carries the only coin, everyone else always fires, so the
    per-site click rates are (1/2, 1, ..., 1): a non-uniform-efficiency
    model.  Conditioned on joint detection site 1 outputs s_0 s_1 and the
    parity is the nonlinear AND vertex, worth 4 on conditional CHSH: fair
    per-site click statistics alone do not close the loophole.  Switch on
    permutation_mixing to present equal per-site rates (n+1)/(2n) instead.
    """
    if n < 2:
        raise ValueError("the demonstration needs at least two sites")
    alpha, beta = [], []
    for y in (0, 1):
        row = [0] * n
        row[1] = y ^ 1  # equals s_0 on accepted rounds
        alpha.append(tuple(row))
        beta.append((0,) * n)
    return DetectionStrategy(n=n, coin_sites=(0,), alpha=tuple(alpha),
                             beta=tuple(beta))


def postselected_lhv_points(scenario: Scenario):
    """Extreme points (p(t=1), weighted expectation vector) of the
    post-selected local model for an (n, 2, 2) scenario.

    Every strategy with coin set F contributes 2^-|F| * (1, (-1)^h) where h
    ranges over the parities realizable with F, so the achievable set is the
    hull of these rays sampled at weights 2^-m for m between the minimal
    coin count m_h of the parity and n.  On a fixed ray only the endpoints
    can be extreme (intermediate weights interpolate), and both are: any
    convex decomposition must align the sign of every coordinate, forcing a
    single parity, and then the weight equation pins the coin count.  The
    returned set is therefore 2^-m_h * (1, (-1)^h) for every parity h plus
    the all-coins point 2^-n * (1, (-1)^h) when m_h < n.
    """
    if (scenario.c, scenario.d) != (2, 2):
        raise ScenarioMismatchError(
            "post-selected expectation points are defined for (n, 2, 2)")
    n = scenario.n
    if n > POINT_SITE_CAP:
        raise ResourceCapError(
            f"enumerating 2^(2^{n}) conditional parities exceeds the "
            f"{POINT_SITE_CAP}-site cap", progress=0, unit="parities")
    size = 1 << n
    strings = list(scenario.inputs())
    index = {s: i for i, s in enumerate(strings)}
    hcount = 1 << size

    bits = ((np.arange(hcount, dtype=np.uint32)[:, None]
             >> np.arange(size, dtype=np.uint32)[None, :]) & 1).astype(np.uint8)
    flip = np.empty((n, size), dtype=np.int64)
    for j in range(n):
        for i, s in enumerate(strings):
            t = list(s)
            t[j] ^= 1
            flip[j, i] = index[tuple(t)]

    subsets = sorted(range(1 << n), key=lambda m: bin(m).count("1"))
    minimal = np.full(hcount, n, dtype=np.int8)
    assigned = np.zeros(hcount, dtype=bool)
    for mask in subsets:
        sites = [j for j in range(n) if mask >> j & 1]
        others = [j for j in range(n) if j not in sites]
        member = np.ones(hcount, dtype=bool)
        for j in others:
            deriv = bits ^ bits[:, flip[j]]
            # reference column per coin-projection class
            ref = {}
            for i, s in enumerate(strings):
                key = tuple(s[k] for k in sites)
                r = ref.setdefault(key, i)
                if r != i:
                    member &= deriv[:, i] == deriv[:, r]
        fresh = member & ~assigned
        minimal[fresh] = len(sites)
        assigned |= fresh
        if assigned.all():
            break

    pos = [Fraction(1, 1 << m) for m in range(n + 1)]
    neg = [-w for w in pos]
    points = []
    for h in range(hcount):
        row = bits[h]
        levels = (int(minimal[h]),) if minimal[h] == n else (int(minimal[h]), n)
        for m in levels:
            points.append((pos[m],
                           tuple(pos[m] if b == 0 else neg[m] for b in row)))
    points.sort()
    return tuple(points)


# ---------------------------------------------------------------------------
# voluntary post-selection rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PostSelectionRule:
    """Per-site acceptance predicates for an (n, d, d) test.

    Site j's data is kept when s_j = g_j(args), where args is the
    experimenter's digit string x followed, when uses_outputs[j] is set, by
    the other sites' outcomes in ascending site order.  Each g_j is a
    FiniteFunction over Z_d^arity; the class (LI, LOI, AI, PI, general) is
    always computed from the tables, never declared.
    """

    n: int
    xbits: int
    d: int
    site_rules: tuple
    uses_outputs: tuple

    def __post_init__(self):
        if self.n < 1 or self.xbits < 1 or self.d < 2:
            raise ValueError("need n >= 1 sites, xbits >= 1 digits, d >= 2")
        if len(self.site_rules) != self.n or len(self.uses_outputs) != self.n:
            raise ValueError("one predicate and one flag per site")
        object.__setattr__(self, "uses_outputs",
                           tuple(bool(u) for u in self.uses_outputs))
        for j, g in enumerate(self.site_rules):
            arity = self.xbits + (self.n - 1 if self.uses_outputs[j] else 0)
            sc = g.scenario
            if (sc.n, sc.c, sc.d) != (arity, self.d, self.d):
                raise ValueError(
                    f"site {j} predicate must map Z_{self.d}^{arity} to "
                    f"Z_{self.d}")

    def site_target(self, j: int, x, outputs) -> int:
        """Required value of s_j given the digits and the other outcomes."""
        if self.uses_outputs[j]:
            args = tuple(x) + tuple(outputs[k] for k in range(self.n) if k != j)
        else:
            args = tuple(x)
        return self.site_rules[j](args)

    def accepts(self, x, s, outputs) -> bool:
        return all(s[j] == self.site_target(j, x, outputs)
                   for j in range(self.n))

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "xbits": self.xbits, "d": self.d,
             "sites": [{"uses_outputs": u, "table": list(g.table)}
                       for g, u in zip(self.site_rules, self.uses_outputs)]},
            sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PostSelectionRule":
        obj = json.loads(text)
        n, xbits, d = obj["n"], obj["xbits"], obj["d"]
        rules, uses = [], []
        for j, site in enumerate(obj["sites"]):
            u = bool(site["uses_outputs"])
            arity = xbits + (n - 1 if u else 0)
            rules.append(FiniteFunction(Scenario(arity, d, d),
                                        tuple(site["table"])))
            uses.append(u)
        return PostSelectionRule(n=n, xbits=xbits, d=d,
                                 site_rules=tuple(rules), uses_outputs=tuple(uses))

    @classmethod
    def from_maps(cls, n: int, xbits: int, d: int, maps,
                  uses_outputs=None) -> "PostSelectionRule":
        """Build predicates from callables over (x, m^{\\j}) argument tuples."""
        if uses_outputs is None:
            uses_outputs = (False,) * n
        rules = []
        for j, fn in enumerate(maps):
            arity = xbits + (n - 1 if uses_outputs[j] else 0)
            sc = Scenario(arity, d, d)
            rules.append(FiniteFunction(
                sc, tuple(fn(args) % d for args in sc.inputs())))
        return cls(n=n, xbits=xbits, d=d, site_rules=tuple(rules),
                   uses_outputs=tuple(uses_outputs))


@dataclass(frozen=True)
class RuleClassReport:
    rule_class: str
    loophole_free: bool


def _predicate_flags(g: FiniteFunction):
    """(n-partite linear, affine) for one predicate, without the bipartition
    scan: protocol rules reach arities where that scan is prohibitive."""
    is_linear = g.sub(linear_part(g)).is_zero()
    sc = g.scenario
    zero = (0,) * sc.n
    alpha = g(zero)
    betas = []
    for j in range(sc.n):
        s = list(zero)
        s[j] = 1
        betas.append((g(tuple(s)) - alpha) % sc.d)
    is_affine = all(
        g(s) == (alpha + sum(b * v for b, v in zip(betas, s))) % sc.d
        for s in sc.inputs())
    return is_linear, is_affine


def classify_rule(rule: PostSelectionRule,
                  scenario: Scenario) -> RuleClassReport:
    """Syntactic class of a rule plus its loophole verdict.

    For d = 2 a rule is LI when every predicate is linear over the digits
    alone and LOI when linearity holds over digits and outcomes jointly;
    both leave the local hull alone, so they are loophole-free.  For d > 2
    the analogous classes are AI (affine) and PI (n-partite linear), and
    both open loopholes; anything else is general and opens one too.
    """
    if (scenario.n, scenario.c, scenario.d) != (rule.n, rule.d, rule.d):
        raise ScenarioMismatchError(
            f"rule is for ({rule.n}, {rule.d}, {rule.d}), got {scenario}")
    flags = [_predicate_flags(g) for g in rule.site_rules]
    uses = any(rule.uses_outputs)
    if rule.d == 2:
        if all(lin for lin, _ in flags):
            return RuleClassReport("LOI" if uses else "LI", True)
        return RuleClassReport("general", False)
    if not uses:
        if all(aff for _, aff in flags):
            return RuleClassReport("AI", False)
        if all(lin for lin, _ in flags):
            return RuleClassReport("PI", False)
    return RuleClassReport("general", False)


@lru_cache(maxsize=None)
def _linear_hull_vertices(xbits: int, d: int):
    x_sc = Scenario(xbits, d, d)
    return tuple(correlator_vertex(g)
                 for g in enumerate_lhv_vertex_functions(x_sc))


@lru_cache(maxsize=None)
def _linear_table_set(xbits: int, d: int):
    x_sc = Scenario(xbits, d, d)
    return frozenset(g.table for g in enumerate_lhv_vertex_functions(x_sc))


def _in_linear_hull(vec, xbits: int, d: int) -> bool:
    if all(v in (0, 1) for v in vec):
        # a deterministic table inside the hull must be one of its vertices
        x_sc = Scenario(xbits, d, d)
        table = []
        for x in x_sc.inputs():
            k = next((k for k in range(1, d)
                      if vec[x_sc.beta_index(k, x)] == 1), 0)
            table.append(k)
        return tuple(table) in _linear_table_set(xbits, d)
    return _phase1_feasible(_linear_hull_vertices(xbits, d), vec)


@dataclass(frozen=True)
class RuleHullReport:
    """Deterministic-assignment conditional correlators under one rule."""

    rule_class: str
    loophole_free: bool
    x_scenario: Scenario
    points: tuple           # distinct conditional correlator vectors over x
    acceptance: tuple       # per point: distinct per-x acceptance profiles
    excluded_assignments: int
    outside_points: tuple   # points beyond the n-partite-linear hull on x

    @property
    def exceeds_linear(self) -> bool:
        return len(self.outside_points) > 0


def _assignment_maps(d: int):
    return list(product(range(d), repeat=d))


def lhv_space_under_rule(rule: PostSelectionRule, scenario: Scenario,
                         xbits: int) -> RuleHullReport:
    """Hull of conditional correlators p(k|x) over deterministic local
    assignments, with the verdict against the n-partite-linear hull on x.

    Each site's deterministic response is one of the d^d maps Z_d -> Z_d.
    For a given assignment and digit string x the accepted input strings are
    those satisfying every predicate (for input-only rules exactly one
    string, for output-coupled rules the fixed points of the coupled
    system); the conditional correlator is the outcome tally over accepted
    strings, and assignments leaving some x without any accepted string are
    excluded because their conditional is undefined there.  Mixtures of
    conditionals with unequal acceptance are ratios, not convex sums, so the
    hull is certified at the deterministic level only and each point carries
    its acceptance profile.  Note every rule admits accepted strings under
    the constant-output assignments, so the all-x-zero-acceptance error
    cannot fire for total predicates; the guard remains for safety.
    """
    if (scenario.n, scenario.c, scenario.d) != (rule.n, rule.d, rule.d):
        raise ScenarioMismatchError(
            f"rule is for ({rule.n}, {rule.d}, {rule.d}), got {scenario}")
    if xbits != rule.xbits:
        raise ScenarioMismatchError(
            f"rule post-selects on {rule.xbits} digits, got xbits={xbits}")
    n, d = rule.n, rule.d
    if xbits > RULE_XBITS_CAP or n > RULE_SITE_CAP or d > RULE_D_CAP:
        raise ResourceCapError(
            f"assignment sweep capped at |x| <= {RULE_XBITS_CAP}, "
            f"n <= {RULE_SITE_CAP}, d <= {RULE_D_CAP}",
            progress=0, unit="assignments")
    x_sc = Scenario(xbits, d, d)
    xs = list(x_sc.inputs())
    maps = _assignment_maps(d)
    full_weight = Fraction(1, d ** n)

    tally = {}
    excluded = 0
    if not any(rule.uses_outputs):
        targets = [[rule.site_target(j, x, None) for j in range(n)]
                   for x in xs]
        # mixed-radix accumulation of [sum_j m_j(g_j(x))]_d over assignments
        value = np.zeros((1, len(xs)), dtype=np.int16)
        for j in range(n):
            site = np.array([[m[targets[ix][j]] for ix in range(len(xs))]
                             for m in maps], dtype=np.int16)
            value = (value[:, None, :] + site[None, :, :]).reshape(
                -1, len(xs)) % d
        tables, counts = np.unique(value, axis=0, return_counts=True)
        profile = (full_weight,) * len(xs)
        for row in tables:
            tally.setdefault(tuple(int(v) for v in row), set()).add(profile)
    else:
        all_s = list(scenario.inputs())
        workload = (d ** d) ** n * len(all_s) * len(xs)
        if workload > GENERIC_SWEEP_CAP:
            raise ResourceCapError(
                f"output-coupled sweep needs {workload} evaluations, cap "
                f"{GENERIC_SWEEP_CAP}", progress=0, unit="evaluations")
        for assignment in product(maps, repeat=n):
            rows = []
            ok = True
            for x in xs:
                hits = [0] * d
                total = 0
                for s in all_s:
                    outputs = tuple(assignment[j][s[j]] for j in range(n))
                    if rule.accepts(x, s, outputs):
                        hits[sum(outputs) % d] += 1
                        total += 1
                if total == 0:
                    ok = False
                    break
                rows.append((tuple(hits), total))
            if not ok:
                excluded += 1
                continue
            key = tuple(rows)
            profile = tuple(Fraction(total, d ** n) for _, total in rows)
            table_key = tuple((hits, total) for hits, total in rows)
            tally.setdefault(table_key, set()).add(profile)

    points, profiles, outside = [], [], []
    for key in sorted(tally):
        vec = [Fraction(0)] * x_sc.reduced_dim
        if not any(rule.uses_outputs):
            for ix, x in enumerate(xs):
                k = key[ix]
                if k != 0:
                    vec[x_sc.beta_index(k, x)] = Fraction(1)
        else:
            for ix, x in enumerate(xs):
                hits, total = key[ix]
                for k in range(1, d):
                    vec[x_sc.beta_index(k, x)] = Fraction(hits[k], total)
        vec = tuple(vec)
        points.append(vec)
        profiles.append(tuple(sorted(tally[key])))
        if not _in_linear_hull(vec, xbits, d):
            outside.append(vec)
    if not points:
        raise ValueError(
            "rule accepts no input string for some x under every assignment")
    cls = classify_rule(rule, scenario)
    return RuleHullReport(rule_class=cls.rule_class,
                          loophole_free=cls.loophole_free,
                          x_scenario=x_sc,
                          points=tuple(points),
                          acceptance=tuple(profiles),
                          excluded_assignments=excluded,
                          outside_points=tuple(outside))


# ---------------------------------------------------------------------------
# exhaustive rule surveys at d = 2, |x| = 2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleSurveyReport:
    """Exhaustive verdict over a whole family of rules at d = 2."""

    n: int
    xbits: int
    family: str             # 'LI' or 'LOI'
    method: str             # 'direct' or 'quotient'
    rule_count: int
    pair_count: int         # (rule, assignment) pairs covered
    excluded_pairs: int
    distinct_points: tuple  # conditional p(1|x) vectors seen across pairs
    outside_points: tuple
    cross_checks: int

    @property
    def all_inside(self) -> bool:
        return len(self.outside_points) == 0


_PAR4 = np.array([bin(v).count("1") & 1 for v in range(16)], dtype=np.uint8)


def _half_vector(xcount: int):
    return (Fraction(1, 2),) * xcount


def _det_vector(table_bits: int, xcount: int):
    return tuple(Fraction(table_bits >> ix & 1) for ix in range(xcount))


def survey_li_rules(n: int, xbits: int = 2) -> RuleSurveyReport:
    """Sweep every input-only linear rule against every deterministic
    assignment: the conditioned table is an affine composition, so every
    point must be a linear vertex.  Checked directly per pair.
    """
    if xbits != RULE_XBITS_CAP:
        raise ResourceCapError("the exhaustive survey is fixed at |x| = 2",
                               progress=0, unit="digits")
    if n > RULE_SITE_CAP:
        raise ResourceCapError(f"survey capped at n <= {RULE_SITE_CAP}",
                               progress=0, unit="sites")
    xcount = 1 << xbits
    # per-site choice: linear predicate (c, w) times output map (4), giving
    # a combined contribution table over x
    contrib = np.zeros((8 * 4, xcount), dtype=np.uint8)
    for r in range(8 * 4):
        c = r & 1
        w1, w2 = r >> 1 & 1, r >> 2 & 1
        mdig = r >> 3  # m(v) = mdig bit v
        for ix in range(xcount):
            x1, x2 = ix >> 1, ix & 1
            g = c ^ (w1 & x1) ^ (w2 & x2)
            contrib[r, ix] = mdig >> g & 1
    total = contrib
    for _ in range(n - 1):
        total = (total[:, None, :] ^ contrib[None, :, :]).reshape(-1, xcount)
    table_bits = np.zeros(total.shape[0], dtype=np.uint32)
    for ix in range(xcount):
        table_bits |= total[:, ix].astype(np.uint32) << np.uint32(ix)
    seen = np.zeros(16, dtype=bool)
    seen[np.unique(table_bits)] = True
    outside = [t for t in range(16) if seen[t] and _PAR4[t] == 1]
    distinct = tuple(_det_vector(t, xcount) for t in range(16) if seen[t])
    return RuleSurveyReport(
        n=n, xbits=xbits, family="LI", method="direct",
        rule_count=8 ** n, pair_count=32 ** n, excluded_pairs=0,
        distinct_points=distinct,
        outside_points=tuple(_det_vector(t, xcount) for t in outside),
        cross_checks=0)


def _loi_site_acceptance(n: int, xbits: int):
    """Packed acceptance tables: for every site j and predicate choice r,
    a uint32 bitmask over input strings per (assignment, x)."""
    xcount = 1 << xbits
    scount = 1 << n
    acount = 4 ** n
    rcount = 1 << (1 + xbits + n - 1)
    sbits = np.array([[(i >> (n - 1 - j)) & 1 for j in range(n)]
                      for i in range(scount)], dtype=np.uint8)
    adig = np.array([[(a >> (2 * j)) & 3 for j in range(n)]
                     for a in range(acount)], dtype=np.uint8)
    # outputs m[a, i, j] and their parity packed over input strings
    mout = (adig[:, None, :] >> sbits[None, :, :]) & 1
    parity = np.bitwise_xor.reduce(mout, axis=2)
    weights = (1 << np.arange(scount, dtype=np.uint32))
    ppacked = (parity.astype(np.uint32)
               * weights[None, :]).sum(axis=1).astype(np.uint16)

    acc = np.zeros((n, rcount, acount, xcount), dtype=np.uint16)
    xvals = np.array([[(ix >> (xbits - 1 - b)) & 1 for b in range(xbits)]
                      for ix in range(xcount)], dtype=np.uint8)
    for j in range(n):
        others = [k for k in range(n) if k != j]
        for r in range(rcount):
            c = r & 1
            w = [(r >> (1 + b)) & 1 for b in range(xbits)]
            u = [(r >> (1 + xbits + p)) & 1 for p in range(n - 1)]
            gx = np.array([c ^ np.bitwise_xor.reduce(
                [wb & xv for wb, xv in zip(w, xvals[ix])])
                for ix in range(xcount)], dtype=np.uint8)
            tpart = np.zeros((acount, scount), dtype=np.uint8)
            for p, k in enumerate(others):
                if u[p]:
                    tpart ^= mout[:, :, k]
            cond = (sbits[None, :, j, None]
                    == (gx[None, None, :] ^ tpart[:, :, None]))
            packed = (cond.astype(np.uint32)
                      * weights[None, :, None]).sum(axis=1)
            acc[j, r] = packed.astype(np.uint16)
    return acc, ppacked


def _merge_unique(acc, sites):
    merged = acc[sites[0]]
    for j in sites[1:]:
        merged = (merged[:, None] & acc[j][None, :]).reshape(
            -1, *merged.shape[1:])
    flat = merged.reshape(merged.shape[0], -1)
    uniq, counts = np.unique(flat, axis=0, return_counts=True)
    return uniq.reshape(-1, *merged.shape[1:]), counts


def _survey_loi_direct(n: int, xbits: int):
    """Per-pair packed sweep; feasible up to n = 3, slow at n = 4."""
    xcount = 1 << xbits
    acount = 4 ** n
    rcount = 1 << (1 + xbits + n - 1)
    acc, ppacked = _loi_site_acceptance(n, xbits)
    ul, cl = _merge_unique(acc, list(range(n // 2)))
    ur, cr = _merge_unique(acc, list(range(n // 2, n)))

    xweights = (1 << np.arange(xcount, dtype=np.uint32))
    excluded_pairs = 0
    covered_pairs = 0
    seen_tables = np.zeros(16, dtype=bool)
    seen_half = False
    outside = []
    for i in range(ul.shape[0]):
        joint = ul[i][None, :, :] & ur  # (UR, acount, xcount)
        nacc = np.bitwise_count(joint)
        ones = np.bitwise_count(joint & ppacked[None, :, None])
        excl = (nacc == 0).any(axis=2)
        weights = cl[i] * cr
        excluded_pairs += int((weights[:, None] * excl).sum())
        covered_pairs += int(weights.sum()) * acount
        keep = ~excl
        det1 = ones == nacc
        det = det1 | (ones == 0)
        half = 2 * ones == nacc
        alldet = det.all(axis=2) & keep
        allhalf = half.all(axis=2) & keep
        stray = keep & ~alldet & ~allhalf
        if stray.any():
            for rr, aa in zip(*np.nonzero(stray)):
                vec = tuple(Fraction(int(ones[rr, aa, ix]),
                                     int(nacc[rr, aa, ix]))
                            for ix in range(xcount))
                if vec not in outside:
                    outside.append(vec)
        if allhalf.any():
            seen_half = True
        tb = (det1.astype(np.uint32) * xweights[None, None, :]).sum(axis=2)
        dtabs = np.unique(tb[alldet])
        seen_tables[dtabs] = True
        for t in dtabs:
            if _PAR4[t] == 1:
                vec = _det_vector(int(t), xcount)
                if vec not in outside:
                    outside.append(vec)
    assert covered_pairs == rcount ** n * acount
    return excluded_pairs, seen_tables, seen_half, outside


def _survey_loi_quotient(n: int, xbits: int):
    """Exact factorized sweep covering the same (rule, assignment) pairs.

    With the assignment m_j = alpha_j s_j xor beta_j substituted, site j's
    predicate reads (M s)_j = w_j . x xor c_j xor (U beta)_j with
    M = I xor U diag(alpha), so the pair's verdict depends only on M, the
    input-coefficient columns and the combined offset c xor U beta; each
    offset value collects exactly 2^n (c, beta) preimages, half of either
    beta parity (a parity flip complements the deterministic table and
    preserves affinity).  Acceptance counts and outcome-parity sets per
    target vector b are enumerated over all 2^n input strings, so the
    deterministic-or-uniform dichotomy is observed, not assumed.
    """
    size = 1 << n
    par = np.array([bin(v).count("1") & 1 for v in range(size)],
                   dtype=np.uint8)
    sgrid = np.arange(size)
    combos = np.arange(1 << (3 * n))
    a1 = combos >> (2 * n)
    a2 = (combos >> n) & (size - 1)
    cp = combos & (size - 1)
    bx = np.stack([cp, cp ^ a2, cp ^ a1, cp ^ a1 ^ a2], axis=1)
    xweights = 1 << np.arange(4)

    excluded_pairs = 0
    covered_pairs = 0
    seen_tables = np.zeros(16, dtype=bool)
    seen_half = False
    outside = []
    mult = size  # beta choices per combined offset
    row_bits = n - 1
    for uidx in range(1 << (n * row_bits)):
        rows = []
        for j in range(n):
            chunk = (uidx >> (j * row_bits)) & ((1 << row_bits) - 1)
            others = [k for k in range(n) if k != j]
            row = 0
            for p, k in enumerate(others):
                row |= ((chunk >> p) & 1) << k
            rows.append(row)
        w = np.zeros(size, dtype=np.int64)
        for j in range(n):
            w |= par[sgrid & rows[j]].astype(np.int64) << j
        sa = sgrid[None, :] & sgrid[:, None]    # alpha-major
        b = sgrid[None, :] ^ w[sa]              # M s per (alpha, s)
        pbit = par[sa]                          # <alpha, s>
        flat = (sgrid[:, None] * size + b).ravel()
        nacc = np.bincount(flat, minlength=size * size).astype(np.int16)
        pset = np.zeros(size * size, dtype=np.uint8)
        np.bitwise_or.at(pset, flat, (1 << pbit).ravel().astype(np.uint8))
        nacc = nacc.reshape(size, size)
        pset = pset.reshape(size, size)
        solv = nacc > 0
        mixed_alpha = ((pset == 3) & solv).any(axis=1)
        det_alpha = ((pset != 3) & solv).any(axis=1)
        assert not (mixed_alpha & det_alpha).any(), \
            "conditional parity must be uniform or deterministic per system"
        ng = nacc[:, bx]                        # (alpha, combo, x)
        pg = pset[:, bx]
        inc = ~(ng == 0).any(axis=2)
        excluded_pairs += mult * int((~inc).sum())
        covered_pairs += mult * inc.size
        if inc[mixed_alpha].any():
            seen_half = True
        det_inc = inc & ~mixed_alpha[:, None]
        tvals = ((pg.astype(np.int64) - 1).clip(0)
                 * xweights[None, None, :]).sum(axis=2)[det_inc]
        hist = np.bincount(tvals, minlength=16) > 0
        seen_tables |= hist
        seen_tables[[15 ^ t for t in np.nonzero(hist)[0]]] = True
    rcount = 1 << (1 + xbits + n - 1)
    assert covered_pairs == rcount ** n * 4 ** n
    for t in np.nonzero(seen_tables)[0]:
        if _PAR4[t] == 1:
            outside.append(_det_vector(int(t), 4))
    return excluded_pairs, seen_tables, seen_half, outside


def survey_loi_rules(n: int, xbits: int = 2, method: str = "auto",
                     seed: int = 0, cross_checks: int = 200) -> RuleSurveyReport:
    """Sweep every output-input linear rule against every deterministic
    assignment.

    The per-site predicates are affine in the input string once the
    assignment is fixed, so the accepted set for each x is an affine
    subspace and the conditional table is either deterministic and affine
    or 1/2 everywhere.  'direct' verifies this per individual pair with
    packed bit arithmetic; 'quotient' covers the identical pair set through
    an exact factorization with multiplicity bookkeeping and is the default
    at n = 4, where the direct sweep takes tens of minutes.  Both paths
    replay randomly sampled pairs through the plain rule evaluator.
    """
    if xbits != RULE_XBITS_CAP:
        raise ResourceCapError("the exhaustive survey is fixed at |x| = 2",
                               progress=0, unit="digits")
    if n > RULE_SITE_CAP:
        raise ResourceCapError(f"survey capped at n <= {RULE_SITE_CAP}",
                               progress=0, unit="sites")
    if method == "auto":
        method = "quotient" if n >= 4 else "direct"
    if method == "direct":
        excluded, seen_tables, seen_half, outside = _survey_loi_direct(n, xbits)
    elif method == "quotient":
        excluded, seen_tables, seen_half, outside = _survey_loi_quotient(n, xbits)
    else:
        raise ValueError("method must be 'auto', 'direct' or 'quotient'")
    xcount = 1 << xbits
    rcount = 1 << (1 + xbits + n - 1)

    distinct = [_det_vector(t, xcount) for t in range(16) if seen_tables[t]]
    if seen_half:
        distinct.append(_half_vector(xcount))

    checked = _replay_loi_pairs(n, xbits, seed, cross_checks,
                                sorted(distinct))
    return RuleSurveyReport(
        n=n, xbits=xbits, family="LOI", method=method,
        rule_count=rcount ** n, pair_count=rcount ** n * 4 ** n,
        excluded_pairs=excluded,
        distinct_points=tuple(sorted(distinct)),
        outside_points=tuple(outside),
        cross_checks=checked)


def _rule_from_digits(n: int, xbits: int, digits) -> PostSelectionRule:
    """Decode per-site predicate choices (c | w bits | u bits) into a rule."""
    def site_map(r):
        def fn(args):
            c = r & 1
            val = c
            for b in range(xbits):
                val ^= ((r >> (1 + b)) & 1) & args[b]
            for p in range(n - 1):
                val ^= ((r >> (1 + xbits + p)) & 1) & args[xbits + p]
            return val
        return fn
    return PostSelectionRule.from_maps(
        n, xbits, 2, [site_map(r) for r in digits],
        uses_outputs=(True,) * n)


def _replay_loi_pairs(n, xbits, seed, count, distinct):
    """Re-derive sampled (rule, assignment) conditionals with the plain
    evaluator and require agreement with the packed sweep's point set."""
    if count <= 0:
        return 0
    rng = np.random.default_rng(seed)
    rcount = 1 << (1 + xbits + n - 1)
    maps = _assignment_maps(2)
    scenario = Scenario(n, 2, 2)
    xcount = 1 << xbits
    xs = list(Scenario(xbits, 2, 2).inputs())
    all_s = list(scenario.inputs())
    distinct = set(distinct)
    done = 0
    for _ in range(count):
        digits = [int(rng.integers(rcount)) for _ in range(n)]
        rule = _rule_from_digits(n, xbits, digits)
        assignment = [maps[int(rng.integers(len(maps)))] for _ in range(n)]
        vec = []
        for x in xs:
            hits = total = 0
            for s in all_s:
                outputs = tuple(assignment[j][s[j]] for j in range(n))
                if rule.accepts(x, s, outputs):
                    hits += sum(outputs) % 2
                    total += 1
            if total == 0:
                vec = None
                break
            vec.append(Fraction(hits, total))
        if vec is None:
            done += 1
            continue
        if tuple(vec) not in distinct:
            raise AssertionError(
                f"replayed pair leaves the surveyed point set: "
                f"{digits} {assignment}")
        done += 1
    return done


# ---------------------------------------------------------------------------
# the triple-block output-input protocol for products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoiProtocolReport:
    xbits: int
    n: int
    rule: PostSelectionRule
    block_config: GhzConfig
    verified: bool
    achieved: tuple  # joint parity per x, expected [prod_j x_j]


def loi_product_protocol(xbits: int) -> LoiProtocolReport:
    """Output-input schedule reaching xor m = prod_j x_j with 3(|x|-1) sites.

    Sites come in blocks of three sharing a GHZ triple whose correlator
    E(s) = cos(sum_j theta_j s_j) is +-1 on the promise s_3 = s_1 xor s_2,
    with parity exactly s_1 s_2.  Block 1 post-selects on (x_1, x_2, x_1 xor
    x_2) and later block k feeds the running output parity Q back in:
    (Q, x_{k+1} xor 1, Q xor x_{k+1} xor 1), adding Q(x_{k+1} xor 1) and
    collapsing the running parity to Q x_{k+1}.  Verification evaluates the
    block correlator in closed form and iterates the parity bookkeeping
    exactly over every x.
    """
    if xbits < 2:
        raise ValueError("the product needs at least two digits")
    n = 3 * (xbits - 1)
    x_sc = Scenario(xbits, 2, 2)

    def block_sites(k):
        return 3 * k, 3 * k + 1, 3 * k + 2

    def site_map(j):
        block, pos = divmod(j, 3)
        if block == 0:
            def fn(args):
                if pos == 0:
                    return args[0]
                if pos == 1:
                    return args[1]
                return args[0] ^ args[1]
            return fn
        prev = list(range(3 * block))

        def fn(args):
            outs = args[xbits:]
            # args list other sites ascending; previous sites keep their index
            q = 0
            for l in prev:
                q ^= outs[l if l < j else l - 1]
            if pos == 0:
                return q
            if pos == 1:
                return args[block + 1] ^ 1
            return q ^ args[block + 1] ^ 1
        return fn

    uses = tuple(j >= 3 for j in range(n))
    rule = PostSelectionRule.from_maps(
        n, xbits, 2, [site_map(j) for j in range(n)], uses_outputs=uses)

    config = GhzConfig(phi=0.0, thetas=(math.pi / 2, math.pi / 2,
                                        -math.pi / 2))
    block_ok = True
    for s in product((0, 1), repeat=2):
        expect = ghz_expectation(config, (s[0], s[1], s[0] ^ s[1]))
        parity = (1.0 - expect) / 2.0
        if abs(parity - (s[0] & s[1])) > 1e-12:
            block_ok = False

    achieved = []
    consistent = True
    for x in x_sc.inputs():
        svals = [0] * n
        mvals = [0] * n
        a, b, c = block_sites(0)
        svals[a], svals[b], svals[c] = x[0], x[1], x[0] ^ x[1]
        mvals[a] = svals[a] & svals[b]  # block parity on its first site
        q = mvals[a]
        for k in range(1, xbits - 1):
            a, b, c = block_sites(k)
            svals[a] = q
            svals[b] = x[k + 1] ^ 1
            svals[c] = svals[a] ^ svals[b]
            mvals[a] = svals[a] & svals[b]
            q ^= mvals[a]
        achieved.append(q)
        if not rule.accepts(x, tuple(svals), tuple(mvals)):
            consistent = False

    target = [math.prod(x) for x in x_sc.inputs()]
    verified = block_ok and consistent and achieved == target
    return LoiProtocolReport(xbits=xbits, n=n, rule=rule,
                             block_config=config, verified=verified,
                             achieved=tuple(achieved))


# ---------------------------------------------------------------------------
# affine / n-partite-linear post-selection beyond binary
# ---------------------------------------------------------------------------

def _x_power_tables(xbits: int, d: int, generators):
    """Tables of c1*h + c2*h^2 + ... for every generator h and coefficient
    choice, as vectors over Z_d^xbits."""
    x_sc = Scenario(xbits, d, d)
    xs = list(x_sc.inputs())
    deltas = []
    for g in generators:
        base = np.array([g(x) for x in xs], dtype=np.int16)
        powers = [np.ones_like(base)]
        for _ in range(d - 1):
            powers.append(powers[-1] * base % d)
        for coeffs in product(range(d), repeat=d - 1):
            if all(c == 0 for c in coeffs):
                continue
            tab = np.zeros_like(base)
            for q, cq in enumerate(coeffs, start=1):
                tab = (tab + cq * powers[q]) % d
            deltas.append(tab)
    uniq = {tuple(int(v) for v in t) for t in deltas}
    uniq.discard(tuple([0] * len(xs)))
    return x_sc, sorted(uniq)


def _reachable_tables(xbits: int, d: int, n_sites: int, generators):
    """Truth tables [alpha + sum_j q_j(h_j(x))]_d reachable with at most
    n_sites sites, by breadth-first composition."""
    if xbits > RULE_XBITS_CAP or d > RULE_D_CAP or n_sites > COMPOSED_SITE_CAP:
        raise ResourceCapError(
            f"composed-table enumeration capped at |x| <= {RULE_XBITS_CAP}, "
            f"d <= {RULE_D_CAP}, n <= {COMPOSED_SITE_CAP}",
            progress=0, unit="sites")
    x_sc, deltas = _x_power_tables(xbits, d, generators)
    size = x_sc.input_count
    radix = d ** np.arange(size, dtype=np.int64)
    # tables encoded as base-d keys; one site adds one delta table
    reach = np.zeros(d ** size, dtype=bool)
    consts = np.array([a * int(radix.sum()) for a in range(d)], dtype=np.int64)
    reach[consts] = True
    frontier = consts
    darr = np.array(sorted(deltas), dtype=np.int16)
    chunk = max(1, (1 << 22) // max(1, darr.shape[0] * size))
    for _ in range(n_sites):
        if frontier.size == 0:
            break
        fresh = []
        cur = np.stack([(frontier // radix[i]) % d for i in range(size)],
                       axis=1).astype(np.int16)
        for lo in range(0, cur.shape[0], chunk):
            block = cur[lo:lo + chunk]
            nxt = (block[:, None, :] + darr[None, :, :]) % d
            keys = (nxt.astype(np.int64)
                    * radix[None, None, :]).sum(axis=2).ravel()
            keys = np.unique(keys)
            fresh.append(keys[~reach[keys]])
        frontier = np.unique(np.concatenate(fresh)) if fresh else \
            np.empty(0, dtype=np.int64)
        frontier = frontier[~reach[frontier]]
        reach[frontier] = True
    tables = frozenset(
        tuple(int(k // radix[i]) % d for i in range(size))
        for k in np.nonzero(reach)[0])
    return x_sc, tables


def _affine_generators(xbits: int, d: int):
    coeff_space = list(product(range(d), repeat=xbits))
    gens = []
    for coeffs in coeff_space:
        if all(c == 0 for c in coeffs):
            continue
        gens.append(lambda x, c=coeffs: sum(a * v for a, v in zip(c, x)) % d)
    return gens


def _npartite_generators(xbits: int, d: int):
    gens = []
    per_site = list(product(range(d), repeat=d))
    for tables in product(per_site, repeat=xbits):
        if all(all(v == t[0] for v in t) for t in tables):
            continue
        gens.append(lambda x, ts=tables: sum(t[v] for t, v in zip(ts, x)) % d)
    return gens


def ai_reachable_tables(xbits: int = 2, d: int = 3,
                        n_sites: int = COMPOSED_SITE_CAP):
    """Function tables reachable with at most n_sites sites post-selecting
    on affine digit combinations (constants b are absorbed into the output
    polynomials, so only the homogeneous parts generate)."""
    _, reach = _reachable_tables(xbits, d, n_sites,
                                 _affine_generators(xbits, d))
    return reach


def pi_reachable_tables(xbits: int = 2, d: int = 3,
                        n_sites: int = COMPOSED_SITE_CAP):
    """Function tables reachable with at most n_sites sites post-selecting
    on n-partite-linear digit combinations."""
    _, reach = _reachable_tables(xbits, d, n_sites,
                                 _npartite_generators(xbits, d))
    return reach


def ai_span_excludes(f: FiniteFunction) -> bool:
    """True when f lies outside the Z_d-span of {1} and {h^q : h affine},
    hence outside the AI-reachable set for every number of sites (each
    site's output is a polynomial in its post-selected digit)."""
    sc = f.scenario
    sc.require_prime_d("the span test")
    d = sc.d
    xs = list(sc.inputs())
    rows = [[1] * len(xs)]
    for g in _affine_generators(sc.n, d):
        base = [g(x) for x in xs]
        for q in range(1, d):
            rows.append([pow(v, q, d) for v in base])
    rows.append(list(f.table))
    rank_without = _gf_rank([r for r in rows[:-1]], d)
    rank_with = _gf_rank(rows, d)
    return rank_with > rank_without


def _gf_rank(rows, d: int) -> int:
    mat = [list(r) for r in rows]
    cols = len(mat[0]) if mat else 0
    rank = 0
    for c in range(cols):
        pivot = next((r for r in range(rank, len(mat)) if mat[r][c] % d), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        inv = pow(mat[rank][c], -1, d)
        mat[rank] = [v * inv % d for v in mat[rank]]
        for r in range(len(mat)):
            if r != rank and mat[r][c] % d:
                factor = mat[r][c]
                mat[r] = [(v - factor * w) % d
                          for v, w in zip(mat[r], mat[rank])]
        rank += 1
    return rank


@dataclass(frozen=True)
class PiProtocolReport:
    d: int
    xbits: int
    n: int
    rule: PostSelectionRule
    output_maps: tuple
    verified: bool
    achieved: tuple  # [sum_j m_j]_d per x, expected [x_1 x_2]_d


def pi_product_protocol(d: int = 3) -> PiProtocolReport:
    """Party-set construction reaching p(k|x) = delta(k = [x_1 x_2]_d) under
    n-partite-linear post-selection.

    One site outputs s^2 post-selected on s = [x_1 + x_2]_d and two
    correction sites output -s post-selected on s = x_1^2 and s = x_2^2
    (n-partite linear on x, not affine), so each triple sums to 2 x_1 x_2;
    q triples with [2q]_d = 1 give the product.  For d = 3 that is q = 2
    and n = 6.
    """
    if d < 3 or d % 2 == 0:
        raise ValueError("the construction needs an odd prime modulus")
    Scenario(1, d, d).require_prime_d("the party-set construction")
    q = (d + 1) // 2  # [2q]_d = 1
    n = 3 * q
    if n > COMPOSED_SITE_CAP:
        raise ResourceCapError(
            f"party-set construction needs {n} sites, cap {COMPOSED_SITE_CAP}",
            progress=0, unit="sites")
    xbits = 2

    def triple_maps():
        return [lambda x: (x[0] + x[1]) % d,
                lambda x: x[0] * x[0] % d,
                lambda x: x[1] * x[1] % d]

    maps = []
    for _ in range(q):
        maps.extend(triple_maps())
    rule = PostSelectionRule.from_maps(n, xbits, d, maps)

    square = tuple(v * v % d for v in range(d))
    negate = tuple(-v % d for v in range(d))
    output_maps = (square, negate, negate) * q

    x_sc = Scenario(xbits, d, d)
    achieved = []
    for x in x_sc.inputs():
        svals = [maps[j](x) for j in range(n)]
        mvals = [output_maps[j][svals[j]] for j in range(n)]
        assert rule.accepts(x, tuple(svals), tuple(mvals))
        achieved.append(sum(mvals) % d)
    target = [x[0] * x[1] % d for x in x_sc.inputs()]
    return PiProtocolReport(d=d, xbits=xbits, n=n, rule=rule,
                            output_maps=output_maps,
                            verified=achieved == target,
                            achieved=tuple(achieved))


# ---------------------------------------------------------------------------
# the affine-post-selection quantum example
# ---------------------------------------------------------------------------

def ai_example_rule() -> PostSelectionRule:
    """Three qutrit sites post-selecting on s = (x_1, x_2, [x_1+x_2]_3)."""
    return PostSelectionRule.from_maps(
        3, 2, 3, [lambda x: x[0], lambda x: x[1],
                  lambda x: (x[0] + x[1]) % 3])


def ai_example_inequality() -> BellInequality:
    """Uniform-game inequality for f(x) = [(x_1 x_2)^2 + 1]_3 over the
    digit-pair correlator space: (1/9) sum_x p(f(x)|x) <= 8/9, the local
    bound being the best agreement of an n-partite-linear table with f."""
    x_sc = Scenario(2, 3, 3)
    beta = [Fraction(0)] * x_sc.reduced_dim
    for x in x_sc.inputs():
        k = ((x[0] * x[1]) ** 2 + 1) % 3
        beta[x_sc.beta_index(k, x)] = Fraction(1, 9)
    return BellInequality(x_sc, tuple(beta), Fraction(8, 9),
                          name="affine-postselection game",
                          tags=frozenset({"game", "postselection"}))


@dataclass(frozen=True)
class AiQuantumReport:
    value: float
    classical_bound: Fraction
    phases: tuple          # phases[site][input] = (phi(1), phi(2))
    restarts_used: int
    rule: PostSelectionRule
    inequality: BellInequality


def ai_quantum_bound(restarts: int = 24, seed=None) -> AiQuantumReport:
    """Lower bound on the quantum value of the affine-post-selection game.

    Three qutrits share the GHZ state 3^(-1/2) sum_q |qqq> and each site
    measures in a Fourier-phase basis with free phases phi_{j,s}(q) (gauge
    phi(0) = 0), so p(k|s) = |sum_q exp(i Phi_s(q)) w^{qk}|^2 / 9 with
    Phi_s(q) the site phase sum and w = exp(2 pi i/3).  The game feeds
    s = (x_1, x_2, [x_1+x_2]_3) and scores p(f(x)|x); multi-start
    Nelder-Mead over the 18 phases lands above the local bound 8/9.
    """
    d = 3
    rule = ai_example_rule()
    ineq = ai_example_inequality()
    x_sc = ineq.scenario
    xs = list(x_sc.inputs())
    targets = np.array([((x[0] * x[1]) ** 2 + 1) % d for x in xs])
    sites = np.array([(x[0], x[1], (x[0] + x[1]) % d) for x in xs])
    omega = np.exp(2j * np.pi / d)
    qs = np.arange(d)
    waves = omega ** (targets[:, None] * qs[None, :])  # (x, q)

    def value(params):
        full = np.zeros((3, d, d))
        full[:, :, 1:] = params.reshape(3, d, d - 1)
        phi = full[0, sites[:, 0]] + full[1, sites[:, 1]] + full[2, sites[:, 2]]
        amp = (np.exp(1j * phi) * waves).sum(axis=1)
        return float((np.abs(amp) ** 2).sum()) / (d * d * len(xs))

    best_val, best_params = -np.inf, None
    for rng in _spawned_rngs(seed, restarts):
        start = rng.uniform(-np.pi, np.pi, size=18)
        res = minimize(lambda p: -value(p), start, method="Nelder-Mead",
                       options={"fatol": 1e-12, "xatol": 1e-10,
                                "maxiter": 20000, "maxfev": 20000,
                                "adaptive": True})
        if -res.fun > best_val:
            best_val, best_params = -float(res.fun), res.x
    ph = best_params.reshape(3, d, d - 1)
    phases = tuple(tuple(tuple(float(v) for v in ph[j, s])
                         for s in range(d)) for j in range(3))
    return AiQuantumReport(value=best_val,
                           classical_bound=Fraction(8, 9),
                           phases=phases,
                           restarts_used=restarts,
                           rule=rule,
                           inequality=ineq)
