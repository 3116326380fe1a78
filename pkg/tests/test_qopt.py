import math

import numpy as np
import pytest

from bellscope.errors import EigenConvergenceError, ScenarioMismatchError
from bellscope.ineq import catalog
from bellscope.qopt import (
    GhzConfig,
    _jacobi_real_symmetric,
    entanglement_entropy,
    ghz_expectation,
    jacobi_eigvalsh,
    jacobi_top_eigenpair,
    mbs_bound,
    ww_bound,
)

RT2 = math.sqrt(2.0)


def random_hermitian(rng, m):
    h = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return h + h.conj().T


# ---------------------------------------------------------------------------
# eigensolver vs numpy
# ---------------------------------------------------------------------------

def test_jacobi_matches_numpy_on_random_hermitian():
    rng = np.random.default_rng(11)
    for _ in range(40):
        m = int(rng.integers(2, 11))
        h = random_hermitian(rng, m)
        got = jacobi_eigvalsh(h)
        ref = np.linalg.eigvalsh(h)
        assert np.abs(got - ref).max() < 1e-9
        lam, vec = jacobi_top_eigenpair(h)
        assert abs(lam - ref[-1]) < 1e-9
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-12
        assert np.linalg.norm(h @ vec - lam * vec) < 1e-8


def test_jacobi_handles_degenerate_spectra():
    # repeated eigenvalues are the hard case for plane-rotation methods; the
    # real embedding doubles every one of them on top of that
    rng = np.random.default_rng(5)
    for m, spec in [(5, [2.0, 2.0, 2.0, -1.0, -1.0]),
                    (6, [1.0] * 6),
                    (8, [3.0] * 4 + [0.0] * 4)]:
        q = np.linalg.qr(rng.normal(size=(m, m))
                         + 1j * rng.normal(size=(m, m)))[0]
        h = q @ np.diag(spec) @ q.conj().T
        got = jacobi_eigvalsh(h)
        assert np.abs(got - np.sort(spec)).max() < 1e-10


def test_jacobi_diagonal_input_needs_no_rotations():
    vals, vecs = _jacobi_real_symmetric(np.diag([3.0, -1.0, 2.0]),
                                        max_sweeps=0)
    assert np.allclose(vals, [-1.0, 2.0, 3.0])
    assert np.allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])


def test_jacobi_budget_exhaustion_raises():
    h = random_hermitian(np.random.default_rng(3), 6)
    with pytest.raises(EigenConvergenceError):
        jacobi_eigvalsh(h, max_sweeps=0)


def test_top_eigenpair_with_degenerate_top():
    h = np.diag([1.0, 5.0, 5.0]).astype(complex)
    lam, vec = jacobi_top_eigenpair(h)
    assert abs(lam - 5.0) < 1e-12
    assert np.linalg.norm(h @ vec - lam * vec) < 1e-10


# ---------------------------------------------------------------------------
# GHZ witness against a dense tensor simulation
# ---------------------------------------------------------------------------

def dense_ghz_expectation(phi, thetas, s):
    """<GHZ| tensor_j O_j |GHZ> with O_j = [[0, e^{i b}], [e^{-i b}, 0]],
    b = thetas[j] * s[j], and |GHZ> = (|0..0> + e^{i n phi}|1..1>)/sqrt(2)."""
    n = len(thetas)
    op = np.array([[1.0]], dtype=complex)
    for j in range(n):
        b = thetas[j] * s[j]
        oj = np.array([[0.0, np.exp(1j * b)], [np.exp(-1j * b), 0.0]])
        op = np.kron(op, oj)
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0 / RT2
    psi[-1] = np.exp(1j * n * phi) / RT2
    return float(np.real(psi.conj() @ (op @ psi)))


def test_ghz_expectation_matches_dense_simulation():
    rng = np.random.default_rng(17)
    for n in range(2, 11):
        for _ in range(6):
            phi = float(rng.uniform(-np.pi, np.pi))
            thetas = tuple(float(t) for t in rng.uniform(-np.pi, np.pi, n))
            s = tuple(int(b) for b in rng.integers(0, 2, n))
            cfg = GhzConfig(phi=phi, thetas=thetas)
            assert abs(ghz_expectation(cfg, s)
                       - dense_ghz_expectation(phi, thetas, s)) < 1e-12


def test_ghz_expectation_length_check():
    with pytest.raises(ValueError):
        ghz_expectation(GhzConfig(phi=0.0, thetas=(0.0, 0.0)), (0, 1, 0))


# ---------------------------------------------------------------------------
# closed-form (n, 2, 2) bound
# ---------------------------------------------------------------------------

def witness_value(ineq, report):
    """Recompute sum_s beta_s (1 - E(s))/2 from the returned configuration."""
    total = 0.0
    for s in ineq.scenario.inputs():
        e = ghz_expectation(report.config, s)
        total += float(ineq.beta_at(1, s)) * (1.0 - e) / 2.0
    return total


def test_ww_bound_chsh():
    rep = ww_bound(catalog("chsh"), restarts=16, seed=0)
    assert abs(rep.value - (1.0 + RT2)) < 1e-7
    assert rep.certified_kind == "exact-WW"
    assert rep.optimal_state_entropy == 1.0
    assert abs(witness_value(catalog("chsh"), rep) - rep.value) < 1e-8


def test_ww_bound_mermin():
    rep = ww_bound(catalog("mermin", n=3), restarts=16, seed=1)
    assert abs(rep.value - 3.0) < 1e-7
    assert abs(witness_value(catalog("mermin", n=3), rep) - rep.value) < 1e-8


def test_ww_bound_gen_new_three_parties():
    rep = ww_bound(catalog("gen_new", n=3), restarts=16, seed=2)
    assert abs(rep.value - 4.0 / 3.0) < 1e-7


def test_ww_bound_monotone_in_restarts():
    # spawned seed streams are prefixes of each other, so more restarts can
    # only improve the best value
    iq = catalog("mermin_klyshko", n=4)
    lo = ww_bound(iq, restarts=2, seed=5)
    hi = ww_bound(iq, restarts=10, seed=5)
    assert lo.value <= hi.value + 1e-12


def test_ww_bound_rejects_non_binary_scenarios():
    with pytest.raises(ScenarioMismatchError):
        ww_bound(catalog("cglmp", d=3))


# ---------------------------------------------------------------------------
# bipartite seesaw
# ---------------------------------------------------------------------------

def stage1_from_config(ineq, config):
    """Maximally-entangled-state value of the returned measurement phases."""
    sc = ineq.scenario
    d = sc.d
    q = np.arange(d)
    fmat = np.exp(2j * np.pi * np.outer(q, q) / d) / math.sqrt(d)
    bases = []
    for party in config.phases:
        vs = []
        for row in party:
            full = np.concatenate(([0.0], np.asarray(row)))
            vs.append(np.exp(1j * full)[:, None] * fmat)
        bases.append(vs)
    total = 0.0
    for x in range(sc.c):
        for y in range(sc.c):
            m = bases[0][x].T @ bases[1][y]
            p = (m.real ** 2 + m.imag ** 2) / d
            for k in range(1, d):
                w = float(ineq.beta_at(k, (x, y)))
                if w:
                    for m1 in range(d):
                        total += w * p[m1, (k - m1) % d]
    return total


def test_mbs_bound_chsh():
    rep = mbs_bound(catalog("chsh"), restarts=4, seed=1)
    assert abs(rep.value - (1.0 + RT2)) < 1e-4
    assert rep.certified_kind == "lower-bound-MBS"
    assert abs(rep.optimal_state_entropy - 1.0) < 5e-3


def test_mbs_bound_cglmp3_leaves_maximal_entanglement():
    iq = catalog("cglmp", d=3)
    rep = mbs_bound(iq, restarts=4, seed=2)
    assert abs(rep.value - 3.9149) < 1e-3
    assert abs(rep.optimal_state_entropy - 1.5543) < 5e-3
    # stage 2 must not fall below the value its own phases achieve on the
    # maximally entangled state
    assert rep.value >= stage1_from_config(iq, rep.config) - 1e-9
    assert rep.optimal_state_entropy < math.log2(3) - 0.02


def test_mbs_bound_bipartite_only():
    with pytest.raises(ScenarioMismatchError):
        mbs_bound(catalog("mermin", n=3))


# ---------------------------------------------------------------------------
# entanglement entropy
# ---------------------------------------------------------------------------

def test_entropy_product_and_bell():
    e1 = np.zeros(4, dtype=complex)
    e1[0] = 1.0
    assert entanglement_entropy(e1) < 1e-9
    bell = np.array([1.0, 0.0, 0.0, 1.0]) / RT2
    assert abs(entanglement_entropy(bell) - 1.0) < 1e-9


def test_entropy_known_schmidt_coefficients():
    p = 0.8
    psi = np.array([math.sqrt(p), 0.0, 0.0, math.sqrt(1 - p)])
    want = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
    assert abs(entanglement_entropy(psi) - want) < 1e-9


def test_entropy_input_validation():
    with pytest.raises(ValueError):
        entanglement_entropy(np.ones(4))
    with pytest.raises(ValueError):
        entanglement_entropy(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
    psi = np.zeros(6, dtype=complex)
    psi[0] = 1.0
    assert entanglement_entropy(psi, dims=(2, 3)) < 1e-9


# ---------------------------------------------------------------------------
# three-party dense oracle
# ---------------------------------------------------------------------------

def dense_tripartite_maximum(ineq, restarts=10, seed=23):
    """Quantum maximum over arbitrary qubit observables and states.

    Each party measures a general +-1 observable per input (two Bloch
    angles); the optimal state is the top eigenvector of the resulting
    operator, so only the 12 angles are searched."""
    from scipy.optimize import minimize

    sc = ineq.scenario
    assert (sc.n, sc.c, sc.d) == (3, 2, 2)
    beta = {s: float(ineq.beta_at(1, s)) for s in sc.inputs()}
    eye8 = np.eye(8, dtype=complex)

    def observable(th, ph):
        return np.array([[math.cos(th),
                          math.sin(th) * np.exp(-1j * ph)],
                         [math.sin(th) * np.exp(1j * ph),
                          -math.cos(th)]])

    def neg_best(angles):
        obs = [[observable(angles[4 * j + 2 * x], angles[4 * j + 2 * x + 1])
                for x in range(2)] for j in range(3)]
        op = np.zeros((8, 8), dtype=complex)
        for s, b in beta.items():
            if not b:
                continue
            prod = np.kron(np.kron(obs[0][s[0]], obs[1][s[1]]), obs[2][s[2]])
            op += b * (eye8 - prod) / 2.0
        return -float(np.linalg.eigvalsh(op)[-1])

    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(restarts):
        x0 = rng.uniform(-np.pi, np.pi, size=12)
        res = minimize(neg_best, x0, method="Nelder-Mead",
                       options={"fatol": 1e-12, "xatol": 1e-10,
                                "maxiter": 20000, "maxfev": 20000,
                                "adaptive": True})
        best = max(best, -float(res.fun))
    return best


def test_svetlichny_dense_oracle_agrees_with_phase_form():
    iq = catalog("svetlichny3")
    dense = dense_tripartite_maximum(iq, restarts=8, seed=23)
    assert abs(dense - 2.0 * RT2) < 1e-5
    rep = ww_bound(iq, restarts=16, seed=3)
    assert abs(rep.value - dense) < 1e-5
