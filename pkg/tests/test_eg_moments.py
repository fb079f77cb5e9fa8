import math
from fractions import Fraction

import numpy as np
import pytest

from degreegof.eg_moments import (EgMomentInputs, _variance_display, _variance_raw,
                                  falling_factorials, m_moments, moments_under, null_moments,
                                  w_phi_identity, w_phi_moments, w_phi_statistic)
from degreegof.graph import Graph
from degreegof.her_moments import w_moments_null
from degreegof.models import (BlockConstant, Constant, DegreeCorrected, Grid, PowerG, ProbMatrix,
                              Product, RngSpec, sample_eg, sample_her)
from degreegof.patterns import PhiVector, phi_vector
from degreegof.simlab import EgDesign, null_block_graphon

from oracles import (all_graphs, her_weights, m_moment_stats, monte_carlo_sbm, random_prob_matrix,
                     sbm_exact_stats, w_phi_values)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_falling_factorials():
    assert falling_factorials(6) == [30, 120, 360, 720, 720]
    big = falling_factorials(10 ** 4)
    assert big[4] == math.prod(10 ** 4 - k for k in range(6))
    assert big[4] > 2 ** 53 and isinstance(big[4], int)
    assert falling_factorials(2)[1] == 0


def test_inputs_validation():
    vec = phi_vector(Constant(0.3))
    with pytest.raises(ValueError):
        EgMomentInputs(10, 1.5, vec)
    with pytest.raises(ValueError):
        EgMomentInputs(10, 0.3, PhiVector({1: 0.3, 2: 0.09}))


def test_statistic_examples():
    assert w_phi_statistic(Graph(5), 0.0) == 0
    assert w_phi_statistic(Graph.complete(3), 1.0) == 0


def test_linear_combination_identity():
    models = [Constant(0.3), BlockConstant([0.3, 0.7], [[0.6, 0.1], [0.1, 0.3]]),
              Product(PowerG(0.9, 1.5))]
    rng = np.random.default_rng(0)
    for r in range(300):
        phi = models[r % 3]
        n = int(rng.integers(2, 30))
        g, _ = sample_eg(phi, n, RngSpec(40, r))
        p0 = float(rng.random())
        lhs, rhs = w_phi_identity(g, p0)
        assert lhs == rhs
        assert w_phi_statistic(g, p0) == pytest.approx(float(lhs) / n, rel=1e-12, abs=1e-12)


def test_m2_vanishes_for_two_nodes():
    inp = EgMomentInputs(2, 0.3, phi_vector(Constant(0.3)))
    em1, em2, *_ = m_moments(inp)
    assert em2 == 0 and em1 == pytest.approx(0.3)


@pytest.mark.parametrize("c", [0.2, 0.5, 0.8])
def test_er_exhaustive_n5(c):
    n = 5
    configs, pairs = all_graphs(n)
    w = her_weights(configs, pairs, np.full((n, n), c))
    stats = m_moment_stats(configs, pairs)
    exact = w @ stats
    got = m_moments(EgMomentInputs(n, c, phi_vector(Constant(c))))
    for a, b in zip(got, exact):
        assert rel(a, b) < 1e-10
    W = w_phi_values(configs, pairs, c)
    mean = w @ W
    var = w @ (W - mean) ** 2
    m = null_moments(Constant(c), n)
    assert rel(m.mean, mean) < 1e-10 and rel(m.variance, var) < 1e-10


SBMS = [
    ([0.5, 0.5], [[0.4, 0.1], [0.1, 0.5]]),
    ([0.2, 0.3, 0.5], [[0.9, 0.1, 0.3], [0.1, 0.2, 0.6], [0.3, 0.6, 0.05]]),
]


@pytest.mark.parametrize("sbm,n", [(SBMS[0], 5), (SBMS[1], 5), (SBMS[0], 6)],
                         ids=["K2-n5", "K3-n5", "K2-n6"])
def test_sbm_exact_enumeration(sbm, n):
    # every block labelling times every graph: exact, and sensitive to the
    # coefficients of the four- and five-node pattern terms (n5 > 0 at n = 6)
    alpha, pi = sbm
    exact = sbm_exact_stats(alpha, pi, n, m_moment_stats)
    inp = EgMomentInputs(n, 0.3, phi_vector(BlockConstant(alpha, pi)))
    for a, b in zip(m_moments(inp), exact):
        assert rel(a, b) < 1e-12
    p0 = 0.3

    def stats(configs, pairs):
        W = w_phi_values(configs, pairs, p0)
        return np.column_stack([W, W * W])

    e1, e2 = sbm_exact_stats(alpha, pi, n, stats)
    m = w_phi_moments(inp)
    assert rel(m.mean, e1) < 1e-12 and rel(m.variance, e2 - e1 ** 2) < 1e-10


def test_sbm_monte_carlo_n6():
    alpha, pi = [0.3, 0.7], [[0.7, 0.2], [0.2, 0.4]]
    n, reps = 6, 200_000

    def stat(D):
        m1 = D.sum(axis=1) / 2
        m2 = (D * (D - 1) / 2).sum(axis=1)
        return np.column_stack([m1, m2, m1 * m1, m1 * m2, m2 * m2])

    draws = monte_carlo_sbm(alpha, pi, n, reps, stat, seed=6)
    got = m_moments(EgMomentInputs(n, 0.3, phi_vector(BlockConstant(alpha, pi))))
    se = draws.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(np.abs(draws.mean(axis=0) - np.array(got)) < 4 * se)


def test_empty_model():
    m = w_phi_moments(EgMomentInputs(20, 0.0, phi_vector(Constant(0.0))))
    assert m.mean == 0 and m.variance == 0


def test_constant_null_reduces_to_er():
    for n, c in [(10, 0.3), (100, 0.05), (1000, 0.5)]:
        a = null_moments(Constant(c), n)
        b = w_moments_null(ProbMatrix.constant(n, c))
        assert rel(a.mean, b.mean) < 1e-12 and rel(a.variance, b.variance) < 1e-10


def test_edd_null_uses_closed_form():
    phi = Product(PowerG(1.0, 2.0))
    vec = phi_vector(phi)
    assert vec[3] == pytest.approx(1 / 27)
    assert null_moments(phi, 50) == w_phi_moments(EgMomentInputs(50, vec[1], vec))


def test_design_null_monte_carlo_n100():
    eta = np.array([0.4, 0.5])
    alpha, pi = [0.5, 0.5], np.outer(eta, eta)
    n, reps = 100, 20_000
    p1 = 0.2025
    W = monte_carlo_sbm(alpha, pi, n, reps, lambda D: ((D - (n - 1) * p1) ** 2).mean(axis=1), seed=100)
    m = null_moments(null_block_graphon(), n)
    assert abs(W.mean() - m.mean) < 4 * W.std(ddof=1) / math.sqrt(reps)
    assert abs(W.var(ddof=1) / m.variance - 1) < 0.05


def _random_graphons(rng):
    out = []
    for _ in range(7):
        K = int(rng.integers(1, 4))
        pi = rng.random((K, K))
        out.append(BlockConstant(rng.dirichlet(np.ones(K)), (pi + pi.T) / 2))
    for _ in range(7):
        out.append(Product(PowerG(float(rng.uniform(0.3, 1)), float(rng.uniform(1, 2.5)))))
    for _ in range(6):
        m = int(rng.integers(2, 6))
        t = rng.random((m, m))
        out.append(Grid((t + t.T) / 2))
    return out


@pytest.mark.parametrize("n", [10, 50, 200])
def test_dual_assembly_agreement(n):
    rng = np.random.default_rng(n)
    for phi in _random_graphons(rng):
        vec = phi_vector(phi)
        inp = EgMomentInputs(n, float(rng.uniform(0, 1)), vec)
        raw, grouped = _variance_raw(inp), _variance_display(inp)
        assert abs(raw - grouped) <= Fraction(1, 10 ** 9) * abs(raw)
        w_phi_moments(inp)  # raises on disagreement


def test_extra_variance_of_heterogeneous_graphon():
    for rho, beta in [(0.1, 1.5), (0.1, 2.0), (10 ** -1.5, 2.0)]:
        phi, _ = EgDesign(rho, beta).build()
        vec = phi_vector(phi)
        assert vec[1] == pytest.approx(rho, rel=1e-12)
        for n in (100, 316):
            het = w_phi_moments(EgMomentInputs(n, rho, vec))
            er = null_moments(Constant(rho), n)
            assert het.variance >= er.variance


def test_moments_under_alternative_monte_carlo():
    # contaminated design graphon vs direct simulation through the package sampler
    phi, phi0 = EgDesign(0.1, 1.8).build()
    n, reps = 60, 3000
    p1 = phi_vector(phi0, ids=(1,))[1]
    W = np.array([w_phi_statistic(sample_eg(phi, n, RngSpec(77, r))[0], p1) for r in range(reps)])
    m = moments_under(phi, p1, n)
    assert abs(W.mean() - m.mean) < 4 * W.std(ddof=1) / math.sqrt(reps)
    dev2 = (W - W.mean()) ** 2
    assert abs(W.var(ddof=1) - m.variance) < 4 * dev2.std(ddof=1) / math.sqrt(reps)
