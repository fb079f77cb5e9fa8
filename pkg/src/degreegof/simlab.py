"""Simulation designs and Monte-Carlo studies (size, power, normality).

Every random draw comes from its own stream ``RngSpec(seed, key)`` where
the key encodes (study, cell, replicate), so results do not depend on the
number of worker threads or on the order in which replicates finish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, ndtri
from scipy.stats import kstest

from .eg_moments import EgMomentInputs, w_phi_moments, w_phi_statistic
from .gof import TestResult, asymptotic_power, plug_in_density
from .her_moments import HerContext, v_moments_er, v_statistic, w_moments_her, \
    w_moments_null, w_statistic
from .models import (BlockConstant, DegreeCorrected, Graphon, ModelError, PowerG, ProbMatrix,
                     RngSpec, Scaled, sample_eg, sample_her, sparsify_thin, sparsify_vanish)
from .patterns import phi_vector

# stream prefixes, one per kind of draw
_S_COVARIATES, _S_POWER, _S_QQ, _S_EQUIV, _S_THIN = 1, 2, 3, 4, 5

POWER_HEADER = "n,rho_star,beta,power_analytic,power_empirical,ci_halfwidth,replicates"
QQ_HEADER = "n,exponent,kind,rank,empirical_q,normal_q,ks_distance"
EQUIV_HEADER = "n,p,mean_abs_gap,size_w,size_v,replicates"


class DesignError(ValueError):
    pass


def fmt(x) -> str:
    """Ten significant digits, the precision of every study CSV."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.10g}"


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def binomial_halfwidth(p: float, reps: int) -> float:
    return 1.96 * math.sqrt(max(p * (1 - p), 0.0) / reps)


# ----------------------------------------------------------------------------
# HER covariate design


def edge_covariates(x: np.ndarray) -> np.ndarray:
    """sqrt(pi) |x_i - x_j| / 2 per component, rows in lexicographic pair order.

    With standard normal node covariates each component has mean 1.
    """
    i, j = np.triu_indices(x.shape[0], 1)
    return math.sqrt(math.pi) * np.abs(x[i] - x[j]) / 2


def calibrate_intercept(eta: np.ndarray, target: float, tol: float = 1e-10) -> float:
    """Intercept a with mean(expit(a + eta)) = target."""
    if not 0 < target < 1:
        raise DesignError(f"target density must lie in (0, 1), got {target}")

    def gap(a):
        return float(np.mean(expit(a + eta))) - target

    lo, hi = -1.0, 1.0
    while gap(lo) > 0:
        lo *= 2
        if lo < -1e4:
            raise DesignError("cannot reach the target density")
    while gap(hi) < 0:
        hi *= 2
        if hi > 1e4:
            raise DesignError("cannot reach the target density")
    return brentq(gap, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class HerDesign:
    """Node covariates x_i ~ N(0, I_d); the true model uses all d edge
    covariates with slopes (1, ..., 1, beta), the null drops the last one."""

    n: int
    rho_star: float
    beta: float = 0.0
    d: int = 3

    def node_covariates(self, rng) -> np.ndarray:
        gen = rng.generator() if isinstance(rng, RngSpec) else np.random.default_rng(rng)
        return gen.standard_normal((self.n, self.d))

    def build(self, x_nodes: np.ndarray) -> tuple[ProbMatrix, ProbMatrix]:
        """(p, p0) for given node covariates, both calibrated to rho_star."""
        if self.beta < 0:
            raise DesignError("beta must be nonnegative")
        if self.d < 2:
            raise DesignError("the design needs d >= 2 covariates")
        xe = edge_covariates(x_nodes)
        slopes = np.ones(self.d)
        slopes[-1] = self.beta
        eta = xe @ slopes
        eta0 = xe[:, :-1] @ slopes[:-1]
        a = calibrate_intercept(eta, self.rho_star)
        a0 = calibrate_intercept(eta0, self.rho_star)
        return (ProbMatrix.from_upper(self.n, expit(a + eta)),
                ProbMatrix.from_upper(self.n, expit(a0 + eta0)))


def build_her_design(design: HerDesign, rng) -> tuple[ProbMatrix, ProbMatrix]:
    return design.build(design.node_covariates(rng))


# ----------------------------------------------------------------------------
# Exchangeable (contaminated SBM) design

NULL_ALPHA = (0.5, 0.5)
NULL_ETA = (0.4, 0.5)


def null_block_graphon(alpha=NULL_ALPHA, eta=NULL_ETA) -> BlockConstant:
    eta = np.asarray(eta, dtype=float)
    return BlockConstant(alpha, np.outer(eta, eta))


@dataclass(frozen=True)
class EgDesign:
    """Product-form two-block SBM, contaminated by rho beta^2 u^(beta-1) v^(beta-1)."""

    rho_star: float
    beta: float = 1.0
    alpha: tuple = NULL_ALPHA
    eta: tuple = NULL_ETA

    def build(self) -> tuple[Graphon, Graphon]:
        """(true graphon, null graphon), both with edge density rho_star."""
        if not 1 <= self.beta <= 2:
            raise DesignError("beta must lie in [1, 2]")
        base = null_block_graphon(self.alpha, self.eta)
        g = PowerG(self.beta, self.beta)
        shape = DegreeCorrected(base, g)
        density = phi_vector(shape, ids=(1,))[1]
        rho = self.rho_star / density
        try:
            phi = DegreeCorrected(BlockConstant(base.alpha, rho * base.pi), g)
            null = Scaled(base, self.rho_star / phi_vector(base, ids=(1,))[1])
            phi.check_range()
            null.check_range()
        except ModelError as exc:
            raise DesignError(f"design graphon leaves [0, 1]: {exc}") from None
        return phi, null


def build_eg_design(design: EgDesign) -> tuple[Graphon, Graphon]:
    return design.build()


# ----------------------------------------------------------------------------
# Power study


@dataclass
class PowerCell:
    n: int
    rho_star: float
    beta: float
    analytic: float
    empirical: float
    replicates: int

    @property
    def halfwidth(self) -> float:
        return binomial_halfwidth(self.analytic, self.replicates)

    def row(self) -> str:
        return ",".join(fmt(v) for v in (self.n, self.rho_star, self.beta, self.analytic,
                                         self.empirical, self.halfwidth, self.replicates))


def _her_cell(n, rho, beta, x_nodes, reps, alpha, rng_cell, threads):
    p, p0 = HerDesign(n, rho, beta).build(x_nodes)
    null = w_moments_null(p0)
    analytic = asymptotic_power(null, w_moments_her(HerContext(p, p0)), alpha)

    def one(r):
        g = sample_her(p, rng_cell.child(r))
        return TestResult.from_moments(w_statistic(g, p0), null, alpha).reject

    return analytic, _map(one, range(reps), threads)


def _eg_cell(n, rho, beta, reps, alpha, rng_cell, threads):
    phi, phi0 = EgDesign(rho, beta).build()
    vec0 = phi_vector(phi0)
    null = w_phi_moments(EgMomentInputs(n, vec0[1], vec0))
    alt = w_phi_moments(EgMomentInputs(n, vec0[1], phi_vector(phi)))
    analytic = asymptotic_power(null, alt, alpha)

    def one(r):
        g, _ = sample_eg(phi, n, rng_cell.child(r))
        return TestResult.from_moments(w_phi_statistic(g, vec0[1]), null, alpha).reject

    return analytic, _map(one, range(reps), threads)


def run_power_study(design: str, n_grid: Sequence[int], rho_grid: Sequence[float],
                    beta_grid: Sequence[float], replicates: int = 500, alpha: float = 0.05,
                    seed: int = 0, threads: int = 1, min_replicates: int = 100) -> list[PowerCell]:
    """Analytic and empirical power of the degree mean-square test.

    ``design`` is ``"her"`` (covariate design, beta in [0, 2]) or ``"eg"``
    (contaminated SBM, beta in [1, 2]). For the HER design the node
    covariates are drawn once per (n, rho_star) and shared along the beta
    grid, so each curve is a single design path.
    """
    if replicates < max(min_replicates, 1):
        raise ValueError(f"power studies need at least {min_replicates} replicates")
    if design not in ("her", "eg"):
        raise ValueError(f"unknown design {design!r}")
    master = RngSpec(seed)
    cells = []
    for a, n in enumerate(n_grid):
        for b, rho in enumerate(rho_grid):
            x_nodes = None
            if design == "her":
                x_nodes = HerDesign(n, rho).node_covariates(master.child(_S_COVARIATES, a, b))
            for c, beta in enumerate(beta_grid):
                rng_cell = master.child(_S_POWER, a, b, c)
                if design == "her":
                    analytic, rej = _her_cell(n, rho, beta, x_nodes, replicates, alpha, rng_cell, threads)
                else:
                    analytic, rej = _eg_cell(n, rho, beta, replicates, alpha, rng_cell, threads)
                cells.append(PowerCell(n, rho, beta, analytic, float(np.mean(rej)), replicates))
    return cells


def power_csv(cells: Sequence[PowerCell]) -> str:
    return "\n".join([POWER_HEADER] + [c.row() for c in cells]) + "\n"


# ----------------------------------------------------------------------------
# Sparse-regime normality (QQ) study


@dataclass(frozen=True)
class SparseScenario:
    kind: str  # "vanish" or "thin"
    exponent: float
    rho_star: float = 0.1

    def __post_init__(self):
        if self.kind not in ("vanish", "thin"):
            raise ValueError(f"scenario kind must be 'vanish' or 'thin', got {self.kind!r}")
        if self.exponent < 0:
            raise ValueError("sparsity exponent must be nonnegative")


@dataclass
class QQCell:
    n: int
    exponent: float
    kind: str
    z: np.ndarray  # sorted standardized statistics
    ks: float

    def rows(self) -> list[str]:
        R = len(self.z)
        nq = ndtri((np.arange(1, R + 1) - 0.5) / R)
        return [",".join([fmt(self.n), fmt(self.exponent), self.kind, str(k + 1),
                          fmt(self.z[k]), fmt(nq[k]), fmt(self.ks)]) for k in range(R)]


def ks_distance(z) -> float:
    return float(kstest(np.asarray(z, dtype=float), "norm").statistic)


def ks_threshold(replicates: int, level: float = 0.01) -> float:
    """Asymptotic critical value of the one-sample KS distance."""
    c = {0.01: 1.628, 0.05: 1.358, 0.1: 1.224}[level]
    return c / math.sqrt(replicates)


def _her_reference_null(n: int, rho_star: float, rng: RngSpec) -> ProbMatrix:
    """Null matrix of the covariate design at beta = 0 (two covariates)."""
    design = HerDesign(n, rho_star, 0.0)
    return design.build(design.node_covariates(rng))[1]


def qq_cell(model: str, scenario: SparseScenario, n: int, replicates: int, rng: RngSpec,
            threads: int = 1) -> QQCell:
    """Standardized W statistics of null-model graphs in one sparse scenario."""
    if model == "her":
        p_ref = _her_reference_null(n, scenario.rho_star, rng.child(0))
        if scenario.kind == "vanish":
            p0 = sparsify_vanish(p_ref, scenario.exponent, n)
        else:
            p0 = sparsify_thin(p_ref, scenario.exponent, n, rng.child(1))
        null = w_moments_null(p0)
        if not null.sd > 0:
            raise ValueError("degenerate null: zero variance")

        def one(r):
            g = sample_her(p0, rng.child(2, r))
            return (w_statistic(g, p0) - null.mean) / null.sd
    elif model == "eg":
        if scenario.kind != "vanish":
            raise ValueError("only the vanishing scenario applies to the exchangeable model")
        phi0 = sparsify_vanish(EgDesign(scenario.rho_star).build()[1], scenario.exponent, n)
        vec = phi_vector(phi0)
        null = w_phi_moments(EgMomentInputs(n, vec[1], vec))
        if not null.sd > 0:
            raise ValueError("degenerate null: zero variance")

        def one(r):
            g, _ = sample_eg(phi0, n, rng.child(2, r))
            return (w_phi_statistic(g, vec[1]) - null.mean) / null.sd
    else:
        raise ValueError(f"unknown model {model!r}")
    z = np.sort(np.array(_map(one, range(replicates), threads)))
    return QQCell(n, scenario.exponent, scenario.kind, z, ks_distance(z))


def run_qq_study(model: str, kind: str, n_grid: Sequence[int], exponents: Sequence[float],
                 replicates: int = 500, rho_star: float = 0.1, seed: int = 0,
                 threads: int = 1, repeat: int = 0, min_replicates: int = 200) -> list[QQCell]:
    """One QQ cell per (n, exponent). ``repeat`` selects an independent
    replication of the whole study under the same seed."""
    if replicates < max(min_replicates, 2):
        raise ValueError(f"QQ studies need at least {min_replicates} replicates")
    master = RngSpec(seed).child(_S_QQ, repeat)
    out = []
    for a, n in enumerate(n_grid):
        for b, e in enumerate(exponents):
            out.append(qq_cell(model, SparseScenario(kind, e, rho_star), n, replicates,
                               master.child(a, b), threads))
    return out


def qq_csv(cells: Sequence[QQCell]) -> str:
    lines = [QQ_HEADER]
    for c in cells:
        lines.extend(c.rows())
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# Plug-in degree-variance test vs known-p mean-square test under ER


@dataclass
class EquivalenceCell:
    n: int
    p: float
    mean_abs_gap: float
    size_w: float
    size_v: float
    replicates: int

    def row(self) -> str:
        return ",".join(fmt(v) for v in (self.n, self.p, self.mean_abs_gap, self.size_w,
                                         self.size_v, self.replicates))


def run_size_equivalence(n_grid: Sequence[int], p: float = 0.5, replicates: int = 500,
                         alpha: float = 0.05, seed: int = 0, threads: int = 1) -> list[EquivalenceCell]:
    """Mean |z_V - z_W| under ER(p): z_V uses the plug-in density, z_W the
    known p."""
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    master = RngSpec(seed).child(_S_EQUIV)
    out = []
    for a, n in enumerate(n_grid):
        P = ProbMatrix.constant(n, p)
        null_w = w_moments_null(P)

        def one(r, n=n, P=P, null_w=null_w):
            g = sample_her(P, master.child(a, r))
            tw = TestResult.from_moments(w_statistic(g, P), null_w, alpha)
            tv = TestResult.from_moments(v_statistic(g), v_moments_er(n, plug_in_density(g)), alpha)
            return abs(tv.z - tw.z), tw.reject, tv.reject

        res = np.array(_map(one, range(replicates), threads), dtype=float)
        out.append(EquivalenceCell(n, p, float(res[:, 0].mean()), float(res[:, 1].mean()),
                                   float(res[:, 2].mean()), replicates))
    return out


def equivalence_csv(cells: Sequence[EquivalenceCell]) -> str:
    return "\n".join([EQUIV_HEADER] + [c.row() for c in cells]) + "\n"


# ----------------------------------------------------------------------------
# Size calibration


def empirical_size(sampler: Callable[[RngSpec], object], test: Callable[[object], TestResult],
                   replicates: int, seed: int = 0, threads: int = 1) -> float:
    """Fraction of rejections of ``test`` on ``replicates`` draws of ``sampler``."""
    master = RngSpec(seed)
    rej = _map(lambda r: test(sampler(master.child(r))).reject, range(replicates), threads)
    return float(np.mean(rej))


def binomial_interval(alpha: float, replicates: int, level: float = 0.99) -> tuple[float, float]:
    """Normal-approximation interval for a rejection rate with true value alpha."""
    z = float(ndtri(0.5 + level / 2))
    h = z * math.sqrt(alpha * (1 - alpha) / replicates)
    return alpha - h, alpha + h
