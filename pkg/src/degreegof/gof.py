"""Degree-based goodness-of-fit tests, their asymptotic power and the
logistic-regression null model."""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr, ndtri

from .eg_moments import EgMomentInputs, w_phi_moments, w_phi_statistic
from .graph import Graph, pair_index
from .her_moments import HerContext, Moments, v_moments_er, v_moments_her, w_moments_her, \
    w_moments_null, w_statistic
from .models import Graphon, ProbMatrix
from .patterns import PhiVector, phi_vector


class DegenerateNullError(ValueError):
    """The null distribution of the statistic has zero variance."""


class CovariateError(ValueError):
    pass


def normal_quantile(level: float) -> float:
    """t with P(Z <= t) = level."""
    return float(ndtri(level))


def _check_alpha(alpha: float):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    null_mean: float
    null_sd: float
    z: float
    p_value: float
    alpha: float
    reject: bool

    __test__ = False  # keep pytest from collecting this class

    @classmethod
    def from_moments(cls, statistic: float, null: Moments, alpha: float) -> "TestResult":
        _check_alpha(alpha)
        sd = null.sd
        if not sd > 0:
            raise DegenerateNullError("null variance is zero; the test is undefined")
        z = (statistic - null.mean) / sd
        t = normal_quantile(1 - alpha)
        return cls(statistic=statistic, null_mean=null.mean, null_sd=sd, z=z,
                   p_value=float(ndtr(-z)), alpha=alpha,
                   reject=bool(statistic > null.mean + t * sd))

    def csv_row(self) -> str:
        return (f"{self.statistic:.10g},{self.null_mean:.10g},{self.null_sd:.10g},"
                f"{self.z:.10g},{self.p_value:.10g},{self.alpha:.10g},{int(self.reject)}")

    CSV_HEADER = "statistic,null_mean,null_sd,z,p_value,alpha,reject"


def test_her(g: Graph, p0: ProbMatrix, alpha: float = 0.05) -> TestResult:
    """Degree mean-square test of HER(p0)."""
    stat = w_statistic(g, p0)
    return TestResult.from_moments(stat, w_moments_null(p0), alpha)


def plug_in_density(g: Graph) -> float:
    """Observed edge density 2 m / (n (n - 1))."""
    return 2.0 * g.m / (g.n * (g.n - 1))


def test_dv_er(g: Graph, alpha: float = 0.05) -> TestResult:
    """Degree-variance test of ER with the density estimated from g."""
    from .her_moments import v_statistic
    if g.n < 3:
        raise ValueError("the degree-variance test needs n >= 3")
    p_hat = plug_in_density(g)
    if p_hat in (0.0, 1.0):
        raise DegenerateNullError(f"observed density {p_hat} gives a degenerate null")
    return TestResult.from_moments(v_statistic(g), v_moments_er(g.n, p_hat), alpha)


class _PhiCache:
    """Pattern probabilities of null graphons, keyed by their serialised form."""

    def __init__(self, maxsize: int = 64):
        self._lock = threading.Lock()
        self._store: dict = {}
        self.maxsize = maxsize

    def get(self, phi0: Graphon, method=None, budget=None, rng=None) -> PhiVector:
        key = (phi0.to_json(), method, budget, repr(rng))
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        vec = phi_vector(phi0, method=method, budget=budget, rng=rng)
        with self._lock:
            if len(self._store) >= self.maxsize:
                self._store.pop(next(iter(self._store)))
            self._store[key] = vec
        return vec


PHI_CACHE = _PhiCache()


def _eg_null(phi0: Graphon, n: int, method=None, budget=None) -> tuple[float, Moments]:
    vec = PHI_CACHE.get(phi0, method, budget)
    return vec[1], w_phi_moments(EgMomentInputs(n, vec[1], vec))


def test_eg(g: Graph, phi0: Graphon, alpha: float = 0.05, method: str | None = None,
            budget: int | None = None) -> TestResult:
    """Degree mean-square test of the exchangeable model with graphon phi0."""
    phi1_0, null = _eg_null(phi0, g.n, method, budget)
    return TestResult.from_moments(w_phi_statistic(g, phi1_0), null, alpha)


def asymptotic_power(null: Moments, alt: Moments, alpha: float) -> float:
    """1 - Phi((E0 + t_alpha S0 - E1) / S1)."""
    _check_alpha(alpha)
    if not alt.sd > 0:
        raise DegenerateNullError("alternative variance is zero; power is undefined")
    t = normal_quantile(1 - alpha)
    return float(ndtr(-(null.mean + t * null.sd - alt.mean) / alt.sd))


def power_her(p0: ProbMatrix, p: ProbMatrix, alpha: float = 0.05) -> float:
    return asymptotic_power(w_moments_null(p0), w_moments_her(HerContext(p, p0)), alpha)


def power_dv(p: ProbMatrix, alpha: float = 0.05) -> float:
    """Power of the plug-in degree-variance test when the data follow HER(p)."""
    return asymptotic_power(v_moments_er(p.n, p.mean()), v_moments_her(p), alpha)


def power_eg(phi0: Graphon, phi: Graphon, n: int, alpha: float = 0.05,
             method: str | None = None, budget: int | None = None) -> float:
    phi1_0, null = _eg_null(phi0, n, method, budget)
    vec = phi_vector(phi, method=method, budget=budget)
    return asymptotic_power(null, w_phi_moments(EgMomentInputs(n, phi1_0, vec)), alpha)


# ----------------------------------------------------------------------------
# Logistic null model


@dataclass(frozen=True)
class LogisticNull:
    coefficients: np.ndarray  # intercept first
    standard_errors: np.ndarray
    p0: ProbMatrix
    iterations: int
    score_norm: float
    converged: bool
    ridge: bool

    def csv_rows(self) -> list[str]:
        names = ["intercept"] + [f"x{k}" for k in range(1, len(self.coefficients))]
        return [f"{nm},{b:.10g},{s:.10g}"
                for nm, b, s in zip(names, self.coefficients, self.standard_errors)]


def pair_design(x: np.ndarray) -> np.ndarray:
    """Prepend an intercept column to a (pairs x d) covariate table."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), x])


def edge_indicator(g: Graph) -> np.ndarray:
    """0/1 vector over the n(n-1)/2 pairs in lexicographic order."""
    y = np.zeros(g.n * (g.n - 1) // 2)
    y[pair_index(g.n, g.edges[:, 0], g.edges[:, 1])] = 1.0
    return y


def fit_logistic_null(g: Graph, x, max_iter: int = 50, tol: float = 1e-8,
                      diverge: float = 1e3) -> LogisticNull:
    """Maximum-likelihood logistic regression of the edge indicators on the
    pair covariates ``x`` (rows in lexicographic pair order), by IRLS.

    ``x`` may have zero columns, giving the intercept-only model.
    """
    n = g.n
    N = n * (n - 1) // 2
    x = np.empty((N, 0)) if x is None else np.asarray(x, dtype=float)
    x = x.reshape(N, -1) if x.size else np.empty((N, 0))
    X = pair_design(x)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise CovariateError("design matrix (with intercept) is rank deficient")
    y = edge_indicator(g)
    beta = np.zeros(X.shape[1])
    ybar = y.mean()
    if 0 < ybar < 1:
        beta[0] = math.log(ybar / (1 - ybar))
    ridge = False
    converged = False
    score_norm = math.inf
    it = 0
    while True:
        p = expit(X @ beta)
        score = X.T @ (y - p)
        score_norm = float(np.max(np.abs(score)))
        w = p * (1 - p)
        info = X.T @ (X * w[:, None])
        try:
            if np.linalg.cond(info) > 1e12:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            ridge = True
            step = np.linalg.solve(info + 1e-8 * np.eye(len(beta)), score)
        # under separation the score vanishes while the Newton steps do not
        # shrink, so a small score alone is not convergence
        if score_norm < tol and np.linalg.norm(step) < 1e-6 * (1 + np.linalg.norm(beta)):
            # fitted probabilities pinned at 0 or 1 mean the likelihood is
            # still increasing towards infinity
            eps = 10 * np.finfo(float).eps
            converged = bool(np.all((p > eps) & (p < 1 - eps)))
            break
        if it == max_iter or np.linalg.norm(beta) > diverge:
            break
        beta = beta + step
        it += 1
    p = expit(X @ beta)
    w = p * (1 - p)
    info = X.T @ (X * w[:, None])
    try:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    except np.linalg.LinAlgError:
        se = np.full(len(beta), np.nan)
    if np.linalg.norm(beta) > diverge:
        converged = False
    return LogisticNull(coefficients=beta, standard_errors=se, p0=ProbMatrix.from_upper(n, p),
                        iterations=it, score_norm=score_norm, converged=converged, ridge=ridge)


def read_covariates(text: str, n: int) -> np.ndarray:
    """Parse an ``i,j,x1,...,xd`` CSV into a (n(n-1)/2, d) table in
    lexicographic pair order. Every pair must appear exactly once."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CovariateError("empty covariate file") from None
    header = [h.strip() for h in header]
    if header[:2] != ["i", "j"]:
        raise CovariateError("covariate header must start with i,j")
    d = len(header) - 2
    N = n * (n - 1) // 2
    out = np.full((N, d), np.nan)
    seen = np.zeros(N, dtype=bool)
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != d + 2:
            raise CovariateError(f"line {lineno}: expected {d + 2} fields, got {len(row)}")
        try:
            i, j = int(row[0]), int(row[1])
            vals = [float(v) for v in row[2:]]
        except ValueError:
            raise CovariateError(f"line {lineno}: malformed number") from None
        if not 0 <= i < j < n:
            raise CovariateError(f"line {lineno}: need 0 <= i < j < {n}, got ({i}, {j})")
        k = int(pair_index(n, i, j))
        if seen[k]:
            raise CovariateError(f"line {lineno}: duplicate pair ({i}, {j})")
        seen[k] = True
        out[k] = vals
    if not seen.all():
        raise CovariateError(f"{int((~seen).sum())} pairs have no covariate row")
    return out


def write_covariates(x: np.ndarray, n: int) -> str:
    x = np.asarray(x, dtype=float).reshape(n * (n - 1) // 2, -1)
    i, j = np.triu_indices(n, 1)
    lines = ["i,j," + ",".join(f"x{k}" for k in range(1, x.shape[1] + 1))]
    for a, b, row in zip(i.tolist(), j.tolist(), x):
        lines.append(f"{a},{b}," + ",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


for _f in (test_her, test_dv_er, test_eg):
    _f.__test__ = False  # library functions, not pytest tests
del _f
