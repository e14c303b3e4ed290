"""Small statistics library: rank tests, permutation correlations and regressions.

Everything here is deterministic given explicit inputs (and an rng handle for
permutation tests), which the analysis layer relies on for reproducible reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_RANKSUM_MAX_N = 20


def norm_sf(x: float) -> float:
    """Survival function of the standard normal."""
    return math.erfc(x / math.sqrt(2.0)) / 2.0


def rankdata(a) -> np.ndarray:
    """Fractional ranks (1-based); ties get the mean of their rank block."""
    a = np.asarray(a, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a), dtype=np.float64)
    sa = a[order]
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sa[j + 1] == sa[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _tie_correction(ranks: np.ndarray) -> float:
    n = len(ranks)
    if n < 2:
        return 1.0
    _, counts = np.unique(ranks, return_counts=True)
    return 1.0 - float(np.sum(counts ** 3 - counts)) / (n ** 3 - n)


def _exact_u_tail(n: int, m: int, u_obs: float) -> float:
    """P(U >= u_obs) by dynamic programming over rank subsets (no ties)."""
    total_ranks = n + m
    smax = n * total_ranks
    # ways[k, s]: subsets of size k from ranks seen so far with rank sum s
    ways = np.zeros((n + 1, smax + 1), dtype=np.float64)
    ways[0, 0] = 1.0
    for r in range(1, total_ranks + 1):
        ways[1:, r:] += ways[:-1, :-r or None]
    rank_sums = np.arange(smax + 1)
    u_vals = rank_sums - n * (n + 1) // 2
    tail = ways[n, u_vals >= u_obs - 1e-9].sum()
    return float(tail / ways[n].sum())


@dataclass(frozen=True, slots=True)
class RankSumResult:
    u: float
    p_value: float
    method: str  # "exact" or "normal"


def mann_whitney(x, y, alternative: str = "greater") -> RankSumResult:
    """Mann-Whitney rank-sum test of x against y.

    Exact enumeration when both samples have <= 20 observations and no ties;
    otherwise the normal approximation with tie correction and continuity
    correction. `alternative` "greater" tests whether x is stochastically
    larger than y; "two-sided" doubles the smaller tail.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    ranks = rankdata(pooled)
    u_x = float(ranks[:n].sum()) - n * (n + 1) / 2.0
    has_ties = len(np.unique(pooled)) != n + m

    if n <= EXACT_RANKSUM_MAX_N and m <= EXACT_RANKSUM_MAX_N and not has_ties:
        p_greater = _exact_u_tail(n, m, u_x)
        p_less = _exact_u_tail(m, n, n * m - u_x)
        method = "exact"
    else:
        tie = _tie_correction(ranks)
        sd = math.sqrt(tie * n * m * (n + m + 1) / 12.0)
        if sd == 0:
            p_greater = p_less = 0.5
        else:
            p_greater = norm_sf((u_x - n * m / 2.0 - 0.5) / sd)
            p_less = norm_sf((n * m / 2.0 - u_x - 0.5) / sd)
        method = "normal"

    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    elif alternative == "two-sided":
        p = min(1.0, 2.0 * min(p_greater, p_less))
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return RankSumResult(u_x, p, method)


@dataclass(frozen=True, slots=True)
class SpearmanResult:
    rho: float | None
    p_value: float | None
    n_perm: int
    note: str | None = None


def spearman_permutation(x, y, n_perm: int = 1000,
                         rng: np.random.Generator | None = None) -> SpearmanResult:
    """Spearman rank correlation with a two-sided permutation p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 3:
        return SpearmanResult(None, None, 0, "too few observations")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sx = float(np.sqrt(rx @ rx))
    sy = float(np.sqrt(ry @ ry))
    if sx == 0 or sy == 0:
        return SpearmanResult(None, None, 0, "constant series")
    rho = float(rx @ ry) / (sx * sy)
    rng = rng if rng is not None else np.random.default_rng(0)
    hits = 0
    threshold = abs(rho) - 1e-12
    shuffled = ry.copy()
    for _ in range(n_perm):
        rng.shuffle(shuffled)
        if abs(float(rx @ shuffled)) / (sx * sy) >= threshold:
            hits += 1
    p = (1.0 + hits) / (n_perm + 1.0)
    return SpearmanResult(rho, p, n_perm)


# -- regressions -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RegressionFit:
    coef: np.ndarray  # intercept first
    se: np.ndarray
    z: np.ndarray
    p_values: np.ndarray
    converged: bool
    separated: bool
    n_iter: int
    loglik: float | None = None


def _add_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(len(X)), X])


def logistic_loglik(X, y, beta) -> float:
    eta = X @ beta
    # log(1 + exp(eta)) computed stably
    return float(y @ eta - np.sum(np.logaddexp(0.0, eta)))


def logistic_grad(X, y, beta) -> np.ndarray:
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    return X.T @ (y - p)


def logistic_fit(X, y, max_iter: int = 100, tol: float = 1e-8,
                 add_intercept: bool = True) -> RegressionFit:
    """Logistic regression by Newton iteration with Wald p-values.

    Perfect separation is reported explicitly via the `separated` flag
    (diverging linear predictor), never as a silent convergence.
    """
    Xd = _add_intercept(X) if add_intercept else np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = Xd.shape[1]
    beta = np.zeros(k)
    converged = False
    separated = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Xd @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        grad = Xd.T @ (y - p)
        hess = (Xd * w[:, None]).T @ Xd
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(hess) @ grad
        beta = beta + step
        if np.max(np.abs(Xd @ beta)) > 30.0:
            separated = True
            break
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    eta = Xd @ beta
    p = 1.0 / (1.0 + np.exp(-eta))
    w = np.maximum(p * (1.0 - p), 1e-12)
    hess = (Xd * w[:, None]).T @ Xd
    cov = np.linalg.pinv(hess)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pv = np.array([2.0 * norm_sf(abs(v)) if np.isfinite(v) else 0.0 for v in z])
    return RegressionFit(beta, se, z, pv, converged, separated, it,
                         loglik=logistic_loglik(Xd, y, beta))


def ols_loss(X, y, beta) -> float:
    r = y - X @ beta
    return float(0.5 * (r @ r))


def ols_grad(X, y, beta) -> np.ndarray:
    return -(X.T @ (y - X @ beta))


def ols_fit(X, y, max_iter: int = 100, tol: float = 1e-8,
            add_intercept: bool = True) -> RegressionFit:
    """Least squares by Newton iteration (exact in one step) with Wald p-values."""
    Xd = _add_intercept(X) if add_intercept else np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = Xd.shape
    beta = np.zeros(k)
    xtx = Xd.T @ Xd
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = Xd.T @ (y - Xd @ beta)
        try:
            step = np.linalg.solve(xtx, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(xtx) @ grad
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    resid = y - Xd @ beta
    dof = max(n - k, 1)
    sigma2 = float(resid @ resid) / dof
    cov = np.linalg.pinv(xtx) * sigma2
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pv = np.array([2.0 * norm_sf(abs(v)) if np.isfinite(v) else 0.0 for v in z])
    return RegressionFit(beta, se, z, pv, converged, False, it)


def median_low(values) -> float:
    """Deterministic median: the lower of the two middles for even counts."""
    v = np.sort(np.asarray(values))
    if len(v) == 0:
        raise ValueError("median of empty collection")
    return float(v[(len(v) - 1) // 2])
