"""Correlation and regression helpers."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy import stats as sps


def _pair(x, y, min_len: int):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < min_len:
        raise ValueError(f"need at least {min_len} observations, got {len(x)}")
    return x, y


def _pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = xc @ xc, yc @ yc
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance input")
    r = float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))
    df = len(x) - 2
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * np.sqrt(df / (1.0 - r * r))
        p = float(2 * sps.t.sf(abs(t), df))
    return r, p


def pearson_r2(x, y) -> tuple[float, float]:
    """Squared Pearson correlation and its two-sided p-value."""
    x, y = _pair(x, y, 3)
    r, p = _pearson(x, y)
    return r * r, p


def spearman(x, y) -> tuple[float, float]:
    """Spearman rho (average ranks for ties) with a two-sided t p-value."""
    x, y = _pair(x, y, 3)
    return _pearson(sps.rankdata(x), sps.rankdata(y))


def _positions(r) -> np.ndarray:
    # Ranking objects are compared through their positions
    if hasattr(r, "positions"):
        return np.asarray(r.positions(), dtype=float)
    return np.asarray(r, dtype=float)


def kendall_tau(rank_a, rank_b) -> tuple[float, float]:
    """Kendall tau-b between two rankings or score vectors.

    Rankings (objects with ``positions()``/``proposal_ids``) are aligned by
    proposal id. The p-value uses the large-sample normal approximation
    with tie corrections.
    """
    if hasattr(rank_a, "proposal_ids") and hasattr(rank_b, "proposal_ids"):
        ids_a, ids_b = list(rank_a.proposal_ids), list(rank_b.proposal_ids)
        if sorted(ids_a) != sorted(ids_b):
            raise ValueError("rankings cover different proposals")
        pa, pb = _positions(rank_a), _positions(rank_b)
        lut = {p: i for i, p in enumerate(ids_b)}
        pb = pb[[lut[p] for p in ids_a]]
    else:
        pa, pb = _positions(rank_a), _positions(rank_b)
    x, y = _pair(pa, pb, 2)
    n = len(x)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, 1)
    s = float((dx * dy)[iu].sum())
    n0 = n * (n - 1) / 2
    n1 = float(np.count_nonzero(dx[iu] == 0))
    n2 = float(np.count_nonzero(dy[iu] == 0))
    denom = np.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        return float("nan"), float("nan")
    tau = float(np.clip(s / denom, -1.0, 1.0))

    def tie_sums(v):
        _, t = np.unique(v, return_counts=True)
        t = t.astype(float)
        return (t * (t - 1)).sum(), (t * (t - 1) * (t - 2)).sum(), (t * (t - 1) * (2 * t + 5)).sum()

    x1, x2, x3 = tie_sums(x)
    y1, y2, y3 = tie_sums(y)
    var_s = (n * (n - 1) * (2 * n + 5) - x3 - y3) / 18.0
    if n > 2:
        var_s += x2 * y2 / (9.0 * n * (n - 1) * (n - 2))
    var_s += x1 * y1 / (2.0 * n * (n - 1))
    p = float(2 * sps.norm.sf(abs(s) / np.sqrt(var_s))) if var_s > 0 else float("nan")
    return tau, p


@dataclass(frozen=True)
class RegressionSummary:
    names: tuple[str, ...]
    coef: np.ndarray
    std_err: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r2: float
    adj_r2: float
    resid_std_err: float
    n: int
    df_resid: int
    residuals: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "coefficients": {
                name: {"coef": float(c), "std_err": float(s), "t": float(t), "p": float(p)}
                for name, c, s, t, p in zip(self.names, self.coef, self.std_err, self.t_values, self.p_values)
            },
            "r2": self.r2,
            "adj_r2": self.adj_r2,
            "resid_std_err": self.resid_std_err,
            "n": self.n,
            "df_resid": self.df_resid,
        }


def standardize(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    sd = a.std(axis=0, ddof=1)
    if np.any(sd == 0):
        raise ValueError("cannot standardize a constant column")
    return (a - a.mean(axis=0)) / sd


def ols_standardized(X, y, names: Sequence[str] | None = None, *, intercept: bool = True,
                     rcond: float = 1e-10) -> RegressionSummary:
    """Least squares on z-scored predictors and response.

    The fit uses a column-pivoted QR factorization; a rank-deficient design
    raises ``ValueError`` naming the dependent columns.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if p == 0:
        raise ValueError("design has no predictor columns")
    if len(y) != n:
        raise ValueError(f"design has {n} rows but response has {len(y)}")
    names = tuple(names) if names is not None else tuple(f"x{k}" for k in range(p))
    if len(names) != p:
        raise ValueError("names do not match design columns")
    Z = standardize(X)
    zy = standardize(y)
    if intercept:
        Z = np.column_stack([np.ones(n), Z])
        names = ("const", *names)
    k = Z.shape[1]
    if n <= k:
        raise ValueError(f"need more observations ({n}) than parameters ({k})")
    q, r, piv = linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rcond * diag[0]))
    if rank < k:
        dependent = [names[j] for j in piv[rank:]]
        raise ValueError(f"rank-deficient design; dependent columns: {dependent}")
    beta_piv = linalg.solve_triangular(r, q.T @ zy)
    coef = np.empty(k)
    coef[piv] = beta_piv
    resid = zy - Z @ coef
    df = n - k
    rss = float(resid @ resid)
    sigma2 = rss / df
    rinv = linalg.solve_triangular(r, np.eye(k))
    cov_piv = sigma2 * (rinv @ rinv.T)
    se = np.empty(k)
    se[piv] = np.sqrt(np.maximum(np.diag(cov_piv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.where(coef == 0, 0.0, np.sign(coef) * np.inf))
    pvals = 2 * sps.t.sf(np.abs(t), df)
    tss = float(((zy - zy.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss
    adj = 1.0 - (1.0 - r2) * (n - 1) / df if intercept else 1.0 - (1.0 - r2) * n / df
    return RegressionSummary(
        names=names, coef=coef, std_err=se, t_values=t, p_values=pvals,
        r2=r2, adj_r2=adj, resid_std_err=float(np.sqrt(sigma2)),
        n=n, df_resid=df, residuals=resid,
    )
