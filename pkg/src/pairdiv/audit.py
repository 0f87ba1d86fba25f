"""Axiomatic and spectral diagnostics of a ranking.

Pairwise efficiency and IIA robustness probe how far a ranking is from
the head-to-head contests it summarizes; the convergence curve measures
how much data a ranking needs to settle; the SVD of the win-rate matrix
relates agreement and divisiveness to its leading and trailing factors.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .aggregation import Ranking
from .pairwise import PairwiseRecords, PairwiseTally
from .stats import RegressionSummary, kendall_tau, ols_standardized, pearson_r2

RankBuilder = Callable[[PairwiseRecords], Ranking]


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class PairwiseMatrix:
    """Win rate of the row proposal against the column proposal.

    ``observed`` marks pairs that met at least once; other cells hold the
    imputed value. The diagonal is 0.5.
    """

    w: np.ndarray
    observed: np.ndarray
    proposal_ids: np.ndarray

    @property
    def n(self) -> int:
        return self.w.shape[0]


def pairwise_matrix(tally: PairwiseTally, impute: float = 0.5) -> PairwiseMatrix:
    x = tally.x.astype(float)
    games = x + x.T
    observed = games > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(observed, x / np.where(observed, games, 1.0), impute)
    np.fill_diagonal(w, 0.5)
    np.fill_diagonal(observed, False)
    return PairwiseMatrix(w, observed, np.asarray(tally.proposal_ids))


def _index_positions(ranking: Ranking, proposal_ids) -> np.ndarray:
    pos = ranking.position
    try:
        return np.array([pos[int(p)] for p in proposal_ids])
    except KeyError as exc:
        raise ValueError(f"ranking does not cover proposal {exc.args[0]}") from None


def pairwise_efficiency(matrix: PairwiseMatrix, ranking: Ranking) -> float:
    """Share of observed contests won by the higher-ranked proposal (ties count half)."""
    pos = _index_positions(ranking, matrix.proposal_ids)
    i, j = np.nonzero(matrix.observed & (pos[:, None] < pos[None, :]))
    if not len(i):
        raise ValueError("no observed pairs to evaluate")
    a, b = matrix.w[i, j], matrix.w[j, i]
    return float(np.mean(np.where(a > b, 1.0, np.where(a == b, 0.5, 0.0))))


def iia_distances(original: Ranking, rebuilt: Ranking, removed: int) -> dict[int, int]:
    """Position shift of every remaining proposal after ``removed`` is dropped.

    The original ranking has the removed proposal cut out and its positions
    closed up before the comparison.
    """
    before = original.without(removed).position
    after = rebuilt.without(removed).position if removed in rebuilt.order else rebuilt.position
    if set(before) != set(after):
        raise ValueError("rebuilt ranking covers different proposals")
    return {p: abs(before[p] - after[p]) for p in before}


@dataclass(frozen=True)
class IIAResult:
    proposal_ids: np.ndarray
    distances: np.ndarray  # [removed, remaining]; NaN on the diagonal
    threshold: int
    top: int

    def robustness_at(self, k: int) -> float:
        d = self.distances[~np.isnan(self.distances)]
        return float(1.0 - np.mean(d > k))

    def top_robustness_at(self, k: int) -> float:
        col = int(np.searchsorted(self.proposal_ids, self.top))
        d = np.delete(self.distances[:, col], col)
        return float(np.mean(d <= k))

    @property
    def robustness(self) -> float:
        return self.robustness_at(self.threshold)

    @property
    def top_robustness(self) -> float:
        return self.top_robustness_at(self.threshold)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "robustness": self.robustness,
            "top_proposal": self.top,
            "top_robustness": self.top_robustness,
            "sweep": {str(k): self.robustness_at(k) for k in range(8)},
            "proposal_ids": self.proposal_ids.tolist(),
            "distances": [[None if np.isnan(v) else int(v) for v in row] for row in self.distances],
        }


def iia_robustness(records: PairwiseRecords, rank_builder: RankBuilder, threshold_k: int = 4,
                   ranking: Ranking | None = None) -> IIAResult:
    """Drop each proposal's comparisons in turn and measure how the others move."""
    ids = records.proposal_ids
    m = len(ids)
    if m < 3:
        raise ValueError(f"IIA needs at least 3 proposals, got {m}")
    full = rank_builder(records) if ranking is None else ranking
    dist = np.full((m, m), np.nan)
    for r in range(m):
        keep = (records.low != r) & (records.high != r)
        rebuilt = rank_builder(records.take(keep))
        shift = iia_distances(full, rebuilt, int(ids[r]))
        for c in range(m):
            if c != r:
                dist[r, c] = shift[int(ids[c])]
    return IIAResult(ids, dist, threshold_k, full.order[0])


@dataclass(frozen=True)
class ConvergenceCurve:
    sizes: np.ndarray
    taus: np.ndarray  # [size, iteration]
    threshold: float = 0.75

    @property
    def median(self) -> np.ndarray:
        return np.median(self.taus, axis=1)

    @property
    def q25(self) -> np.ndarray:
        return np.percentile(self.taus, 25, axis=1)

    @property
    def q75(self) -> np.ndarray:
        return np.percentile(self.taus, 75, axis=1)

    @property
    def converged_size(self) -> int | None:
        """Smallest size whose median tau reaches the threshold."""
        hit = np.flatnonzero(self.median >= self.threshold)
        return int(self.sizes[hit[0]]) if len(hit) else None

    def table(self) -> list[dict]:
        return [
            {"size": int(s), "median": float(md), "q25": float(a), "q75": float(b)}
            for s, md, a, b in zip(self.sizes, self.median, self.q25, self.q75)
        ]


def convergence_curve(records: PairwiseRecords, rank_builder: RankBuilder, sizes: Sequence[int],
                      iterations: int = 30, seed: int = 0, threshold: float = 0.75,
                      reference: Ranking | None = None) -> ConvergenceCurve:
    """Kendall tau between subsample rankings and the full-data ranking, per sample size."""
    sizes = np.asarray(sorted(int(s) for s in sizes))
    if len(sizes) and sizes[-1] > len(records):
        raise ValueError(f"sample size {sizes[-1]} exceeds the {len(records)} available records")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    full = rank_builder(records) if reference is None else reference
    taus = np.empty((len(sizes), iterations))
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    for s, (size, child) in enumerate(zip(sizes, children)):
        for it, grand in enumerate(child.spawn(iterations)):
            rng = np.random.default_rng(grand)
            idx = np.sort(rng.choice(len(records), size=size, replace=False))
            tau, _ = kendall_tau(rank_builder(records.take(idx)), full)
            taus[s, it] = tau
    return ConvergenceCurve(sizes, taus, threshold)


@dataclass(frozen=True)
class SpectralReport:
    proposal_ids: np.ndarray
    sigma: np.ndarray
    u: np.ndarray  # columns are left singular vectors
    vt: np.ndarray  # rows are right singular vectors
    variance_share: np.ndarray
    k: int
    factors: tuple[np.ndarray, ...] = field(repr=False)

    def factor(self, t: int) -> np.ndarray:
        """M_t = sigma_t u_t v_t^T for a 1-based factor index."""
        return self.sigma[t - 1] * np.outer(self.u[:, t - 1], self.vt[t - 1])

    def reconstruct(self, upto: int | None = None) -> np.ndarray:
        upto = len(self.sigma) if upto is None else upto
        return (self.u[:, :upto] * self.sigma[:upto]) @ self.vt[:upto]

    def factor_matrix(self, t: int) -> PairwiseMatrix:
        n = len(self.proposal_ids)
        return PairwiseMatrix(self.factor(t), ~np.eye(n, dtype=bool), self.proposal_ids)


def svd_factors(matrix: PairwiseMatrix | np.ndarray, k: int = 3, proposal_ids=None) -> SpectralReport:
    """Full SVD with sign-normalized vectors and the first ``k`` factor matrices."""
    if isinstance(matrix, PairwiseMatrix):
        w, ids = matrix.w, matrix.proposal_ids
    else:
        w = np.asarray(matrix, float)
        ids = np.arange(1, w.shape[0] + 1) if proposal_ids is None else np.asarray(proposal_ids)
    n = w.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    try:
        u, s, vt = np.linalg.svd(w)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"SVD did not converge: {exc}") from exc
    # largest-magnitude entry of every left vector made positive
    pivot = u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])]
    sign = np.where(pivot < 0, -1.0, 1.0)
    u = u * sign
    vt = vt * sign[:, None]
    total = float(np.sum(s ** 2))
    share = s ** 2 / total if total > 0 else np.zeros_like(s)
    residual = float(np.abs((u * s) @ vt - w).max())
    if residual > 1e-6 * max(1.0, float(np.abs(w).max())):
        raise SpectralError(f"SVD reconstruction residual {residual:.3e} too large")
    factors = tuple(s[t] * np.outer(u[:, t], vt[t]) for t in range(k))
    return SpectralReport(ids, s, u, vt, share, k, factors)


def _values(table) -> np.ndarray:
    return table.value if hasattr(table, "value") else table.mean


def _safe_r2(x, y) -> tuple[float, float]:
    ok = ~np.isnan(x) & ~np.isnan(y)
    try:
        return pearson_r2(x[ok], y[ok])
    except ValueError:
        return float("nan"), float("nan")


@dataclass(frozen=True)
class Alignment:
    rows: list[dict]
    regressions: dict[str, RegressionSummary | None]

    def to_dict(self) -> dict:
        return {
            "vectors": self.rows,
            "regressions": {k: (v.to_dict() if v is not None else None) for k, v in self.regressions.items()},
        }


def eigenvector_alignment(report: SpectralReport, score_table, divisiveness_table=None,
                          n_vectors: int = 5, n_regressors: int = 3) -> Alignment:
    """r^2 of each leading left singular vector against the scores and the divisiveness.

    Also fits the standardized regression of each target on the first
    ``n_regressors`` vectors (with intercept).
    """
    ids = np.asarray(report.proposal_ids)
    if not np.array_equal(ids, np.asarray(score_table.proposal_ids)):
        raise ValueError("score table and matrix cover different proposals")
    targets = {"win": _values(score_table)}
    if divisiveness_table is not None:
        if not np.array_equal(ids, np.asarray(divisiveness_table.proposal_ids)):
            raise ValueError("divisiveness table and matrix cover different proposals")
        targets["div"] = _values(divisiveness_table)
    n_vec = min(n_vectors, len(report.sigma))
    rows = []
    for t in range(n_vec):
        row = {"index": t + 1, "sigma": float(report.sigma[t]),
               "variance_share": float(report.variance_share[t])}
        for name, y in targets.items():
            r2, p = _safe_r2(report.u[:, t], y)
            row[f"r2_vs_{name}"] = r2
            row[f"p_vs_{name}"] = p
        rows.append(row)
    regs: dict[str, RegressionSummary | None] = {}
    n_reg = min(n_regressors, len(report.sigma))
    for name, y in targets.items():
        ok = ~np.isnan(y)
        try:
            regs[name] = ols_standardized(report.u[ok, :n_reg], y[ok],
                                          names=[f"eig{t + 1}" for t in range(n_reg)])
        except ValueError:
            regs[name] = None
    return Alignment(rows, regs)


@dataclass(frozen=True)
class AuditReport:
    efficiency: float
    first_factor_efficiency: float | None
    iia: dict[str, IIAResult]
    convergence: dict[str, ConvergenceCurve]
    spectral: SpectralReport | None
    alignment: Alignment | None

    def to_dict(self) -> dict:
        out: dict = {"efficiency": self.efficiency, "first_factor_efficiency": self.first_factor_efficiency}
        out["iia"] = {name: r.to_dict() for name, r in self.iia.items()}
        out["convergence"] = {
            name: {"threshold": c.threshold, "converged_size": c.converged_size, "table": c.table()}
            for name, c in self.convergence.items()
        }
        if self.spectral is not None:
            rows = {r["index"]: r for r in (self.alignment.rows if self.alignment else [])}
            out["spectral"] = [
                {
                    "index": t + 1, "sigma": float(s), "variance_share": float(v),
                    "r2_vs_win": rows.get(t + 1, {}).get("r2_vs_win"),
                    "r2_vs_div": rows.get(t + 1, {}).get("r2_vs_div"),
                }
                for t, (s, v) in enumerate(zip(self.spectral.sigma, self.spectral.variance_share))
            ]
        else:
            out["spectral"] = None
        out["alignment"] = self.alignment.to_dict() if self.alignment is not None else None
        return out
