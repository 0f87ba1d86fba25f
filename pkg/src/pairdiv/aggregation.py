"""Aggregation functions over pairwise comparisons.

Win percentage, Copeland and AHP are functions of the win-count tally;
Elo consumes the record stream. :func:`get_scorer` wraps any of them as a
``records -> ScoreTable`` callable, the shape expected by the bootstrap
and by the divisiveness estimators.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .pairwise import PairwiseRecords, PairwiseTally, build_tally

Scorer = Callable[[PairwiseRecords], "ScoreTable"]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


@dataclass(frozen=True)
class ScoreTable:
    """Per-proposal scores; undefined proposals carry NaN."""

    proposal_ids: np.ndarray
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_comparisons: np.ndarray
    defined: np.ndarray
    function: str

    @classmethod
    def point(cls, proposal_ids, values, n_comparisons, function: str, defined=None) -> ScoreTable:
        values = np.asarray(values, dtype=float)
        n_comparisons = np.asarray(n_comparisons, dtype=np.int64)
        if defined is None:
            defined = n_comparisons > 0
        values = np.where(defined, values, np.nan)
        return cls(np.asarray(proposal_ids), values, values.copy(), values.copy(),
                   n_comparisons, np.asarray(defined, bool), function)

    def __len__(self):
        return len(self.proposal_ids)

    def as_dict(self) -> dict[int, float]:
        return {int(p): float(v) for p, v in zip(self.proposal_ids, self.mean)}

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame({
            "proposal_id": self.proposal_ids, "mean": self.mean, "ci_low": self.ci_low,
            "ci_high": self.ci_high, "n": self.n_comparisons, "defined": self.defined,
        }).set_index("proposal_id")


@dataclass(frozen=True)
class Ranking:
    """Ordering of proposals, best first.

    Defined proposals take positions 1..n_defined; undefined ones follow in
    id order and are listed in ``undefined``.
    """

    order: tuple[int, ...]
    n_defined: int

    @property
    def proposal_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.order))

    @property
    def undefined(self) -> tuple[int, ...]:
        return self.order[self.n_defined:]

    @property
    def position(self) -> dict[int, int]:
        return {p: k for k, p in enumerate(self.order, start=1)}

    def positions(self) -> np.ndarray:
        """Positions aligned with ``proposal_ids`` (ascending id)."""
        pos = self.position
        return np.array([pos[p] for p in self.proposal_ids])

    def without(self, proposal_id: int) -> Ranking:
        """Drop one proposal and close the gap."""
        if proposal_id not in self.order:
            raise KeyError(proposal_id)
        k = self.order.index(proposal_id)
        return Ranking(self.order[:k] + self.order[k + 1:], self.n_defined - (k < self.n_defined))

    def __len__(self):
        return len(self.order)


def _point_values(table) -> np.ndarray:
    return table.mean if isinstance(table, ScoreTable) else table.value


def rank_from_scores(table) -> Ranking:
    """Order proposals by descending score; ties go to the lower id."""
    ids = np.asarray(table.proposal_ids)
    values = _point_values(table)
    defined = np.asarray(table.defined, bool) & ~np.isnan(values)
    if not defined.any():
        raise ValueError("no proposal has a defined score")
    d_idx = np.flatnonzero(defined)
    order = d_idx[np.lexsort((ids[d_idx], -values[d_idx]))]
    rest = np.flatnonzero(~defined)
    rest = rest[np.argsort(ids[rest], kind="stable")]
    return Ranking(tuple(int(p) for p in ids[np.concatenate([order, rest])]), len(d_idx))


def win_percentage(tally: PairwiseTally) -> ScoreTable:
    """Share of a proposal's comparisons that it won."""
    x = tally.x.astype(float)
    wins = x.sum(axis=1)
    games = wins + x.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = wins / games
    return ScoreTable.point(tally.proposal_ids, w, games, "win")


def copeland(tally: PairwiseTally) -> ScoreTable:
    """Share of head-to-head majority contests won, ties counting half.

    A pair that never met is a 0-0 tie, so every proposal gets a value.
    """
    m = tally.n
    if m < 2:
        raise ValueError("Copeland needs at least two proposals")
    x = tally.x
    y = (x > x.T) + 0.5 * (x == x.T)
    np.fill_diagonal(y, 0.0)
    return ScoreTable.point(tally.proposal_ids, y.sum(axis=1) / (m - 1), tally.comparisons, "copeland",
                            defined=np.ones(m, bool))


def elo_ratings(winners, losers, n: int, *, k_factor: float = 10.0, s0: float = 400.0) -> np.ndarray:
    """One Elo pass over a stream of (winner, loser) index pairs.

    Every proposal starts at ``s0``; both sides of a contest move by the
    same amount, so the rating total stays ``n * s0``.
    """
    ratings = [float(s0)] * n
    for a, b in zip(np.asarray(winners).tolist(), np.asarray(losers).tolist()):
        ra, rb = ratings[a], ratings[b]
        expected = 1.0 / (1.0 + 10.0 ** ((rb - ra) / s0))
        delta = k_factor * (1.0 - expected)
        ratings[a] = ra + delta
        ratings[b] = rb - delta
    return np.array(ratings)


def elo(records: PairwiseRecords, *, k_factor: float = 10.0, s0: float = 400.0,
        shuffles: int = 30, seed: int = 0, shuffle: bool = True) -> ScoreTable:
    """Elo ratings averaged over ``shuffles`` seeded orderings of the stream.

    The stream is first put in timestamp order; each shuffle permutes it
    with its own derived seed. ``shuffle=False`` runs the timestamp order
    once per requested shuffle (all identical).
    """
    if shuffles < 1:
        raise ValueError(f"shuffles must be >= 1, got {shuffles}")
    rec = records.decided()
    base = np.argsort(rec.timestamp, kind="stable")
    win, lose = rec.winner[base], rec.loser[base]
    n = rec.n_proposals
    runs = []
    for child in np.random.SeedSequence(seed).spawn(shuffles):
        if shuffle:
            perm = np.random.default_rng(child).permutation(len(win))
            runs.append(elo_ratings(win[perm], lose[perm], n, k_factor=k_factor, s0=s0))
        else:
            runs.append(elo_ratings(win, lose, n, k_factor=k_factor, s0=s0))
    games = build_tally(rec).comparisons
    return ScoreTable.point(rec.proposal_ids, np.mean(runs, axis=0), games, "elo")


def ahp_matrix(tally: PairwiseTally, epsilon: float = 1e-6, smoothing: bool = True) -> np.ndarray:
    """Reciprocal comparison matrix of win ratios.

    Entry (i, j) is w/(1-w) with w the clamped win rate of i over j, so the
    matrix is reciprocal and an even contest maps to 1. Never-compared
    pairs count as even when ``smoothing`` is on and raise otherwise.
    """
    x = tally.x.astype(float)
    games = x + x.T
    unseen = games == 0
    np.fill_diagonal(unseen, False)
    if unseen.any() and not smoothing:
        i, j = np.argwhere(unseen)[0]
        raise ValueError(
            f"proposals {tally.proposal_ids[i]} and {tally.proposal_ids[j]} were never compared"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(games > 0, x / games, 0.5)
    w = np.clip(w, epsilon, 1.0 - epsilon)
    a = w / w.T
    np.fill_diagonal(a, 1.0)
    return a


def ahp(tally: PairwiseTally, epsilon: float = 1e-6, power_iteration_tol: float = 1e-10,
        max_iters: int = 10_000, smoothing: bool = True) -> ScoreTable:
    """AHP priority vector: principal eigenvector of the column-normalized ratio matrix."""
    a = ahp_matrix(tally, epsilon=epsilon, smoothing=smoothing)
    a_norm = a / a.sum(axis=0, keepdims=True)
    m = tally.n
    # iterate on (A + I) / 2: same principal vector, no oscillation when A has an eigenvalue near -1
    a_norm = 0.5 * (a_norm + np.eye(m))
    v = np.full(m, 1.0 / m)
    residual = np.inf
    for _ in range(max_iters):
        nxt = a_norm @ v
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - v).sum())
        v = nxt
        if residual < power_iteration_tol:
            break
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations", residual)
    games = tally.comparisons
    return ScoreTable.point(tally.proposal_ids, v, games, "ahp", defined=np.ones(m, bool))


_TALLY_FUNCTIONS = {"win": win_percentage, "copeland": copeland, "ahp": ahp}
FUNCTIONS = ("win", "copeland", "elo", "ahp")


def get_scorer(name: str, **params) -> Scorer:
    """Return a ``records -> ScoreTable`` callable for an aggregation function."""
    if name == "elo":
        def score(records: PairwiseRecords) -> ScoreTable:
            return elo(records, **params)
    elif name in _TALLY_FUNCTIONS:
        fn = _TALLY_FUNCTIONS[name]

        def score(records: PairwiseRecords) -> ScoreTable:
            return fn(build_tally(records), **params)
    else:
        raise ValueError(f"unknown aggregation function {name!r}; choose from {FUNCTIONS}")
    score.function = name
    return score


def bootstrap(score_fn: Scorer, records: PairwiseRecords, iterations: int = 30,
              fraction: float = 0.5, seed: int = 0) -> ScoreTable:
    """Subsample-and-score confidence intervals.

    Each iteration scores ``floor(fraction * len(records))`` records drawn
    without replacement. The point estimate is the mean across iterations,
    the interval the 2.5/97.5 empirical percentiles; proposals undefined in
    an iteration are left out of that iteration's statistics.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    size = int(np.floor(fraction * len(records)))
    draws = []
    for child in np.random.SeedSequence(seed).spawn(iterations):
        rng = np.random.default_rng(child)
        idx = np.sort(rng.choice(len(records), size=size, replace=False))
        draws.append(_point_values(score_fn(records.take(idx))))
    draws = np.vstack(draws)
    full = score_fn(records)
    seen = ~np.isnan(draws)
    defined = seen.any(axis=0)
    safe = np.where(seen, draws, 0.0)
    with np.errstate(invalid="ignore"):
        mean = np.where(defined, safe.sum(axis=0) / np.maximum(seen.sum(axis=0), 1), np.nan)
        lo = np.nanpercentile(np.where(defined, draws, 0.0), 2.5, axis=0) if draws.size else mean
        hi = np.nanpercentile(np.where(defined, draws, 0.0), 97.5, axis=0) if draws.size else mean
    lo = np.where(defined, np.minimum(lo, mean), np.nan)
    hi = np.where(defined, np.maximum(hi, mean), np.nan)
    function = getattr(full, "function", getattr(score_fn, "function", "custom"))
    n_comp = getattr(full, "n_comparisons", getattr(full, "n_valid_terms", None))
    if isinstance(full, ScoreTable):
        return ScoreTable(full.proposal_ids, mean, lo, hi, n_comp, defined, function)
    return replace(full, value=mean, ci_low=lo, ci_high=hi, defined=defined)
