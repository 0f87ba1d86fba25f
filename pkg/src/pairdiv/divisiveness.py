"""Divisiveness of proposals.

Two families are provided. Split divisiveness compares a proposal's score
between two demographic groups of participants. Pairwise divisiveness
needs no demographics: for every rival j it compares a proposal's score
among the users who preferred it to j with its score among the users who
preferred j, and averages the absolute gaps.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .aggregation import Scorer, ScoreTable, bootstrap, get_scorer
from .corpus import ApprovalRecord, ParticipantProfile, Proposal
from .pairwise import PairwiseRecords, _cell_counts
from .stats import RegressionSummary, ols_standardized, pearson_r2

logger = logging.getLogger(__name__)

SIDE_A, SIDE_B = "A", "B"
NO_VALID_TERMS = "no_valid_terms"


@dataclass(frozen=True)
class SplitSpec:
    """Partition of one profile dimension into groups A and B.

    ``b_labels=None`` puts every label that is neither in ``a_labels`` nor
    in ``excluded`` into group B. Labels found in no set are excluded.
    """

    dimension: str
    a_labels: frozenset[int]
    b_labels: frozenset[int] | None
    excluded: frozenset[int] = frozenset()
    a_name: str = "A"
    b_name: str = "B"

    def __post_init__(self):
        object.__setattr__(self, "a_labels", frozenset(self.a_labels))
        if self.b_labels is not None:
            object.__setattr__(self, "b_labels", frozenset(self.b_labels))
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        if not self.a_labels:
            raise ValueError(f"split {self.dimension!r}: group A has no labels")
        if self.b_labels is not None and self.a_labels & self.b_labels:
            raise ValueError(f"split {self.dimension!r}: groups overlap on {sorted(self.a_labels & self.b_labels)}")

    def side(self, label: int | None) -> str | None:
        if label is None or label in self.excluded:
            return None
        if label in self.a_labels:
            return SIDE_A
        if self.b_labels is None or label in self.b_labels:
            return SIDE_B
        return None

    def swapped(self) -> SplitSpec:
        if self.b_labels is None:
            raise ValueError("cannot swap a split whose group B is 'all other labels'")
        return SplitSpec(self.dimension, self.b_labels, self.a_labels, self.excluded, self.b_name, self.a_name)


def _spec(dim, a, b, excluded, a_name, b_name):
    return SplitSpec(dim, frozenset(a), None if b is None else frozenset(b), frozenset(excluded), a_name, b_name)


_FR_REGIONS = (
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 18, 21, 22, 24, 25, 26, 27, 28, 29, 30,
    31, 32, 33, 34, 35, 37, 38, 39, 41, 42, 44, 45, 46, 47, 49, 50, 51, 53, 54, 55, 56, 57, 58, 59,
    60, 62, 63, 64, 65, 66, 67, 68, 69, 70, 71, 73, 74, 76, 79, 80, 81, 82, 83, 84, 85, 86, 87, 88,
    89, 90, 972, 973,
)

_COMMON = {
    # label 5 is listed both as conservative and as excluded; it stays conservative
    "politics": _spec("politics", (4, 5), (1, 2), (), "conservative", "liberal"),
    "sex": _spec("sex", (1,), (2,), (98, 99), "female", "male"),
    "age": _spec("age", (1, 2, 3, 4), (5, 6, 7), (98, 99), "young", "old"),
    "education": _spec("education", (1, 2, 3), (4, 5, 6, 7), (99,), "below undergraduate", "undergraduate+"),
    "zone": _spec("zone", (1,), (2,), (99,), "urban", "rural"),
}

FRANCE_SPLITS: dict[str, SplitSpec] = {
    **_COMMON,
    "location": _spec("location", (75, 77, 78, 91, 92, 93, 94, 95), _FR_REGIONS, (998, 999), "capital", "region"),
}
BRAZIL_SPLITS: dict[str, SplitSpec] = {
    **_COMMON,
    "location": _spec("location", (3516, 2699, 2392), None, (998, 999), "capital", "region"),
}
DEFAULT_SPLITS = {"fr": FRANCE_SPLITS, "br": BRAZIL_SPLITS}


def parse_split(text: str, defaults: Mapping[str, SplitSpec] = FRANCE_SPLITS) -> SplitSpec:
    """Parse ``dim`` (a default) or ``dim:1,2/4,5`` (explicit A/B labels, ``*`` for the rest)."""
    if ":" not in text:
        try:
            return defaults[text.strip()]
        except KeyError:
            raise ValueError(f"no default split for dimension {text!r}; known: {sorted(defaults)}") from None
    dim, groups = text.split(":", 1)
    try:
        a_txt, b_txt = groups.split("/")
        a = frozenset(int(t) for t in a_txt.split(",") if t.strip())
        b = None if b_txt.strip() == "*" else frozenset(int(t) for t in b_txt.split(",") if t.strip())
    except ValueError:
        raise ValueError(f"bad split {text!r}; expected dim:a1,a2/b1,b2") from None
    return SplitSpec(dim.strip(), a, b)


@dataclass(frozen=True)
class DivisivenessTable:
    """Per-proposal divisiveness with optional bootstrap bounds."""

    proposal_ids: np.ndarray
    value: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_valid_terms: np.ndarray
    defined: np.ndarray
    metric: str
    flags: tuple[str, ...] = field(default=())

    def __len__(self):
        return len(self.proposal_ids)

    def as_dict(self) -> dict[int, float]:
        return {int(p): float(v) for p, v in zip(self.proposal_ids, self.value)}

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame({
            "proposal_id": self.proposal_ids, "value": self.value, "ci_low": self.ci_low,
            "ci_high": self.ci_high, "n_valid_terms": self.n_valid_terms,
            "flags": list(self.flags) if self.flags else [""] * len(self),
        }).set_index("proposal_id")


def _point(ids, value, n_valid, defined, metric, flags=()) -> DivisivenessTable:
    value = np.asarray(value, float)
    return DivisivenessTable(np.asarray(ids), value, value.copy(), value.copy(),
                             np.asarray(n_valid, np.int64), np.asarray(defined, bool), metric, tuple(flags))


def _resolve(score_fn: Scorer | str) -> Scorer:
    return get_scorer(score_fn) if isinstance(score_fn, str) else score_fn


def _fn_name(score_fn) -> str:
    return getattr(score_fn, "function", getattr(score_fn, "__name__", "custom"))


def user_sides(records: PairwiseRecords, profiles: Mapping[str, ParticipantProfile], split: SplitSpec) -> np.ndarray:
    """Side of every user index: 0 for A, 1 for B, -1 when excluded or unprofiled."""
    out = np.full(records.n_users, -1, np.int8)
    for k, uid in enumerate(records.user_ids):
        prof = profiles.get(uid)
        side = split.side(prof.label(split.dimension)) if prof is not None else None
        if side is not None:
            out[k] = 0 if side == SIDE_A else 1
    return out


def split_scores(records: PairwiseRecords, profiles: Mapping[str, ParticipantProfile], split: SplitSpec,
                 score_fn: Scorer | str = "win") -> tuple[ScoreTable, ScoreTable]:
    """Score the records of group A and of group B separately."""
    score_fn = _resolve(score_fn)
    sides = user_sides(records, profiles, split)
    rec_side = sides[records.user] if len(records) else np.zeros(0, np.int8)
    out = []
    for code, name in ((0, split.a_name), (1, split.b_name)):
        mask = rec_side == code
        if not mask.any():
            raise ValueError(f"split {split.dimension!r}: group {name!r} has no records")
        out.append(score_fn(records.take(mask)))
    return out[0], out[1]


def _score_values(table) -> np.ndarray:
    return table.mean if isinstance(table, ScoreTable) else table.value


def split_divisiveness(records: PairwiseRecords, profiles: Mapping[str, ParticipantProfile], split: SplitSpec,
                       score_fn: Scorer | str = "win", *, bootstrap_iters: int = 0,
                       bootstrap_fraction: float = 0.5, seed: int = 0) -> DivisivenessTable:
    """Signed score gap d_i = S_i(A) - S_i(B).

    Proposals undefined on either side get NaN and ``defined=False``.
    ``bootstrap_iters > 0`` adds subsample percentile bounds.
    """
    score_fn = _resolve(score_fn)
    metric = f"d:{split.dimension}:{_fn_name(score_fn)}"

    def compute(recs: PairwiseRecords) -> DivisivenessTable:
        a, b = split_scores(recs, profiles, split, score_fn)
        va, vb = _score_values(a), _score_values(b)
        ok = ~np.isnan(va) & ~np.isnan(vb)
        return _point(recs.proposal_ids, np.where(ok, va - vb, np.nan), ok.astype(int), ok, metric)

    compute.function = metric
    if bootstrap_iters:
        return bootstrap(compute, records, bootstrap_iters, bootstrap_fraction, seed)
    return compute(records)


def aggregate_divisiveness(table_a, table_b) -> float:
    """1 - r^2 between two groups' score vectors over their common proposals."""
    if not np.array_equal(np.asarray(table_a.proposal_ids), np.asarray(table_b.proposal_ids)):
        raise ValueError("score tables cover different proposals")
    va, vb = _score_values(table_a), _score_values(table_b)
    ok = ~np.isnan(va) & ~np.isnan(vb)
    if ok.sum() < 3:
        raise ValueError(f"need at least 3 proposals defined in both groups, got {int(ok.sum())}")
    r2, _ = pearson_r2(va[ok], vb[ok])
    return 1.0 - r2


def _user_cells(records: PairwiseRecords, membership: str):
    """Per (user, pair) cell: which population(s) the user joins.

    Returns user, low, high and two boolean arrays: in the population that
    preferred low, and in the one that preferred high.
    """
    user, low, high, n_low, n_high = _cell_counts(records)
    if membership == "majority":
        return user, low, high, n_low > n_high, n_high > n_low
    if membership == "record":
        return user, low, high, n_low > 0, n_high > 0
    raise ValueError(f"unknown membership {membership!r}; use 'majority' or 'record'")


def _finish(ids, num, n_valid, denominator, metric) -> DivisivenessTable:
    m = len(ids)
    if denominator == "valid":
        den = n_valid
    elif denominator == "all":
        den = np.full(m, max(m - 1, 1))
    else:
        raise ValueError(f"unknown denominator {denominator!r}; use 'valid' or 'all'")
    empty = n_valid == 0
    value = np.where(empty, 0.0, num / np.where(den == 0, 1, den))
    flags = tuple(NO_VALID_TERMS if e else "" for e in empty)
    return _point(ids, value, n_valid, np.ones(m, bool), metric, flags)


def _pairwise_win(records: PairwiseRecords, membership: str, denominator: str) -> DivisivenessTable:
    # win percentage of a proposal within a population only needs, per user,
    # its wins and appearances; populations are sums over their users
    rec = records.decided()
    m, n_u = rec.n_proposals, rec.n_users
    ids = rec.proposal_ids
    wins = np.bincount(rec.user * m + rec.winner, minlength=n_u * m).reshape(n_u, m).astype(float)
    apps = wins + np.bincount(rec.user * m + rec.loser, minlength=n_u * m).reshape(n_u, m)
    user, low, high, in_low, in_high = _user_cells(rec, membership)

    num = np.zeros(m)
    n_valid = np.zeros(m, np.int64)
    pair = low * m + high
    for side, focus in enumerate((low, high)):
        # per pair and population: summed wins/appearances of the focus proposal
        w = wins[user, focus]
        a = apps[user, focus]
        sums = {}
        for tag, member in (("lo", in_low), ("hi", in_high)):
            sums[tag] = (
                np.bincount(pair, weights=w * member, minlength=m * m),
                np.bincount(pair, weights=a * member, minlength=m * m),
                np.bincount(pair, weights=member, minlength=m * m),
            )
        (w_lo, a_lo, c_lo), (w_hi, a_hi, c_hi) = sums["lo"], sums["hi"]
        valid = (c_lo > 0) & (c_hi > 0) & (a_lo > 0) & (a_hi > 0)
        idx = np.flatnonzero(valid)
        gap = np.abs(w_lo[idx] / a_lo[idx] - w_hi[idx] / a_hi[idx])
        target = idx // m if side == 0 else idx % m
        np.add.at(num, target, gap)
        np.add.at(n_valid, target, 1)
    return _finish(ids, num, n_valid, denominator, "D:win")


def _pairwise_generic(records: PairwiseRecords, score_fn: Scorer, membership: str,
                      denominator: str) -> DivisivenessTable:
    rec = records.decided()
    m = rec.n_proposals
    user, low, high, in_low, in_high = _user_cells(rec, membership)
    num = np.zeros(m)
    n_valid = np.zeros(m, np.int64)
    pair = low * m + high
    order = np.argsort(pair, kind="stable")
    bounds = np.flatnonzero(np.diff(pair[order])) + 1
    for grp in np.split(order, bounds):
        if not len(grp):
            continue
        lo, hi = int(low[grp[0]]), int(high[grp[0]])
        pop_lo = np.zeros(rec.n_users, bool)
        pop_hi = np.zeros(rec.n_users, bool)
        pop_lo[user[grp][in_low[grp]]] = True
        pop_hi[user[grp][in_high[grp]]] = True
        if not pop_lo.any() or not pop_hi.any():
            continue
        s_lo = _score_values(score_fn(rec.take(pop_lo[rec.user])))
        s_hi = _score_values(score_fn(rec.take(pop_hi[rec.user])))
        for k in (lo, hi):
            if np.isnan(s_lo[k]) or np.isnan(s_hi[k]):
                continue
            num[k] += abs(s_lo[k] - s_hi[k])
            n_valid[k] += 1
    return _finish(rec.proposal_ids, num, n_valid, denominator, f"D:{_fn_name(score_fn)}")


def pairwise_divisiveness(records: PairwiseRecords, score_fn: Scorer | str = "win", *,
                          membership: Literal["majority", "record"] = "majority",
                          denominator: Literal["valid", "all"] = "valid",
                          bootstrap_iters: int = 0, bootstrap_fraction: float = 0.5,
                          seed: int = 0) -> DivisivenessTable:
    """Mean absolute score gap of each proposal between its choosers and rejecters.

    For the pair (i, j) the two populations are the users whose choices on
    that pair favour i and those favouring j (``majority``: by each user's
    majority, tied users left out; ``record``: any user who ever chose that
    side). S_i is scored on each population's full record set. Pairs where
    a population is empty or S_i is undefined are skipped; ``denominator``
    picks between dividing by the number of valid pairs or by N-1.
    Proposals with no valid pair get 0 and the ``no_valid_terms`` flag.

    Win percentage takes a vectorized path; any other scorer is evaluated
    twice per observed pair.
    """
    name = score_fn if isinstance(score_fn, str) else _fn_name(score_fn)
    fn = _resolve(score_fn)

    def compute(recs: PairwiseRecords) -> DivisivenessTable:
        if name == "win":
            return _pairwise_win(recs, membership, denominator)
        return _pairwise_generic(recs, fn, membership, denominator)

    compute.function = f"D:{name}"
    if bootstrap_iters:
        return bootstrap(compute, records, bootstrap_iters, bootstrap_fraction, seed)
    return compute(records)


@dataclass(frozen=True)
class ResponsivenessMatrix:
    """Approval rates of participant groups (rows) on proposal groups (columns)."""

    rates: np.ndarray  # [participant side, proposal side], sides ordered (left, right)
    approvals: np.ndarray
    votes: np.ndarray
    proposal_sides: Mapping[int, str]
    scenario: str
    sides: tuple[str, str] = ("left", "right")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "rows": "participants", "columns": "proposals", "sides": list(self.sides),
            "rates": self.rates.tolist(), "approvals": self.approvals.tolist(),
            "votes": self.votes.tolist(),
            "proposal_sides": {str(k): v for k, v in sorted(self.proposal_sides.items())},
        }


SCENARIOS = ("exclude-centrist", "centrist-right", "centrist-left")


def label_proposals(catalog: Iterable[Proposal], candidate_orientations: Mapping[str, str],
                    scenario: str = "exclude-centrist") -> dict[int, str]:
    """Left/right label of each proposal from the orientation of the candidates that carried it.

    A proposal is left when at least half of the left candidates carried it
    and fewer than half of the right ones did, and symmetrically for right.
    Proposals meeting neither rule are left out.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    catalog = list(catalog)
    fold = {"left": "left", "right": "right"}
    if scenario == "centrist-right":
        fold["centrist"] = "right"
    elif scenario == "centrist-left":
        fold["centrist"] = "left"
    side_of = {}
    for cand, orient in candidate_orientations.items():
        if orient not in ("left", "right", "centrist"):
            raise ValueError(f"candidate {cand!r} has unknown orientation {orient!r}")
        if orient in fold:
            side_of[cand] = fold[orient]
    for p in catalog:
        unknown = set(p.candidate_ids) - set(candidate_orientations)
        if unknown:
            raise ValueError(f"proposal {p.id}: candidates without orientation {sorted(unknown)}")
    groups = {s: {c for c, v in side_of.items() if v == s} for s in ("left", "right")}
    labels = {}
    for p in catalog:
        share = {}
        for s, members in groups.items():
            share[s] = len(members & set(p.candidate_ids)) / len(members) if members else 0.0
        if share["left"] >= 0.5 and share["right"] < 0.5:
            labels[p.id] = "left"
        elif share["right"] >= 0.5 and share["left"] < 0.5:
            labels[p.id] = "right"
    return labels


def responsiveness_matrix(approvals: Iterable[ApprovalRecord], profiles: Mapping[str, ParticipantProfile],
                          candidate_orientations: Mapping[str, str], scenario: str = "exclude-centrist", *,
                          catalog: Iterable[Proposal], participant_split: SplitSpec | None = None
                          ) -> ResponsivenessMatrix:
    """Approval rate (approve over approve + disapprove) per participant and proposal side.

    Participants are placed by ``participant_split``, whose group A is read
    as right and group B as left (the default politics split does this).
    """
    split = participant_split or FRANCE_SPLITS["politics"]
    labels = label_proposals(catalog, candidate_orientations, scenario)
    col = {"left": 0, "right": 1}
    yes = np.zeros((2, 2), np.int64)
    votes = np.zeros((2, 2), np.int64)
    for rec in approvals:
        if rec.agree == 0 or rec.proposal_id not in labels:
            continue
        prof = profiles.get(rec.user_id)
        side = split.side(prof.label(split.dimension)) if prof else None
        if side is None:
            continue
        row = 1 if side == SIDE_A else 0
        c = col[labels[rec.proposal_id]]
        votes[row, c] += 1
        yes[row, c] += rec.agree == 1
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(votes > 0, yes / np.maximum(votes, 1), np.nan)
    return ResponsivenessMatrix(rates, yes, votes, labels, scenario)


def multidimensional_report(records: PairwiseRecords, profiles: Mapping[str, ParticipantProfile],
                            splits: Sequence[SplitSpec], score_fn: Scorer | str = "win", *,
                            membership: str = "majority", denominator: str = "valid"):
    """Per-proposal table of |d| for every split plus the pairwise D (and W).

    Columns: ``|d|:<dimension>`` for each split, ``D``, and ``W`` (the
    score itself, used as a regressor).
    """
    import pandas as pd

    if not splits:
        raise ValueError("need at least one split")
    fn = _resolve(score_fn)
    cols = {}
    for split in splits:
        cols[f"|d|:{split.dimension}"] = np.abs(split_divisiveness(records, profiles, split, fn).value)
    cols["D"] = pairwise_divisiveness(records, score_fn if isinstance(score_fn, str) else fn,
                                      membership=membership, denominator=denominator).value
    cols["W"] = _score_values(fn(records))
    frame = pd.DataFrame(cols, index=pd.Index(records.proposal_ids, name="proposal_id"))
    return frame


def divisiveness_regression(report, *, include_score: bool = True) -> RegressionSummary:
    """Standardized OLS of D on the split |d| columns (and the score W)."""
    predictors = [c for c in report.columns if c.startswith("|d|:")]
    if include_score:
        predictors = ["W", *predictors]
    data = report[["D", *predictors]].dropna()
    return ols_standardized(data[predictors].to_numpy(), data["D"].to_numpy(), names=predictors)
