"""Pairwise-comparison records built from approval and rank ballots.

Records are stored column-wise in :class:`PairwiseRecords` so that a
million comparisons stay cheap to subsample and tally. Proposals are
addressed by their position in the sorted ``proposal_ids`` array; the
low/high sides of a pair follow catalog id order, so ``card_id`` is
always ``"<low id>-<high id>"``.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from itertools import combinations
from pathlib import Path
from typing import Literal

import numpy as np

from .corpus import EPOCH, ApprovalRecord, RankRecord, format_timestamp, parse_timestamp

LOW, HIGH, NONE = 0, 1, -1
APPROVAL, RANK = 0, 1
SOURCE_NAMES = {APPROVAL: "agree", RANK: "rank"}
_SOURCE_CODES = {"agree": APPROVAL, "approval": APPROVAL, "rank": RANK}
_SELECTED_NAMES = {LOW: "low", HIGH: "high", NONE: "none"}

PAIR_COLUMNS = (
    "user_id", "option_a", "option_b", "option_a_sorted", "option_b_sorted",
    "card_id", "selected", "created_at", "score", "universe", "source",
)


@dataclass(frozen=True, order=True)
class PairId:
    low: int
    high: int

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"pair requires low < high, got {self.low}-{self.high}")

    @classmethod
    def of(cls, a: int, b: int) -> PairId:
        return cls(min(a, b), max(a, b))

    @classmethod
    def parse(cls, text: str) -> PairId:
        lo, hi = text.split("-")
        return cls(int(lo), int(hi))

    def __str__(self):
        return f"{self.low}-{self.high}"


@dataclass(frozen=True)
class PairwiseRecord:
    """One comparison made by one user, in catalog-id terms."""

    user_id: str
    pair: PairId
    selected: Literal["low", "high", "none"]
    source: Literal["approval", "rank"] = "rank"
    universe: int = 0
    score: float | None = None
    timestamp: datetime = EPOCH

    @property
    def winner(self) -> int | None:
        return {"low": self.pair.low, "high": self.pair.high}.get(self.selected)

    @property
    def loser(self) -> int | None:
        return {"low": self.pair.high, "high": self.pair.low}.get(self.selected)


def _to_us(ts: datetime) -> int:
    delta = ts.astimezone(timezone.utc) - EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1_000_000 + delta.microseconds


def _from_us(us: int) -> datetime:
    return EPOCH + timedelta(microseconds=int(us))


class PairwiseRecords:
    """Column store of pairwise comparisons.

    Attributes are parallel numpy arrays: ``user`` (index into ``user_ids``),
    ``low``/``high`` (indices into ``proposal_ids``, low < high),
    ``selected`` (0 low, 1 high, -1 no preference), ``source``, ``universe``,
    ``score`` (NaN when absent), ``timestamp`` (microseconds since epoch) and
    ``panel`` (originating rank panel, -1 for approvals).
    """

    __slots__ = ("user", "low", "high", "selected", "source", "universe",
                 "score", "timestamp", "panel", "user_ids", "proposal_ids")

    def __init__(self, *, user, low, high, selected, user_ids: Sequence[str],
                 proposal_ids, source=None, universe=None, score=None,
                 timestamp=None, panel=None):
        n = len(user)
        self.user = np.asarray(user, dtype=np.int64)
        self.low = np.asarray(low, dtype=np.int64)
        self.high = np.asarray(high, dtype=np.int64)
        self.selected = np.asarray(selected, dtype=np.int8)
        self.source = np.full(n, RANK, np.int8) if source is None else np.asarray(source, np.int8)
        self.universe = np.zeros(n, np.int64) if universe is None else np.asarray(universe, np.int64)
        self.score = np.full(n, np.nan) if score is None else np.asarray(score, np.float64)
        self.timestamp = np.zeros(n, np.int64) if timestamp is None else np.asarray(timestamp, np.int64)
        self.panel = np.full(n, -1, np.int64) if panel is None else np.asarray(panel, np.int64)
        self.user_ids = tuple(user_ids)
        self.proposal_ids = np.asarray(proposal_ids, dtype=np.int64)
        for name in ("low", "high", "selected", "source", "universe", "score", "timestamp", "panel"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has length {len(getattr(self, name))}, expected {n}")
        if np.any(np.diff(self.proposal_ids) <= 0):
            raise ValueError("proposal_ids must be strictly increasing")
        if n and np.any(self.low >= self.high):
            raise ValueError("every record needs low < high")

    @property
    def n_proposals(self) -> int:
        return len(self.proposal_ids)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    def __len__(self) -> int:
        return len(self.user)

    @property
    def winner(self) -> np.ndarray:
        """Index of the chosen proposal (-1 for no-preference records)."""
        return np.where(self.selected == LOW, self.low, np.where(self.selected == HIGH, self.high, -1))

    @property
    def loser(self) -> np.ndarray:
        return np.where(self.selected == LOW, self.high, np.where(self.selected == HIGH, self.low, -1))

    def take(self, idx) -> PairwiseRecords:
        """Subset by integer index array or boolean mask; user/proposal indexes are kept."""
        idx = np.asarray(idx)
        return PairwiseRecords(
            user=self.user[idx], low=self.low[idx], high=self.high[idx],
            selected=self.selected[idx], source=self.source[idx],
            universe=self.universe[idx], score=self.score[idx],
            timestamp=self.timestamp[idx], panel=self.panel[idx],
            user_ids=self.user_ids, proposal_ids=self.proposal_ids,
        )

    def decided(self) -> PairwiseRecords:
        """Drop no-preference records."""
        return self.take(self.selected != NONE)

    def index_of(self, proposal_id: int) -> int:
        pos = int(np.searchsorted(self.proposal_ids, proposal_id))
        if pos >= len(self.proposal_ids) or self.proposal_ids[pos] != proposal_id:
            raise KeyError(f"unknown proposal id {proposal_id}")
        return pos

    def __iter__(self) -> Iterator[PairwiseRecord]:
        pids = self.proposal_ids
        for k in range(len(self)):
            score = float(self.score[k])
            yield PairwiseRecord(
                user_id=self.user_ids[self.user[k]],
                pair=PairId(int(pids[self.low[k]]), int(pids[self.high[k]])),
                selected=_SELECTED_NAMES[int(self.selected[k])],
                source="approval" if self.source[k] == APPROVAL else "rank",
                universe=int(self.universe[k]),
                score=None if np.isnan(score) else score,
                timestamp=_from_us(self.timestamp[k]),
            )

    @classmethod
    def from_records(cls, records: Iterable[PairwiseRecord], proposal_ids=None) -> PairwiseRecords:
        records = list(records)
        if proposal_ids is None:
            proposal_ids = sorted({p for r in records for p in (r.pair.low, r.pair.high)})
        proposal_ids = np.asarray(sorted(proposal_ids), dtype=np.int64)
        pos = {int(p): i for i, p in enumerate(proposal_ids)}
        users: dict[str, int] = {}
        cols = defaultdict(list)
        sel_codes = {"low": LOW, "high": HIGH, "none": NONE}
        for r in records:
            cols["user"].append(users.setdefault(r.user_id, len(users)))
            cols["low"].append(pos[r.pair.low])
            cols["high"].append(pos[r.pair.high])
            cols["selected"].append(sel_codes[r.selected])
            cols["source"].append(_SOURCE_CODES[r.source])
            cols["universe"].append(r.universe)
            cols["score"].append(np.nan if r.score is None else r.score)
            cols["timestamp"].append(_to_us(r.timestamp))
        if not records:
            return cls.empty(proposal_ids)
        return cls(user_ids=list(users), proposal_ids=proposal_ids, **{k: np.asarray(v) for k, v in cols.items()})

    @classmethod
    def empty(cls, proposal_ids) -> PairwiseRecords:
        z = np.zeros(0, np.int64)
        return cls(user=z, low=z, high=z, selected=z, user_ids=(), proposal_ids=proposal_ids)

    @classmethod
    def concat(cls, parts: Sequence[PairwiseRecords]) -> PairwiseRecords:
        """Concatenate stores over the same proposals, merging user indexes."""
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        pids = parts[0].proposal_ids
        users: dict[str, int] = {}
        remapped = []
        for p in parts:
            if not np.array_equal(p.proposal_ids, pids):
                raise ValueError("cannot concatenate records over different proposal sets")
            lut = np.array([users.setdefault(u, len(users)) for u in p.user_ids], dtype=np.int64)
            remapped.append(lut[p.user] if len(p) else p.user)
        panel_offset = 0
        panels = []
        for p in parts:
            panels.append(np.where(p.panel >= 0, p.panel + panel_offset, -1))
            if len(p) and p.panel.max() >= 0:
                panel_offset += int(p.panel.max()) + 1
        cat = np.concatenate
        return cls(
            user=cat(remapped), low=cat([p.low for p in parts]), high=cat([p.high for p in parts]),
            selected=cat([p.selected for p in parts]), source=cat([p.source for p in parts]),
            universe=cat([p.universe for p in parts]), score=cat([p.score for p in parts]),
            timestamp=cat([p.timestamp for p in parts]), panel=cat(panels),
            user_ids=list(users), proposal_ids=pids,
        )

    def card_ids(self) -> list[str]:
        pids = self.proposal_ids
        return [f"{pids[lo]}-{pids[hi]}" for lo, hi in zip(self.low, self.high)]

    def __repr__(self):
        return f"PairwiseRecords(n={len(self)}, users={self.n_users}, proposals={self.n_proposals})"


@dataclass(frozen=True)
class PairwiseTally:
    """Win counts: ``x[i, j]`` is how often proposal i was chosen over j."""

    x: np.ndarray
    proposal_ids: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ValueError("tally must be a square matrix")
        if np.any(x < 0):
            raise ValueError("tally entries must be nonnegative")
        if np.any(np.diag(x) != 0):
            raise ValueError("tally diagonal must be zero")
        if len(self.proposal_ids) != x.shape[0]:
            raise ValueError("proposal_ids do not match tally size")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def comparisons(self) -> np.ndarray:
        """Total number of decided comparisons per proposal."""
        return self.x.sum(axis=1) + self.x.sum(axis=0)

    def __add__(self, other: PairwiseTally) -> PairwiseTally:
        if not np.array_equal(self.proposal_ids, other.proposal_ids):
            raise ValueError("tallies cover different proposals")
        return PairwiseTally(self.x + other.x, self.proposal_ids)


def _catalog_index(proposal_ids) -> tuple[np.ndarray, dict[int, int]]:
    ids = np.asarray(sorted(int(p.id) if hasattr(p, "id") else int(p) for p in proposal_ids), dtype=np.int64)
    return ids, {int(p): i for i, p in enumerate(ids)}


def _user_index(user_ids: Iterable[str]) -> tuple[list[str], dict[str, int]]:
    ordered = sorted(set(user_ids))
    return ordered, {u: i for i, u in enumerate(ordered)}


def approvals_to_pairs(approvals: Iterable[ApprovalRecord], proposal_ids) -> PairwiseRecords:
    """Cross every approved proposal with every disapproved one, per user.

    Abstentions (agree = 0) contribute nothing. Each produced record carries
    the later of the two approvals' timestamps and the mean of their scores.
    """
    pids, pos = _catalog_index(proposal_ids)
    by_user: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
    for rec in approvals:
        if rec.agree == 1:
            by_user[rec.user_id][0].append(rec)
        elif rec.agree == -1:
            by_user[rec.user_id][1].append(rec)
    users, uidx = _user_index(by_user)
    cols = defaultdict(list)
    for uid in users:
        yes, no = by_user[uid]
        for a in yes:
            for b in no:
                ia, ib = pos[a.proposal_id], pos[b.proposal_id]
                if ia == ib:
                    continue
                cols["user"].append(uidx[uid])
                cols["low"].append(min(ia, ib))
                cols["high"].append(max(ia, ib))
                cols["selected"].append(LOW if ia < ib else HIGH)
                cols["universe"].append(a.universe)
                scores = [s for s in (a.score, b.score) if s is not None]
                cols["score"].append(np.mean(scores) if scores else np.nan)
                cols["timestamp"].append(max(_to_us(a.timestamp), _to_us(b.timestamp)))
    if not cols:
        return PairwiseRecords.empty(pids)
    n = len(cols["user"])
    return PairwiseRecords(source=np.full(n, APPROVAL), user_ids=users, proposal_ids=pids,
                           **{k: np.asarray(v) for k, v in cols.items()})


def ranks_to_pairs(ranks: Sequence[RankRecord], proposal_ids) -> PairwiseRecords:
    """Expand each panel into its k(k-1)/2 ordered pairs.

    Only pairs inside one panel are produced; no transitivity is assumed
    across panels. ``panel`` on each record is the index of its source
    panel in ``ranks``.
    """
    pids, pos = _catalog_index(proposal_ids)
    ranks = list(ranks)
    users, uidx = _user_index(r.user_id for r in ranks)
    by_len: dict[int, list[int]] = defaultdict(list)
    for k, r in enumerate(ranks):
        if len(r.panel) >= 2:
            by_len[len(r.panel)].append(k)
    chunks = []
    for length, members in sorted(by_len.items()):
        members = np.asarray(members)
        panels = np.array([[pos[p] for p in ranks[k].panel] for k in members], dtype=np.int64)
        first, second = (np.array(c) for c in zip(*combinations(range(length), 2)))
        above, below = panels[:, first], panels[:, second]  # above preferred to below
        reps = len(first)
        meta = np.array([(uidx[ranks[k].user_id], ranks[k].universe, _to_us(ranks[k].timestamp))
                         for k in members], dtype=np.int64).reshape(-1, 3)
        scores = np.array([np.nan if ranks[k].score is None else ranks[k].score for k in members])
        chunks.append(dict(
            user=np.repeat(meta[:, 0], reps),
            low=np.minimum(above, below).ravel(),
            high=np.maximum(above, below).ravel(),
            selected=np.where(above < below, LOW, HIGH).ravel(),
            universe=np.repeat(meta[:, 1], reps),
            score=np.repeat(scores, reps),
            timestamp=np.repeat(meta[:, 2], reps),
            panel=np.repeat(members, reps),
        ))
    if not chunks:
        return PairwiseRecords.empty(pids)
    cols = {k: np.concatenate([c[k] for c in chunks]) for k in chunks[0]}
    # restore panel order so the stream follows the input
    order = np.argsort(cols["panel"], kind="stable")
    cols = {k: v[order] for k, v in cols.items()}
    return PairwiseRecords(source=np.full(len(order), RANK), user_ids=users, proposal_ids=pids, **cols)


def build_tally(records: PairwiseRecords, n: int | None = None) -> PairwiseTally:
    """Count wins of each proposal over each other; no-preference records are skipped."""
    n = records.n_proposals if n is None else n
    rec = records.decided()
    win, lose = rec.winner, rec.loser
    if len(rec) and max(win.max(), lose.max()) >= n:
        raise ValueError(f"record references proposal index >= n={n}")
    x = np.bincount(win * n + lose, minlength=n * n).reshape(n, n) if len(rec) else np.zeros((n, n), np.int64)
    ids = records.proposal_ids if n == records.n_proposals else np.arange(n)
    return PairwiseTally(x.astype(np.int64), ids)


@dataclass(frozen=True)
class ConsistencyResult:
    value: float  # NaN when no (user, pair) cell was observed twice
    method: str
    per_user: Mapping[str, float]
    n_cells: int
    n_observations: int

    @property
    def defined(self) -> bool:
        return not np.isnan(self.value)


def _cell_counts(records: PairwiseRecords):
    """Per (user, low, high) cell: count of low-selected and high-selected records."""
    rec = records.decided()
    n = rec.n_proposals
    key = (rec.user * n + rec.low) * n + rec.high
    cells, inverse = np.unique(key, return_inverse=True)
    n_high = np.bincount(inverse, weights=(rec.selected == HIGH), minlength=len(cells)).astype(np.int64)
    total = np.bincount(inverse, minlength=len(cells)).astype(np.int64)
    user = cells // (n * n)
    low = (cells // n) % n
    high = cells % n
    return user, low, high, total - n_high, n_high


def consistency(records: PairwiseRecords, method: Literal["modal", "pairwise"] = "modal") -> ConsistencyResult:
    """Agreement of users with themselves on pairs they judged more than once.

    ``modal``: each repeated cell scores the share of its observations in
    the majority direction; cells are pooled by observation count.
    ``pairwise``: share of agreeing observation pairs among all pairs of
    observations of the same cell.
    """
    if method not in ("modal", "pairwise"):
        raise ValueError(f"unknown consistency method {method!r}")
    user, _, _, n_low, n_high = _cell_counts(records)
    total = n_low + n_high
    rep = total > 1
    user, n_low, n_high, total = user[rep], n_low[rep], n_high[rep], total[rep]
    if method == "modal":
        num = np.maximum(n_low, n_high).astype(float)
        den = total.astype(float)
    else:
        num = (n_low * (n_low - 1) + n_high * (n_high - 1)) / 2.0
        den = total * (total - 1) / 2.0
    per_user = {}
    if len(user):
        u_num = np.bincount(user, weights=num)
        u_den = np.bincount(user, weights=den)
        for u in np.unique(user):
            per_user[records.user_ids[u]] = float(u_num[u] / u_den[u])
    value = float(num.sum() / den.sum()) if den.sum() > 0 else float("nan")
    return ConsistencyResult(value, method, per_user, int(rep.sum()), int(total.sum()))


@dataclass(frozen=True)
class TransitivityResult:
    value: float  # NaN when no qualifying triplet exists
    per_user: Mapping[str, float]
    n_triplets: int

    @property
    def defined(self) -> bool:
        return not np.isnan(self.value)


def _panel_triplets(records: PairwiseRecords) -> set[tuple[int, int, int, int]]:
    """(user, a, b, c) triplets that appear together inside one rank panel."""
    seen = set()
    mask = records.panel >= 0
    if not mask.any():
        return seen
    panel, user = records.panel[mask], records.user[mask]
    members: dict[int, set[int]] = defaultdict(set)
    owner = {}
    for p, u, lo, hi in zip(panel, user, records.low[mask], records.high[mask]):
        members[p].update((int(lo), int(hi)))
        owner[p] = int(u)
    for p, items in members.items():
        for trip in combinations(sorted(items), 3):
            seen.add((owner[p], *trip))
    return seen


def transitivity(records: PairwiseRecords, panels: Sequence[RankRecord] | None = None) -> TransitivityResult:
    """Share of acyclic direction combinations over each user's observed triplets.

    A triplet qualifies when the user decided all three of its pairs at
    least once and no single rank panel of that user contains all three
    proposals. Every way of picking one observed direction per pair is a
    combination (weighted by the direction counts); the triplet's value is
    the acyclic share. The result averages over all (user, triplet) values.

    Panel membership is read from ``records.panel``; ``panels`` may be given
    instead when the records carry no panel indexes.
    """
    user, low, high, n_low, n_high = _cell_counts(records)
    if panels is not None:
        excluded = set()
        pids, pos = _catalog_index(records.proposal_ids)
        uidx = {u: i for i, u in enumerate(records.user_ids)}
        for r in panels:
            if r.user_id in uidx and len(r.panel) >= 3:
                idx = sorted(pos[p] for p in r.panel if p in pos)
                for trip in combinations(idx, 3):
                    excluded.add((uidx[r.user_id], *trip))
    else:
        excluded = _panel_triplets(records)

    # count[(a, b)] = times a chosen over b, per user
    per_user: dict[int, dict[tuple[int, int], int]] = defaultdict(dict)
    adj: dict[int, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
    for u, lo, hi, cl, ch in zip(user.tolist(), low.tolist(), high.tolist(), n_low.tolist(), n_high.tolist()):
        per_user[u][(lo, hi)] = cl
        per_user[u][(hi, lo)] = ch
        adj[u][lo].add(hi)
        adj[u][hi].add(lo)

    values = []
    user_values: dict[str, list[float]] = defaultdict(list)
    for u in sorted(adj):
        cnt = per_user[u]
        nbrs = adj[u]
        for a in sorted(nbrs):
            for b in sorted(x for x in nbrs[a] if x > a):
                for c in sorted(x for x in nbrs[a] & nbrs[b] if x > b):
                    if (u, a, b, c) in excluded:
                        continue
                    ab, ba = cnt[(a, b)], cnt[(b, a)]
                    bc, cb = cnt[(b, c)], cnt[(c, b)]
                    ac, ca = cnt[(a, c)], cnt[(c, a)]
                    total = (ab + ba) * (bc + cb) * (ac + ca)
                    cyclic = ab * bc * ca + ba * cb * ac
                    values.append(1.0 - cyclic / total)
                    user_values[records.user_ids[u]].append(values[-1])
    value = float(np.mean(values)) if values else float("nan")
    return TransitivityResult(value, {u: float(np.mean(v)) for u, v in user_values.items()}, len(values))


def write_pairs(records: PairwiseRecords, path) -> None:
    """Write records in the pairwise-comparison table layout."""
    pids = records.proposal_ids
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *PAIR_COLUMNS])
        for k in range(len(records)):
            lo, hi = int(pids[records.low[k]]), int(pids[records.high[k]])
            sel = int(records.selected[k])
            score = float(records.score[k])
            w.writerow([
                k + 1, records.user_ids[records.user[k]], lo, hi, lo, hi, f"{lo}-{hi}",
                {LOW: lo, HIGH: hi, NONE: 0}[sel],
                format_timestamp(_from_us(records.timestamp[k])),
                "" if np.isnan(score) else repr(score),
                int(records.universe[k]), SOURCE_NAMES[int(records.source[k])],
            ])


def read_pairs(path, proposal_ids=None) -> PairwiseRecords:
    """Read a pairwise-comparison table (``selected`` = 0 marks no preference)."""
    from .corpus import RowError, _read_table

    out = []
    for line, row in _read_table(path, ("user_id", "option_a", "option_b", "selected", "created_at")):
        try:
            pair = PairId.of(int(row["option_a"]), int(row["option_b"]))
            sel = int(row["selected"])
            if sel not in (0, pair.low, pair.high):
                raise ValueError(f"selected {sel} is not part of pair {pair}")
            score = (row.get("score") or "").strip()
            out.append(PairwiseRecord(
                user_id=row["user_id"].strip(), pair=pair,
                selected="none" if sel == 0 else ("low" if sel == pair.low else "high"),
                source="approval" if (row.get("source") or "rank").strip() in ("agree", "approval") else "rank",
                universe=int(row.get("universe") or 0),
                score=float(score) if score else None,
                timestamp=parse_timestamp(row["created_at"]),
            ))
        except ValueError as exc:
            raise RowError(path, line, str(exc)) from exc
    return PairwiseRecords.from_records(out, proposal_ids)


def corpus_to_pairs(corpus, source: Literal["rank", "approval", "both"] = "rank") -> PairwiseRecords:
    """Pairwise records of a corpus from its rank panels, approvals, or both."""
    ids = corpus.proposal_ids
    parts = []
    if source in ("rank", "both"):
        parts.append(ranks_to_pairs(corpus.ranks, ids))
    if source in ("approval", "both"):
        parts.append(approvals_to_pairs(corpus.approvals, ids))
    if not parts:
        raise ValueError(f"unknown source {source!r}")
    return parts[0] if len(parts) == 1 else PairwiseRecords.concat(parts)
