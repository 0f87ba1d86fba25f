"""Suspicious-account detection and duplicate-preference curation.

Six independent criteria can flag an account:

1. a record in a universe outside the accepted set,
2. no consent on file,
3. static rankings: enough rank panels but almost none reordered,
4. low mean reCAPTCHA score over the user's records,
5. low mean reCAPTCHA score over the user's (hashed) ip,
6. more approval rows than there are proposals.

Criteria whose inputs are missing are switched off and listed in the report.
"""

from __future__ import annotations

import json
from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .corpus import PreferenceCorpus
from .pairwise import PairwiseRecords

CRITERIA = {
    1: "unknown universe",
    2: "no consent",
    3: "static ranking",
    4: "low recaptcha score",
    5: "low ip score",
    6: "over-participation",
}


@dataclass(frozen=True)
class CurationConfig:
    accepted_universes: frozenset[int] = frozenset({2, 4, 5, 6})
    recaptcha_threshold: float = 0.7
    static_rank_max_update_rate: float = 0.10
    static_rank_min_panels: int = 3
    max_approvals: int | None = None  # None: catalog size
    consent_ids: frozenset[str] | None = None
    ip_scores: Mapping[str, Sequence[float]] | None = None
    user_ip: Mapping[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "accepted_universes", frozenset(self.accepted_universes))
        if not self.accepted_universes:
            raise ValueError("accepted_universes must not be empty")
        for name in ("recaptcha_threshold", "static_rank_max_update_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.static_rank_min_panels < 1:
            raise ValueError("static_rank_min_panels must be >= 1")
        if self.consent_ids is not None:
            object.__setattr__(self, "consent_ids", frozenset(self.consent_ids))


@dataclass(frozen=True)
class SuspicionReport:
    criteria: Mapping[str, frozenset[int]]
    disabled: Mapping[int, str] = field(default_factory=dict)

    def is_flagged(self, user_id: str) -> bool:
        return bool(self.criteria.get(user_id))

    @property
    def flagged_users(self) -> frozenset[str]:
        return frozenset(u for u, c in self.criteria.items() if c)

    def counts(self) -> dict[int, int]:
        out = {k: 0 for k in CRITERIA}
        for c in self.criteria.values():
            for k in c:
                out[k] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "users": [
                {"user_id": u, "criteria": sorted(self.criteria[u]), "flagged": bool(self.criteria[u])}
                for u in sorted(self.criteria)
            ],
            "disabled": {str(k): v for k, v in sorted(self.disabled.items())},
            "counts": {str(k): v for k, v in self.counts().items()},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def detect_suspicious(corpus: PreferenceCorpus, config: CurationConfig | None = None) -> SuspicionReport:
    """Evaluate every criterion for every user seen in the corpus."""
    config = config or CurationConfig()
    users = set(corpus.user_ids) | set(corpus.profiles)
    hits: dict[str, set[int]] = {u: set() for u in users}
    disabled: dict[int, str] = {}

    for rec in (*corpus.approvals, *corpus.ranks, *corpus.profiles.values()):
        if rec.universe is not None and rec.universe not in config.accepted_universes:
            hits[rec.user_id].add(1)

    if config.consent_ids is None:
        disabled[2] = "no consent list supplied"
    else:
        for u in users:
            if u not in config.consent_ids:
                hits[u].add(2)

    panels: dict[str, list[bool]] = defaultdict(list)
    for r in corpus.ranks:
        # a one-item panel cannot be reordered, so it says nothing either way
        if len(r.panel) >= 2:
            panels[r.user_id].append(r.updated)
    for u, flags in panels.items():
        if len(flags) >= config.static_rank_min_panels:
            if sum(flags) / len(flags) < config.static_rank_max_update_rate:
                hits[u].add(3)

    scores: dict[str, list[float]] = defaultdict(list)
    for rec in (*corpus.approvals, *corpus.ranks):
        if rec.score is not None:
            scores[rec.user_id].append(rec.score)
    if not scores:
        disabled[4] = "no reCAPTCHA scores in the corpus"
    for u, vals in scores.items():
        if np.mean(vals) < config.recaptcha_threshold:
            hits[u].add(4)

    if config.ip_scores is None or config.user_ip is None:
        disabled[5] = "no ip score table supplied"
    else:
        for u in users:
            ip = config.user_ip.get(u)
            vals = config.ip_scores.get(ip, ()) if ip is not None else ()
            if len(vals) and np.mean(vals) < config.recaptcha_threshold:
                hits[u].add(5)

    limit = len(corpus.catalog) if config.max_approvals is None else config.max_approvals
    n_approvals: dict[str, int] = defaultdict(int)
    for rec in corpus.approvals:
        n_approvals[rec.user_id] += 1
    for u, n in n_approvals.items():
        if n > limit:
            hits[u].add(6)

    return SuspicionReport({u: frozenset(c) for u, c in hits.items()}, disabled)


def latest_per_cell(records: PairwiseRecords) -> np.ndarray:
    """Indices of the last record of every (user, pair) cell, in input order.

    "Last" means latest timestamp; equal timestamps go to the later row.
    """
    if not len(records):
        return np.zeros(0, np.int64)
    m = records.n_proposals
    key = (records.user * m + records.low) * m + records.high
    pos = np.arange(len(records))
    order = np.lexsort((pos, records.timestamp, key))
    k_sorted = key[order]
    last = np.ones(len(order), bool)
    last[:-1] = k_sorted[1:] != k_sorted[:-1]
    return np.sort(order[last])


def curate(pairs: PairwiseRecords, report: SuspicionReport | None = None, *, dedupe: bool = True) -> PairwiseRecords:
    """Drop flagged users' records, then keep one (latest) record per user and pair."""
    out = pairs
    if report is not None and report.flagged_users:
        bad = np.array([u in report.flagged_users for u in pairs.user_ids], bool)
        if len(pairs):
            out = pairs.take(~bad[pairs.user])
    if dedupe:
        out = out.take(latest_per_cell(out))
    return out
