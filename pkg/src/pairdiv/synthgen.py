"""Synthetic electorates with planted structure.

Every user holds a strict order over the proposals (ids 1..n) and answers
``panels_per_user`` rank panels: a random subset of ``panel_size``
proposals sorted by that order, then perturbed by one pass of adjacent
swaps, each made with probability ``noise``.

Models:

``uniform-random``
    every panel is a fresh uniform permutation.
``transitive-noise``
    everybody shares the order 1 < 2 < ... (1 is best).
``two-bloc``
    bloc A (share ``bloc_fraction``) puts the divisive proposals first,
    ascending, then the rest; bloc B puts the rest first and the divisive
    proposals last, in reverse. Bloc A reports politics label 4 and bloc B
    label 1.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from datetime import timedelta
from pathlib import Path

import numpy as np

from .corpus import EPOCH, ParticipantProfile, PreferenceCorpus, Proposal, RankRecord

MODELS = ("uniform-random", "two-bloc", "transitive-noise")
BLOC_LABELS = {"A": 4, "B": 1}


@dataclass(frozen=True)
class ElectorateSpec:
    n_proposals: int
    n_users: int
    model: str = "transitive-noise"
    bloc_fraction: float = 0.5
    divisive: frozenset[int] = field(default_factory=frozenset)
    noise: float = 0.0
    seed: int = 0
    panel_size: int = 5
    panels_per_user: int = 20
    update_rate: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "divisive", frozenset(int(p) for p in self.divisive))
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.n_proposals < 2:
            raise ValueError("need at least 2 proposals")
        if self.n_users < 1:
            raise ValueError("need at least 1 user")
        if not 0.0 < self.bloc_fraction < 1.0:
            raise ValueError(f"bloc_fraction must lie in (0, 1), got {self.bloc_fraction}")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise must lie in [0, 1], got {self.noise}")
        if not 2 <= self.panel_size <= self.n_proposals:
            raise ValueError(f"panel_size must lie in 2..{self.n_proposals}, got {self.panel_size}")
        if self.panels_per_user < 1:
            raise ValueError("panels_per_user must be >= 1")
        outside = self.divisive - set(range(1, self.n_proposals + 1))
        if outside:
            raise ValueError(f"divisive proposals {sorted(outside)} are not in 1..{self.n_proposals}")
        if self.model == "two-bloc" and not self.divisive:
            raise ValueError("two-bloc model needs a nonempty divisive set")

    def with_seed(self, seed: int) -> ElectorateSpec:
        return replace(self, seed=seed)


def bloc_orders(spec: ElectorateSpec) -> dict[str, np.ndarray]:
    """Preference order (best first) of each bloc, as proposal ids."""
    ids = np.arange(1, spec.n_proposals + 1)
    div = np.array(sorted(spec.divisive), dtype=np.int64)
    rest = ids[~np.isin(ids, div)]
    return {"A": np.concatenate([div, rest]), "B": np.concatenate([rest, div[::-1]])}


def _noisy_panel(items: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    panel = items.copy()
    if noise > 0:
        flips = rng.random(len(panel) - 1) < noise
        for k in np.flatnonzero(flips):
            panel[k], panel[k + 1] = panel[k + 1], panel[k]
    return panel


def generate(spec: ElectorateSpec) -> PreferenceCorpus:
    """Build a ranks-only corpus with one profile per user. Fully determined by ``spec``."""
    n = spec.n_proposals
    ids = np.arange(1, n + 1)
    orders = bloc_orders(spec) if spec.model == "two-bloc" else {}
    ranks = []
    profiles = {}
    width = len(str(spec.n_users))
    for k, child in enumerate(np.random.SeedSequence(spec.seed).spawn(spec.n_users)):
        rng = np.random.default_rng(child)
        uid = f"u{k:0{width}d}"
        if spec.model == "two-bloc":
            bloc = "A" if rng.random() < spec.bloc_fraction else "B"
            politics = BLOC_LABELS[bloc]
            rank_of = np.empty(n + 1, np.int64)
            rank_of[orders[bloc]] = np.arange(n)
        else:
            politics = int(rng.choice([1, 2, 4, 5]))
            rank_of = np.concatenate([[0], np.arange(n)])  # id order
        start = EPOCH + timedelta(days=k)
        for t in range(spec.panels_per_user):
            shown = rng.choice(ids, size=spec.panel_size, replace=False)
            if spec.model == "uniform-random":
                panel = rng.permutation(shown)
            else:
                panel = _noisy_panel(shown[np.argsort(rank_of[shown])], spec.noise, rng)
            ranks.append(RankRecord(
                user_id=uid, panel=tuple(int(p) for p in panel),
                updated=bool(rng.random() < spec.update_rate),
                universe=spec.panel_size, score=round(float(rng.uniform(0.75, 1.0)), 4),
                timestamp=start + timedelta(seconds=t),
            ))
        profiles[uid] = ParticipantProfile(
            user_id=uid,
            sex=int(rng.integers(1, 3)), age=int(rng.integers(1, 8)),
            education=int(rng.integers(1, 8)), zone=int(rng.integers(1, 3)),
            location=int(rng.choice([1, 13, 33, 69, 75, 92])), politics=politics,
            universe=spec.panel_size, timestamp=start,
        )
    catalog = tuple(Proposal(id=int(p), text=f"proposal {p}") for p in ids)
    return PreferenceCorpus(catalog=catalog, ranks=tuple(ranks), profiles=profiles)


def _parse_ids(text: str) -> frozenset[int]:
    out: set[int] = set()
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        if "-" in tok:
            lo, hi = tok.split("-")
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(tok))
    return frozenset(out)


_CASTS = {
    "n_proposals": int, "n_users": int, "model": str, "bloc_fraction": float,
    "divisive": _parse_ids, "noise": float, "seed": int, "panel_size": int,
    "panels_per_user": int, "update_rate": float,
}


def spec_from_mapping(values: dict[str, str]) -> ElectorateSpec:
    unknown = set(values) - set(_CASTS)
    if unknown:
        raise ValueError(f"unknown electorate keys: {sorted(unknown)}")
    try:
        return ElectorateSpec(**{k: _CASTS[k](v.strip()) for k, v in values.items()})
    except TypeError as exc:
        raise ValueError(str(exc)) from None


def read_key_values(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[root]\n" + text)
    return dict(parser["root"])


def read_spec(path) -> ElectorateSpec:
    return spec_from_mapping(read_key_values(path))
