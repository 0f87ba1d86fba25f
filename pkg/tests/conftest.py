from __future__ import annotations

from datetime import timedelta
from pathlib import Path

import numpy as np
import pytest

from pairdiv.corpus import EPOCH
from pairdiv.pairwise import PairId, PairwiseRecord, PairwiseRecords

DATA = Path(__file__).parent / "data"


def make_records(choices, proposal_ids=None, source="rank") -> PairwiseRecords:
    """Records from ``(user, winner, loser)`` tuples, timestamps in input order."""
    recs = []
    for k, (user, w, l) in enumerate(choices):
        pair = PairId.of(w, l)
        recs.append(PairwiseRecord(
            user_id=str(user), pair=pair, selected="low" if w == pair.low else "high",
            source=source, universe=5, timestamp=EPOCH + timedelta(seconds=k),
        ))
    return PairwiseRecords.from_records(recs, proposal_ids)


def random_choices(rng: np.random.Generator, n_props: int, n_users: int, n_records: int):
    out = []
    for _ in range(n_records):
        a, b = rng.choice(np.arange(1, n_props + 1), size=2, replace=False)
        u = int(rng.integers(n_users))
        out.append((f"u{u}", int(a), int(b)))
    return out


@pytest.fixture
def data_dir() -> Path:
    return DATA
