"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numbers
from collections.abc import Iterable

from .pairwise import PairwiseRecord, PairwiseRecords, PairwiseTally


def check_records(X, proposal_ids=None) -> PairwiseRecords:
    """Accept a record store or an iterable of :class:`PairwiseRecord`."""
    if isinstance(X, PairwiseRecords):
        return X
    if isinstance(X, Iterable) and not isinstance(X, (str, bytes)):
        items = list(X)
        if all(isinstance(r, PairwiseRecord) for r in items):
            if not items and proposal_ids is None:
                raise ValueError("empty record list and no proposal ids")
            return PairwiseRecords.from_records(items, proposal_ids)
    raise TypeError(f"expected PairwiseRecords or PairwiseRecord items, got {type(X).__name__}")


def check_nonempty(records: PairwiseRecords, what: str = "records") -> PairwiseRecords:
    if not len(records.decided()):
        raise ValueError(f"no decided {what} to fit on")
    return records


def check_tally_or_records(X) -> PairwiseTally | PairwiseRecords:
    return X if isinstance(X, PairwiseTally) else check_records(X)


def check_int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_fraction(value, name: str, *, closed_low: bool = False) -> float:
    if not isinstance(value, numbers.Real):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    ok = (0.0 <= value <= 1.0) if closed_low else (0.0 < value <= 1.0)
    if not ok:
        raise ValueError(f"{name} must lie in {'[0' if closed_low else '(0'}, 1], got {value}")
    return float(value)


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
