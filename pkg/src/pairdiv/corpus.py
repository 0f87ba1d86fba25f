"""Data model and parsers for participation datasets.

Four tables make up a platform dump: the proposal catalog, approval
screens, rank screens and self-reported participant profiles. All of them
are read from comma-delimited UTF-8 CSV files with a header row; extra
columns are ignored. Rank panels are stored in a single cell as
pipe-separated proposal ids, most preferred first (``"4|1|9"``).

PrefLib strict-order-complete (SOC) files are read with
:func:`parse_preflib_soc` into a ranks-only corpus.
"""

from __future__ import annotations

import csv
import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from types import MappingProxyType

logger = logging.getLogger(__name__)

PANEL_SEP = "|"
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

APPROVAL_COLUMNS = ("user_id", "proposal_id", "agree", "universe", "score", "created_at", "locale")
RANK_COLUMNS = ("user_id", "rank", "updated", "universe", "score", "created_at")
PROFILE_COLUMNS = ("user_id", "politica", "location", "age", "sex", "education", "universe", "created_at")
CATALOG_COLUMNS = ("id", "text")

# label column in the profile table -> attribute of ParticipantProfile
PROFILE_DIMENSIONS = {
    "sex": "sex",
    "age": "age",
    "education": "education",
    "zone": "zone",
    "location": "location",
    "politica": "politics",
}


class CorpusError(ValueError):
    """Base class for ingestion failures."""


class SchemaError(CorpusError):
    """A required column is missing from a table header."""

    def __init__(self, path, column: str):
        self.path = str(path)
        self.column = column
        super().__init__(f"{path}: missing required column {column!r}")


class RowError(CorpusError):
    """A data row could not be decoded."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class FormatError(CorpusError):
    """A PrefLib file violates the strict-order-complete layout."""


@dataclass(frozen=True)
class Proposal:
    id: int
    text: str
    candidate_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"proposal id must be positive, got {self.id}")
        if not self.text:
            raise ValueError(f"proposal {self.id} has empty text")


@dataclass(frozen=True)
class ApprovalRecord:
    user_id: str
    proposal_id: int
    agree: int
    universe: int
    score: float | None
    timestamp: datetime
    locale: str = ""

    def __post_init__(self):
        if self.agree not in (-1, 0, 1):
            raise ValueError(f"agree must be -1, 0 or 1, got {self.agree}")
        _check_score(self.score)


@dataclass(frozen=True)
class RankRecord:
    user_id: str
    panel: tuple[int, ...]
    updated: bool
    universe: int
    score: float | None
    timestamp: datetime
    locale: str = ""

    def __post_init__(self):
        if len(self.panel) < 1:
            raise ValueError("rank panel is empty")
        if len(set(self.panel)) != len(self.panel):
            raise ValueError(f"duplicate proposal in panel {self.panel}")
        _check_score(self.score)


@dataclass(frozen=True)
class ParticipantProfile:
    user_id: str
    sex: int | None = None
    age: int | None = None
    education: int | None = None
    zone: int | None = None
    location: int | None = None
    politics: int | None = None
    universe: int | None = None
    timestamp: datetime = EPOCH

    def label(self, dimension: str) -> int | None:
        return getattr(self, PROFILE_DIMENSIONS.get(dimension, dimension))


@dataclass(frozen=True)
class PreferenceCorpus:
    """Validated, immutable bundle of all ballots of one experiment."""

    catalog: tuple[Proposal, ...]
    approvals: tuple[ApprovalRecord, ...] = ()
    ranks: tuple[RankRecord, ...] = ()
    profiles: Mapping[str, ParticipantProfile] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(sorted(self.catalog, key=lambda p: p.id)))
        object.__setattr__(self, "approvals", tuple(self.approvals))
        object.__setattr__(self, "ranks", tuple(self.ranks))
        object.__setattr__(self, "profiles", MappingProxyType(dict(self.profiles)))
        ids = [p.id for p in self.catalog]
        if len(set(ids)) != len(ids):
            raise CorpusError("duplicate proposal ids in catalog")
        known = set(ids)
        for rec in self.approvals:
            if rec.proposal_id not in known:
                raise CorpusError(f"approval by {rec.user_id} references unknown proposal {rec.proposal_id}")
        for rec in self.ranks:
            missing = set(rec.panel) - known
            if missing:
                raise CorpusError(f"panel by {rec.user_id} references unknown proposals {sorted(missing)}")
        for uid, prof in self.profiles.items():
            if uid != prof.user_id:
                raise CorpusError(f"profile keyed {uid!r} belongs to {prof.user_id!r}")

    @property
    def proposal_ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.catalog)

    @property
    def user_ids(self) -> tuple[str, ...]:
        users = {r.user_id for r in self.approvals} | {r.user_id for r in self.ranks}
        return tuple(sorted(users))

    def summary(self) -> dict:
        return {
            "proposals": len(self.catalog),
            "approvals": len(self.approvals),
            "ranks": len(self.ranks),
            "profiles": len(self.profiles),
            "users": len(self.user_ids),
        }


def _check_score(score):
    if score is not None and not 0.0 <= score <= 1.0:
        raise ValueError(f"score must lie in [0, 1], got {score}")


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC-3339 style instant; naive values are taken as UTC."""
    text = text.strip()
    if not text:
        raise ValueError("empty timestamp")
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _opt_float(text: str) -> float | None:
    text = text.strip()
    return float(text) if text else None


def _opt_int(text: str | None) -> int | None:
    if text is None:
        return None
    text = text.strip()
    return int(float(text)) if text else None


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "t", "yes"):
        return True
    if value in ("0", "false", "f", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_table(path, required: Sequence[str]):
    """Yield ``(line_number, row)`` pairs after checking the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(path, col)
        for row in reader:
            yield reader.line_num, row


def _row_guard(path, line, errors, fn):
    try:
        return fn()
    except (ValueError, TypeError, KeyError) as exc:
        err = RowError(path, line, str(exc))
        if errors is None:
            raise err from exc
        errors.append(err)
        logger.warning("%s", err)
        return None


def parse_catalog(path) -> list[Proposal]:
    """Read the proposal catalog (``id,text[,candidates]``)."""
    out = []
    for line, row in _read_table(path, CATALOG_COLUMNS):
        def build():
            cands = (row.get("candidates") or "").strip()
            return Proposal(
                id=int(row["id"]),
                text=row["text"].strip(),
                candidate_ids=frozenset(c.strip() for c in cands.split(PANEL_SEP) if c.strip()),
            )
        out.append(_row_guard(path, line, None, build))
    ids = [p.id for p in out]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"{path}: duplicate proposal ids")
    return out


def _known_ids(catalog) -> set[int]:
    if catalog is None:
        return set()
    return {p.id if isinstance(p, Proposal) else int(p) for p in catalog}


def parse_approvals(path, catalog: Iterable[Proposal], *, errors: list | None = None) -> list[ApprovalRecord]:
    """Read an approval table.

    Rows referencing proposals outside ``catalog`` or carrying an agree code
    outside {-1, 0, 1} are rejected. With ``errors=None`` the first bad row
    raises :class:`RowError`; pass a list to collect errors and skip rows.
    """
    known = _known_ids(catalog)
    out = []
    for line, row in _read_table(path, APPROVAL_COLUMNS):
        def build():
            pid = int(row["proposal_id"])
            if pid not in known:
                raise ValueError(f"unknown proposal id {pid}")
            return ApprovalRecord(
                user_id=row["user_id"].strip(),
                proposal_id=pid,
                agree=int(row["agree"]),
                universe=int(row["universe"]),
                score=_opt_float(row["score"]),
                timestamp=parse_timestamp(row["created_at"]),
                locale=(row.get("locale") or "").strip(),
            )
        rec = _row_guard(path, line, errors, build)
        if rec is not None:
            out.append(rec)
    return out


def decode_panel(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(PANEL_SEP)]
    if not text.strip() or any(p == "" for p in parts):
        raise ValueError(f"empty rank panel or entry in {text!r}")
    return tuple(int(p) for p in parts)


def encode_panel(panel: Sequence[int]) -> str:
    return PANEL_SEP.join(str(p) for p in panel)


def parse_ranks(path, catalog: Iterable[Proposal], *, errors: list | None = None) -> list[RankRecord]:
    """Read a rank table; panels are pipe-separated id lists."""
    known = _known_ids(catalog)
    out = []
    for line, row in _read_table(path, RANK_COLUMNS):
        def build():
            panel = decode_panel(row["rank"])
            unknown = [p for p in panel if p not in known]
            if unknown:
                raise ValueError(f"unknown proposal ids {unknown}")
            return RankRecord(
                user_id=row["user_id"].strip(),
                panel=panel,
                updated=_parse_bool(row["updated"]),
                universe=int(row["universe"]),
                score=_opt_float(row["score"]),
                timestamp=parse_timestamp(row["created_at"]),
                locale=(row.get("locale") or "").strip(),
            )
        rec = _row_guard(path, line, errors, build)
        if rec is not None:
            out.append(rec)
    return out


def dedupe_profiles(profiles: Iterable[ParticipantProfile]) -> dict[str, ParticipantProfile]:
    """Keep the latest profile per user; equal timestamps go to the later item."""
    latest: dict[str, ParticipantProfile] = {}
    for prof in profiles:
        cur = latest.get(prof.user_id)
        if cur is None or prof.timestamp >= cur.timestamp:
            latest[prof.user_id] = prof
    return dict(sorted(latest.items()))


def parse_profiles(path, *, errors: list | None = None) -> dict[str, ParticipantProfile]:
    """Read the self-reported profile table, keeping each user's latest row."""
    rows = []
    for line, row in _read_table(path, PROFILE_COLUMNS):
        def build():
            return ParticipantProfile(
                user_id=row["user_id"].strip(),
                sex=_opt_int(row.get("sex")),
                age=_opt_int(row.get("age")),
                education=_opt_int(row.get("education")),
                zone=_opt_int(row.get("zone")),
                location=_opt_int(row.get("location")),
                politics=_opt_int(row.get("politica")),
                universe=_opt_int(row.get("universe")),
                timestamp=parse_timestamp(row["created_at"]),
            )
        prof = _row_guard(path, line, errors, build)
        if prof is not None:
            rows.append(prof)
    return dedupe_profiles(rows)


_SOC_DATA = re.compile(r"^\s*(\d+)\s*:\s*(.+?)\s*$")
_SOC_ALT_COUNT = re.compile(r"^#\s*NUMBER ALTERNATIVES\s*:\s*(\d+)", re.IGNORECASE)
_SOC_ALT_NAME = re.compile(r"^#\s*ALTERNATIVE NAME\s+(\d+)\s*:\s*(.*)$", re.IGNORECASE)


def parse_preflib_soc(path) -> PreferenceCorpus:
    """Read a PrefLib strict-order-complete file into a ranks-only corpus.

    Each ``multiplicity: a,b,...`` line becomes ``multiplicity`` rank records
    with user ids ``soc:<line>:<k>``. Every ranking must be a permutation of
    the declared alternatives.
    """
    path = Path(path)
    declared = None
    names: dict[int, str] = {}
    data = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if m := _SOC_ALT_COUNT.match(line):
                    declared = int(m.group(1))
                elif m := _SOC_ALT_NAME.match(line):
                    names[int(m.group(1))] = m.group(2).strip()
                continue
            m = _SOC_DATA.match(line)
            if m is None:
                raise FormatError(f"{path}:{lineno}: expected 'count: a,b,...', got {line!r}")
            if "{" in line:
                raise FormatError(f"{path}:{lineno}: ties are not allowed in SOC data")
            try:
                order = tuple(int(tok) for tok in m.group(2).split(","))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            data.append((lineno, int(m.group(1)), order))

    if declared is None:
        alts = set(names) or {a for _, _, order in data for a in order}
        declared = len(alts)
    expected = set(range(1, declared + 1))
    ranks = []
    base = EPOCH
    for lineno, count, order in data:
        if len(order) != declared or set(order) != expected:
            raise FormatError(
                f"{path}:{lineno}: ranking {order} is not a complete permutation of 1..{declared}"
            )
        for k in range(count):
            ranks.append(RankRecord(
                user_id=f"soc:{lineno}:{k}",
                panel=order,
                updated=True,
                universe=declared,
                score=None,
                timestamp=base + timedelta(seconds=len(ranks)),
            ))
    catalog = [Proposal(id=a, text=names.get(a, f"alternative {a}")) for a in sorted(expected)]
    return PreferenceCorpus(catalog=tuple(catalog), ranks=tuple(ranks))


def write_corpus(corpus: PreferenceCorpus, directory) -> dict[str, Path]:
    """Write the canonical CSV layout (one file per table)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {name: directory / f"{name}.csv" for name in ("proposals", "approvals", "ranks", "profiles")}

    def fmt(value):
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with paths["proposals"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "text", "candidates"])
        for p in corpus.catalog:
            w.writerow([p.id, p.text, PANEL_SEP.join(sorted(p.candidate_ids))])
    with paths["approvals"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *APPROVAL_COLUMNS])
        for i, r in enumerate(corpus.approvals, start=1):
            w.writerow([i, r.user_id, r.proposal_id, r.agree, r.universe, fmt(r.score),
                        format_timestamp(r.timestamp), r.locale])
    with paths["ranks"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *RANK_COLUMNS, "locale"])
        for i, r in enumerate(corpus.ranks, start=1):
            w.writerow([i, r.user_id, encode_panel(r.panel), int(r.updated), r.universe,
                        fmt(r.score), format_timestamp(r.timestamp), r.locale])
    with paths["profiles"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *PROFILE_COLUMNS, "zone"])
        for i, p in enumerate(corpus.profiles.values(), start=1):
            w.writerow([i, p.user_id, fmt(p.politics), fmt(p.location), fmt(p.age), fmt(p.sex),
                        fmt(p.education), fmt(p.universe), format_timestamp(p.timestamp), fmt(p.zone)])
    return paths


def read_corpus(directory, *, errors: list | None = None) -> PreferenceCorpus:
    """Read a canonical corpus directory; approval/rank/profile files are optional."""
    directory = Path(directory)
    catalog_path = directory / "proposals.csv"
    if not catalog_path.exists():
        raise FileNotFoundError(f"{catalog_path}: proposal catalog not found")
    catalog = parse_catalog(catalog_path)
    approvals = ranks = ()
    profiles: dict = {}
    if (p := directory / "approvals.csv").exists():
        approvals = parse_approvals(p, catalog, errors=errors)
    if (p := directory / "ranks.csv").exists():
        ranks = parse_ranks(p, catalog, errors=errors)
    if (p := directory / "profiles.csv").exists():
        profiles = parse_profiles(p, errors=errors)
    return PreferenceCorpus(catalog=tuple(catalog), approvals=tuple(approvals),
                            ranks=tuple(ranks), profiles=profiles)
