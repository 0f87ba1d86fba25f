from datetime import timedelta

import numpy as np
import pytest

from conftest import make_records, random_choices
from pairdiv.corpus import EPOCH, ApprovalRecord, ParticipantProfile, PreferenceCorpus, Proposal, RankRecord
from pairdiv.curation import CurationConfig, SuspicionReport, curate, detect_suspicious, latest_per_cell
from pairdiv.pairwise import PairId, PairwiseRecord, PairwiseRecords

CATALOG = tuple(Proposal(i, f"p{i}") for i in range(1, 5))


def _rank(user, panel, updated=True, universe=5, score=0.9, t=0):
    return RankRecord(user, tuple(panel), updated, universe, score, EPOCH + timedelta(seconds=t))


def _approval(user, pid, agree=1, universe=5, score=0.9, t=0):
    return ApprovalRecord(user, pid, agree, universe, score, EPOCH + timedelta(seconds=t))


def _flags(corpus, **cfg):
    return detect_suspicious(corpus, CurationConfig(**cfg)).criteria


def test_clean_user_not_flagged():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("ok", [1, 2]),))
    rep = detect_suspicious(c)
    assert not rep.is_flagged("ok")
    assert set(rep.disabled) == {2, 5}


def test_unknown_universe():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("u", [1, 2], universe=7),))
    assert _flags(c)["u"] == {1}
    assert _flags(c, accepted_universes={7})["u"] == frozenset()


def test_unknown_universe_on_profile():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("u", [1, 2]),),
                         profiles={"u": ParticipantProfile("u", universe=9)})
    assert 1 in _flags(c)["u"]


def test_consent():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("a", [1, 2]), _rank("b", [1, 2])))
    f = _flags(c, consent_ids={"a"})
    assert f["a"] == frozenset() and f["b"] == {2}


def test_static_ranking():
    static = tuple(_rank("s", [1, 2, 3], updated=False, t=k) for k in range(3))
    c = PreferenceCorpus(CATALOG, ranks=static)
    assert _flags(c)["s"] == {3}
    # one-item panels cannot count toward the rule
    short = tuple(_rank("s", [1], updated=False, t=k) for k in range(5))
    assert _flags(PreferenceCorpus(CATALOG, ranks=short))["s"] == frozenset()
    # too few panels
    assert _flags(PreferenceCorpus(CATALOG, ranks=static[:2]))["s"] == frozenset()
    moved = static + (_rank("s", [2, 1], t=9),)
    assert _flags(PreferenceCorpus(CATALOG, ranks=moved))["s"] == frozenset()


def test_recaptcha_mean():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("u", [1, 2], score=0.5), _rank("u", [3, 4], score=0.8, t=1)))
    assert _flags(c)["u"] == {4}
    assert _flags(c, recaptcha_threshold=0.6)["u"] == frozenset()


def test_recaptcha_disabled_without_scores():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("u", [1, 2], score=None),))
    assert 4 in detect_suspicious(c).disabled


def test_ip_score():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("a", [1, 2]), _rank("b", [1, 2])))
    f = _flags(c, ip_scores={"h1": [0.1, 0.3], "h2": [0.9]}, user_ip={"a": "h1", "b": "h2"})
    assert f["a"] == {5} and f["b"] == frozenset()


def test_over_participation():
    appr = tuple(_approval("u", p, t=k) for k, p in enumerate([1, 2, 3, 4, 1]))
    c = PreferenceCorpus(CATALOG, approvals=appr)
    assert _flags(c)["u"] == {6}
    assert _flags(c, max_approvals=5)["u"] == frozenset()


def test_report_serializes():
    c = PreferenceCorpus(CATALOG, ranks=(_rank("u", [1, 2], universe=7),))
    d = detect_suspicious(c).to_dict()
    assert d["users"] == [{"user_id": "u", "criteria": [1], "flagged": True}]
    assert d["counts"]["1"] == 1


def test_config_validation():
    with pytest.raises(ValueError):
        CurationConfig(recaptcha_threshold=1.5)
    with pytest.raises(ValueError):
        CurationConfig(accepted_universes=())


def _rec(user, low_wins, t):
    return PairwiseRecord(user, PairId(1, 2), "low" if low_wins else "high", "rank", 5, None,
                          EPOCH + timedelta(seconds=t))


def test_dedupe_keeps_latest():
    recs = PairwiseRecords.from_records([_rec("u", True, 5), _rec("u", False, 3)])
    out = curate(recs)
    assert len(out) == 1 and out.winner.tolist() == [0]


def test_dedupe_tie_goes_to_later_row():
    recs = PairwiseRecords.from_records([_rec("u", True, 5), _rec("u", False, 5)])
    assert curate(recs).winner.tolist() == [1]


def test_flagged_users_removed():
    recs = make_records([("good", 1, 2), ("bad", 2, 1)], [1, 2])
    rep = SuspicionReport({"good": frozenset(), "bad": frozenset({4})})
    out = curate(recs, rep)
    assert [r.user_id for r in out] == ["good"]


def test_curate_idempotent_and_monotone():
    rng = np.random.default_rng(3)
    recs = make_records(random_choices(rng, 4, 5, 80), [1, 2, 3, 4])
    rep = SuspicionReport({"u1": frozenset({2})})
    once = curate(recs, rep)
    twice = curate(once, rep)
    assert len(once) == len(twice)
    assert np.array_equal(latest_per_cell(once), np.arange(len(once)))
    bigger = SuspicionReport({"u1": frozenset({2}), "u2": frozenset({6})})
    assert len(curate(recs, bigger)) <= len(once)
    assert len(once) <= len(recs)
