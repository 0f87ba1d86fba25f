from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairdiv.corpus import (
    EPOCH, FormatError, ParticipantProfile, PreferenceCorpus, RowError, SchemaError, dedupe_profiles,
    decode_panel, parse_approvals, parse_catalog, parse_preflib_soc, parse_profiles, parse_ranks,
    read_corpus, write_corpus,
)


def _utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


def test_catalog(data_dir):
    cat = parse_catalog(data_dir / "platform" / "proposals.csv")
    assert [p.id for p in cat] == [1, 2, 3, 4, 9]
    assert cat[0].candidate_ids == frozenset({"lefty", "centra"})


def test_approvals_golden(data_dir):
    cat = parse_catalog(data_dir / "platform" / "proposals.csv")
    recs = parse_approvals(data_dir / "platform" / "approvals.csv", cat)
    assert len(recs) == 3
    r = recs[0]
    assert (r.user_id, r.proposal_id, r.agree, r.universe, r.score, r.locale) == ("u1", 3, 1, 5, 0.9, "fr")
    assert r.timestamp == _utc(2022, 4, 1, 10, 0, 0)
    assert recs[1].agree == -1 and recs[1].timestamp == _utc(2022, 4, 1, 10, 0, 5)
    assert recs[2].score is None and recs[2].agree == 0 and recs[2].timestamp == _utc(2022, 4, 2, 8, 30)


def test_single_approval_row(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("user_id,proposal_id,agree,universe,score,created_at,locale\nu1,3,1,5,,2022-01-01T00:00:00Z,fr\n")
    (rec,) = parse_approvals(p, [3])
    assert rec.agree == 1 and rec.user_id == "u1" and rec.proposal_id == 3


def test_approval_bad_agree_code(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("user_id,proposal_id,agree,universe,score,created_at,locale\n"
                 "u1,3,1,5,,2022-01-01T00:00:00Z,fr\nu1,3,5,5,,2022-01-01T00:00:00Z,fr\n")
    with pytest.raises(RowError) as exc:
        parse_approvals(p, [3])
    assert exc.value.line == 3
    errors = []
    assert len(parse_approvals(p, [3], errors=errors)) == 1
    assert len(errors) == 1 and errors[0].line == 3


def test_approval_unknown_proposal(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("user_id,proposal_id,agree,universe,score,created_at,locale\nu1,8,1,5,,2022-01-01T00:00:00Z,fr\n")
    with pytest.raises(RowError, match="unknown proposal"):
        parse_approvals(p, [3])


def test_missing_column_names_it(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("user_id,proposal_id,universe,score,created_at,locale\n")
    with pytest.raises(SchemaError) as exc:
        parse_approvals(p, [3])
    assert exc.value.column == "agree"


def test_decode_panel():
    assert decode_panel("4|1|9") == (4, 1, 9)
    with pytest.raises(ValueError):
        decode_panel("")


def test_ranks_golden(data_dir):
    cat = parse_catalog(data_dir / "platform" / "proposals.csv")
    recs = parse_ranks(data_dir / "platform" / "ranks.csv", cat)
    assert [r.panel for r in recs] == [(4, 1, 9), (2, 3)]
    assert [r.updated for r in recs] == [True, False]
    assert [r.universe for r in recs] == [5, 4]
    assert recs[1].timestamp == _utc(2022, 4, 2, 8, 31)


@pytest.mark.parametrize("cell", ["4|4|9", ""])
def test_rank_bad_panels(tmp_path, cell):
    p = tmp_path / "r.csv"
    p.write_text(f"user_id,rank,updated,universe,score,created_at\nu1,{cell},1,5,,2022-01-01T00:00:00Z\n")
    with pytest.raises(RowError) as exc:
        parse_ranks(p, [4, 9])
    assert exc.value.line == 2


def test_profiles_keep_latest(data_dir):
    profs = parse_profiles(data_dir / "platform" / "profiles.csv")
    assert sorted(profs) == ["u1", "u2", "u3"]
    assert profs["u1"].politics == 2  # 11:00 row beats 09:00 row
    assert profs["u2"].politics == 4  # 04-02 row beats the earlier row listed after it
    assert profs["u3"].location == 999


def test_profile_single_row(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("user_id,politica,location,age,sex,education,universe,created_at\nu9,1,75,2,1,4,5,2022-01-01T00:00:00Z\n")
    assert parse_profiles(p)["u9"].politics == 1


def test_profile_bad_timestamp(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("user_id,politica,location,age,sex,education,universe,created_at\nu9,1,75,2,1,4,5,yesterday\n")
    with pytest.raises(RowError):
        parse_profiles(p)


def test_equal_timestamps_later_row_wins():
    a = ParticipantProfile("u", politics=1, timestamp=EPOCH)
    b = ParticipantProfile("u", politics=4, timestamp=EPOCH)
    assert dedupe_profiles([a, b])["u"].politics == 4


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.integers(1, 5)), min_size=1, max_size=12, unique_by=lambda t: t),
       st.randoms())
def test_dedupe_order_independent_and_idempotent(rows, rnd):
    # distinct timestamps per user
    profs = [ParticipantProfile(u, politics=k, timestamp=EPOCH + timedelta(hours=t))
             for k, (u, t) in enumerate(rows)]
    once = dedupe_profiles(profs)
    shuffled = profs[:]
    rnd.shuffle(shuffled)
    assert dedupe_profiles(shuffled) == once
    assert dedupe_profiles(once.values()) == once


def test_round_trip(tmp_path, data_dir):
    corpus = read_corpus(data_dir / "platform")
    write_corpus(corpus, tmp_path / "c")
    again = read_corpus(tmp_path / "c")
    assert again == corpus
    assert again.summary() == {"proposals": 5, "approvals": 3, "ranks": 2, "profiles": 3, "users": 2}


def test_corpus_rejects_unknown_reference():
    from pairdiv.corpus import CorpusError, Proposal, RankRecord

    with pytest.raises(CorpusError):
        PreferenceCorpus(catalog=(Proposal(1, "x"),), ranks=(RankRecord("u", (1, 2), True, 5, None, EPOCH),))


def test_preflib_small(data_dir):
    corpus = parse_preflib_soc(data_dir / "soc_small.soc")
    assert len(corpus.ranks) == 5  # sum of multiplicities
    assert corpus.ranks[0].panel == (1, 3, 2) and corpus.ranks[1].panel == (1, 3, 2)
    assert len(set(corpus.user_ids)) == 5
    assert corpus.ranks[0].user_id.startswith("soc:")
    assert [p.text for p in corpus.catalog] == ["tuna", "salmon", "eel"]


def test_preflib_multiplicity_line(tmp_path):
    p = tmp_path / "x.soc"
    p.write_text("# NUMBER ALTERNATIVES: 3\n2: 1,3,2\n")
    corpus = parse_preflib_soc(p)
    assert [r.panel for r in corpus.ranks] == [(1, 3, 2), (1, 3, 2)]


@pytest.mark.parametrize("name", ["soc_repeat.soc", "soc_short.soc"])
def test_preflib_rejects_incomplete(data_dir, name):
    with pytest.raises(FormatError):
        parse_preflib_soc(data_dir / name)


def test_preflib_rejects_ties(tmp_path):
    p = tmp_path / "x.soc"
    p.write_text("# NUMBER ALTERNATIVES: 3\n1: 1,{2,3}\n")
    with pytest.raises(FormatError):
        parse_preflib_soc(p)
