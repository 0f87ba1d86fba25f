from datetime import timedelta
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_records, random_choices
from pairdiv.corpus import EPOCH, ApprovalRecord, RankRecord
from pairdiv.pairwise import (
    PairId, PairwiseRecords, approvals_to_pairs, build_tally, consistency, ranks_to_pairs, read_pairs,
    transitivity, write_pairs,
)

A, B, C, D = 1, 2, 3, 4


def _approval(user, pid, agree, t=0):
    return ApprovalRecord(user, pid, agree, 5, None, EPOCH + timedelta(seconds=t))


def _panel(user, panel, t=0):
    return RankRecord(user, tuple(panel), True, 5, None, EPOCH + timedelta(seconds=t))


def _pairs(records):
    return sorted((r.winner, r.loser) for r in records)


def test_pair_id():
    assert str(PairId.of(9, 3)) == "3-9"
    assert PairId.parse("3-9") == PairId(3, 9)
    with pytest.raises(ValueError):
        PairId(4, 4)


def test_approvals_cross_product():
    recs = approvals_to_pairs([_approval("u", A, 1), _approval("u", B, 1), _approval("u", C, -1),
                               _approval("u", D, -1)], [A, B, C, D])
    assert _pairs(recs) == [(A, C), (A, D), (B, C), (B, D)]
    assert set(recs.source) == {0}


def test_all_approved_gives_nothing():
    assert len(approvals_to_pairs([_approval("u", A, 1), _approval("u", B, 1)], [A, B])) == 0


def test_abstention_omitted():
    recs = approvals_to_pairs([_approval("u", A, 1), _approval("u", B, 0), _approval("u", C, -1)], [A, B, C])
    assert _pairs(recs) == [(A, C)]


def test_panel_expansion():
    recs = ranks_to_pairs([_panel("u", [A, B, C, D])], [A, B, C, D])
    assert len(recs) == 6
    assert (B, C) in _pairs(recs) and (B, D) in _pairs(recs)
    assert len(ranks_to_pairs([_panel("u", [A])], [A])) == 0
    assert _pairs(ranks_to_pairs([_panel("u", [B, A])], [A, B])) == [(B, A)]


def test_no_cross_panel_transitivity():
    recs = ranks_to_pairs([_panel("u", [A, B]), _panel("u", [B, C], 1)], [A, B, C])
    assert _pairs(recs) == [(A, B), (B, C)]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.permutations(list(range(1, 7))).flatmap(
    lambda p: st.integers(1, 6).map(lambda k: p[:k])), min_size=1, max_size=8))
def test_panel_sizes(panels):
    ranks = [_panel(f"u{k % 3}", p, k) for k, p in enumerate(panels)]
    recs = ranks_to_pairs(ranks, range(1, 7))
    assert len(recs) == sum(comb(len(p), 2) for p in panels)
    # every pair comes from one panel where the winner is listed first
    for rec, panel_idx in zip(recs, recs.panel):
        panel = panels[panel_idx]
        assert panel.index(rec.winner) < panel.index(rec.loser)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.integers(1, 6), st.sampled_from([-1, 0, 1]), min_size=1))
def test_approval_count_property(votes):
    recs = approvals_to_pairs([_approval("u", p, a) for p, a in votes.items()], range(1, 7))
    yes = sum(a == 1 for a in votes.values())
    no = sum(a == -1 for a in votes.values())
    assert len(recs) == yes * no


def test_tally_basics():
    empty = PairwiseRecords.empty([1, 2, 3])
    assert build_tally(empty).x.sum() == 0
    t = build_tally(make_records([("u", A, B)], [A, B]))
    assert t.x[0, 1] == 1 and t.x[1, 0] == 0


def test_tally_counts_and_linearity():
    rng = np.random.default_rng(3)
    r1 = make_records(random_choices(rng, 5, 4, 10), [1, 2, 3, 4, 5])
    r2 = make_records(random_choices(rng, 5, 4, 7), [1, 2, 3, 4, 5])
    assert build_tally(r1).x.sum() == 10
    both = PairwiseRecords.concat([r1, r2])
    assert np.array_equal(build_tally(both).x, (build_tally(r1) + build_tally(r2)).x)


def test_tally_rejects_out_of_range():
    with pytest.raises(ValueError):
        build_tally(make_records([("u", 1, 3)], [1, 2, 3]), n=2)


def test_tally_skips_ties():
    from pairdiv.pairwise import PairwiseRecord

    recs = PairwiseRecords.from_records([
        PairwiseRecord("u", PairId(1, 2), "none", "approval"),
        PairwiseRecord("u", PairId(1, 2), "low", "approval"),
    ])
    assert build_tally(recs).x.sum() == 1


def test_consistency_cells():
    assert consistency(make_records([("u", A, B)] * 3)).value == 1.0
    r = consistency(make_records([("u", A, B)] * 3 + [("u", B, A)]))
    assert r.value == 0.75
    assert not consistency(make_records([("u", A, B), ("u", A, C)])).defined


def test_consistency_pairwise_mode():
    r = consistency(make_records([("u", A, B)] * 3 + [("u", B, A)]), method="pairwise")
    assert r.value == pytest.approx(3 / 6)


def test_consistency_matches_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        ch = random_choices(rng, 4, 3, 25)
        recs = make_records(ch, [1, 2, 3, 4])
        assert consistency(recs).value == pytest.approx(oracles.modal_consistency(ch), abs=1e-12)


def test_transitivity_worked_example():
    ch = [("u", A, B)] * 5 + [("u", B, C)] * 5 + [("u", A, C), ("u", C, A)]
    assert transitivity(make_records(ch)).value == 0.5
    assert oracles.transitivity_triplet(5, 0, 5, 0, 1, 1) == 0.5


def test_transitivity_linear_and_cycle():
    assert transitivity(make_records([("u", A, B), ("u", B, C), ("u", A, C)])).value == 1.0
    assert transitivity(make_records([("u", A, B), ("u", B, C), ("u", C, A)])).value == 0.0


def test_transitivity_skips_single_panel_triplets():
    ranks = [_panel("u", [A, B, C])]
    recs = ranks_to_pairs(ranks, [A, B, C])
    assert not transitivity(recs).defined
    # the same relations spread over three panels do count
    spread = ranks_to_pairs([_panel("u", [A, B]), _panel("u", [B, C], 1), _panel("u", [A, C], 2)], [A, B, C])
    assert transitivity(spread).value == 1.0


def test_transitivity_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(30):
        counts = rng.integers(0, 4, size=6)
        counts[[0, 2, 4]] += 1
        ab, ba, bc, cb, ac, ca = (int(c) for c in counts)
        ch = [("u", A, B)] * ab + [("u", B, A)] * ba + [("u", B, C)] * bc + [("u", C, B)] * cb \
            + [("u", A, C)] * ac + [("u", C, A)] * ca
        got = transitivity(make_records(ch)).value
        assert got == pytest.approx(float(oracles.transitivity_triplet(ab, ba, bc, cb, ac, ca)), abs=1e-12)


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(8)
    ch = random_choices(rng, 5, 3, 40)
    perm = [ch[i] for i in rng.permutation(len(ch))]
    a, b = make_records(ch, range(1, 6)), make_records(perm, range(1, 6))
    assert consistency(a).value == pytest.approx(consistency(b).value)
    assert transitivity(a).value == pytest.approx(transitivity(b).value)


def test_pairs_table_round_trip(tmp_path):
    recs = ranks_to_pairs([_panel("u1", [3, 1, 2]), _panel("u2", [2, 1], 5)], [1, 2, 3])
    write_pairs(recs, tmp_path / "p.csv")
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert "card_id" in header and "option_a_sorted" in header
    back = read_pairs(tmp_path / "p.csv", [1, 2, 3])
    assert [(r.user_id, str(r.pair), r.selected) for r in back] == [
        (r.user_id, str(r.pair), r.selected) for r in recs]
