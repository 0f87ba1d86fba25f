import numpy as np
import pytest

from pairdiv.pairwise import consistency, corpus_to_pairs
from pairdiv.synthgen import ElectorateSpec, bloc_orders, generate, read_spec, spec_from_mapping


def test_deterministic():
    spec = ElectorateSpec(10, 30, "two-bloc", divisive={1, 2}, noise=0.1, seed=4)
    assert generate(spec) == generate(spec)
    assert generate(spec) != generate(spec.with_seed(5))


def test_shape():
    spec = ElectorateSpec(10, 7, panel_size=4, panels_per_user=3)
    c = generate(spec)
    assert len(c.ranks) == 21
    assert all(len(r.panel) == 4 and len(set(r.panel)) == 4 for r in c.ranks)
    assert len(c.profiles) == 7
    assert c.summary()["users"] == 7


def test_transitive_no_noise_follows_id_order():
    c = generate(ElectorateSpec(8, 20, "transitive-noise", noise=0.0, seed=1))
    assert all(list(r.panel) == sorted(r.panel) for r in c.ranks)
    assert consistency(corpus_to_pairs(c, "rank")).value == 1.0


def test_bloc_orders():
    o = bloc_orders(ElectorateSpec(5, 2, "two-bloc", divisive={2, 4}))
    assert o["A"].tolist() == [2, 4, 1, 3, 5]
    assert o["B"].tolist() == [1, 3, 5, 4, 2]


def test_two_bloc_labels_and_fraction():
    c = generate(ElectorateSpec(6, 400, "two-bloc", divisive={1}, bloc_fraction=0.7, seed=2))
    labels = np.array([p.politics for p in c.profiles.values()])
    assert set(labels) <= {1, 4}
    assert abs(np.mean(labels == 4) - 0.7) < 0.07


def test_validation():
    with pytest.raises(ValueError):
        ElectorateSpec(5, 10, "two-bloc")
    with pytest.raises(ValueError):
        ElectorateSpec(5, 10, divisive={9})
    with pytest.raises(ValueError):
        ElectorateSpec(5, 10, model="bogus")
    with pytest.raises(ValueError):
        ElectorateSpec(5, 10, panel_size=6)


def test_spec_file(data_dir):
    spec = read_spec(data_dir / "two_bloc.spec")
    assert spec == ElectorateSpec(12, 80, "two-bloc", divisive={1, 2}, noise=0.05, seed=7)


def test_spec_ranges_and_unknown_keys():
    assert spec_from_mapping({"n_proposals": "6", "n_users": "3", "model": "two-bloc",
                              "divisive": "1-3,5"}).divisive == {1, 2, 3, 5}
    with pytest.raises(ValueError, match="unknown"):
        spec_from_mapping({"n_proposals": "6", "n_users": "3", "colour": "red"})
