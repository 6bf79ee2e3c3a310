import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_entropy
from ckge.errors import EmptyInput
from ckge.model import TransE
from ckge.sampler import (difficulty_replay, replay_distribution, sample_replay, triple_entropies,
                          triple_entropy, uniform_replay)


def test_uniform_scores_give_log_c():
    ent = np.tile([[0.3, -0.2, 0.9]], (12, 1))
    m = TransE(ent, np.array([[0.1, 0.1, 0.1]]))
    assert abs(triple_entropy(m, (0, 0, 1)) - math.log(12)) <= 1e-10
    assert abs(triple_entropy(m, (0, 0, 1), candidates=[2, 3, 4]) - math.log(3)) <= 1e-10


def test_dominant_candidate_gives_zero_entropy():
    ent = np.zeros((5, 2))
    ent[1:] = [[1e3, 0], [0, 1e3], [-1e3, 0], [0, -1e3]]
    m = TransE(ent, np.zeros((1, 2)))
    assert triple_entropy(m, (0, 0, 0)) < 1e-10


def test_entropy_matches_direct_summation(rng):
    m = TransE.random(20, 3, 6, 5)
    tri = np.stack([rng.integers(0, 20, 25), rng.integers(0, 3, 25), rng.integers(0, 20, 25)], 1)
    got = triple_entropies(m, tri)
    for g, t in zip(got, tri.tolist()):
        assert abs(g - brute_entropy(m.ent, m.rel, t, range(20))) <= 1e-10
    cands = [1, 4, 9, 16]
    got = triple_entropies(m, tri, candidates=cands)
    for g, t in zip(got, tri.tolist()):
        assert abs(g - brute_entropy(m.ent, m.rel, t, cands)) <= 1e-10


def test_distribution_examples():
    assert replay_distribution([0.7, 0.7]).tolist() == [0.5, 0.5]
    p = replay_distribution([math.log(2), 0.0])
    assert p[0] == pytest.approx(2 / 3, abs=1e-15) and p[1] == pytest.approx(1 / 3, abs=1e-15)
    with pytest.raises(EmptyInput):
        replay_distribution([])


def test_distribution_normalized_monotone_shift_invariant(rng):
    h = rng.uniform(0, 8, 10_000)
    p = replay_distribution(h)
    assert abs(p.sum() - 1) <= 1e-9
    order = np.argsort(h, kind="stable")
    assert np.all(np.diff(p[order]) >= 0)
    assert np.max(np.abs(replay_distribution(h + 123.4) - p)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=1, max_size=50), st.floats(-50, 50))
def test_distribution_properties(h, c):
    p = replay_distribution(h)
    assert abs(p.sum() - 1) <= 1e-9
    assert np.max(np.abs(replay_distribution(np.array(h) + c) - p)) <= 1e-12
    for i in range(len(h)):
        for j in range(len(h)):
            if h[i] < h[j]:
                assert p[i] <= p[j]


def test_sample_replay_edges(rng):
    tri = np.arange(30).reshape(10, 3)
    p = np.full(10, 0.1)
    full = sample_replay(p, tri, 50, rng)
    assert sorted(map(tuple, full.triples.tolist())) == sorted(map(tuple, tri.tolist()))
    assert len(sample_replay(p, tri, 0, rng)) == 0
    part = sample_replay(p, tri, 6, rng)
    assert len({tuple(t) for t in part.triples.tolist()}) == 6


def test_dominant_mass_frequency(rng):
    tri = np.arange(30).reshape(10, 3)
    p = np.full(10, 0.01 / 9)
    p[3] = 0.99
    trials = 10_000
    hits = sum(sample_replay(p, tri, 1, rng).triples[0, 0] == 9 for _ in range(trials))
    sigma = math.sqrt(trials * 0.99 * 0.01)
    assert abs(hits - 0.99 * trials) <= 3 * sigma


def test_difficulty_and_uniform_replay(rng):
    m = TransE.random(15, 2, 4, 0)
    tri = np.stack([rng.integers(0, 15, 40), rng.integers(0, 2, 40), rng.integers(0, 15, 40)], 1)
    rep = difficulty_replay(m, tri, 30, rng)
    assert len(rep) == 30 and np.all(rep.entropies >= 0)
    assert len(uniform_replay(tri, 5, rng)) == 5
    assert len(difficulty_replay(m, tri, 10, rng, n_candidates=5)) == 10
