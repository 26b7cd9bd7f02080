import numpy as np
import pytest

from driftlens.embedding_store import Snapshot
from driftlens.errors import AbsentWordError
from driftlens.neighbors import NeighborSet, nearest_neighbors, neighbor_union

import oracles
from conftest import random_orthogonal, random_snapshot


def ns(query, words):
    return NeighborSet(query, "0", tuple((w, 0.0) for w in words))


class TestNearest:
    def test_hand_geometry(self):
        b = np.array([0.9, 0.1]) / np.linalg.norm([0.9, 0.1])
        s = Snapshot("0", ("a", "b", "c"), np.array([[1.0, 0.0], b, [0.0, 1.0]]))
        assert nearest_neighbors(s, "a", 1).words == ["b"]

    def test_brute_force_oracle(self, rng):
        s = random_snapshot(rng, n=50, dim=6)
        vec = oracles.as_dict(s)
        for w in s.vocab:
            got = nearest_neighbors(s, w, 10)
            assert got.words == oracles.knn(vec, s.vocab, w, 10)
            want = [oracles.cos(vec[w], vec[x]) for x in got.words]
            np.testing.assert_allclose(got.similarities, want, atol=1e-12)

    def test_exhaustive_k(self, rng):
        s = random_snapshot(rng, n=12, dim=3)
        got = nearest_neighbors(s, "w0", 11)
        assert sorted(got.words) == sorted(s.vocab[1:])
        assert np.all(np.diff(got.similarities) <= 0)

    def test_invariants(self, rng):
        s = random_snapshot(rng, n=30, dim=4)
        got = nearest_neighbors(s, "w3", 8)
        assert "w3" not in got.words
        assert len(set(got.words)) == 8
        assert np.all(np.abs(got.similarities) <= 1.0)

    def test_ties_by_vocab_order(self):
        s = Snapshot("0", ("q", "z", "y", "x"), np.array([[1.0, 0], [0, 1], [0, 1], [0, 1]]))
        assert nearest_neighbors(s, "q", 2).words == ["z", "y"]

    def test_absent_never_a_neighbor(self):
        s = Snapshot("0", ("a", "b", "c"), np.array([[1.0, 0], [0.0, 0], [0, 1]]))
        assert nearest_neighbors(s, "a", 1).words == ["c"]
        with pytest.raises(AbsentWordError):
            nearest_neighbors(s, "b", 1)
        with pytest.raises(ValueError, match="k=2"):
            nearest_neighbors(s, "a", 2)

    @pytest.mark.parametrize("k", [0, 30])
    def test_k_out_of_range(self, rng, k):
        s = random_snapshot(rng, n=30, dim=4)
        with pytest.raises(ValueError, match="out of range"):
            nearest_neighbors(s, "w0", k)

    def test_orthogonal_invariance(self, rng):
        s = random_snapshot(rng, n=40, dim=5)
        r = s.with_matrix(s.matrix @ random_orthogonal(5, rng))
        for w in s.vocab:
            assert nearest_neighbors(s, w, 7).words == nearest_neighbors(r, w, 7).words

    def test_cosine_matches_euclidean_on_unit_rows(self, rng):
        s = random_snapshot(rng, n=40, dim=5)
        u = s.matrix / np.linalg.norm(s.matrix, axis=1, keepdims=True)
        s = s.with_matrix(u)
        dist = np.linalg.norm(u - u[0], axis=1)
        dist[0] = np.inf
        want = [s.vocab[i] for i in np.argsort(dist, kind="stable")[:9]]
        assert nearest_neighbors(s, "w0", 9).words == want


class TestUnion:
    def test_dedup_order(self):
        assert neighbor_union(ns("q", "xy"), ns("q", "yz")) == ["x", "y", "z"]

    def test_idempotent(self):
        assert neighbor_union(ns("q", "abc"), ns("q", "abc")) == ["a", "b", "c"]

    def test_disjoint(self):
        assert len(neighbor_union(ns("q", "abc"), ns("q", "def"))) == 6

    def test_query_mismatch(self):
        with pytest.raises(ValueError, match="different words"):
            neighbor_union(ns("q", "a"), ns("r", "a"))
