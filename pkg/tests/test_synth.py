import numpy as np
import pytest

from driftlens.alignment import AlignedSeries, align_series
from driftlens.measures import score_all, standardize
from driftlens.neighbors import nearest_neighbors
from driftlens.synth import (SynthTruth, auc, generate_series, make_scenario, plant_cultural, plant_drift,
                             plant_instability, select_drift_words, separation)


def small(seed=0, **kw):
    args = dict(n_words=300, dim=40, n_clusters=10, n_decades=3, seed=seed)
    args.update(kw)
    return generate_series(**args)


class TestGenerate:
    def test_deterministic(self):
        a, ta = small(3)
        b, tb = small(3)
        for x, y in zip(a, b):
            assert x.matrix.tobytes() == y.matrix.tobytes()
        assert ta.clusters.tolist() == tb.clusters.tolist()

    def test_single_decade(self):
        snaps, _ = small(n_decades=1)
        assert len(snaps) == 1

    def test_nearest_centroid_recovers_cluster(self):
        snaps, truth = small(1)
        pred = np.argmax(snaps[0].matrix @ truth.centroids.T, axis=1)
        assert np.mean(pred == truth.clusters) >= 0.98

    def test_unplanted_words_barely_move(self):
        snaps, _ = small(2)
        cos = np.einsum("ij,ij->i", snaps[0].matrix, snaps[1].matrix)
        assert np.all(cos > 0.99) and np.all(cos < 1.0)

    @pytest.mark.parametrize("kw", [dict(n_clusters=1), dict(n_words=50, n_clusters=10), dict(jitter=-1.0)])
    def test_infeasible(self, kw):
        with pytest.raises(ValueError):
            small(**kw)


class TestCultural:
    def test_mix_zero(self):
        snaps, truth = small()
        out = plant_cultural(snaps, truth, "w0001", (truth.cluster_of("w0001") + 1) % 10, 0.0)
        assert all(x is y for x, y in zip(out, snaps))
        assert truth.change_type["w0001"] == "none"

    def test_same_cluster(self):
        snaps, truth = small()
        with pytest.raises(ValueError, match="home cluster"):
            plant_cultural(snaps, truth, "w0001", truth.cluster_of("w0001"), 1.0)

    def test_full_mix_replaces_neighbors(self):
        snaps, truth = small(4)
        w = "w0007"
        target = (truth.cluster_of(w) + 3) % 10
        out = plant_cultural(snaps, truth, w, target, 1.0, start=1)
        before = set(nearest_neighbors(out[0], w, 25).words)
        after = nearest_neighbors(out[1], w, 25).words
        assert len(before & set(after)) <= 1
        assert np.mean([truth.cluster_of(x) == target for x in after]) >= 0.9
        assert truth.change_type[w] == "cultural" and truth.magnitude[w] == 1.0 and truth.start[w] == 1

    def test_local_change_is_extreme(self):
        snaps, truth = small(5, n_decades=2)
        w = "w0011"
        snaps = plant_cultural(snaps, truth, w, (truth.cluster_of(w) + 1) % 10, 1.0)
        t = score_all(AlignedSeries.unaligned(snaps), k=25)
        planted = t.d_local[t.word.index(w)]
        others = np.array([d for x, d in zip(t.word, t.d_local) if x != w])
        assert planted > np.percentile(others, 95)


class TestDrift:
    def setup_method(self):
        self.snaps, self.truth = small(6, jitter=0.0, n_clusters=16, n_words=480)
        self.words = select_drift_words(self.snaps[1], self.truth.words[::7], 20)

    def test_step_zero(self):
        out = plant_drift(self.snaps, self.truth, self.words, 0.0)
        assert all(x is y for x, y in zip(out, self.snaps))

    def test_neighbors_kept_while_vectors_move(self):
        out = plant_drift(self.snaps, self.truth, self.words, 0.4)
        series = AlignedSeries.unaligned(out)
        t = score_all(series, k=25, words=self.words)
        assert np.all(t.d_global > 0.01)
        for w in self.words:
            sets = [nearest_neighbors(s, w, 25).words for s in out]
            assert all(set(s) == set(sets[0]) for s in sets)
        assert self.truth.of_type("drift") == sorted(self.words, key=self.truth.words.index)

    def test_similarity_profile_only_scales(self):
        out = plant_drift(self.snaps, self.truth, self.words, 0.4)
        w = self.words[0]
        a = nearest_neighbors(out[0], w, 25).similarities
        b = np.array([dict(nearest_neighbors(out[1], w, 25).entries)[x]
                      for x in nearest_neighbors(out[0], w, 25).words])
        np.testing.assert_allclose(b, a / np.sqrt(1 + 0.4 ** 2), atol=1e-9)

    def test_large_step_rejected(self):
        with pytest.raises(ValueError, match="neighbor set of"):
            plant_drift(self.snaps, self.truth, self.words, 3.0)

    def test_too_many_drift_words(self):
        snaps, truth = small(0, n_clusters=10, n_words=500, dim=50)
        with pytest.raises(ValueError, match="drift words fit"):
            select_drift_words(snaps[1], truth.words, 200)


def test_instability_keeps_type():
    snaps, truth = small(7)
    out = plant_instability(snaps, truth, ["w0002"], 1.0)
    assert truth.change_type["w0002"] == "none" and truth.unstable == [("w0002", 1.0)]
    i = out[1].row_index("w0002")
    assert out[1].matrix[i] @ snaps[1].matrix[i] == pytest.approx(np.cos(1.0), abs=1e-12)


def test_planted_types_disjoint():
    snaps, truth = small(8)
    w = "w0003"
    snaps = plant_cultural(snaps, truth, w, (truth.cluster_of(w) + 1) % 10, 1.0)
    with pytest.raises(ValueError, match="already planted"):
        truth._mark(w, "drift", 0.1, 1)


def test_scenario_z_contrast():
    sc = make_scenario(seed=3)
    series = align_series(sc.snapshots)
    t = standardize(score_all(series, k=25))
    sep = separation(t, sc.truth, series.labels)
    assert sep["zdiff_cultural"] > 0 and sep["zdiff_drift"] < 0
    assert sep["auc_local_cultural"] >= 0.95 and sep["auc_global_drift"] >= 0.9
    assert len(sc.truth.of_type("cultural")) == 10 and len(sc.truth.of_type("drift")) == 50
    assert sc.pos.get(sc.truth.of_type("cultural")[0]) == "NOUN"


def test_auc():
    assert auc([3, 4], [1, 2]) == 1.0
    assert auc([1], [1]) == 0.5
    assert auc([1, 2], [2, 3]) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        auc([], [1])


def test_truth_tsv(tmp_path):
    sc = make_scenario(seed=1, n_drift=5, n_unstable=0)
    labels = [s.time_label for s in sc.snapshots]
    sc.truth.to_tsv(tmp_path / "truth.tsv", labels)
    rows = SynthTruth.read_tsv(tmp_path / "truth.tsv")
    assert len(rows) == 500
    kinds = {r["type"] for r in rows.values()}
    assert kinds == {"none", "cultural", "drift"}
    w = sc.truth.of_type("drift")[0]
    assert rows[w]["decade"] == labels[1]
