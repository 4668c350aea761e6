from __future__ import annotations

import numpy as np
import pytest

from relu_prism import (
    Cluster,
    Dataset,
    ShapeError,
    cluster_of,
    clusters_to_json,
    effective_affine,
    forward_trace,
    partition,
)
from conftest import make_random_network


def brute_force_groups(net, X):
    """Independent per-row grouping: dict from pattern bitstring to row list."""
    groups = {}
    for i in range(X.shape[0]):
        key = forward_trace(net, X[i]).pattern.bitstring
        groups.setdefault(key, []).append(i)
    return groups


def random_dataset(rng, net, n):
    X = rng.uniform(-5, 5, (n, net.input_dim))
    t = rng.integers(0, 2, n)
    return Dataset(X, t, tuple(f"f{i}" for i in range(net.input_dim)))


class TestPartitionLaws:
    def test_singleton_dataset(self, rng):
        net = make_random_network(rng, d=3, widths=(2,))
        ds = random_dataset(rng, net, 1)
        clusters = partition(net, ds)
        assert len(clusters) == 1
        assert clusters[0].size == 1
        assert clusters[0].stats.fraction == 1.0

    def test_disjoint_cover_and_consistency(self, rng):
        net = make_random_network(rng, d=4, widths=(3, 2))
        ds = random_dataset(rng, net, 300)
        clusters = partition(net, ds)
        seen = np.concatenate([c.member_indices for c in clusters])
        assert len(seen) == 300
        assert len(np.unique(seen)) == 300
        for c in clusters:
            for i in c.member_indices[:5]:
                assert forward_trace(net, ds.features[i]).pattern == c.pattern

    def test_matches_brute_force_grouping(self, rng):
        net = make_random_network(rng, d=2, widths=(3, 2))
        ds = random_dataset(rng, net, 400)
        clusters = partition(net, ds)
        expected = brute_force_groups(net, ds.features)
        assert len(clusters) == len(expected)
        for c in clusters:
            np.testing.assert_array_equal(
                c.member_indices, expected[c.pattern.bitstring]
            )

    def test_canonical_order(self, rng):
        net = make_random_network(rng, d=3, widths=(3,))
        ds = random_dataset(rng, net, 500)
        clusters = partition(net, ds)
        keys = [(-c.size, c.pattern.bitstring) for c in clusters]
        assert keys == sorted(keys)

    def test_shuffle_yields_same_clusters(self, rng):
        net = make_random_network(rng, d=3, widths=(2, 2))
        ds = random_dataset(rng, net, 200)
        perm = rng.permutation(200)
        shuffled = ds.take(perm)
        a = partition(net, ds)
        b = partition(net, shuffled)
        assert [c.pattern for c in a] == [c.pattern for c in b]
        assert [c.size for c in a] == [c.size for c in b]
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(
                np.sort(perm[cb.member_indices]), ca.member_indices
            )
            np.testing.assert_array_equal(ca.affine.omega, cb.affine.omega)

    def test_stats_rates(self):
        net = make_random_network(np.random.default_rng(7), d=2, widths=(2,))
        ds = random_dataset(np.random.default_rng(8), net, 100)
        for c in partition(net, ds):
            logits = c.affine.apply(ds.features[c.member_indices])[:, 0]
            assert c.stats.predicted_positive_rate == pytest.approx(
                (logits > 0).mean(), abs=1e-12
            )
            assert c.stats.target_positive_rate == pytest.approx(
                ds.targets[c.member_indices].mean()
            )

    def test_zero_omega_cluster_predicts_one_class(self, rng):
        # force the all-inactive pattern by shifting inputs far negative
        net = make_random_network(rng, d=2, widths=(3,))
        X = rng.uniform(-100, -50, (50, 2))
        ds = Dataset(X, np.zeros(50, dtype=int), ("a", "b"))
        clusters = partition(net, ds)
        for c in clusters:
            if not c.affine.omega.any():
                rate = c.stats.predicted_positive_rate
                assert rate in (0.0, 1.0)

    def test_dimension_mismatch(self, rng):
        net = make_random_network(rng, d=3, widths=(2,))
        ds = random_dataset(rng, make_random_network(rng, d=4, widths=(2,)), 10)
        with pytest.raises(ShapeError):
            partition(net, ds)

    def test_requires_scalar_output(self, rng):
        net = make_random_network(rng, d=3, widths=(2,), q=2)
        ds = random_dataset(rng, net, 10)
        with pytest.raises(ShapeError):
            partition(net, ds)


class TestClusterType:
    def test_member_indices_must_increase(self, rng):
        net = make_random_network(rng, d=2, widths=(2,))
        ds = random_dataset(rng, net, 20)
        c = partition(net, ds)[0]
        with pytest.raises(ShapeError):
            Cluster(c.pattern, np.array([3, 1]), c.affine, c.stats)
        with pytest.raises(ShapeError):
            Cluster(c.pattern, np.array([], dtype=int), c.affine, c.stats)


class TestClusterOf:
    def test_finds_member_cluster(self, rng):
        net = make_random_network(rng, d=3, widths=(2, 2))
        ds = random_dataset(rng, net, 150)
        clusters = partition(net, ds)
        for i in (0, 50, 149):
            c = cluster_of(clusters, net, ds.features[i])
            assert c is not None
            assert i in c.member_indices

    def test_unseen_pattern_returns_none(self):
        # single hidden unit: the dataset only realizes the active side
        from relu_prism import Layer, Network

        net = Network((Layer([[1.0]], [0.0]), Layer([[1.0]], [0.0])))
        ds = Dataset([[1.0], [2.0]], [0, 1], ("x",))
        clusters = partition(net, ds)
        assert len(clusters) == 1
        assert cluster_of(clusters, net, [-1.0]) is None

    def test_stable_under_interior_perturbation(self, rng):
        net = make_random_network(rng, d=3, widths=(3,))
        ds = random_dataset(rng, net, 100)
        clusters = partition(net, ds)
        u = ds.features[0]
        trace = forward_trace(net, u)
        margin = min(abs(z) for z in trace.preactivations[0])
        if margin == 0.0:
            pytest.skip("input sits exactly on a boundary")
        base = cluster_of(clusters, net, u)
        nudged = cluster_of(clusters, net, u + margin * 1e-6)
        assert nudged is base


def test_clusters_to_json_round_trip(rng):
    net = make_random_network(rng, d=2, widths=(2,))
    ds = random_dataset(rng, net, 60)
    clusters = partition(net, ds)
    doc = clusters_to_json(clusters)
    assert len(doc) == len(clusters)
    assert abs(sum(entry["fraction"] for entry in doc) - 1.0) < 1e-9
    for entry, c in zip(doc, clusters):
        assert entry["pattern"] == c.pattern.bitstring
        assert entry["size"] == c.size
        np.testing.assert_array_equal(entry["omega"], c.affine.omega)
        expected = effective_affine(net, c.pattern)
        np.testing.assert_array_equal(entry["omega"], expected.omega)
