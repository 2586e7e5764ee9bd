import numpy as np
import pytest

from blockgcl.augment import (
    AugmentationSpec,
    clean_view,
    drop_edges,
    make_views,
    mask_features,
)
from blockgcl.graph import GraphDataset, dense_normalized_adjacency, generate_sbm
from blockgcl.linalg import make_rng


def cora_sized_graph(seed=0) -> GraphDataset:
    """Random graph with Cora's node, undirected edge and feature counts."""
    rng = make_rng(seed, 3)
    n, e = 2708, 5278
    pairs = set()
    while len(pairs) < e:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    labels = np.arange(n) % 7
    return GraphDataset(
        features=(rng.random((n, 1433)) < 0.013).astype(float),
        labels=labels,
        edges=np.array(sorted(pairs)),
        split=np.where(np.arange(n) < 140, "train", "test"),
        name="cora-sized",
    )


@pytest.fixture(scope="module")
def big():
    return cora_sized_graph()


def test_drop_p0_and_p1(small_sbm):
    np.testing.assert_array_equal(drop_edges(small_sbm, 0.0, make_rng(0)), small_sbm.edges)
    assert len(drop_edges(small_sbm, 1.0, make_rng(0))) == 0


def test_drop_all_gives_identity_adjacency(small_sbm):
    spec = AugmentationSpec(1.0, 0.0)
    va, _ = make_views(small_sbm, spec, make_rng(0))
    np.testing.assert_array_equal(va.adjacency.toarray(), np.eye(small_sbm.num_nodes))


def test_drop_survivors_binomial(big):
    assert big.num_edges == 5278
    kept = len(drop_edges(big, 0.9, make_rng(4)))
    mean, sigma = 5278 * 0.1, np.sqrt(5278 * 0.1 * 0.9)
    assert abs(kept - mean) <= 3 * sigma


def test_drop_keeps_edges_whole(small_sbm):
    kept = drop_edges(small_sbm, 0.5, make_rng(1))
    assert np.all(kept[:, 0] < kept[:, 1])
    original = {tuple(e) for e in small_sbm.edges}
    assert {tuple(e) for e in kept} <= original


def test_mask_p0_p1():
    x = make_rng(0).normal(size=(5, 7))
    np.testing.assert_array_equal(mask_features(x, 0.0, make_rng(0)), x)
    assert not mask_features(x, 1.0, make_rng(0)).any()


def test_mask_columns_binomial_and_shared():
    x = make_rng(0).normal(size=(20, 1433)) + 5.0  # no accidental zeros
    out = mask_features(x, 0.4, make_rng(8))
    zero_cols = np.all(out == 0, axis=0)
    touched = np.any(out != x, axis=0)
    np.testing.assert_array_equal(zero_cols, touched)
    mean, sigma = 1433 * 0.4, np.sqrt(1433 * 0.4 * 0.6)
    assert abs(zero_cols.sum() - mean) <= 3 * sigma


def test_mask_per_entry():
    x = np.ones((200, 50))
    out = mask_features(x, 0.3, make_rng(2), per_entry=True)
    assert not np.all(out == 0, axis=0).any()
    rate = 1 - out.mean()
    assert abs(rate - 0.3) <= 3 * np.sqrt(0.3 * 0.7 / x.size)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_probability_range(small_sbm, p):
    with pytest.raises(ValueError):
        drop_edges(small_sbm, p, make_rng(0))
    with pytest.raises(ValueError):
        AugmentationSpec(p, 0.0)


def test_views_zero_spec_equal_original(small_sbm):
    va, vb = make_views(small_sbm, AugmentationSpec(0.0, 0.0), make_rng(0))
    clean = clean_view(small_sbm)
    for v in (va, vb):
        np.testing.assert_array_equal(v.adjacency.toarray(), clean.adjacency.toarray())
        np.testing.assert_array_equal(v.features, clean.features)


def test_views_replay(small_sbm):
    spec = AugmentationSpec(0.5, 0.3)
    a = make_views(small_sbm, spec, make_rng(5))
    b = make_views(small_sbm, spec, make_rng(5))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.edges, y.edges)
        np.testing.assert_array_equal(x.features, y.features)


def test_views_differ_across_seeds(big):
    spec = AugmentationSpec(0.9, 0.4)
    differ = 0
    for seed in range(100):
        va, vb = make_views(big, spec, make_rng(seed))
        differ += not np.array_equal(va.edges, vb.edges)
    assert differ >= 99


def test_view_normalization_uses_surviving_degrees():
    g = generate_sbm(2, 6, 0.6, 0.2, 3, seed=4)
    for seed in range(20):
        va, vb = make_views(g, AugmentationSpec(0.5, 0.0), make_rng(seed))
        for v in (va, vb):
            dense = dense_normalized_adjacency(g.num_nodes, v.edges)
            np.testing.assert_allclose(v.adjacency.toarray(), dense, rtol=0, atol=1e-12)
            assert (v.adjacency != v.adjacency.T).nnz == 0
