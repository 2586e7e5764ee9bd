import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockgcl.graph import dense_normalized_adjacency, generate_sbm, normalized_adjacency
from blockgcl.linalg import DimensionError, glorot_init, make_rng, matmul, spmm


def test_spmm_identity_gives_adjacency_rows(path3):
    out = spmm(normalized_adjacency(path3), np.eye(3))
    np.testing.assert_allclose(out, dense_normalized_adjacency(3, path3.edges), atol=1e-15)
    assert out[0, 1] == pytest.approx(1 / np.sqrt(6))


def test_spmm_zero(path3):
    out = spmm(normalized_adjacency(path3), np.zeros((3, 4)))
    assert out.shape == (3, 4) and not out.any()


def test_spmm_linearity(small_sbm):
    a = normalized_adjacency(small_sbm)
    rng = make_rng(0)
    x, y = rng.normal(size=(100, 3)), rng.normal(size=(100, 2))
    np.testing.assert_array_equal(spmm(a, np.hstack([x, y])), np.hstack([spmm(a, x), spmm(a, y)]))


def test_spmm_dimension_mismatch(path3):
    with pytest.raises(DimensionError):
        spmm(normalized_adjacency(path3), np.ones((4, 2)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 8), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**31))
def test_spmm_matches_dense(blocks, per_block, p_in, p_out, seed):
    g = generate_sbm(blocks, per_block, p_in, p_out, 3, seed=seed)
    x = make_rng(seed, 5).normal(size=(g.num_nodes, 3))
    dense = dense_normalized_adjacency(g.num_nodes, g.edges) @ x
    np.testing.assert_allclose(spmm(normalized_adjacency(g), x), dense, rtol=0, atol=1e-10)


def test_matmul_examples():
    a = np.array([[1.0, 2], [3, 4]])
    np.testing.assert_array_equal(matmul(a, np.eye(2)), a)
    np.testing.assert_array_equal(matmul(a, np.ones((2, 1)), transpose_a=True), [[4], [6]])
    v = np.array([[1.0], [-1.0]])
    np.testing.assert_array_equal(matmul(v, v, transpose_a=True), [[2]])
    np.testing.assert_array_equal(matmul(a, a, transpose_b=True), a @ a.T)


def test_matmul_mismatch():
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_glorot_deterministic_and_bounded():
    a = glorot_init(4, 4, make_rng(9))
    b = glorot_init(4, 4, make_rng(9))
    np.testing.assert_array_equal(a, b)
    w = glorot_init(100, 100, make_rng(9))
    assert np.abs(w).max() <= np.sqrt(6 / 200)


def test_glorot_mean_within_three_sigma():
    w = glorot_init(1000, 1000, make_rng(3))
    bound = np.sqrt(6 / 2000)
    sigma_mean = bound / np.sqrt(3) / np.sqrt(w.size)
    assert abs(w.mean()) <= 3 * sigma_mean


def test_glorot_dtype():
    assert glorot_init(2, 3, make_rng(0), dtype=np.float32).dtype == np.float32
    with pytest.raises(DimensionError):
        glorot_init(0, 3, make_rng(0))


def test_rng_streams_independent_and_replayable():
    a = make_rng(1, 0).random(5)
    assert not np.array_equal(a, make_rng(1, 1).random(5))
    np.testing.assert_array_equal(a, make_rng(1, 0).random(5))
