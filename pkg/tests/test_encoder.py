import json
import struct

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import central_difference, rel_error

from blockgcl.encoder import (
    BlockEncoder,
    GcnLayer,
    LayerTape,
    block_backward,
    block_forward,
    full_forward,
    layer_backward,
    layer_forward,
    load_checkpoint,
    partition_blocks,
    save_checkpoint,
)
from blockgcl.graph import dense_normalized_adjacency, generate_sbm, normalized_adjacency
from blockgcl.linalg import DimensionError, TapeError, make_rng


def _random_layer(rng, d_in, d_out, act="relu"):
    return GcnLayer(rng.normal(size=(d_in, d_out)), act)


def test_identity_layer_without_edges():
    x = make_rng(0).normal(size=(4, 3))
    adj = sp.identity(4, format="csr")
    np.testing.assert_array_equal(layer_forward(GcnLayer(np.eye(3), "identity"), adj, x), x)


def test_all_negative_relu_is_zero(path3):
    out = layer_forward(GcnLayer(-np.ones((3, 2)), "relu"), normalized_adjacency(path3), np.eye(3))
    assert not out.any()


def test_path3_layer_and_two_layer_stack(path3):
    adj = normalized_adjacency(path3)
    dense = dense_normalized_adjacency(3, path3.edges)
    layer = GcnLayer(np.eye(3), "identity")
    np.testing.assert_allclose(layer_forward(layer, adj, np.eye(3)), dense, atol=1e-15)
    enc = BlockEncoder([GcnLayer(np.eye(3), "identity"), GcnLayer(np.eye(3), "identity")], [[0, 1]])
    np.testing.assert_allclose(full_forward(enc, adj, np.eye(3)), dense @ dense, atol=1e-15)
    np.testing.assert_allclose(block_forward(enc, 0, adj, np.eye(3)), dense @ dense, atol=1e-15)


def test_layer_dimension_check(path3):
    with pytest.raises(DimensionError):
        layer_forward(GcnLayer(np.eye(2), "relu"), normalized_adjacency(path3), np.eye(3))


def test_scalar_backward():
    layer = GcnLayer(np.array([[3.0]]), "identity")
    adj = sp.identity(1, format="csr")
    tape = LayerTape()
    layer_forward(layer, adj, np.array([[2.0]]), tape)
    gw, gi = layer_backward(layer, adj, np.array([[1.0]]), tape)
    assert gw[0, 0] == 2.0 and gi[0, 0] == 3.0


def test_zero_grad_and_tape_cleared(path3):
    adj = normalized_adjacency(path3)
    layer = _random_layer(make_rng(1), 3, 2)
    tape = LayerTape()
    layer_forward(layer, adj, np.eye(3), tape)
    gw, gi = layer_backward(layer, adj, np.zeros((3, 2)), tape)
    assert not gw.any() and not gi.any()
    with pytest.raises(TapeError):
        layer_backward(layer, adj, np.zeros((3, 2)), tape)


@pytest.mark.parametrize("act", ["relu", "identity"])
@pytest.mark.parametrize("seed", range(5))
def test_layer_backward_finite_differences(act, seed):
    rng = make_rng(seed, 2)
    g = generate_sbm(1, 5, 0.5, 0.0, 4, seed=seed)
    adj = normalized_adjacency(g)
    layer = _random_layer(rng, 4, 3, act)
    h = rng.normal(size=(5, 4))

    def f():
        out = layer_forward(layer, adj, h)
        return float((out * out).sum())

    tape = LayerTape()
    out = layer_forward(layer, adj, h, tape)
    gw, gi = layer_backward(layer, adj, 2 * out, tape)
    assert rel_error(gw, central_difference(f, layer.weight)) < 1e-5
    assert rel_error(gi, central_difference(f, h)) < 1e-5


def test_relu_mask_gets_zero_gradient(path3):
    adj = normalized_adjacency(path3)
    layer = GcnLayer(np.array([[1.0, -1.0]] * 3), "relu")
    tape = LayerTape()
    layer_forward(layer, adj, np.eye(3), tape)
    _, gi = layer_backward(layer, adj, np.array([[0.0, 5.0]] * 3), tape)
    assert not gi.any()


@pytest.mark.parametrize(
    "args, expected",
    [
        ((8, 2), [[0, 1], [2, 3], [4, 5], [6, 7]]),
        ((4, 1), [[0], [1], [2], [3]]),
        ((5, 2), [[0, 1, 2], [3, 4]]),
        ((3, 3), [[0, 1, 2]]),
        ((7, 3), [[0, 1, 2, 3], [4, 5, 6]]),
    ],
)
def test_partition(args, expected):
    assert partition_blocks(*args) == expected


@pytest.mark.parametrize("args", [(0, 1), (3, 0), (3, 4)])
def test_partition_invalid(args):
    with pytest.raises(ValueError):
        partition_blocks(*args)


def test_full_forward_independent_of_partition(small_sbm):
    adj = normalized_adjacency(small_sbm)
    a = BlockEncoder.initialize(16, 8, 6, 1, make_rng(3))
    x = small_sbm.features
    ref = full_forward(a, adj, x)
    for bs in (2, 3, 4, 6):
        other = BlockEncoder(a.copy().layers, partition_blocks(6, bs))
        np.testing.assert_array_equal(full_forward(other, adj, x), ref)
        h = x
        for i in range(other.num_blocks):
            h = block_forward(other, i, adj, h)
        np.testing.assert_array_equal(h, ref)


def test_full_forward_single_layer(path3):
    enc = BlockEncoder([_random_layer(make_rng(0), 3, 2)], [[0]])
    adj = normalized_adjacency(path3)
    np.testing.assert_array_equal(full_forward(enc, adj, np.eye(3)), layer_forward(enc.layers[0], adj, np.eye(3)))


def test_block_backward_matches_finite_differences(small_sbm):
    rng = make_rng(4)
    g = generate_sbm(2, 4, 0.6, 0.2, 3, seed=1)
    adj = normalized_adjacency(g)
    enc = BlockEncoder.initialize(3, 4, 3, 3, rng)
    x = g.features.copy()
    proj = rng.normal(size=(8, 4))

    def f():
        return float((block_forward(enc, 0, adj, x) * proj).sum())

    tapes = []
    block_forward(enc, 0, adj, x, tapes)
    grads, gin = block_backward(enc, 0, adj, proj, tapes, need_input_grad=True)
    for layer, gw in zip(enc.layers, grads):
        assert rel_error(gw, central_difference(f, layer.weight)) < 1e-4
    assert rel_error(gin, central_difference(f, x)) < 1e-4


def test_initialize_activations():
    enc = BlockEncoder.initialize(5, 4, 4, 2, make_rng(0), block_output_activation="identity")
    assert [l.activation for l in enc.layers] == ["relu", "identity", "relu", "identity"]
    assert enc.layer_dims == [5, 4, 4, 4, 4]


def test_encoder_rejects_bad_blocks():
    layers = [GcnLayer(np.eye(2), "relu")] * 2
    with pytest.raises(ValueError):
        BlockEncoder(layers, [[1], [0]])
    with pytest.raises(ValueError):
        BlockEncoder([GcnLayer(np.ones((2, 3)), "relu"), GcnLayer(np.eye(2), "relu")], [[0, 1]])


def test_checkpoint_round_trip(tmp_path):
    enc = BlockEncoder.initialize(5, 3, 4, 2, make_rng(2), seed=42)
    enc.meta = {"mode": "blockwise"}
    path = save_checkpoint(enc, tmp_path / "m.ckpt")
    back = load_checkpoint(path)
    assert back.blocks == enc.blocks and back.seed == 42 and back.meta == enc.meta
    for a, b in zip(enc.layers, back.layers):
        np.testing.assert_array_equal(b.weight, a.weight.astype(np.float32).astype(np.float64))
        assert a.activation == b.activation


def test_checkpoint_layout(tmp_path):
    enc = BlockEncoder([GcnLayer(np.arange(6.0).reshape(2, 3), "relu")], [[0]], seed=1)
    data = save_checkpoint(enc, tmp_path / "m.ckpt").read_bytes()
    assert data[:8] == b"BGCLCKPT"
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + hlen])
    assert header["layer_dims"] == [2, 3] and header["blocks"] == [[0]]
    payload = np.frombuffer(data[12 + hlen :], dtype="<f4")
    np.testing.assert_array_equal(payload, np.arange(6.0))


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_checkpoint(p)
