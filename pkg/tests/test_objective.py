import numpy as np
import pytest
from conftest import central_difference, rel_error
from hypothesis import given, settings
from hypothesis import strategies as st

from blockgcl.linalg import DimensionError, TapeError, make_rng
from blockgcl.objective import (
    CCALoss,
    StandardizeTape,
    cca_loss,
    standardize,
    standardize_backward,
)


def test_standardize_hand_example():
    out = standardize(np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(out.ravel(), [-1 / np.sqrt(2), 0, 1 / np.sqrt(2)], atol=1e-7)


def test_standardize_constant_column():
    out = standardize(np.full((4, 2), 3.5))
    assert np.all(np.isfinite(out)) and not out.any()


def test_standardize_needs_two_rows():
    with pytest.raises(ValueError):
        standardize(np.ones((1, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 6), st.integers(0, 2**31))
def test_standardize_invariants(n, d, seed):
    z = make_rng(seed).normal(size=(n, d)) * 3 + 1
    out = standardize(z)
    assert np.abs(out.mean(axis=0)).max() <= 1e-8
    np.testing.assert_allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-6)


def test_cca_orthonormal_equal_views_zero():
    q, _ = np.linalg.qr(make_rng(0).normal(size=(6, 3)))
    loss, ga, gb = cca_loss(q, q, 0.7)
    assert loss == pytest.approx(0, abs=1e-24)
    assert np.abs(ga).max() < 1e-12 and np.abs(gb).max() < 1e-12


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_cca_hand_example(lam):
    za = np.array([[1 / np.sqrt(2)], [-1 / np.sqrt(2)]])
    loss, _, _ = cca_loss(za, -za, lam)
    assert loss == pytest.approx(4.0, abs=1e-12)


def test_cca_shape_mismatch():
    with pytest.raises(DimensionError):
        cca_loss(np.ones((3, 2)), np.ones((3, 1)), 0.1)


@pytest.mark.parametrize("lam", [0.0, 1e-3, 0.5])
def test_cca_gradient_finite_differences(lam):
    rng = make_rng(1)
    za, zb = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    _, ga, gb = cca_loss(za, zb, lam)
    assert rel_error(ga, central_difference(lambda: cca_loss(za, zb, lam)[0], za)) < 1e-6
    assert rel_error(gb, central_difference(lambda: cca_loss(za, zb, lam)[0], zb)) < 1e-6


def test_standardize_backward_examples():
    z = make_rng(2).normal(size=(6, 3))
    tape = StandardizeTape()
    standardize(z, tape=tape)
    assert not standardize_backward(np.zeros((6, 3)), tape).any()
    tape = StandardizeTape()
    standardize(z, tape=tape)
    g = standardize_backward(np.tile([1.0, -2.0, 3.0], (6, 1)), tape)
    assert np.abs(g.mean(axis=0)).max() < 1e-12
    with pytest.raises(TapeError):
        standardize_backward(np.zeros((6, 3)), tape)


def test_standardize_backward_finite_differences():
    rng = make_rng(3)
    z = rng.normal(size=(6, 3))
    proj = rng.normal(size=(6, 3))
    tape = StandardizeTape()
    standardize(z, tape=tape)
    g = standardize_backward(proj, tape)
    num = central_difference(lambda: float((standardize(z) * proj).sum()), z)
    assert rel_error(g, num) < 1e-5


@pytest.mark.parametrize("seed", range(10))
def test_composed_loss_finite_differences(seed):
    rng = make_rng(seed, 4)
    za, zb = rng.normal(size=(7, 4)), rng.normal(size=(7, 4))
    loss_fn = CCALoss(lam=0.3)
    _, ga, gb = loss_fn(za, zb)
    assert rel_error(ga, central_difference(lambda: loss_fn.value(za, zb), za)) < 1e-4
    assert rel_error(gb, central_difference(lambda: loss_fn.value(za, zb), zb)) < 1e-4


def test_symmetry_and_permutation_invariance():
    rng = make_rng(5)
    za, zb = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    loss_fn = CCALoss(lam=0.2)
    lab, ga, _ = loss_fn(za, zb)
    lba, _, gb = loss_fn(zb, za)
    assert lab == pytest.approx(lba, rel=1e-14)
    np.testing.assert_allclose(ga, gb, atol=1e-14)
    perm = rng.permutation(8)
    assert loss_fn.value(za[perm], zb[perm]) == pytest.approx(lab, rel=1e-12)
    assert lab >= 0


def test_loss_parameter_validation():
    with pytest.raises(ValueError):
        CCALoss(lam=-1)
    with pytest.raises(ValueError):
        CCALoss(eps=0)
