"""Column standardization and the canonical-correlation contrastive loss.

The loss on standardized views ``Za``, ``Zb`` (N x D) is::

    ||Za - Zb||_F^2 + lam * (||Za^T Za - I||_F^2 + ||Zb^T Zb - I||_F^2)

Gradients are derived by hand; there is no autodiff anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DimensionError, TapeError, matmul


@dataclass
class StandardizeTape:
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    centered: np.ndarray | None = None
    eps: float = 0.0

    @property
    def ready(self) -> bool:
        return self.std is not None


def standardize(z: np.ndarray, eps: float = 1e-8, tape: StandardizeTape | None = None) -> np.ndarray:
    """``(z - mean) / ((std + eps) * sqrt(N))`` per column, population std.

    Non-degenerate columns come out with zero mean and unit L2 norm.
    """
    n = z.shape[0]
    if n < 2:
        raise ValueError(f"standardize needs at least 2 rows, got {n}")
    mu = z.mean(axis=0)
    c = z - mu
    sigma = np.sqrt((c * c).mean(axis=0))
    out = c / ((sigma + eps) * np.sqrt(n))
    if tape is not None:
        tape.mean, tape.std, tape.centered, tape.eps = mu, sigma, c, eps
    return out


def standardize_backward(grad_zstd: np.ndarray, tape: StandardizeTape) -> np.ndarray:
    """Gradient with respect to the raw input, through both the mean and the std."""
    if not tape.ready:
        raise TapeError("standardize_backward called without a recorded standardize")
    c, sigma = tape.centered, tape.std
    n = c.shape[0]
    s = sigma + tape.eps
    root_n = np.sqrt(n)
    g = grad_zstd
    direct = (g - g.mean(axis=0)) / (s * root_n)
    # dL/ds summed over rows; ds/dz_j = c_j / (N sigma)
    grad_s = -(g * c).sum(axis=0) / (s * s * root_n)
    safe = sigma > 0
    coef = np.where(safe, grad_s / (n * np.where(safe, sigma, 1.0)), 0.0)
    out = direct + c * coef
    tape.mean = tape.std = tape.centered = None
    return out.astype(grad_zstd.dtype, copy=False)


def cca_loss(za: np.ndarray, zb: np.ndarray, lam: float):
    """Return ``(loss, grad_a, grad_b)`` on already standardized inputs."""
    if za.shape != zb.shape:
        raise DimensionError(f"view shapes differ: {za.shape} vs {zb.shape}")
    d = za.shape[1]
    eye = np.eye(d, dtype=za.dtype)
    diff = za - zb
    ca = matmul(za, za, transpose_a=True) - eye
    cb = matmul(zb, zb, transpose_a=True) - eye
    loss = float((diff * diff).sum() + lam * ((ca * ca).sum() + (cb * cb).sum()))
    grad_a = 2.0 * diff + (4.0 * lam) * matmul(za, ca)
    grad_b = -2.0 * diff + (4.0 * lam) * matmul(zb, cb)
    return loss, grad_a, grad_b


class ContrastLoss:
    """Contrast on raw block outputs: standardize each view, then score.

    Subclasses implement :meth:`score` returning ``(loss, grad_a, grad_b)``
    with respect to the standardized views.
    """

    def __init__(self, eps: float = 1e-8):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = eps

    def score(self, za_std, zb_std):
        raise NotImplementedError

    def __call__(self, za: np.ndarray, zb: np.ndarray):
        ta, tb = StandardizeTape(), StandardizeTape()
        sa = standardize(za, self.eps, ta)
        sb = standardize(zb, self.eps, tb)
        loss, ga, gb = self.score(sa, sb)
        return loss, standardize_backward(ga, ta), standardize_backward(gb, tb)

    def value(self, za: np.ndarray, zb: np.ndarray) -> float:
        return self.score(standardize(za, self.eps), standardize(zb, self.eps))[0]


class CCALoss(ContrastLoss):
    def __init__(self, lam: float = 1e-3, eps: float = 1e-8):
        super().__init__(eps)
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        self.lam = lam

    def score(self, za_std, zb_std):
        return cca_loss(za_std, zb_std, self.lam)

    def __repr__(self):
        return f"CCALoss(lam={self.lam}, eps={self.eps})"
