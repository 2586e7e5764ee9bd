"""Dense/sparse products and seeded random streams.

Dense matrices are plain ``numpy.ndarray`` objects in C (row-major) order.
The normalized adjacency is a ``scipy.sparse.csr_matrix``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class DimensionError(ValueError):
    """Operand shapes do not agree."""


class TapeError(RuntimeError):
    """A backward pass was requested without its recorded forward."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity appeared where finite values are required."""


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, stream)``.

    Identical (seed, stream, call sequence) gives identical draws on every
    platform numpy supports.
    """
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def check_finite(x: np.ndarray, what: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} contains non-finite entries")
    return x


def spmm(a: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """Return ``a @ x`` for a CSR matrix and a dense matrix."""
    if x.ndim != 2:
        raise DimensionError(f"dense operand must be 2-D, got shape {x.shape}")
    if a.shape[1] != x.shape[0]:
        raise DimensionError(
            f"spmm: adjacency is {a.shape[0]}x{a.shape[1]} but x has {x.shape[0]} rows"
        )
    out = a @ x
    return np.ascontiguousarray(out, dtype=np.result_type(a.dtype, x.dtype))


def matmul(
    a: np.ndarray, b: np.ndarray, transpose_a: bool = False, transpose_b: bool = False
) -> np.ndarray:
    """Dense product ``op(a) @ op(b)`` where ``op`` optionally transposes."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("matmul operands must be 2-D")
    lhs = a.T if transpose_a else a
    rhs = b.T if transpose_b else b
    if lhs.shape[1] != rhs.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions differ ({lhs.shape} x {rhs.shape})"
        )
    return np.ascontiguousarray(lhs @ rhs)


def glorot_init(
    rows: int, cols: int, rng: np.random.Generator, dtype=np.float64
) -> np.ndarray:
    """Uniform Glorot/Xavier initialization in ``[-r, r]``, ``r = sqrt(6/(rows+cols))``."""
    if rows <= 0 or cols <= 0:
        raise DimensionError(f"glorot_init needs positive dimensions, got {rows}x{cols}")
    bound = np.sqrt(6.0 / (rows + cols))
    w = rng.uniform(-bound, bound, size=(rows, cols))
    return np.ascontiguousarray(w, dtype=dtype)
