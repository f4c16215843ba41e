"""Minimal dense float64 kernels used throughout the package.

Thin, shape-checked wrappers over numpy. Matrices are 2-D row-major
float64 arrays, vectors are 1-D float64 arrays; every function is pure
and never mutates its arguments.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import ShapeError

# Conventions, not subclasses: a Matrix is a 2-D float64 ndarray, a
# Vector a 1-D one.
Matrix = np.ndarray
Vector = np.ndarray


def as_matrix(a) -> Matrix:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got an array with ndim={m.ndim}")
    return m


def as_vector(a) -> Vector:
    v = np.ascontiguousarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got an array with ndim={v.ndim}")
    return v


def matvec(m, v) -> Vector:
    """Matrix-vector product m @ v."""
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError(
            f"matvec: matrix of shape {m.shape[0]}x{m.shape[1]} cannot multiply "
            f"a vector of length {v.shape[0]}"
        )
    return m @ v


def hadamard(a, b) -> Vector:
    """Elementwise product of two equal-length vectors."""
    a = as_vector(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"hadamard: vector lengths differ ({a.shape[0]} vs {b.shape[0]})")
    return a * b


def sigmoid(v) -> Vector:
    """Elementwise logistic 1 / (1 + exp(-x)); saturates without overflow."""
    return expit(as_vector(v))


def tanh(v) -> Vector:
    """Elementwise hyperbolic tangent."""
    return np.tanh(as_vector(v))


def add(a, b) -> Vector:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"add: vector lengths differ ({a.shape[0]} vs {b.shape[0]})")
    return a + b


def axpy(alpha: float, x, y) -> Vector:
    """alpha * x + y."""
    x = as_vector(x)
    y = as_vector(y)
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"axpy: vector lengths differ ({x.shape[0]} vs {y.shape[0]})")
    return float(alpha) * x + y


def scale(alpha: float, v) -> Vector:
    return float(alpha) * as_vector(v)


def concat(*vectors) -> Vector:
    """Stack vectors end to end, preserving argument order."""
    if not vectors:
        raise ShapeError("concat: need at least one vector")
    return np.concatenate([as_vector(v) for v in vectors])
