"""Scalar comparison helpers shared across the package.

Every tolerance in the public API is absolute-plus-relative: two scalars agree
when |a - b| <= tol * (1 + max(|a|, |b|)).  Inequalities are relaxed the same
way.  Callers pass the tolerance explicitly; DEFAULT_TOL is the fallback.
"""
from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-9


def tol_close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * (1.0 + max(abs(a), abs(b)))


def tol_geq(a: float, b: float, tol: float) -> bool:
    """a >= b, relaxed by the scaled tolerance."""
    return a >= b - tol * (1.0 + max(abs(a), abs(b)))


def chain_geq(values: np.ndarray, tol: float) -> bool:
    """True when values[0] >= values[1] >= ... within the scaled tolerance."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    a, b = v[:-1], v[1:]
    slack = tol * (1.0 + np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(a >= b - slack))


def product_small(a: float, b: float, tol: float) -> bool:
    """|a * b| small relative to the factor sizes; used for complementarity."""
    return abs(a * b) <= tol * (1.0 + abs(a) + abs(b))
