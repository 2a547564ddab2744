"""Bundled worked instance (p = 3, q = 2) and its companion fixtures.

The instance ships with a closed-form "claimed" point whose coupling rows
vanish and whose norm blocks align exactly, yet whose gap/prefix-sum
cross-terms do not (inner product near 0.339).  It is therefore kept as a
flagged regression fixture only.  The actual solution shares the same u and
t but has all chain gaps equal to zero; ``known_solution`` returns it.
"""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .cones import ConePoint
from .lcp import LcpInstance, ReformPoint, affine_image, instance_from_obj, reform_g, reform_h, x_from_reform

__all__ = [
    "reference_instance",
    "claimed_point",
    "known_solution",
    "claimed_point_report",
]


def reference_instance() -> LcpInstance:
    text = resources.files("mesoc.data").joinpath("reference_instance.json").read_text()
    return instance_from_obj(json.loads(text))


def _radicals():
    s = np.sqrt(46.0)
    half = np.sqrt(82.0 - 12.0 * s) / 2.0
    u = np.array([(-225.0 + 30.0 * s) / 82.0, (139.0 - 24.0 * s) / 82.0])
    return half, u


def claimed_point() -> ReformPoint:
    """The closed-form point distributed with the instance; flagged, not an
    oracle: its first chain gap should be zero but equals t instead."""
    half, u = _radicals()
    return ReformPoint(np.array([half, 0.0]), u, half)


def known_solution() -> ConePoint:
    """The certified solution: all gaps zero, same u and t as the claimed
    point, so x = (t, t, t) with t = sqrt(82 - 12 sqrt(46)) / 2."""
    half, u = _radicals()
    return ConePoint(np.array([half, half, half]), u)


def claimed_point_report(inst: LcpInstance | None = None) -> dict[str, float]:
    """Evaluate the claimed point: coupling rows, level identity, trace sum
    against the dual norm, alignment multiplier, and the gap/prefix-sum inner
    product that exposes the defect."""
    if inst is None:
        inst = reference_instance()
    pt = claimed_point()
    z = ConePoint(x_from_reform(pt), pt.u)
    s = affine_image(inst, z)
    u, v = z.u, s.u
    lam = -float(u @ v) / float(u @ u)
    return {
        "coupling_inf": float(np.max(np.abs(reform_h(inst, pt)))),
        "level_defect": abs(pt.t**2 - float(u @ u)),
        "sum_y": float(np.sum(s.x)),
        "norm_v": float(np.linalg.norm(v)),
        "lambda": lam,
        "colinearity": float(np.linalg.norm(v + lam * u)),
        "gap_inner": float(pt.w_hat @ reform_g(inst, pt)),
    }
