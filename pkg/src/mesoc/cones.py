"""Membership, duality, and complementarity tests for the monotone extended
second order cone (MESOC).

The primal cone in R^p x R^q collects pairs (x, u) whose x block is
nonincreasing and bounded below by ||u||:

    x_1 >= x_2 >= ... >= x_p >= ||u||.

Its dual collects pairs (y, v) whose prefix sums dominate ||v||:

    y_1 + ... + y_j >= 0 for j < p,   y_1 + ... + y_p >= ||v||.

All membership tests take an explicit tolerance and relax every inequality by
tol * (1 + max(|a|, |b|)); see ``_tol``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._tol import DEFAULT_TOL, chain_geq, product_small, tol_close, tol_geq

__all__ = [
    "ConeDims",
    "ConePoint",
    "ComplementarityCertificate",
    "mesoc_contains",
    "dual_contains",
    "monotone_nonneg_contains",
    "orthant_contains",
    "shift_to_monotone",
    "classify_pair",
]


# ------------------------------ value types ------------------------------


@dataclass(frozen=True)
class ConeDims:
    """Block sizes (p, q) of the ambient space R^p x R^q."""

    p: int
    q: int

    def __post_init__(self) -> None:
        if self.p < 2:
            raise ValueError(f"ordered block needs p >= 2, got p={self.p}")
        if self.q < 1:
            raise ValueError(f"norm block needs q >= 1, got q={self.q}")

    @property
    def n(self) -> int:
        return self.p + self.q


@dataclass(frozen=True, eq=False)
class ConePoint:
    """A point z = (x, u) split into the ordered block x and the norm block u."""

    x: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        if x.ndim != 1 or u.ndim != 1:
            raise ValueError("x and u must be one-dimensional")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def dims(self) -> ConeDims:
        return ConeDims(self.x.size, self.u.size)

    def concat(self) -> np.ndarray:
        return np.concatenate([self.x, self.u])

    @classmethod
    def split(cls, vec: np.ndarray, p: int) -> "ConePoint":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:p], vec[p:])


@dataclass(frozen=True, eq=False)
class ComplementarityCertificate:
    """Outcome of ``classify_pair``.

    ``case_tag`` is one of ``both-zero``, ``u-zero``, ``v-zero``, ``generic``
    depending on which of ``u`` (primal norm block) and ``v`` (dual norm
    block) vanish.  ``lam`` is the alignment multiplier with v = -lam * u and
    is present only for the generic case.  ``residuals`` holds raw defect
    magnitudes; ``member`` is the overall verdict.
    """

    primal: ConePoint
    dual: ConePoint
    case_tag: str
    member: bool
    lam: float | None
    residuals: dict[str, float]
    notes: tuple[str, ...] = field(default=())


# ------------------------------ memberships ------------------------------


def mesoc_contains(pt: ConePoint, tol: float = DEFAULT_TOL) -> bool:
    """Test (x, u) against the chain x_1 >= ... >= x_p >= ||u||.

    Parameters
    ----------
    pt : ConePoint
        Candidate point.
    tol : float
        Scaled slack applied to every inequality in the chain.
    """
    chain = np.concatenate([pt.x, [float(np.linalg.norm(pt.u))]])
    return chain_geq(chain, tol)


def dual_contains(pt: ConePoint, tol: float = DEFAULT_TOL) -> bool:
    """Test (y, v) against the dual description by prefix sums.

    Every prefix sum of y through p-1 terms must be nonnegative and the full
    sum must dominate ||v||, each comparison relaxed by the scaled tolerance.
    """
    prefix = np.cumsum(pt.x)
    slack = tol * (1.0 + np.abs(prefix[:-1]))
    if not np.all(prefix[:-1] >= -slack):
        return False
    return tol_geq(float(prefix[-1]), float(np.linalg.norm(pt.u)), tol)


def monotone_nonneg_contains(x: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """Test x_1 >= x_2 >= ... >= x_p >= 0 with scaled slack."""
    x = np.asarray(x, dtype=float)
    chain = np.concatenate([x, [0.0]])
    return chain_geq(chain, tol)


def orthant_contains(x: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """Componentwise x_i >= 0 with scaled slack."""
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= -tol * (1.0 + np.abs(x))))


def shift_to_monotone(pt: ConePoint) -> np.ndarray:
    """Return x - ||u|| * e, the ordered block lowered by the norm of u.

    The point (x, u) lies in the cone exactly when the shifted vector is
    nonincreasing and nonnegative, which reduces chain tests to the monotone
    nonnegative cone in R^p.
    """
    return pt.x - float(np.linalg.norm(pt.u))


# ------------------------------ classification ------------------------------


def _monotone_pair_defects(x: np.ndarray, y: np.ndarray, tol: float):
    """Complementarity of (x, y) on the monotone nonnegative cone and its dual.

    Transforms to gaps a = (x_1-x_2, ..., x_{p-1}-x_p, x_p) and prefix sums
    b = cumsum(y); the pair is complementary iff a >= 0, b >= 0 and every
    product a_i * b_i vanishes.
    """
    a = np.concatenate([x[:-1] - x[1:], [x[-1]]])
    b = np.cumsum(y)
    ok_a = orthant_contains(a, tol)
    ok_b = orthant_contains(b, tol)
    cross = a * b
    ok_cross = all(product_small(ai, bi, tol) for ai, bi in zip(a, b))
    defect_a = float(max(0.0, -a.min())) if a.size else 0.0
    defect_b = float(max(0.0, -b.min())) if b.size else 0.0
    cross_max = float(np.max(np.abs(cross))) if cross.size else 0.0
    return ok_a and ok_b and ok_cross, defect_a, defect_b, cross_max


def classify_pair(
    z: ConePoint, s: ConePoint, tol: float = DEFAULT_TOL
) -> ComplementarityCertificate:
    """Decide whether (z, s) is a complementary pair for the cone and its dual.

    Dispatches on the zero pattern of the norm blocks u (from z) and v (from
    s), checking the conditions characteristic of each case:

    * ``both-zero``: (x, y) complementary on the monotone nonnegative cone.
    * ``u-zero``: additionally x_p = 0 and sum(y) >= ||v||.
    * ``v-zero``: additionally every x_i >= ||u|| and sum(y) = 0.
    * ``generic``: x_p = ||u||, sum(y) = ||v||, <u, v> = -||u|| ||v||, and the
      shifted pair (x - ||u|| e, y - ||v|| e_p) complementary on the monotone
      nonnegative cone; v = -lam * u for the reported lam >= 0.

    A norm block counts as zero when its Euclidean norm is at most ``tol``.
    Tightening ``tol`` never turns a non-member into a member.
    """
    if z.dims != s.dims:
        raise ValueError(f"dimension mismatch: {z.dims} vs {s.dims}")
    x, u = z.x, z.u
    y, v = s.x, s.u
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    sum_y = float(np.sum(y))
    xp = float(x[-1])
    res: dict[str, float] = {}
    notes: list[str] = []
    lam: float | None = None

    member = mesoc_contains(z, tol) and dual_contains(s, tol)
    res["orthogonality"] = abs(float(z.concat() @ s.concat()))
    scale_ortho = 1.0 + float(np.linalg.norm(z.concat()) * np.linalg.norm(s.concat()))
    member = member and res["orthogonality"] <= tol * scale_ortho

    u_zero = nu <= tol
    v_zero = nv <= tol

    if u_zero and v_zero:
        case = "both-zero"
        ok, da, db, cross = _monotone_pair_defects(x, y, tol)
        member = member and ok
        res.update(gap_defect=da, prefix_defect=db, cross_products=cross)
    elif u_zero:
        case = "u-zero"
        ok, da, db, cross = _monotone_pair_defects(x, y, tol)
        member = member and ok and tol_close(xp, 0.0, tol) and tol_geq(sum_y, nv, tol)
        res.update(
            gap_defect=da,
            prefix_defect=db,
            cross_products=cross,
            xp=abs(xp),
            sum_y_minus_norm_v=sum_y - nv,
        )
    elif v_zero:
        case = "v-zero"
        ok, da, db, cross = _monotone_pair_defects(x, y, tol)
        min_gap = float(np.min(x)) - nu
        member = (
            member and ok and tol_geq(float(np.min(x)), nu, tol) and tol_close(sum_y, 0.0, tol)
        )
        res.update(
            gap_defect=da,
            prefix_defect=db,
            cross_products=cross,
            sum_y=abs(sum_y),
            min_x_minus_norm_u=min_gap,
        )
    else:
        case = "generic"
        uv = float(u @ v)
        lam = -uv / float(u @ u)
        colinearity = float(np.linalg.norm(v + lam * u))
        shifted_x = x - nu
        shifted_y = y.copy()
        shifted_y[-1] -= nv
        ok, da, db, cross = _monotone_pair_defects(shifted_x, shifted_y, tol)
        member = (
            member
            and ok
            and tol_close(xp, nu, tol)
            and tol_close(sum_y, nv, tol)
            and tol_close(uv, -nu * nv, tol)
            and colinearity <= tol * (1.0 + nv)
            and lam >= -tol
        )
        if lam <= tol:
            notes.append("lambda-near-zero")
        res.update(
            gap_defect=da,
            prefix_defect=db,
            cross_products=cross,
            xp_minus_norm_u=xp - nu,
            sum_y_minus_norm_v=sum_y - nv,
            uv_alignment=uv + nu * nv,
            colinearity=colinearity,
        )

    return ComplementarityCertificate(
        primal=z,
        dual=s,
        case_tag=case,
        member=bool(member),
        lam=lam,
        residuals=res,
        notes=tuple(notes),
    )
