"""Linear complementarity instances over the cone and their reformulation.

An instance asks for z in the cone with T z + r in the dual cone and
<z, T z + r> = 0, where T is a square matrix split into blocks

    T = [[A, B],    A: p x p,  B: p x q,
         [C, D]]    C: q x p,  D: q x q,

and r = (y, v) splits the same way.  The solve path changes variables to
(w_hat, u, t): w_hat holds the p-1 consecutive gaps of the ordered block, t
its last entry, so that x_i = w_hat_i + ... + w_hat_{p-1} + t.  In these
variables the problem becomes a square mixed system: the prefix-sum map
``reform_g`` must be complementary to w_hat on the nonnegative orthant while
the coupling map ``reform_h`` vanishes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._tol import DEFAULT_TOL, product_small, tol_close, tol_geq
from .cones import ConeDims, ConePoint, orthant_contains

__all__ = [
    "BlockMatrix",
    "LcpInstance",
    "ReformPoint",
    "JacobianBlocks",
    "AlphaBetaCertificate",
    "affine_image",
    "x_from_reform",
    "reform_from_xu",
    "reform_g",
    "reform_h",
    "jacobian_blocks",
    "alpha_beta_certificate",
    "solve_case_u_zero",
    "solve_case_w_zero",
    "lower_ones",
    "upper_ones",
    "load_instance",
    "dump_instance",
    "planted_instance",
]


# ------------------------------ value types ------------------------------


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """The four blocks of the system matrix, row-major."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self) -> None:
        for name in "ABCD":
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise ValueError(f"block {name} must be a matrix")
            object.__setattr__(self, name, arr)
        p, q = self.A.shape[0], self.D.shape[0]
        if self.A.shape != (p, p) or self.B.shape != (p, q):
            raise ValueError("block shapes inconsistent in top row")
        if self.C.shape != (q, p) or self.D.shape != (q, q):
            raise ValueError("block shapes inconsistent in bottom row")

    def full(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @classmethod
    def from_full(cls, T: np.ndarray, p: int, q: int) -> "BlockMatrix":
        T = np.asarray(T, dtype=float)
        if T.shape != (p + q, p + q):
            raise ValueError(f"expected {(p + q, p + q)} matrix, got {T.shape}")
        return cls(T[:p, :p], T[:p, p:], T[p:, :p], T[p:, p:])


@dataclass(frozen=True, eq=False)
class LcpInstance:
    """Problem data (T, r) together with the block sizes."""

    dims: ConeDims
    blocks: BlockMatrix
    r: ConePoint

    def __post_init__(self) -> None:
        p, q = self.dims.p, self.dims.q
        if self.blocks.A.shape != (p, p) or self.blocks.D.shape != (q, q):
            raise ValueError("blocks do not match dims")
        if self.r.x.size != p or self.r.u.size != q:
            raise ValueError("r does not match dims")
        if not (np.all(np.isfinite(self.blocks.full())) and np.all(np.isfinite(self.r.concat()))):
            raise ValueError("instance data must be finite")


@dataclass(frozen=True, eq=False)
class ReformPoint:
    """Iterate (w_hat, u, t) of the reformulated system."""

    w_hat: np.ndarray
    u: np.ndarray
    t: float

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.w_hat, dtype=float))
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        object.__setattr__(self, "w_hat", w)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))

    @property
    def dims(self) -> ConeDims:
        return ConeDims(self.w_hat.size + 1, self.u.size)

    def concat(self) -> np.ndarray:
        return np.concatenate([self.w_hat, self.u, [self.t]])

    @classmethod
    def split(cls, vec: np.ndarray, dims: ConeDims) -> "ReformPoint":
        vec = np.asarray(vec, dtype=float)
        k = dims.p - 1
        return cls(vec[:k], vec[k : k + dims.q], float(vec[-1]))


@dataclass(frozen=True, eq=False)
class JacobianBlocks:
    """Partial derivatives of (reform_g, reform_h) at a point.

    ``gw``/``gut`` are the derivatives of the prefix-sum map with respect to
    w_hat and (u, t); ``hw``/``hut`` the same for the coupling map.
    """

    gw: np.ndarray
    gut: np.ndarray
    hw: np.ndarray
    hut: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.gw, self.gut], [self.hw, self.hut]])


@dataclass(frozen=True, eq=False)
class AlphaBetaCertificate:
    """Orthant certificate: gaps alpha of z against prefix sums beta of the
    upper affine image, complementary exactly when z solves the instance."""

    alpha: np.ndarray
    beta: np.ndarray
    inner: float
    complementary: bool


# ------------------------------ basic maps ------------------------------


def lower_ones(k: int) -> np.ndarray:
    """k x k lower-triangular matrix of ones (running-sum operator)."""
    return np.tril(np.ones((k, k)))


def upper_ones(k: int) -> np.ndarray:
    """k x k upper-triangular matrix of ones (suffix-sum operator)."""
    return np.triu(np.ones((k, k)))


def affine_image(inst: LcpInstance, z: ConePoint) -> ConePoint:
    """Evaluate s = T z + r, split like z."""
    b = inst.blocks
    return ConePoint(
        b.A @ z.x + b.B @ z.u + inst.r.x,
        b.C @ z.x + b.D @ z.u + inst.r.u,
    )


def x_from_reform(pt: ReformPoint) -> np.ndarray:
    """Rebuild the ordered block: x_i = w_hat_i + ... + w_hat_{p-1} + t."""
    tails = np.cumsum(pt.w_hat[::-1])[::-1]
    return np.concatenate([tails + pt.t, [pt.t]])


def reform_from_xu(x: np.ndarray, u: np.ndarray) -> ReformPoint:
    """Inverse change of variables: consecutive gaps of x plus its last entry."""
    x = np.asarray(x, dtype=float)
    return ReformPoint(x[:-1] - x[1:], u, float(x[-1]))


def _upper_image(inst: LcpInstance, pt: ReformPoint) -> np.ndarray:
    b = inst.blocks
    return b.A @ x_from_reform(pt) + b.B @ pt.u + inst.r.x


def reform_g(inst: LcpInstance, pt: ReformPoint) -> np.ndarray:
    """First p-1 prefix sums of the upper affine image A x + B u + y.

    This is the map whose complementarity with w_hat on the orthant encodes
    the chain conditions of the original problem.
    """
    if pt.dims != inst.dims:
        raise ValueError(f"dimension mismatch: {pt.dims} vs {inst.dims}")
    return np.cumsum(_upper_image(inst, pt))[: inst.dims.p - 1]


def reform_h(inst: LcpInstance, pt: ReformPoint) -> np.ndarray:
    """Equality block of the reformulation, q+1 rows.

    The first q rows couple u with the total of the upper image and t with the
    lower image, u * sum(A x + B u + y) + t * (C x + D u + v); the last row
    pins t to the norm of u through t^2 - ||u||^2.
    """
    if pt.dims != inst.dims:
        raise ValueError(f"dimension mismatch: {pt.dims} vs {inst.dims}")
    b = inst.blocks
    x = x_from_reform(pt)
    upper = b.A @ x + b.B @ pt.u + inst.r.x
    lower = b.C @ x + b.D @ pt.u + inst.r.u
    coupling = pt.u * float(np.sum(upper)) + pt.t * lower
    return np.concatenate([coupling, [pt.t ** 2 - float(pt.u @ pt.u)]])


def jacobian_blocks(inst: LcpInstance, pt: ReformPoint) -> JacobianBlocks:
    """Closed-form Jacobian of (reform_g, reform_h) with respect to (w_hat, u, t).

    The w_hat sensitivity of the prefix-sum map factors as L @ A_sub @ U with L
    lower-triangular ones, U upper-triangular ones, and A_sub the leading
    (p-1) x (p-1) block of A; the remaining blocks follow from the product
    structure of the coupling rows.
    """
    p, q = inst.dims.p, inst.dims.q
    b = inst.blocks
    x = x_from_reform(pt)
    upper = b.A @ x + b.B @ pt.u + inst.r.x
    lower = b.C @ x + b.D @ pt.u + inst.r.u
    total = float(np.sum(upper))

    # dx/dw_hat is upper_ones stacked over a zero row; dx/dt = e.
    dx_dw = np.vstack([upper_ones(p - 1), np.zeros((1, p - 1))])

    gw = np.cumsum(b.A @ dx_dw, axis=0)[: p - 1]
    g_t = np.cumsum(b.A @ np.ones(p))[: p - 1]
    gut = np.column_stack([np.cumsum(b.B, axis=0)[: p - 1], g_t])

    dcoupling_dx = np.outer(pt.u, b.A.sum(axis=0)) + pt.t * b.C
    hw = np.vstack([dcoupling_dx @ dx_dw, np.zeros((1, p - 1))])

    dcoupling_du = pt.t * b.D + np.outer(pt.u, b.B.sum(axis=0)) + total * np.eye(q)
    dcoupling_dt = pt.u * float(b.A.sum()) + lower + pt.t * b.C.sum(axis=1)
    hut = np.block(
        [
            [dcoupling_du, dcoupling_dt[:, None]],
            [-2.0 * pt.u[None, :], np.array([[2.0 * pt.t]])],
        ]
    )
    return JacobianBlocks(gw=gw, gut=gut, hw=hw, hut=hut)


def alpha_beta_certificate(
    inst: LcpInstance, z: ConePoint, tol: float = DEFAULT_TOL
) -> AlphaBetaCertificate:
    """Build the orthant certificate (alpha, beta) for a candidate z.

    alpha lists the chain gaps (x_1-x_2, ..., x_{p-1}-x_p, x_p-||u||); beta
    lists all p prefix sums of the upper affine image.  z solves the instance
    on the generic branch exactly when both are nonnegative with vanishing
    componentwise products.
    """
    x, u = z.x, z.u
    alpha = np.concatenate([x[:-1] - x[1:], [x[-1] - float(np.linalg.norm(u))]])
    beta = np.cumsum(affine_image(inst, z).x)
    inner = float(alpha @ beta)
    comp = (
        orthant_contains(alpha, tol)
        and orthant_contains(beta, tol)
        and all(product_small(a, bb, tol) for a, bb in zip(alpha, beta))
    )
    return AlphaBetaCertificate(alpha=alpha, beta=beta, inner=inner, complementary=comp)


# ------------------------------ special cases ------------------------------


def solve_case_u_zero(
    inst: LcpInstance, orthant_solver=None, tol: float = DEFAULT_TOL
) -> ConePoint | None:
    """Look for a solution with vanishing norm block.

    Solves the p-dimensional complementarity problem for x against A x + y on
    the monotone nonnegative cone (via the gap change of variables it is an
    orthant problem for ``orthant_solver``), then accepts only when x_p = 0
    and sum(A x + y) >= ||C x + v||.
    """
    p = inst.dims.p
    L, U = lower_ones(p), upper_ones(p)
    M = L @ inst.blocks.A @ U
    qvec = L @ inst.r.x
    if orthant_solver is None:
        from .newton import solve_orthant_lcp

        orthant_solver = solve_orthant_lcp
    w = orthant_solver(M, qvec)
    if w is None:
        return None
    x = U @ w
    upper = inst.blocks.A @ x + inst.r.x
    lower = inst.blocks.C @ x + inst.r.u
    ok = (
        orthant_contains(w, tol)
        and orthant_contains(M @ w + qvec, tol)
        and all(product_small(a, bb, tol) for a, bb in zip(w, M @ w + qvec))
        and tol_close(float(x[-1]), 0.0, tol)
        and tol_geq(float(np.sum(upper)), float(np.linalg.norm(lower)), tol)
    )
    if not ok:
        return None
    return ConePoint(x, np.zeros(inst.dims.q))


def solve_case_w_zero(
    inst: LcpInstance, micp_solver=None, tol: float = DEFAULT_TOL
) -> ConePoint | None:
    """Look for a solution on the branch where the lower affine image vanishes.

    Solves for (x, u) with C x + D u + v = 0 and x complementary to
    A x + B u + y on the monotone nonnegative cone, then accepts only when
    every x_i >= ||u|| and sum(A x + B u + y) = 0.
    """
    if micp_solver is None:
        from .newton import _solve_case_w_zero_default

        micp_solver = _solve_case_w_zero_default
    sol = micp_solver(inst)
    if sol is None:
        return None
    x, u = sol
    upper = inst.blocks.A @ x + inst.blocks.B @ u + inst.r.x
    lower = inst.blocks.C @ x + inst.blocks.D @ u + inst.r.u
    nu = float(np.linalg.norm(u))
    gaps = np.concatenate([x[:-1] - x[1:], [x[-1]]])
    prefix = np.cumsum(upper)
    ok = (
        orthant_contains(gaps, tol)
        and orthant_contains(prefix, tol)
        and all(product_small(a, bb, tol) for a, bb in zip(gaps, prefix))
        and float(np.linalg.norm(lower)) <= tol * (1.0 + float(np.linalg.norm(lower)))
        and tol_geq(float(np.min(x)), nu, tol)
        and tol_close(float(np.sum(upper)), 0.0, tol)
    )
    if not ok:
        return None
    return ConePoint(x, u)


# ------------------------------ I/O and generation ------------------------------


def _instance_to_obj(inst: LcpInstance) -> dict:
    return {
        "p": inst.dims.p,
        "q": inst.dims.q,
        "A": inst.blocks.A.tolist(),
        "B": inst.blocks.B.tolist(),
        "C": inst.blocks.C.tolist(),
        "D": inst.blocks.D.tolist(),
        "y": inst.r.x.tolist(),
        "v": inst.r.u.tolist(),
    }


def instance_from_obj(obj: dict) -> LcpInstance:
    try:
        p, q = int(obj["p"]), int(obj["q"])
        blocks = BlockMatrix(
            np.asarray(obj["A"], dtype=float),
            np.asarray(obj["B"], dtype=float),
            np.asarray(obj["C"], dtype=float),
            np.asarray(obj["D"], dtype=float),
        )
        r = ConePoint(np.asarray(obj["y"], dtype=float), np.asarray(obj["v"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance object: {exc}") from exc
    return LcpInstance(ConeDims(p, q), blocks, r)


def load_instance(path: str | Path) -> LcpInstance:
    """Read an instance from its JSON file; raises ValueError on bad data."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    return instance_from_obj(obj)


def dump_instance(inst: LcpInstance, path: str | Path) -> None:
    """Write the instance as deterministic JSON (sorted keys, trailing newline)."""
    Path(path).write_text(json.dumps(_instance_to_obj(inst), indent=2, sort_keys=True) + "\n")


def planted_instance(
    p: int, q: int, seed: int
) -> tuple[LcpInstance, ConePoint, ConePoint]:
    """Construct an instance with a known complementary pair planted in it.

    Samples a generic pair (z*, s*): u with norm in [0.3, 1.5], s-side norm
    block v = -lam * u for lam in [0.2, 3], chain gaps and dual prefix sums
    strictly complementary, then draws a moderately conditioned T and sets
    r := s* - T z*.  Returns (instance, z*, s*); the same seed reproduces the
    same triple bit for bit.
    """
    dims = ConeDims(p, q)
    rng = np.random.default_rng(seed)

    u = rng.normal(size=q)
    u *= rng.uniform(0.3, 1.5) / np.linalg.norm(u)
    lam = rng.uniform(0.2, 3.0)
    v = -lam * u
    nu, nv = float(np.linalg.norm(u)), float(lam * np.linalg.norm(u))

    # for each chain position either the gap or the prefix sum is active,
    # never both, so the planted root sits away from the kinks
    gap_active = rng.random(p - 1) < 0.5
    gaps = np.where(gap_active, rng.uniform(0.2, 2.0, size=p - 1), 0.0)
    prefix = np.where(gap_active, 0.0, rng.uniform(0.2, 2.0, size=p - 1))

    x = np.concatenate([np.cumsum(gaps[::-1])[::-1] + nu, [nu]])
    y = np.diff(np.concatenate([[0.0], prefix, [nv]]))

    z_star = ConePoint(x, u)
    s_star = ConePoint(y, v)

    n = p + q
    for _ in range(100):
        T = rng.normal(size=(n, n))
        if np.linalg.cond(T) < 1e4:
            break
    r_vec = s_star.concat() - T @ z_star.concat()
    inst = LcpInstance(dims, BlockMatrix.from_full(T, p, q), ConePoint(r_vec[:p], r_vec[p:]))
    return inst, z_star, s_star
