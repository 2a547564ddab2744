"""Semismooth Newton method for the reformulated complementarity system.

The square root system pairs each gap variable w_hat_i with the prefix-sum
value through the Fischer-Burmeister function

    fb(a, b) = sqrt(a^2 + b^2) - a - b,

which vanishes exactly when a >= 0, b >= 0, a * b = 0, and appends the
coupling rows as plain equations.  Newton directions come from one element of
the generalized Jacobian; steps are globalized by Armijo backtracking on the
merit 0.5 * ||Phi||^2 with an optional damped gradient fallback when the
linear system is near singular or the direction fails to descend.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from ._tol import DEFAULT_TOL, product_small
from .cones import ComplementarityCertificate, ConeDims, ConePoint
from .lcp import (
    LcpInstance,
    ReformPoint,
    affine_image,
    jacobian_blocks,
    lower_ones,
    reform_from_xu,
    reform_g,
    reform_h,
    solve_case_u_zero,
    solve_case_w_zero,
    upper_ones,
    x_from_reform,
)
from .cones import classify_pair

__all__ = [
    "NewtonConfig",
    "FbResidual",
    "GenJacobianElement",
    "IterationRecord",
    "IterationTrace",
    "NewtonResult",
    "StationarityReport",
    "RunSummary",
    "SolveResult",
    "fb_scalar",
    "fb_residual",
    "generalized_jacobian",
    "newton_solve",
    "stationarity_check",
    "default_starts",
    "solve_lcp",
    "solve_orthant_lcp",
]

log = logging.getLogger("mesoc.newton")

_DIVERGE_MERIT = 1e40


@dataclass(frozen=True)
class NewtonConfig:
    """Solver knobs; the defaults match the documented contract."""

    tol_residual: float = 1e-10
    max_iter: int = 200
    armijo_sigma: float = 1e-4
    backtrack_factor: float = 0.5
    min_step: float = 1e-12
    gradient_fallback: bool = True
    kink_perturbation: float = 1e-12
    cond_limit: float = 1e14


@dataclass(frozen=True, eq=False)
class FbResidual:
    phi: np.ndarray
    merit: float
    residual_inf: float


@dataclass(frozen=True, eq=False)
class GenJacobianElement:
    """One element of the generalized Jacobian of the root system.

    ``d1``/``d2`` are the diagonal weights applied to the identity part and
    the smooth Jacobian part of the complementarity rows; ``selection_tag`` is
    ``smooth`` unless some pair sat at the origin kink, where the symmetric
    element with d1 = d2 = 1/sqrt(2) - 1 is selected.
    """

    matrix: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    selection_tag: str
    kink_indices: tuple[int, ...]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    merit: float
    residual_inf: float
    step: float
    fallback: bool
    cond_estimate: float


@dataclass(frozen=True)
class IterationTrace:
    records: tuple[IterationRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def lines(self) -> list[str]:
        out = []
        for rec in self.records:
            tag = " grad" if rec.fallback else ""
            out.append(
                f"iter {rec.iteration:3d}  merit {rec.merit:.6e}  "
                f"res {rec.residual_inf:.3e}  step {rec.step:.2e}  "
                f"cond {rec.cond_estimate:.1e}{tag}"
            )
        return out


@dataclass(frozen=True, eq=False)
class NewtonResult:
    point: ReformPoint
    status: str
    residual_inf: float
    merit: float
    iterations: int
    trace: IterationTrace


# ------------------------------ residual pieces ------------------------------


def fb_scalar(a, b):
    """Fischer-Burmeister value sqrt(a^2 + b^2) - (a + b); accepts arrays."""
    return np.hypot(a, b) - (a + b)


def _fb_weights(a: np.ndarray, b: np.ndarray, kink_tol: float):
    """Diagonal weights of one generalized-Jacobian element for the fb rows."""
    rad = np.hypot(a, b)
    kinks = rad <= kink_tol
    safe = np.where(kinks, 1.0, rad)
    d1 = a / safe - 1.0
    d2 = b / safe - 1.0
    sym = 1.0 / np.sqrt(2.0) - 1.0
    d1 = np.where(kinks, sym, d1)
    d2 = np.where(kinks, sym, d2)
    return d1, d2, np.flatnonzero(kinks)


def fb_residual(inst: LcpInstance, pt: ReformPoint) -> FbResidual:
    """Stack fb(w_hat, reform_g) over the coupling rows reform_h."""
    g = reform_g(inst, pt)
    h = reform_h(inst, pt)
    phi = np.concatenate([fb_scalar(pt.w_hat, g), h])
    merit = 0.5 * float(phi @ phi)
    return FbResidual(phi=phi, merit=merit, residual_inf=float(np.max(np.abs(phi))))


def generalized_jacobian(
    inst: LcpInstance, pt: ReformPoint, config: NewtonConfig | None = None
) -> GenJacobianElement:
    """Assemble one generalized-Jacobian element of the root system at pt."""
    cfg = config or NewtonConfig()
    g = reform_g(inst, pt)
    blocks = jacobian_blocks(inst, pt)
    d1, d2, kinks = _fb_weights(pt.w_hat, g, cfg.kink_perturbation)
    k = pt.w_hat.size
    top = np.hstack([np.diag(d1), np.zeros((k, pt.u.size + 1))])
    top += d2[:, None] * np.hstack([blocks.gw, blocks.gut])
    bottom = np.hstack([blocks.hw, blocks.hut])
    return GenJacobianElement(
        matrix=np.vstack([top, bottom]),
        d1=d1,
        d2=d2,
        selection_tag="smooth" if kinks.size == 0 else "kink",
        kink_indices=tuple(int(i) for i in kinks),
    )


# ------------------------------ core iteration ------------------------------


def _lu_with_cond(W: np.ndarray):
    """LU factorization plus a 1-norm condition estimate; None when singular."""
    lu, piv, info = lapack.dgetrf(W)
    if info != 0:
        return None, np.inf
    anorm = np.linalg.norm(W, 1)
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if rcond <= 0.0 else 1.0 / rcond
    return (lu, piv), cond


def _fb_newton_core(fun, jac, z0: np.ndarray, n_comp: int, cfg: NewtonConfig):
    """Globalized semismooth Newton on a mixed fb/equality root system.

    ``fun(z)`` returns (comp_values, eq_values) of the smooth maps paired with
    the first ``n_comp`` variables; ``jac(z)`` their stacked Jacobian.
    Returns (z, status, trace records).
    """

    def residual(z):
        comp, eq = fun(z)
        phi = np.concatenate([fb_scalar(z[:n_comp], comp), eq])
        return phi, comp

    z = np.asarray(z0, dtype=float).copy()
    records: list[IterationRecord] = []
    phi, comp = residual(z)
    if not np.all(np.isfinite(phi)):
        return z, "diverged", records
    merit = 0.5 * float(phi @ phi)
    res = float(np.max(np.abs(phi)))
    records.append(IterationRecord(0, merit, res, 0.0, False, np.nan))

    for k in range(1, cfg.max_iter + 1):
        if res <= cfg.tol_residual:
            return z, "solved", records
        if not np.isfinite(merit) or merit > _DIVERGE_MERIT:
            return z, "diverged", records

        J = jac(z)
        d1, d2, _ = _fb_weights(z[:n_comp], comp, cfg.kink_perturbation)
        W = J.copy()
        W[:n_comp] *= d2[:, None]
        W[:n_comp, :n_comp] += np.diag(d1)
        grad = W.T @ phi

        fallback = False
        factor, cond = _lu_with_cond(W)
        if factor is None or cond > cfg.cond_limit:
            fallback = True
            direction = None
        else:
            direction = lapack.dgetrs(factor[0], factor[1], -phi)[0]
            if not np.all(np.isfinite(direction)):
                fallback = True
            else:
                slope = float(grad @ direction)
                if slope >= 0.0:
                    fallback = True

        if fallback:
            if not cfg.gradient_fallback:
                return z, "stalled", records
            gnorm2 = float(grad @ grad)
            if gnorm2 <= cfg.min_step ** 2:
                return z, "stalled", records
            direction = -grad
            slope = -gnorm2

        alpha = 1.0
        while True:
            z_new = z + alpha * direction
            phi_new, comp_new = residual(z_new)
            if np.all(np.isfinite(phi_new)):
                merit_new = 0.5 * float(phi_new @ phi_new)
                if merit_new <= merit + cfg.armijo_sigma * alpha * slope:
                    break
            alpha *= cfg.backtrack_factor
            if alpha < cfg.min_step:
                return z, "stalled", records

        z, phi, comp = z_new, phi_new, comp_new
        merit = 0.5 * float(phi @ phi)
        res = float(np.max(np.abs(phi)))
        records.append(IterationRecord(k, merit, res, alpha, fallback, cond))
        if log.isEnabledFor(logging.DEBUG):
            log.debug(
                "iter %d merit %.3e res %.3e step %.2e%s",
                k, merit, res, alpha, " grad" if fallback else "",
            )

    status = "solved" if res <= cfg.tol_residual else "max_iter"
    return z, status, records


def newton_solve(
    inst: LcpInstance, start: ReformPoint, config: NewtonConfig | None = None
) -> NewtonResult:
    """Run the damped semismooth Newton iteration from one starting point.

    Stops when the max norm of the root residual drops to
    ``config.tol_residual`` (status ``solved``); other exits are ``stalled``
    (no acceptable step), ``max_iter``, and ``diverged`` (non-finite values).
    """
    cfg = config or NewtonConfig()
    dims = inst.dims
    n_comp = dims.p - 1

    def fun(z):
        pt = ReformPoint.split(z, dims)
        return reform_g(inst, pt), reform_h(inst, pt)

    def jac(z):
        return jacobian_blocks(inst, ReformPoint.split(z, dims)).full()

    z, status, records = _fb_newton_core(fun, jac, start.concat(), n_comp, cfg)
    pt = ReformPoint.split(z, dims)
    final = fb_residual(inst, pt)
    return NewtonResult(
        point=pt,
        status=status,
        residual_inf=final.residual_inf,
        merit=final.merit,
        iterations=records[-1].iteration if records else 0,
        trace=IterationTrace(tuple(records)),
    )


# ------------------------------ stationarity ------------------------------


@dataclass(frozen=True, eq=False)
class StationarityReport:
    """Gradient and structure diagnostics at a candidate stationary point."""

    grad_inf: float
    residual_inf: float
    merit: float
    comp_set: tuple[int, ...]
    pos_set: tuple[int, ...]
    neg_set: tuple[int, ...]
    cond_gw: float
    cond_hut: float
    gw_nonsingular: bool
    hut_nonsingular: bool
    schur: np.ndarray | None


def stationarity_check(
    inst: LcpInstance,
    pt: ReformPoint,
    config: NewtonConfig | None = None,
    tol: float = DEFAULT_TOL,
) -> StationarityReport:
    """Inspect merit stationarity at pt.

    Partitions the complementarity indices into the set already complementary
    within tol, the set with both members strictly positive, and the rest;
    reports the merit gradient for the selected generalized-Jacobian element,
    condition estimates of the gap block and the coupling block, and the Schur
    complement of the coupling block when it is invertible.
    """
    cfg = config or NewtonConfig()
    element = generalized_jacobian(inst, pt, cfg)
    resid = fb_residual(inst, pt)
    grad = element.matrix.T @ resid.phi
    g = reform_g(inst, pt)

    comp, pos, neg = [], [], []
    for i, (a, b) in enumerate(zip(pt.w_hat, g)):
        if (
            a >= -tol * (1.0 + abs(a))
            and b >= -tol * (1.0 + abs(b))
            and product_small(a, b, tol)
        ):
            comp.append(i)
        elif a > tol and b > tol:
            pos.append(i)
        else:
            neg.append(i)

    blocks = jacobian_blocks(inst, pt)
    cond_gw = float(np.linalg.cond(blocks.gw)) if blocks.gw.size else 0.0
    cond_hut = float(np.linalg.cond(blocks.hut))
    hut_ok = np.isfinite(cond_hut) and cond_hut < cfg.cond_limit
    schur = None
    if hut_ok:
        schur = blocks.gw - blocks.gut @ np.linalg.solve(blocks.hut, blocks.hw)
    return StationarityReport(
        grad_inf=float(np.max(np.abs(grad))),
        residual_inf=resid.residual_inf,
        merit=resid.merit,
        comp_set=tuple(comp),
        pos_set=tuple(pos),
        neg_set=tuple(neg),
        cond_gw=cond_gw,
        cond_hut=cond_hut,
        gw_nonsingular=bool(np.isfinite(cond_gw) and cond_gw < cfg.cond_limit),
        hut_nonsingular=bool(hut_ok),
        schur=schur,
    )


# ------------------------------ multistart driver ------------------------------


@dataclass(frozen=True)
class RunSummary:
    start_index: int
    status: str
    residual_inf: float
    iterations: int
    certified: bool


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of the multistart solve: best certified solution if any."""

    status: str
    point: ReformPoint | None
    z: ConePoint | None
    s: ConePoint | None
    certificate: ComplementarityCertificate | None
    residual_inf: float
    start_index: int | None
    runs: tuple[RunSummary, ...]
    trace: IterationTrace | None


def default_starts(dims: ConeDims, n_starts: int, seed: int) -> list[ReformPoint]:
    """Random positive levels and u directions, gaps alternating zero/random.

    Tiny starts (t near 0, u near 0) tend to land in the basin of the trivial
    root at the origin, which never certifies when the instance has no zero
    solution, so both the level and the norm of u are drawn well away from
    zero.  Even-indexed starts zero the gap variables to favour solutions
    with few active gaps; odd-indexed ones spread them out.
    """
    rng = np.random.default_rng(seed)
    starts = []
    for i in range(n_starts):
        u = rng.normal(size=dims.q)
        u *= rng.uniform(0.1, 1.6) / np.linalg.norm(u)
        t0 = rng.uniform(0.1, 2.0)
        if i % 2 == 0:
            w = np.zeros(dims.p - 1)
        else:
            w = rng.uniform(0.0, 2.0, dims.p - 1)
        starts.append(ReformPoint(w, u, t0))
    return starts


def _certify_root(
    inst: LcpInstance, pt: ReformPoint, certify_tol: float
) -> tuple[ConePoint, ConePoint, ComplementarityCertificate] | None:
    """Reconstruct z from a root and classify it; None when t is too negative."""
    if pt.t < -certify_tol:
        return None
    fixed = ReformPoint(pt.w_hat, pt.u, abs(pt.t))
    z = ConePoint(x_from_reform(fixed), fixed.u)
    s = affine_image(inst, z)
    cert = classify_pair(z, s, certify_tol)
    return z, s, cert


def solve_lcp(
    inst: LcpInstance,
    n_starts: int = 20,
    seed: int = 0,
    config: NewtonConfig | None = None,
    extra_starts: tuple[ReformPoint, ...] = (),
    certify_tol: float = 1e-8,
    stop_at_first_certified: bool = True,
) -> SolveResult:
    """Multistart driver: fan out Newton runs, keep the best certified root.

    Starts are scanned in order (caller-supplied first, then the default
    recipe seeded by ``seed``), so results are reproducible.  A run counts
    only if it reports ``solved`` and its reconstructed point passes
    ``classify_pair`` at ``certify_tol``; among those the lowest final
    residual wins, ties broken by start index.  When no start certifies, the
    two special-case solvers are probed before giving up: they return exact
    roots on instances whose solution has a vanishing norm block or a
    vanishing lower image, regimes where the square system degenerates and
    the iteration leaves an uncertifiable residual.  A probe hit must still
    pass ``classify_pair``; its reported residual is the square-system value
    at the reconstructed point, which stays large when the solution sits
    strictly above the norm floor, so ``start_index`` is None to mark the
    origin.  With nothing certified the result carries status
    ``no_convergence`` and the best residual seen.
    """
    cfg = config or NewtonConfig()
    starts = list(extra_starts) + default_starts(inst.dims, n_starts, seed)
    runs: list[RunSummary] = []
    best = None  # (residual, start_index, result, z, s, cert)
    best_uncert = None

    for idx, start in enumerate(starts):
        result = newton_solve(inst, start, cfg)
        certified = False
        packed = None
        if result.status == "solved":
            packed = _certify_root(inst, result.point, certify_tol)
            certified = packed is not None and packed[2].member
        runs.append(
            RunSummary(idx, result.status, result.residual_inf, result.iterations, certified)
        )
        if certified:
            key = (result.residual_inf, idx)
            if best is None or key < best[0]:
                best = (key, result, packed)
            if stop_at_first_certified:
                break
        else:
            key = (result.residual_inf, idx)
            if best_uncert is None or key < best_uncert[0]:
                best_uncert = (key, result)

    if best is not None:
        _, result, (z, s, cert) = best
        return SolveResult(
            status="solved",
            point=result.point,
            z=z,
            s=s,
            certificate=cert,
            residual_inf=result.residual_inf,
            start_index=best[0][1],
            runs=tuple(runs),
            trace=result.trace,
        )
    for probe in (solve_case_u_zero, solve_case_w_zero):
        z = probe(inst, tol=certify_tol)
        if z is None:
            continue
        s = affine_image(inst, z)
        cert = classify_pair(z, s, certify_tol)
        if not cert.member:
            continue
        pt = reform_from_xu(z.x, z.u)
        return SolveResult(
            status="solved",
            point=pt,
            z=z,
            s=s,
            certificate=cert,
            residual_inf=fb_residual(inst, pt).residual_inf,
            start_index=None,
            runs=tuple(runs),
            trace=None,
        )
    fallback_res = best_uncert[1].residual_inf if best_uncert else np.inf
    return SolveResult(
        status="no_convergence",
        point=best_uncert[1].point if best_uncert else None,
        z=None,
        s=None,
        certificate=None,
        residual_inf=fallback_res,
        start_index=best_uncert[0][1] if best_uncert else None,
        runs=tuple(runs),
        trace=best_uncert[1].trace if best_uncert else None,
    )


# ------------------------------ helper solvers ------------------------------


def solve_orthant_lcp(
    M: np.ndarray, qvec: np.ndarray, config: NewtonConfig | None = None
) -> np.ndarray | None:
    """Solve w >= 0, M w + q >= 0, w perp (M w + q) by the same fb iteration."""
    cfg = config or NewtonConfig()
    M = np.asarray(M, dtype=float)
    qvec = np.asarray(qvec, dtype=float)
    n = qvec.size

    def fun(z):
        return M @ z + qvec, np.empty(0)

    def jac(z):
        return M

    rng = np.random.default_rng(0)
    starts = [np.zeros(n), np.full(n, 0.1), np.ones(n)]
    starts += [rng.uniform(0.0, 1.0, size=n) for _ in range(3)]
    for z0 in starts:
        z, status, _ = _fb_newton_core(fun, jac, z0, n, cfg)
        if status == "solved":
            return z
    return None


def _solve_case_w_zero_default(inst: LcpInstance) -> tuple[np.ndarray, np.ndarray] | None:
    """Default sub-solver for the vanishing-lower-image branch.

    Unknowns are the p gap variables of x (so the chain holds by sign
    constraints) and u; the lower image rows enter as equations.
    """
    cfg = NewtonConfig()
    p, q = inst.dims.p, inst.dims.q
    b = inst.blocks
    L, U = lower_ones(p), upper_ones(p)
    MG = L @ b.A @ U
    MB = L @ b.B
    cy = L @ inst.r.x

    def fun(z):
        w, u = z[:p], z[p:]
        return MG @ w + MB @ u + cy, b.C @ (U @ w) + b.D @ u + inst.r.u

    def jac(z):
        return np.block([[MG, MB], [b.C @ U, b.D]])

    rng = np.random.default_rng(0)
    starts = [
        np.concatenate([np.full(p, 0.5), np.zeros(q)]),
        np.concatenate([np.ones(p), np.full(q, 0.1)]),
        np.concatenate([np.zeros(p), np.zeros(q)]),
    ]
    starts += [rng.normal(scale=0.5, size=p + q) for _ in range(5)]
    for z0 in starts:
        z, status, _ = _fb_newton_core(fun, jac, z0, p, cfg)
        if status == "solved":
            w, u = z[:p], z[p:]
            return U @ w, u
    return None
