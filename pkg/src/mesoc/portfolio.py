"""Closed-form single-asset-deviation portfolio allocation.

Given a panel of per-period returns, the allocation problem bounds each
period's deviation from the mean return by an ordered ladder of slack
variables y_T >= ... >= y_1 >= ||U_jstar|| * ||w|| and charges them through a
cost vector f scaled by c0, while rewarding mean return.  Stationarity of the
Lagrangian couples the budget multiplier beta to the mean vector through a
scalar quadratic; solving it gives fully explicit weights

    w = (r - beta * ||U_jstar|| * e) / (<r, e> - n * beta * ||U_jstar||),

which always satisfy the budget constraint exactly.  Every candidate is
verified a posteriori: the slack/multiplier pair must form a complementary
pair for the ordered cone, checked by ``classify_pair``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._tol import DEFAULT_TOL, tol_close
from .cones import ComplementarityCertificate, ConePoint, classify_pair

__all__ = [
    "ReturnsPanel",
    "MadModel",
    "PortfolioSolution",
    "JstarSelection",
    "AllocationReport",
    "disturbances",
    "theta_schedule",
    "beta_roots_general",
    "weights_closed_form",
    "solve_degenerate_case",
    "kkt_residuals",
    "kkt_pair",
    "select_jstar",
    "solve_allocation",
    "load_returns_csv",
]


# ------------------------------ data types ------------------------------


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """Per-period returns (T rows, n assets) plus the mean vector in use.

    ``mean_supplied`` records whether the mean was taken from the data or
    handed in by the caller.
    """

    returns: np.ndarray
    labels: tuple[str, ...]
    mean: np.ndarray
    mean_supplied: bool

    def __post_init__(self) -> None:
        R = np.asarray(self.returns, dtype=float)
        m = np.asarray(self.mean, dtype=float)
        if R.ndim != 2 or R.shape[0] < 1 or R.shape[1] < 1:
            raise ValueError("returns must be a nonempty T x n matrix")
        if m.shape != (R.shape[1],):
            raise ValueError("mean length must match the number of assets")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(m))):
            raise ValueError("returns and mean must be finite")
        if len(self.labels) != R.shape[1]:
            raise ValueError("one label per asset required")
        object.__setattr__(self, "returns", R)
        object.__setattr__(self, "mean", m)

    @classmethod
    def from_returns(
        cls,
        returns: np.ndarray,
        labels: tuple[str, ...] | None = None,
        mean: np.ndarray | None = None,
    ) -> "ReturnsPanel":
        R = np.asarray(returns, dtype=float)
        if R.ndim != 2 or R.shape[0] < 1 or R.shape[1] < 1:
            raise ValueError("returns must be a nonempty T x n matrix")
        if labels is None:
            labels = tuple(f"asset{i + 1}" for i in range(R.shape[1]))
        supplied = mean is not None
        m = np.asarray(mean, dtype=float) if supplied else R.mean(axis=0)
        return cls(R, tuple(labels), m, supplied)

    @property
    def n_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True, eq=False)
class MadModel:
    """Model data: cost scale c0 > 0, cost vector f (one entry per period),
    the reference period jstar, and the norm of its disturbance row."""

    c0: float
    f: np.ndarray
    jstar: int
    norm_ujstar: float

    def __post_init__(self) -> None:
        f = np.atleast_1d(np.asarray(self.f, dtype=float))
        object.__setattr__(self, "f", f)
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not self.norm_ujstar > 0:
            raise ValueError("reference disturbance row must be nonzero")
        if self.jstar < 0 or self.jstar >= f.size:
            raise ValueError("jstar out of range")

    @classmethod
    def from_panel(
        cls, panel: ReturnsPanel, c0: float, f: np.ndarray, jstar: int
    ) -> "MadModel":
        f = np.atleast_1d(np.asarray(f, dtype=float))
        if f.size != panel.n_periods:
            raise ValueError("f needs one entry per period")
        norm = float(np.linalg.norm(disturbances(panel)[jstar]))
        return cls(c0, f, jstar, norm)


@dataclass(frozen=True, eq=False)
class PortfolioSolution:
    """One closed-form candidate with its verification record."""

    w: np.ndarray
    u: np.ndarray
    beta: float
    theta: np.ndarray
    lam: float | None
    case_tag: str
    kkt: dict[str, float]
    certificate: ComplementarityCertificate | None
    flags: tuple[str, ...] = field(default=())

    @property
    def accepted(self) -> bool:
        return self.certificate is not None and self.certificate.member


@dataclass(frozen=True)
class JstarSelection:
    index: int
    rounds: int
    converged: bool | None


@dataclass(frozen=True, eq=False)
class AllocationReport:
    model: MadModel
    candidates: tuple[PortfolioSolution, ...]
    best: PortfolioSolution | None


# ------------------------------ elementary maps ------------------------------


def disturbances(panel: ReturnsPanel) -> np.ndarray:
    """Deviation rows U_j = R_j - r of every period from the mean vector."""
    return panel.returns - panel.mean


def theta_schedule(c0: float, f: np.ndarray) -> np.ndarray:
    """Multiplier ladder that zeroes the slack-gradient rows.

    theta_t = c0 * (f_t + ... + f_{T-1} - f_T) for t < T and
    theta_T = -c0 * f_T (1-based); returned as a length-T vector.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    T = f.size
    theta = np.empty(T)
    tail = float(f[:-1].sum()) if T > 1 else 0.0
    for i in range(T - 1):
        theta[i] = c0 * (tail - f[-1])
        tail -= f[i]
    theta[-1] = -c0 * f[-1]
    return theta


def _beta_quadratic(n: int, sum_r: float, sum_r2: float, norm_u: float, s_const: float):
    """Roots of n b^2 - 2 (sum r / ||U||) b + sum r^2 / ||U||^2 - s^2 = 0."""
    b_lin = -2.0 * sum_r / norm_u
    c_const = sum_r2 / norm_u**2 - s_const**2
    disc = b_lin * b_lin - 4.0 * n * c_const
    if disc < 0.0:
        return None
    sd = float(np.sqrt(disc))
    hi = (-b_lin + sd) / (2.0 * n)
    lo = (-b_lin - sd) / (2.0 * n)
    return hi, lo


def beta_roots_general(model: MadModel, panel: ReturnsPanel):
    """Both roots (larger first) of the budget-multiplier quadratic, with the
    constant term built from c0 * sum(f) + 2 * theta_T; None when complex."""
    r = panel.mean
    theta = theta_schedule(model.c0, model.f)
    s_const = model.c0 * float(model.f.sum()) + 2.0 * float(theta[-1])
    return _beta_quadratic(
        r.size, float(r.sum()), float(r @ r), model.norm_ujstar, s_const
    )


# ------------------------------ solutions ------------------------------


def _weights(panel: ReturnsPanel, norm_u: float, beta: float) -> np.ndarray:
    r = panel.mean
    denom = float(r.sum()) - r.size * beta * norm_u
    if abs(denom) <= 1e-12 * (1.0 + abs(float(r.sum())) + abs(r.size * beta * norm_u)):
        raise ValueError("degenerate denominator in the closed-form weights")
    return (r - beta * norm_u) / denom


def weights_closed_form(
    model: MadModel, panel: ReturnsPanel, beta: float, tol: float = 1e-8
) -> PortfolioSolution:
    """Closed-form candidate for one root of the budget quadratic.

    Builds w, the scaled holdings u = w * ||U_jstar||, the multiplier ladder,
    and the alignment multiplier lam = (c0 sum f + 2 theta_T - theta_1)/||u||;
    lam <= 0 is flagged.  The KKT pair is classified immediately and stored.
    """
    w = _weights(panel, model.norm_ujstar, beta)
    u = w * model.norm_ujstar
    theta = theta_schedule(model.c0, model.f)
    nu = float(np.linalg.norm(u))
    k_const = model.c0 * float(model.f.sum()) + 2.0 * float(theta[-1]) - float(theta[0])
    lam = k_const / nu
    flags = ("lambda-nonpositive",) if lam <= tol else ()
    sol = PortfolioSolution(
        w=w, u=u, beta=float(beta), theta=theta, lam=lam,
        case_tag="general", kkt={}, certificate=None, flags=flags,
    )
    return _verified(model, panel, sol, tol)


def solve_degenerate_case(
    model: MadModel, panel: ReturnsPanel, tol: float = 1e-8
) -> PortfolioSolution | None:
    """Branch with a vanishing holdings-gradient.

    Replaces the quadratic's constant by theta_1, rebuilds u from the same
    closed form, and keeps a root only when the existence condition holds:
    all components of ||u|| * r / ||U_jstar|| - theta_1 * u equal within
    tolerance.  Returns the best passing candidate or None.
    """
    theta = theta_schedule(model.c0, model.f)
    theta1 = float(theta[0])
    if abs(theta1) <= 1e-12 * (1.0 + abs(theta1)):
        raise ValueError("theta_1 vanishes; the degenerate branch is undefined")
    roots = _beta_quadratic(
        panel.mean.size,
        float(panel.mean.sum()),
        float(panel.mean @ panel.mean),
        model.norm_ujstar,
        theta1,
    )
    if roots is None:
        return None
    best: PortfolioSolution | None = None
    for beta in roots:
        try:
            w = _weights(panel, model.norm_ujstar, beta)
        except ValueError:
            continue
        u = w * model.norm_ujstar
        nu = float(np.linalg.norm(u))
        vals = nu * panel.mean / model.norm_ujstar - theta1 * u
        spread = float(vals.max() - vals.min())
        if spread > tol * (1.0 + float(np.max(np.abs(vals)))):
            continue
        sol = PortfolioSolution(
            w=w, u=u, beta=float(beta), theta=theta, lam=None,
            case_tag="degenerate", kkt={}, certificate=None,
        )
        sol = _verified(model, panel, sol, tol)
        if best is None or _kkt_size(sol) < _kkt_size(best):
            best = sol
    return best


def _kkt_size(sol: PortfolioSolution) -> float:
    return max(abs(v) for v in sol.kkt.values()) if sol.kkt else np.inf


def _dual_pieces(model: MadModel, panel: ReturnsPanel, sol_u: np.ndarray, beta: float,
                 theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c0, f = model.c0, model.f
    T = f.size
    dual_y = np.empty(T)
    for i in range(T - 1):
        dual_y[i] = c0 * f[i] + theta[i + 1] - theta[i]
    dual_y[-1] = c0 * f[-1] + theta[-1]
    nu = float(np.linalg.norm(sol_u))
    dual_u = -panel.mean / model.norm_ujstar + float(theta[0]) * sol_u / nu + beta
    return dual_y, dual_u


def kkt_pair(
    model: MadModel, panel: ReturnsPanel, sol: PortfolioSolution
) -> tuple[ConePoint, ConePoint]:
    """Primal/dual pair fed to ``classify_pair``: slack ladder pinned at the
    binding level ||u|| against the gradient pieces of the Lagrangian."""
    if model.f.size < 2:
        raise ValueError("the cone pair needs at least two periods")
    nu = float(np.linalg.norm(sol.u))
    if nu <= 0.0:
        raise ValueError("holdings vector vanishes")
    dual_y, dual_u = _dual_pieces(model, panel, sol.u, sol.beta, sol.theta)
    primal = ConePoint(np.full(model.f.size, nu), sol.u)
    dual = ConePoint(dual_y, dual_u)
    return primal, dual


def kkt_residuals(
    model: MadModel, panel: ReturnsPanel, sol: PortfolioSolution
) -> dict[str, float]:
    """Raw defect magnitudes of the stationarity and feasibility conditions."""
    nu = float(np.linalg.norm(sol.u))
    if nu <= 0.0:
        raise ValueError("holdings vector vanishes")
    dual_y, dual_u = _dual_pieces(model, panel, sol.u, sol.beta, sol.theta)
    primal = np.concatenate([np.full(model.f.size, nu), sol.u])
    dual = np.concatenate([dual_y, dual_u])
    # slack ladder is constant at ||u|| so only the floor can be violated
    primal_gap = max(0.0, nu - float(primal[model.f.size - 1]))
    prefix = np.cumsum(dual_y)
    interior = float(np.min(prefix[:-1], initial=0.0))
    dual_gap = max(
        max(0.0, -interior),
        max(0.0, float(np.linalg.norm(dual_u)) - float(prefix[-1])),
    )
    return {
        "stationarity_slack": float(np.max(np.abs(dual_y))),
        "stationarity_holdings": float(np.max(np.abs(dual_u))),
        "budget": abs(float(sol.w.sum()) - 1.0),
        "orthogonality": abs(float(primal @ dual)),
        "primal_membership": primal_gap,
        "dual_membership": dual_gap,
    }


def _verified(
    model: MadModel, panel: ReturnsPanel, sol: PortfolioSolution, tol: float
) -> PortfolioSolution:
    from dataclasses import replace

    kkt = kkt_residuals(model, panel, sol)
    cert = None
    if model.f.size >= 2:
        primal, dual = kkt_pair(model, panel, sol)
        cert = classify_pair(primal, dual, tol)
    return replace(sol, kkt=kkt, certificate=cert)


# ------------------------------ selection and driver ------------------------------


def select_jstar(
    panel: ReturnsPanel,
    mode: str = "fixed",
    w: np.ndarray | None = None,
    index: int | None = None,
    c0: float | None = None,
    f: np.ndarray | None = None,
    max_rounds: int = 50,
    tol: float = 1e-8,
) -> JstarSelection:
    """Choose the reference period.

    ``fixed`` (the default, for reproducibility) echoes a caller-supplied
    index; ``given-w`` returns the period
    whose disturbance row is most orthogonal to w, argmin_j |U_j . w| with
    ties to the smallest index; ``fixed-point`` alternates between solving the
    allocation at the current index and re-selecting until the index repeats
    (at most ``max_rounds`` rounds), reporting whether it stabilized.
    """
    U = disturbances(panel)
    if not np.any(np.abs(U) > 0.0):
        raise ValueError("all disturbance rows vanish; no reference period")
    if mode == "fixed":
        if index is None or not 0 <= index < panel.n_periods:
            raise ValueError("mode 'fixed' needs a valid index")
        return JstarSelection(index=index, rounds=0, converged=None)
    if mode == "given-w":
        if w is None:
            raise ValueError("mode 'given-w' needs a weight vector")
        scores = np.abs(U @ np.asarray(w, dtype=float))
        return JstarSelection(index=int(np.argmin(scores)), rounds=0, converged=True)
    if mode == "fixed-point":
        if c0 is None or f is None:
            raise ValueError("mode 'fixed-point' needs c0 and f")
        w_cur = np.asarray(w, dtype=float) if w is not None else np.full(
            panel.n_assets, 1.0 / panel.n_assets
        )
        j = int(np.argmin(np.abs(U @ w_cur)))
        for round_no in range(1, max_rounds + 1):
            report = solve_allocation(panel, c0, f, j, tol=tol)
            if report.best is None:
                return JstarSelection(index=j, rounds=round_no, converged=False)
            j_new = int(np.argmin(np.abs(U @ report.best.w)))
            if j_new == j:
                return JstarSelection(index=j, rounds=round_no, converged=True)
            j = j_new
        return JstarSelection(index=j, rounds=max_rounds, converged=False)
    raise ValueError(f"unknown mode {mode!r}")


def solve_allocation(
    panel: ReturnsPanel, c0: float, f: np.ndarray, jstar: int, tol: float = 1e-8
) -> AllocationReport:
    """Evaluate every closed-form candidate at one reference period.

    Both roots of the general quadratic and the degenerate branch are built
    and verified; ``best`` is the accepted candidate with the smallest KKT
    defect, None when nothing verifies.
    """
    model = MadModel.from_panel(panel, c0, f, jstar)
    candidates: list[PortfolioSolution] = []
    roots = beta_roots_general(model, panel)
    if roots is not None:
        for beta in roots:
            try:
                candidates.append(weights_closed_form(model, panel, beta, tol))
            except ValueError:
                continue
    try:
        degenerate = solve_degenerate_case(model, panel, tol)
    except ValueError:
        degenerate = None
    if degenerate is not None and not any(
        tol_close(degenerate.beta, c.beta, 1e-12) for c in candidates
    ):
        candidates.append(degenerate)
    accepted = [c for c in candidates if c.accepted]
    best = min(accepted, key=_kkt_size) if accepted else None
    return AllocationReport(model=model, candidates=tuple(candidates), best=best)


# ------------------------------ I/O ------------------------------


def load_returns_csv(path: str | Path, mean: np.ndarray | None = None) -> ReturnsPanel:
    """Read a returns panel: header row of asset labels, one row per period."""
    rows: list[list[float]] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            labels = tuple(cell.strip() for cell in next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(labels):
                raise ValueError(f"{path}:{line_no}: expected {len(labels)} columns")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return ReturnsPanel.from_returns(np.asarray(rows), labels, mean)
