"""Command line front end.

Four subcommands: ``solve`` runs the multistart semismooth Newton solver on
an instance file, ``certify`` classifies a candidate point against an
instance, ``generate`` writes a random instance with a planted solution, and
``portfolio`` evaluates the closed-form allocation on a returns CSV.  Every
command emits a JSON report on stdout (``--human`` switches to prose) and
exits 0 on success, 1 on input errors, 2 when no solution or certificate was
produced.  Set MESOC_LOG=debug (or info) for per-iteration traces on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cones import ComplementarityCertificate, ConePoint
from .lcp import (
    alpha_beta_certificate,
    affine_image,
    dump_instance,
    load_instance,
    planted_instance,
)
from .newton import NewtonConfig, solve_lcp
from .portfolio import load_returns_csv, select_jstar, solve_allocation

log = logging.getLogger("mesoc.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_SOLUTION = 2


@dataclass(frozen=True)
class RunReport:
    """What a subcommand produced: payload plus status and timing."""

    command: str
    status: str
    exit_code: int
    wall_time_s: float
    data: dict

    def to_json(self) -> str:
        obj = {
            "command": self.command,
            "status": self.status,
            "wall_time_s": round(self.wall_time_s, 6),
        }
        obj.update(self.data)
        return json.dumps(obj, indent=2, sort_keys=True)


def _configure_logging() -> None:
    raw = os.environ.get("MESOC_LOG", "").strip()
    if not raw:
        return
    named = {"debug": logging.DEBUG, "info": logging.INFO, "2": logging.DEBUG, "1": logging.INFO}
    level = named.get(raw.lower())
    if level is None:
        try:
            level = int(raw)
        except ValueError:
            level = logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(name)s %(levelname)s %(message)s"
    )


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _cert_obj(cert: ComplementarityCertificate) -> dict:
    return {
        "case_tag": cert.case_tag,
        "member": cert.member,
        "lambda": cert.lam,
        "residuals": {k: float(v) for k, v in cert.residuals.items()},
        "notes": list(cert.notes),
    }


def _parse_floats(text: str, what: str) -> np.ndarray:
    try:
        return np.asarray([float(piece) for piece in text.split(",")], dtype=float)
    except ValueError:
        raise ValueError(f"could not parse {what} {text!r} as comma-separated numbers")


# ------------------------------ solve ------------------------------


def cmd_solve(args: argparse.Namespace) -> RunReport:
    t0 = time.perf_counter()
    inst = load_instance(args.instance)
    config = NewtonConfig(tol_residual=args.tol, max_iter=args.max_iter)
    result = solve_lcp(inst, n_starts=args.starts, seed=args.seed, config=config)
    elapsed = time.perf_counter() - t0

    data: dict = {
        "instance": str(args.instance),
        "instance_digest": _digest(args.instance),
        "residual_inf": float(result.residual_inf),
        "start_index": result.start_index,
        "runs": [
            {
                "start_index": r.start_index,
                "status": r.status,
                "residual_inf": float(r.residual_inf),
                "iterations": r.iterations,
                "certified": r.certified,
            }
            for r in result.runs
        ],
        "solution": None,
        "certificate": None,
    }
    if result.status == "solved":
        data["solution"] = {
            "x": result.z.x.tolist(),
            "u": result.z.u.tolist(),
            "w_hat": result.point.w_hat.tolist(),
            "t": result.point.t,
        }
        data["certificate"] = _cert_obj(result.certificate)
        data["iterations"] = len(result.trace) - 1 if result.trace is not None else 0
        code = EXIT_OK
    else:
        code = EXIT_NO_SOLUTION
    if result.trace is not None:
        for line in result.trace.lines():
            log.info(line)
    return RunReport("solve", result.status, code, elapsed, data)


def _render_solve(report: RunReport) -> str:
    lines = [f"status: {report.status}  (wall time {report.wall_time_s:.3f}s)"]
    lines.append(f"residual: {report.data['residual_inf']:.3e}")
    sol = report.data["solution"]
    if sol is not None:
        lines.append(f"x: {np.asarray(sol['x'])}")
        lines.append(f"u: {np.asarray(sol['u'])}")
        cert = report.data["certificate"]
        lam = cert["lambda"]
        lam_text = f"  lambda={lam:.6f}" if lam is not None else ""
        lines.append(f"certificate: {cert['case_tag']}{lam_text}  member={cert['member']}")
    else:
        lines.append(f"no certified solution over {len(report.data['runs'])} starts")
    return "\n".join(lines)


# ------------------------------ certify ------------------------------


def _load_candidate(path: str | Path) -> ConePoint:
    try:
        obj = json.loads(Path(path).read_text())
        return ConePoint(
            np.asarray(obj["x"], dtype=float), np.asarray(obj["u"], dtype=float)
        )
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise ValueError(f"candidate file needs x and u arrays: {exc}") from exc


def cmd_certify(args: argparse.Namespace) -> RunReport:
    from .cones import classify_pair

    t0 = time.perf_counter()
    inst = load_instance(args.instance)
    z = _load_candidate(args.candidate)
    s = affine_image(inst, z)
    cert = classify_pair(z, s, args.tol)
    ab = alpha_beta_certificate(inst, z, args.tol)
    elapsed = time.perf_counter() - t0
    data = {
        "instance": str(args.instance),
        "instance_digest": _digest(args.instance),
        "candidate": str(args.candidate),
        "candidate_digest": _digest(args.candidate),
        "image": {"y": s.x.tolist(), "v": s.u.tolist()},
        "certificate": _cert_obj(cert),
        "alpha_beta": {
            "alpha": ab.alpha.tolist(),
            "beta": ab.beta.tolist(),
            "inner": ab.inner,
            "complementary": ab.complementary,
        },
    }
    status = "pass" if cert.member else "fail"
    return RunReport(
        "certify", status, EXIT_OK if cert.member else EXIT_NO_SOLUTION, elapsed, data
    )


def _render_certify(report: RunReport) -> str:
    cert = report.data["certificate"]
    ab = report.data["alpha_beta"]
    lines = [f"verdict: {report.status}  case: {cert['case_tag']}"]
    if cert["lambda"] is not None:
        lines.append(f"lambda: {cert['lambda']:.6f}")
    for key, value in sorted(cert["residuals"].items()):
        lines.append(f"  {key}: {value:.6e}")
    lines.append(f"gap/prefix inner product: {ab['inner']:.6e}")
    return "\n".join(lines)


# ------------------------------ generate ------------------------------


def cmd_generate(args: argparse.Namespace) -> RunReport:
    t0 = time.perf_counter()
    if args.p < 2 or args.q < 1:
        raise ValueError("need p >= 2 and q >= 1")
    inst, z_star, s_star = planted_instance(args.p, args.q, args.seed)
    out = Path(args.out)
    dump_instance(inst, out)
    sidecar = out.with_name(out.stem + ".solution.json")
    sidecar.write_text(
        json.dumps(
            {
                "x": z_star.x.tolist(),
                "u": z_star.u.tolist(),
                "y": s_star.x.tolist(),
                "v": s_star.u.tolist(),
                "seed": args.seed,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    elapsed = time.perf_counter() - t0
    data = {
        "out": str(out),
        "solution_out": str(sidecar),
        "instance_digest": _digest(out),
        "p": args.p,
        "q": args.q,
        "seed": args.seed,
    }
    return RunReport("generate", "written", EXIT_OK, elapsed, data)


def _render_generate(report: RunReport) -> str:
    return (
        f"instance written to {report.data['out']}\n"
        f"planted solution written to {report.data['solution_out']}"
    )


# ------------------------------ portfolio ------------------------------


def _parse_f(spec: str, n_periods: int) -> np.ndarray:
    if spec == "ones":
        return np.ones(n_periods)
    if spec == "linear":
        return np.arange(1, n_periods + 1, dtype=float) / n_periods
    f = _parse_floats(spec, "--f")
    if f.size != n_periods:
        raise ValueError(f"--f has {f.size} entries but the panel has {n_periods} periods")
    return f


def cmd_portfolio(args: argparse.Namespace) -> RunReport:
    t0 = time.perf_counter()
    mean = _parse_floats(args.mean, "--mean") if args.mean else None
    panel = load_returns_csv(args.csv, mean=mean)
    f = _parse_f(args.f, panel.n_periods)

    if args.jstar.startswith("fixed:"):
        try:
            index = int(args.jstar.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad --jstar value {args.jstar!r}")
        selection = select_jstar(panel, mode="fixed", index=index)
    elif args.jstar == "given-w":
        w = _parse_floats(args.w, "--w") if args.w else None
        selection = select_jstar(panel, mode="given-w", w=w)
    elif args.jstar == "fixed-point":
        w = _parse_floats(args.w, "--w") if args.w else None
        selection = select_jstar(panel, mode="fixed-point", w=w, c0=args.c0, f=f)
    else:
        raise ValueError(f"bad --jstar value {args.jstar!r} (fixed:K, given-w, fixed-point)")

    report_alloc = solve_allocation(panel, args.c0, f, selection.index)
    elapsed = time.perf_counter() - t0

    def sol_obj(sol):
        return {
            "beta": sol.beta,
            "case_tag": sol.case_tag,
            "lambda": sol.lam,
            "accepted": sol.accepted,
            "flags": list(sol.flags),
            "w": sol.w.tolist(),
            "kkt": {k: float(v) for k, v in sol.kkt.items()},
        }

    data = {
        "csv": str(args.csv),
        "csv_digest": _digest(args.csv),
        "labels": list(panel.labels),
        "mean_supplied": panel.mean_supplied,
        "c0": args.c0,
        "f": f.tolist(),
        "jstar": {
            "mode": args.jstar,
            "index": selection.index,
            "rounds": selection.rounds,
            "converged": selection.converged,
        },
        "norm_ujstar": report_alloc.model.norm_ujstar,
        "candidates": [sol_obj(c) for c in report_alloc.candidates],
        "best": sol_obj(report_alloc.best) if report_alloc.best else None,
    }
    status = "solved" if report_alloc.best is not None else "no_solution"
    code = EXIT_OK if report_alloc.best is not None else EXIT_NO_SOLUTION
    return RunReport("portfolio", status, code, elapsed, data)


def _render_portfolio(report: RunReport) -> str:
    lines = [
        f"status: {report.status}  reference period: {report.data['jstar']['index']}"
    ]
    best = report.data["best"]
    if best is not None:
        lines.append(f"beta: {best['beta']:.8f}  case: {best['case_tag']}")
        for label, weight in zip(report.data["labels"], best["w"]):
            lines.append(f"  {label}: {weight:+.6f}")
        worst = max(abs(v) for v in best["kkt"].values())
        lines.append(f"max KKT defect: {worst:.3e}")
    else:
        lines.append("no candidate passed verification")
    return "\n".join(lines)


# ------------------------------ entry point ------------------------------


_RENDERERS = {
    "solve": _render_solve,
    "certify": _render_certify,
    "generate": _render_generate,
    "portfolio": _render_portfolio,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mesoc",
        description="complementarity problems on the monotone extended second order cone",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve an instance file")
    p_solve.add_argument("instance")
    p_solve.add_argument("--tol", type=float, default=1e-10)
    p_solve.add_argument("--max-iter", type=int, default=200)
    p_solve.add_argument("--starts", type=int, default=20)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--human", action="store_true")

    p_cert = sub.add_parser("certify", help="classify a candidate point")
    p_cert.add_argument("instance")
    p_cert.add_argument("candidate")
    p_cert.add_argument("--tol", type=float, default=1e-9)
    p_cert.add_argument("--human", action="store_true")

    p_gen = sub.add_parser("generate", help="write an instance with a planted solution")
    p_gen.add_argument("--p", type=int, required=True)
    p_gen.add_argument("--q", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--human", action="store_true")

    p_port = sub.add_parser("portfolio", help="closed-form allocation from a returns CSV")
    p_port.add_argument("csv")
    p_port.add_argument("--c0", type=float, required=True)
    p_port.add_argument("--f", default="ones", help="ones, linear, or comma list")
    p_port.add_argument(
        "--jstar", default="fixed-point", help="fixed:K, given-w, or fixed-point"
    )
    p_port.add_argument("--w", default=None, help="comma list of weights")
    p_port.add_argument("--mean", default=None, help="comma list overriding the data mean")
    p_port.add_argument("--human", action="store_true")

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "certify": cmd_certify,
        "generate": cmd_generate,
        "portfolio": cmd_portfolio,
    }
    try:
        report = handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "human", False):
        print(_RENDERERS[args.command](report))
    else:
        print(report.to_json())
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
