"""Command-line interface.

Exit codes: 0 ok, 1 parse error, 2 no dichotomy, 3 unsolvable or infeasible,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import Optional

import numpy as np

from . import __version__
from .demos import DEMO_NAMES, demo_problem
from .dichotomy import Axis, DichotomyCertificate, certify, verify_dichotomy
from .errors import DichoboundError, NotSolvable, ProblemParseError, VerificationFailure
from .green import (
    GreenContext,
    build_context,
    quasi_solve,
    solvability_residual,
    solve_bounded,
)
from .linsys import StateSequence, apply_L, dynamics_residual
from .oracle import TruncatedProblem, compare_mod_family, default_half_width, truncated_bounded_solve
from .problem_io import (
    ProblemFile,
    Tolerances,
    dumps_canonical,
    load,
    loads_json,
    matrix_to_list,
    read_text,
    write_text,
)

ORACLE_TOL = 1e-6
CERT_RATIO_TOL = 1e-9
REPRODUCE_TOL = 1e-12


def certificate_window(problem: ProblemFile) -> int:
    return max(20, 2 * (problem.window_hi - problem.window_lo))


def analyze_problem(problem: ProblemFile, tol: Tolerances):
    """Certificates, their verification reports and the Green's context."""
    seq = problem.operator_sequence()
    W = certificate_window(problem)
    certs, reports = {}, {}
    for axis, window in ((Axis.PLUS, (0, W)), (Axis.MINUS, (-W, 0))):
        cert = certify(seq, axis, window, tol.gap_tol)
        certs[axis.value] = cert
        reports[axis.value] = verify_dichotomy(seq, cert, window, CERT_RATIO_TOL)
    ctx = build_context(
        seq,
        gap_tol=tol.gap_tol,
        rank_tol_rel=tol.rank_tol_rel,
        solvability_tol=tol.solvability_tol,
        P=certs["plus"].projector,
        Q=certs["minus"].projector,
    )
    return ctx, certs, reports


def _seq_json(x: StateSequence) -> dict:
    return {"start": x.start, "samples": matrix_to_list(x.values)}


def _seq_from_json(raw) -> StateSequence:
    try:
        return StateSequence(int(raw["start"]), np.array(raw["samples"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemParseError(f"malformed sample block: {exc}") from exc


def compute_verification(ctx: GreenContext, problem: ProblemFile, tol: Tolerances,
                         solution: Optional[StateSequence], basis) -> dict:
    """Residuals recomputed from samples; ``cmd_verify`` reproduces these exactly."""
    seq, h = ctx.seq, problem.forcing_sequence()
    out = {
        "tolerance": tol.verify_tol * (1.0 + h.sup_norm()),
        "condition_norm": solvability_residual(ctx, h).residual_norm,
        "dynamics_residual": None,
        "jump_norm": None,
        "basis_residual": 0.0,
    }
    if solution is not None and len(solution) >= 2:
        out["dynamics_residual"] = dynamics_residual(seq, solution, h, skip={-1})
        if solution.start <= -1 and solution.stop > 0:
            jump = solution(0) - seq.operator_at(-1) @ solution(-1) - h(-1)
            out["jump_norm"] = float(np.linalg.norm(jump))
    for b in basis:
        if len(b) >= 2:
            out["basis_residual"] = max(out["basis_residual"], apply_L(seq, b).sup_norm())
    return out


def build_result(problem, tol, mode, ctx, certs, reports, family=None, report=None) -> dict:
    cls = ctx.classification
    result = {
        "problem_sha256": problem.sha256(),
        "mode": mode,
        "tolerances_used": tol.as_dict(),
        "certificates": {
            name: {
                "projector": matrix_to_list(cert.projector),
                "k": float(cert.k),
                "lambda": float(cert.lam),
                "verified_window": list(cert.verified_window),
                "max_ratio": float(reports[name].max_ratio),
                "verified": bool(reports[name].verified),
                "k_fit": float(reports[name].k_fit),
                "lambda_fit": float(reports[name].lambda_fit),
            }
            for name, cert in certs.items()
        },
        "classification": cls.as_dict(),
        "singular_values": [float(s) for s in ctx.gi.singular_values],
        "problem": problem.as_dict(),
    }
    if report is not None:
        result["solvability"] = report.as_dict()
    solution, basis = None, []
    if family is not None:
        solution, basis = family.particular, family.basis
        result["solution"] = _seq_json(solution)
        result["basis"] = [_seq_json(b) for b in basis]
        result["defect_norm"] = family.defect_norm
    result["verification"] = compute_verification(ctx, problem, tol, solution, basis)
    return result


def _effective_tolerances(problem, rank_tol_rel=None):
    return problem.tolerances.replace(rank_tol_rel=rank_tol_rel)


def _fmt(M):
    return np.array2string(np.asarray(M), precision=6, suppress_small=True)


def _print_analysis(ctx, certs, reports, out):
    for name in ("plus", "minus"):
        cert, rep = certs[name], reports[name]
        label = "P" if name == "plus" else "Q"
        print(f"{label} (semi-axis {name}):\n{_fmt(cert.projector)}", file=out)
        print(
            f"  k = {cert.k:.6g}, lambda = {cert.lam:.6g}, window {list(cert.verified_window)}, "
            f"max ratio {rep.max_ratio:.6g}, verified = {rep.verified}",
            file=out,
        )
    c = ctx.classification
    print(
        f"D singular values: {_fmt(ctx.gi.singular_values)}\n"
        f"dim ker D = {c.dim_ker}, dim coker D = {c.dim_coker}, r = {c.r}, d = {c.d}, "
        f"index = {c.index}\n"
        f"trichotomy = {str(c.trichotomy).lower()}, "
        f"dichotomy_on_z = {str(c.dichotomy_on_z).lower()}",
        file=out,
    )


def _write_result(result, output):
    if output:
        write_text(output, dumps_canonical(result))


def cmd_analyze(problem_path, output=None, rank_tol_rel=None, out=None) -> int:
    out = out or sys.stdout
    problem = load(problem_path)
    tol = _effective_tolerances(problem, rank_tol_rel)
    ctx, certs, reports = analyze_problem(problem, tol)
    _print_analysis(ctx, certs, reports, out)
    _write_result(build_result(problem, tol, "analyze", ctx, certs, reports), output)
    return 0


def write_csv(path, x: StateSequence):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n"] + [f"x_{i + 1}" for i in range(x.dim)] + ["norm"])
        for n, row in zip(x.indices, x.values):
            w.writerow([n] + [repr(float(v)) for v in row] + [repr(float(np.linalg.norm(row)))])


def cmd_solve(problem_path, quasi=False, output=None, csv_path=None, rank_tol_rel=None,
              out=None) -> int:
    out = out or sys.stdout
    problem = load(problem_path)
    tol = _effective_tolerances(problem, rank_tol_rel)
    ctx, certs, reports = analyze_problem(problem, tol)
    h = problem.forcing_sequence()
    if quasi:
        family = quasi_solve(ctx, h, problem.output_window)
        report = family.report
        mode = "quasi"
    else:
        mode = "exact"
        try:
            family = solve_bounded(ctx, h, problem.output_window)
            report = family.report
        except NotSolvable as exc:
            report = exc.report
            _write_result(build_result(problem, tol, mode, ctx, certs, reports, report=report), output)
            print(
                f"not solvable: residual {report.residual_norm:.6g} "
                f"({report.d_conditions} independent condition(s))",
                file=out,
            )
            return NotSolvable.exit_code
    result = build_result(problem, tol, mode, ctx, certs, reports, family, report)
    _write_result(result, output)
    if csv_path:
        write_csv(csv_path, family.particular)
    ver = result["verification"]
    print(
        f"mode = {mode}, solvability residual = {report.residual_norm:.6g}, "
        f"d = {report.d_conditions}, r = {family.r}",
        file=out,
    )
    if quasi:
        print(f"defect at n = 0: {family.defect_norm:.6g}", file=out)
    print(f"dynamics residual = {ver['dynamics_residual']:.3g}", file=out)
    for n in range(max(problem.output_window[0], -3), min(problem.output_window[1], 3) + 1):
        print(f"  x[{n}] = {_fmt(family.particular(n))}", file=out)
    return 0


def _close(a, b):
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= REPRODUCE_TOL


def cmd_verify(result_path, out=None) -> int:
    out = out or sys.stdout
    result = loads_json(read_text(result_path))
    if not isinstance(result, dict):
        raise ProblemParseError("result file must be a JSON object")
    try:
        problem = ProblemFile.from_dict(result["problem"])
        tol = Tolerances.from_dict(result["tolerances_used"])
        mode = result["mode"]
        stored = result["verification"]
        stored_certs = result["certificates"]
    except KeyError as exc:
        raise ProblemParseError(f"result file lacks {exc}") from exc
    failed = []
    if problem.sha256() != result.get("problem_sha256"):
        failed.append("problem_hash")

    seq = problem.operator_sequence()
    for name, raw in stored_certs.items():
        cert = DichotomyCertificate(Axis(name), np.array(raw["projector"]), raw["k"],
                                    raw["lambda"], tuple(raw["verified_window"]))
        rep = verify_dichotomy(seq, cert, cert.verified_window, CERT_RATIO_TOL)
        if not rep.verified:
            failed.append(f"dichotomy_{name}")

    ctx, _, _ = analyze_problem(problem, tol)
    if ctx.classification.as_dict() != result.get("classification"):
        failed.append("classification")

    solution = _seq_from_json(result["solution"]) if "solution" in result else None
    basis = [_seq_from_json(b) for b in result.get("basis", [])]
    fresh = compute_verification(ctx, problem, tol, solution, basis)
    limit = fresh["tolerance"]

    if solution is not None:
        if fresh["dynamics_residual"] > limit:
            failed.append("dynamics_residual")
        if fresh["basis_residual"] > limit:
            failed.append("basis_residual")
        if mode == "exact":
            if fresh["jump_norm"] is not None and fresh["jump_norm"] > limit:
                failed.append("jump")
            h = problem.forcing_sequence()
            if fresh["condition_norm"] > tol.solvability_tol * (1.0 + h.sup_norm()):
                failed.append("condition")
        elif mode == "quasi" and fresh["jump_norm"] is not None:
            if abs(fresh["jump_norm"] - float(result.get("defect_norm", 0.0))) > limit:
                failed.append("jump")
    for key in ("condition_norm", "dynamics_residual", "jump_norm", "basis_residual"):
        if not _close(fresh[key], stored.get(key)):
            failed.append(f"stored_{key}")

    for key in ("condition_norm", "dynamics_residual", "jump_norm", "basis_residual"):
        val = fresh[key]
        print(f"{key}: {'n/a' if val is None else format(val, '.3g')}", file=out)
    if failed:
        raise VerificationFailure(dict.fromkeys(failed))
    print("verified", file=out)
    return 0


def cmd_oracle(problem_path, half_width=None, rank_tol_rel=None, out=None) -> int:
    out = out or sys.stdout
    problem = load(problem_path)
    tol = _effective_tolerances(problem, rank_tol_rel)
    ctx, _, _ = analyze_problem(problem, tol)
    seq, h = ctx.seq, problem.forcing_sequence()
    N = int(half_width) if half_width is not None else default_half_width(seq, h)
    tp = TruncatedProblem.build(seq, h, N, tol.gap_tol)
    brute = truncated_bounded_solve(tp)
    inner = (-(N // 2), N // 2)
    family = solve_bounded(ctx, h, inner)
    dist = compare_mod_family(family.particular, brute, family.basis, window=inner)
    print(f"half width N = {N}, r = {family.r}", file=out)
    print(f"distance modulo the bounded family on {list(inner)}: {dist:.3g}", file=out)
    if dist > ORACLE_TOL:
        raise VerificationFailure([f"oracle distance {dist:.3g} > {ORACLE_TOL:g}"])
    return 0


def cmd_demo(name, output=None, out=None) -> int:
    out = out or sys.stdout
    text = demo_problem(name).dumps()
    if output:
        write_text(output, text)
    else:
        out.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dichobound",
        description="Bounded solutions of x_{n+1} = A_n x_n + h_n under exponential dichotomy.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="dichotomy certificates and classification")
    p.add_argument("file")
    p.add_argument("--output", "-o")
    p.add_argument("--rank-tol-rel", type=float)

    p = sub.add_parser("solve", help="bounded solution family")
    p.add_argument("file")
    p.add_argument("--quasi", action="store_true", help="least-squares glue when unsolvable")
    p.add_argument("--output", "-o")
    p.add_argument("--csv")
    p.add_argument("--rank-tol-rel", type=float)

    p = sub.add_parser("verify", help="re-check a result file")
    p.add_argument("file")

    p = sub.add_parser("oracle", help="compare against the truncated brute-force solver")
    p.add_argument("file")
    p.add_argument("--half-width", type=int)
    p.add_argument("--rank-tol-rel", type=float)

    p = sub.add_parser("demo", help="write a built-in problem file")
    p.add_argument("name", help=", ".join(DEMO_NAMES))
    p.add_argument("--output", "-o")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "analyze":
            return cmd_analyze(args.file, args.output, args.rank_tol_rel)
        if args.command == "solve":
            return cmd_solve(args.file, args.quasi, args.output, args.csv, args.rank_tol_rel)
        if args.command == "verify":
            return cmd_verify(args.file)
        if args.command == "oracle":
            return cmd_oracle(args.file, args.half_width, args.rank_tol_rel)
        return cmd_demo(args.name, args.output)
    except DichoboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
