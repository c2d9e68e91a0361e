"""Batch front door: evaluate, verify, reduce, solve, monitor.

Exit codes: 0 success, 1 check or convergence failure, 2 usage error (bad
arguments or malformed input files).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .calculus import grad_mp_adjugate
from .cone import cone_report
from .errors import ProblemFormatError, SamplerExhaustionError
from .operator import SymMatrix, build_derivation, eigen_spectrum, mp_from_spectrum
from .solver import (
    compute_barrier,
    load_problem,
    load_solution_csv,
    monitor_estimates,
    newton_solve,
    solution_to_csv,
)
from .sympoly import reduced_table_entry
from .verifier import ALL_CHECKS, VerifierConfig, report_json, run_checks

USAGE_ERROR = 2
CHECK_FAILURE = 1


class UsageError(Exception):
    pass


def _parse_matrix(spec: str) -> SymMatrix:
    """Inline literals diag:v1,v2,... / full:row-major, or a CSV file path."""
    if spec.startswith("diag:"):
        try:
            vals = [float(v) for v in spec[len("diag:"):].split(",")]
        except ValueError as exc:
            raise UsageError(f"field 'matrix': bad diagonal literal ({exc})")
        return SymMatrix.diag(vals)
    if spec.startswith("full:"):
        try:
            vals = [float(v) for v in spec[len("full:"):].split(",")]
        except ValueError as exc:
            raise UsageError(f"field 'matrix': bad full literal ({exc})")
        n = int(round(len(vals) ** 0.5))
        if n * n != len(vals):
            raise UsageError(f"field 'matrix': full literal needs n^2 values, got {len(vals)}")
        arr = np.array(vals).reshape(n, n)
        if not np.array_equal(arr, arr.T):
            raise UsageError("field 'matrix': full literal is not symmetric")
        return SymMatrix(arr)
    try:
        with open(spec, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    except OSError as exc:
        raise UsageError(f"field 'matrix': cannot read {spec!r} ({exc})")
    except ValueError as exc:
        raise UsageError(f"field 'matrix': non-numeric CSV entry ({exc})")
    arr = np.array(rows)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise UsageError(f"field 'matrix': CSV must be square, got shape {arr.shape}")
    if not np.array_equal(arr, arr.T):
        raise UsageError("field 'matrix': CSV matrix is not symmetric")
    return SymMatrix(arr)


def _parse_dims(spec: str):
    dims = []
    for part in spec.split(","):
        try:
            n, p = part.split(":")
            dims.append((int(n), int(p)))
        except ValueError:
            raise UsageError(f"field 'dims': expected n:p pairs, got {part!r}")
    return tuple(dims)


def _emit(payload: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _timestamp(args) -> str | None:
    if args.no_timestamp:
        return None
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ppsh",
        description="Eigenvalue p-sum product operator toolkit",
    )
    ap.add_argument("--version", action="version", version=f"ppsh {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate the operator on one matrix")
    p_eval.add_argument("--matrix", required=True,
                        help="diag:v1,v2,... | full:row-major values | CSV path")
    p_eval.add_argument("--p", type=int, required=True)
    p_eval.add_argument("--format", choices=("json", "text"), default="text")
    p_eval.add_argument("--out")
    p_eval.add_argument("--no-timestamp", action="store_true")

    p_ver = sub.add_parser("verify", help="run the lemma check suites")
    p_ver.add_argument("--dims", help="comma-separated n:p pairs (default: all p<=n<=6)")
    p_ver.add_argument("--samples", type=int, default=500)
    p_ver.add_argument("--seed", type=int, default=None,
                       help="default: PPSH_SEED env var, else 42")
    p_ver.add_argument("--delta", type=float, default=0.5)
    p_ver.add_argument("--c", type=float, default=0.25)
    p_ver.add_argument("--checks", help="comma-separated subset of: " + ",".join(ALL_CHECKS))
    p_ver.add_argument("--out")
    p_ver.add_argument("--no-timestamp", action="store_true")

    p_red = sub.add_parser("reduce", help="emit the exact sigma-basis form")
    p_red.add_argument("--n", type=int, required=True)
    p_red.add_argument("--p", type=int, required=True)
    p_red.add_argument("--format", choices=("json", "text"), default="text")
    p_red.add_argument("--out")

    p_sol = sub.add_parser("solve", help="solve a Dirichlet problem file")
    p_sol.add_argument("--problem", required=True, help="TOML or JSON problem definition")
    p_sol.add_argument("--out", required=True,
                       help="output prefix: writes <out>.solution.csv and <out>.report.json")
    p_sol.add_argument("--no-timestamp", action="store_true")

    p_mon = sub.add_parser("monitor", help="interior-estimate monitors for a solution CSV")
    p_mon.add_argument("solution", help="solution CSV produced by the solve command")
    p_mon.add_argument("--problem", required=True)
    p_mon.add_argument("--delta", type=float, default=0.5)
    p_mon.add_argument("--out")
    p_mon.add_argument("--no-timestamp", action="store_true")
    return ap


def _cmd_eval(args) -> int:
    A = _parse_matrix(args.matrix)
    if not 1 <= args.p <= A.n:
        raise UsageError(f"field 'p': need 1 <= p <= {A.n}, got {args.p}")
    s = eigen_spectrum(A)
    val = mp_from_spectrum(s, args.p)
    det_val = float(np.linalg.det(build_derivation(A, args.p).d))
    rep = cone_report(A, args.p)
    grad = grad_mp_adjugate(A, args.p)
    payload = {
        "n": A.n,
        "p": args.p,
        "mp": val.mp,
        "mp_determinant_route": det_val,
        "tilde": val.tilde,
        "cone": {"status": rep.status, "margin": rep.margin, "witness": list(rep.witness)},
        "eigenvalues": [float(v) for v in s.values],
        "gradient": [[float(v) for v in row] for row in grad.entries],
    }
    ts = _timestamp(args)
    if ts:
        payload["generated_at"] = ts
    if args.format == "json":
        _emit(_json_dumps(payload), args.out)
    else:
        lines = [
            f"n = {A.n}, p = {args.p}",
            f"mp = {val.mp!r} (determinant route {det_val!r})",
            f"tilde = {val.tilde!r}",
            f"cone: {rep.status}, margin = {rep.margin!r}, witness = {rep.witness}",
            "gradient:",
        ]
        lines += ["  " + "  ".join(f"{v: .12g}" for v in row) for row in grad.entries]
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_verify(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("PPSH_SEED", "42"))
    kwargs = {"samples": args.samples, "seed": seed, "delta": args.delta, "c": args.c}
    if args.dims:
        kwargs["dims"] = _parse_dims(args.dims)
    try:
        cfg = VerifierConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(f"field 'dims/samples/delta/c': {exc}")
    names = None
    if args.checks:
        names = [nm.strip() for nm in args.checks.split(",") if nm.strip()]
        unknown = [nm for nm in names if nm not in ALL_CHECKS]
        if unknown:
            raise UsageError(f"field 'checks': unknown {unknown}")
    try:
        results = run_checks(cfg, names)
    except SamplerExhaustionError as exc:
        sys.stderr.write(f"sampler exhausted: {exc} (params {exc.params})\n")
        return CHECK_FAILURE
    report = report_json(results, cfg, timestamp=_timestamp(args))
    _emit(_json_dumps(report), args.out)
    return 0 if report["all_pass"] else CHECK_FAILURE


def _cmd_reduce(args) -> int:
    if not 1 <= args.p <= args.n:
        raise UsageError(f"field 'p': need 1 <= p <= n, got p={args.p}, n={args.n}")
    if args.n > 6:
        raise UsageError("field 'n': exact expansion is guarded at n <= 6")
    S = reduced_table_entry(args.n, args.p)
    if args.format == "json":
        _emit(_json_dumps(S.to_json_dict()), args.out)
    else:
        _emit(S.canonical_text() + "\n", args.out)
    return 0


def _cmd_solve(args) -> int:
    try:
        prob, cfg = load_problem(args.problem)
    except FileNotFoundError as exc:
        raise UsageError(f"field 'problem': {exc}")
    except ProblemFormatError as exc:
        raise UsageError(str(exc))
    u, report = newton_solve(prob, cfg)
    payload = report.to_json_dict()
    ts = _timestamp(args)
    if ts:
        payload["generated_at"] = ts
    if report.converged:
        w = compute_barrier(prob, u, cfg)
        solution_to_csv(args.out + ".solution.csv", u, w, prob)
        payload["solution_csv"] = args.out + ".solution.csv"
    with open(args.out + ".report.json", "w") as fh:
        fh.write(_json_dumps(payload))
    sys.stdout.write(
        f"{'converged' if report.converged else 'FAILED'} in {report.iterations} iterations, "
        f"residual {report.final_residual:.3e}\n"
    )
    return 0 if report.converged else CHECK_FAILURE


def _cmd_monitor(args) -> int:
    try:
        prob, _ = load_problem(args.problem)
    except FileNotFoundError as exc:
        raise UsageError(f"field 'problem': {exc}")
    except ProblemFormatError as exc:
        raise UsageError(str(exc))
    try:
        u, w = load_solution_csv(args.solution)
    except (OSError, ValueError) as exc:
        raise UsageError(f"field 'solution': {exc}")
    rep = monitor_estimates(u, w, prob, args.delta)
    payload = rep.to_json_dict()
    ts = _timestamp(args)
    if ts:
        payload["generated_at"] = ts
    _emit(_json_dumps(payload), args.out)
    return 0


_COMMANDS = {
    "eval": _cmd_eval,
    "verify": _cmd_verify,
    "reduce": _cmd_reduce,
    "solve": _cmd_solve,
    "monitor": _cmd_monitor,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed a diagnostic; normalize usage errors to 2
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
