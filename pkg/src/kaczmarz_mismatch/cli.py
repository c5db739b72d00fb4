"""Command-line front end.

Subcommands: ``generate`` (write a problem instance to a directory),
``diagnose`` (convergence quantities), ``solve`` (run the iteration, write a
trace), ``optimize`` (row-probability optimization), ``experiment`` (the
named benchmark pipelines).

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 analysis
completed but no convergence guarantee holds.  Identical invocations write
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys

import numpy as np

from . import __version__, experiments
from .diagnostics import compute_diagnostics
from .errors import (
    InvalidInputError,
    KaczmarzError,
    NoGuaranteeError,
    NumericError,
)
from .fileio import (
    provenance_lines,
    read_matrix_market,
    read_vector_csv,
    write_matrix_market,
    write_table_csv,
    write_vector_csv,
)
from .probopt import (
    Objective,
    ProbOptConfig,
    StepSchedule,
    optimize_probabilities,
)
from .problems import (
    assemble_consistent,
    assemble_inconsistent,
    assemble_scaled_for_probopt,
    assemble_underdetermined,
    gen_gaussian,
    mismatch_threshold,
    parallel_beam_matrix,
    smooth_phantom,
)
from .solver import SolverConfig, StepRule, make_system, run

EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_NUMERIC_FAILURE = 2
EXIT_NO_GUARANTEE = 3

GENERATE_KINDS = ("consistent", "inconsistent", "underdetermined", "probopt", "ct")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Usage problems are invalid input (exit 1), not argparse's default 2.
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="kaczmarz-mismatch", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a problem instance to a directory")
    gen.add_argument("--kind", choices=GENERATE_KINDS, required=True)
    gen.add_argument("--m", type=int, default=200)
    gen.add_argument("--n", type=int, default=50)
    gen.add_argument("--tau", type=float, default=0.5, help="mismatch threshold")
    gen.add_argument("--noise-scale", type=float, default=0.05)
    gen.add_argument("--zero-frac", type=float, default=0.05)
    gen.add_argument("--grid", type=int, default=32, help="tomography grid size")
    gen.add_argument("--angle-step", type=float, default=5.0)
    gen.add_argument("--rays", type=int, default=90, help="rays per angle")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    diag = sub.add_parser("diagnose", help="compute convergence diagnostics")
    diag.add_argument("--system-dir", required=True)
    diag.add_argument("--p", default="uniform",
                      help="uniform | rownorm-a | pairing | file:PATH")
    diag.add_argument("--rule", default="oblique",
                      choices=[r.value for r in StepRule])
    diag.add_argument("--out", default=None,
                      help="directory for diagnostics.csv (default: system dir)")

    solve = sub.add_parser("solve", help="run the randomized iteration")
    solve.add_argument("--system-dir", required=True)
    solve.add_argument("--p", default="uniform")
    solve.add_argument("--rule", default="oblique",
                       choices=[r.value for r in StepRule])
    solve.add_argument("--iters", type=int, default=10000)
    solve.add_argument("--log-stride", type=int, default=100)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--tol", type=float, default=0.0,
                       help="relative residual early-stop tolerance (0 disables)")
    solve.add_argument("--start-in-range", action="store_true",
                       help="start from V^T c with Gaussian c instead of zero")
    solve.add_argument("--out", required=True)

    opt = sub.add_parser("optimize", help="optimize the row probabilities")
    opt.add_argument("--system-dir", required=True)
    opt.add_argument("--objective", choices=[o.value for o in Objective],
                     default="lambda")
    opt.add_argument("--rule", default="oblique",
                     choices=[r.value for r in StepRule])
    opt.add_argument("--iters", type=int, default=200)
    opt.add_argument("--step", type=float, default=1.0)
    opt.add_argument("--schedule", choices=[s.value for s in StepSchedule],
                     default="sqrt")
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--out", required=True)

    exp = sub.add_parser("experiment", help="run a named benchmark pipeline")
    exp.add_argument("--name", choices=experiments.EXPERIMENT_NAMES, required=True)
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--m", type=int, default=None)
    exp.add_argument("--n", type=int, default=None)
    exp.add_argument("--tau", type=float, default=None)
    exp.add_argument("--noise-scale", type=float, default=None)
    exp.add_argument("--zero-frac", type=float, default=None)
    exp.add_argument("--grid", type=int, default=None)
    exp.add_argument("--rays", type=int, default=None)
    exp.add_argument("--sweeps", type=int, default=None)
    exp.add_argument("--iters", type=int, default=None)
    exp.add_argument("--log-stride", type=int, default=None)
    exp.add_argument("--out", required=True)
    return parser


def _command_string(argv):
    return "kaczmarz-mismatch " + " ".join(argv)


def _load_system(system_dir):
    a = read_matrix_market(os.path.join(system_dir, "A.mtx"))
    v = read_matrix_market(os.path.join(system_dir, "V.mtx"))
    b = read_vector_csv(os.path.join(system_dir, "b.csv"))
    noise_path = os.path.join(system_dir, "r.csv")
    truth_path = os.path.join(system_dir, "xhat.csv")
    noise = read_vector_csv(noise_path) if os.path.exists(noise_path) else None
    truth = read_vector_csv(truth_path) if os.path.exists(truth_path) else None
    return make_system(a, v, b, noise=noise, truth=truth)


def _resolve_probabilities(sys_pair, source):
    if source.startswith("file:"):
        return read_vector_csv(source[len("file:"):])
    return experiments.probability_scheme(sys_pair, source)


def _cmd_generate(args, argv):
    out = args.out
    os.makedirs(out, exist_ok=True)
    params = {"kind": args.kind, "seed": args.seed}
    noise = None
    if args.kind == "ct":
        angles = np.arange(0.0, 180.0, args.angle_step)
        full = parallel_beam_matrix(args.grid, angles, args.rays, 1.4 * args.grid)
        phantom = smooth_phantom(args.grid, args.seed)
        from .problems import ct_mismatch_pair

        sys_pair = ct_mismatch_pair(full, full @ phantom, truth=phantom)
        params.update(grid=args.grid, angle_step=args.angle_step, rays=args.rays)
    elif args.kind == "consistent":
        a = gen_gaussian(args.m, args.n, args.seed)
        sys_pair = assemble_consistent(a, mismatch_threshold(a, args.tau), args.seed)
        params.update(m=args.m, n=args.n, tau=args.tau)
    elif args.kind == "inconsistent":
        a = gen_gaussian(args.m, args.n, args.seed)
        sys_pair = assemble_inconsistent(
            a, mismatch_threshold(a, args.tau), args.noise_scale, args.seed
        )
        noise = sys_pair.noise
        params.update(m=args.m, n=args.n, tau=args.tau, noise_scale=args.noise_scale)
    elif args.kind == "underdetermined":
        sys_pair = assemble_underdetermined(args.m, args.n, args.tau, args.seed)
        params.update(m=args.m, n=args.n, tau=args.tau)
    else:  # probopt
        sys_pair = assemble_scaled_for_probopt(
            args.m, args.n, args.zero_frac, args.seed
        )
        params.update(m=args.m, n=args.n, zero_frac=args.zero_frac)

    command = _command_string(argv)
    headers = provenance_lines(__version__, command, args.seed)
    comment = "\n".join(headers)
    write_matrix_market(os.path.join(out, "A.mtx"), sys_pair.a, comment=comment)
    write_matrix_market(os.path.join(out, "V.mtx"), sys_pair.v, comment=comment)
    write_vector_csv(os.path.join(out, "b.csv"), sys_pair.b, headers)
    if noise is not None:
        write_vector_csv(os.path.join(out, "r.csv"), noise, headers)
    if sys_pair.truth is not None:
        write_vector_csv(os.path.join(out, "xhat.csv"), sys_pair.truth, headers)
    manifest = {
        "tool_version": __version__,
        "format_version": "1",
        "command": command,
        "seed": args.seed,
        "parameters": params,
        "rows": sys_pair.m,
        "cols": sys_pair.n,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.kind} instance ({sys_pair.m} x {sys_pair.n}) to {out}")
    return EXIT_OK


def _cmd_diagnose(args, argv):
    sys_pair = _load_system(args.system_dir)
    p = _resolve_probabilities(sys_pair, args.p)
    diag = compute_diagnostics(sys_pair, p, StepRule(args.rule))
    for line in diag.report_lines():
        print(line)
    out = args.out or args.system_dir
    os.makedirs(out, exist_ok=True)
    headers = provenance_lines(__version__, _command_string(argv), "-")
    experiments.write_diagnostics_csv(
        os.path.join(out, "diagnostics.csv"), diag, headers
    )
    if not diag.guarantees_convergence:
        print("warning: no convergence guarantee (lambda <= 0 or zero-probability rows)")
        return EXIT_NO_GUARANTEE
    return EXIT_OK


def _cmd_solve(args, argv):
    sys_pair = _load_system(args.system_dir)
    p = _resolve_probabilities(sys_pair, args.p)
    start_coefficients = None
    if args.start_in_range:
        from .sampling import replicate_rng

        start_coefficients = replicate_rng(args.seed, 7).standard_normal(sys_pair.m)
    cfg = SolverConfig(
        rule=StepRule(args.rule),
        max_iterations=args.iters,
        log_stride=args.log_stride,
        seed=args.seed,
        residual_tolerance=args.tol,
        start_coefficients=start_coefficients,
    )
    trace = run(sys_pair, p, cfg)
    os.makedirs(args.out, exist_ok=True)
    headers = provenance_lines(__version__, _command_string(argv), args.seed) + [
        f"rule: {args.rule}",
        f"p: {args.p}",
        f"iters: {args.iters}",
        f"log_stride: {args.log_stride}",
        f"tol: {args.tol}",
    ]
    experiments.write_trace_csv(os.path.join(args.out, "trace.csv"), trace, headers)
    last_err = trace.error_norms[-1] if trace.error_norms else float("nan")
    print(
        f"ran {trace.logged_k[-1]} iterations; final residual "
        f"{trace.residual_norms[-1]:.6e}; final error {last_err:.6e}"
    )
    return EXIT_OK


def _cmd_optimize(args, argv):
    sys_pair = _load_system(args.system_dir)
    cfg = ProbOptConfig(
        objective=Objective(args.objective),
        iterations=args.iters,
        schedule=StepSchedule(args.schedule),
        base_step=args.step,
        record_history=True,
        seed=args.seed,
    )
    result = optimize_probabilities(sys_pair, StepRule(args.rule), cfg)
    os.makedirs(args.out, exist_ok=True)
    headers = provenance_lines(__version__, _command_string(argv), args.seed) + [
        f"objective: {args.objective}",
        f"iters: {args.iters}",
        f"step: {args.step}",
        f"schedule: {args.schedule}",
    ]
    write_vector_csv(
        os.path.join(args.out, "p_opt.csv"), result.best_p, headers,
        column="probability",
    )
    write_table_csv(
        os.path.join(args.out, "history.csv"), ("iter", "objective"),
        result.history, header_lines=headers,
    )
    print(f"best {args.objective} objective: {result.best_objective:.9g}")
    return EXIT_OK


def _cmd_experiment(args, argv):
    command = _command_string(argv)
    overrides = {}

    def put(key, value):
        if value is not None:
            overrides[key] = value

    put("seed", args.seed)
    name = args.name
    if name in ("fig1", "fig2", "fig3"):
        put("m", args.m)
        put("n", args.n)
        put("tau", args.tau)
        put("iterations", args.iters)
        put("log_stride", args.log_stride)
        if name == "fig2":
            put("noise_scale", args.noise_scale)
        runner = {
            "fig1": experiments.experiment_fig1,
            "fig2": experiments.experiment_fig2,
            "fig3": experiments.experiment_fig3,
        }[name]
        runner(args.out, command=command, **overrides)
    elif name == "ct":
        put("grid_n", args.grid)
        put("rays_per_angle", args.rays)
        put("sweeps", args.sweeps)
        experiments.experiment_ct(args.out, command=command, **overrides)
    else:  # table1
        put("m", args.m)
        put("n", args.n)
        put("zero_frac", args.zero_frac)
        put("opt_iterations", args.iters)
        put("log_stride", args.log_stride)
        experiments.experiment_table1(args.out, command=command, **overrides)
    print(f"experiment {name} written to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(_sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "generate": _cmd_generate,
            "diagnose": _cmd_diagnose,
            "solve": _cmd_solve,
            "optimize": _cmd_optimize,
            "experiment": _cmd_experiment,
        }[args.command]
        return handler(args, argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INVALID_INPUT
    except NoGuaranteeError as exc:
        print(f"no guarantee: {exc}", file=_sys.stderr)
        return EXIT_NO_GUARANTEE
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=_sys.stderr)
        return EXIT_INVALID_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC_FAILURE
    except KaczmarzError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC_FAILURE
    except OSError as exc:
        print(f"i/o error: {exc}", file=_sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
