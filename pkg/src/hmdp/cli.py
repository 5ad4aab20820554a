"""Command-line entry point: ``hmdp <subcommand> ...``.

Subcommands
  solve      fit a value function by HALP and evaluate its greedy policy
  evaluate   evaluate a saved solution archive or a heuristic policy
  baseline   grid-based or least-squares value iteration
  bound      utopian upper bound on the expected return of a benchmark
  benchmark  write a builtin benchmark to a problem file
  expect     closed-form beta expectations

Every run that writes files writes them atomically into ``--out`` (default:
``$HMDP_OUTPUT_DIR`` or ``./hmdp-out``).  CSV files have the fixed header
``EVAL_HEADER``; the archive and CSV depend only on the configuration and
seed.  Wall-clock times go to ``manifest.json`` instead, which is the only
file that changes between identical reruns.

Exit codes: 0 ok, 2 configuration error, 3 numeric or capability error,
4 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .baselines import (GridLookaheadPolicy, grid_vi, l2_vi, random_points,
                        uniform_points)
from .basis import LinearValueFunction, StateRelevanceDensity
from .bench import expectation_demo, heuristic, make, parse_benchmark
from .errors import ContractError, HmdpError, ResourceError
from .halp import solve
from .model import validate
from .oracles import EpsConfig, MCConfig, MCMCConfig
from .policy import GreedyPolicy, evaluate_policy, utopian_bound
from .problem_io import (dumps, load_archive, load_problem, problem_to_dict, save_problem,
                         solution_to_dict, write_atomic)
from .special import expect_beta_pdf, expect_monomial, expect_pwl

OUTPUT_ENV = "HMDP_OUTPUT_DIR"
EVAL_HEADER = ("seed", "method", "objective", "status", "iterations", "cuts",
               "mean", "std", "trajectories", "horizon")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


class UsageError(ContractError):
    pass


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ResourceError):
        return EXIT_RESOURCE
    if isinstance(exc, ContractError):
        return EXIT_CONFIG
    return EXIT_NUMERIC


# ---------------------------------------------------------------------------
# problem loading and seeds

def _load(args):
    """(mdp, basis, topology or None, problem source string)."""
    if bool(args.benchmark) == bool(getattr(args, "problem", None)):
        raise UsageError("give exactly one of --benchmark or --problem")
    if args.benchmark:
        topo = parse_benchmark(args.benchmark)
        mdp, basis = make(topo)
        return mdp, basis, topo, f"benchmark:{args.benchmark}"
    mdp, basis = load_problem(args.problem)
    problems = validate(mdp)
    if problems:
        raise ContractError("problem file fails validation: " + "; ".join(problems[:5]))
    return mdp, basis, None, f"file:{args.problem}"


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for solving and for evaluation."""
    solve_ss, eval_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(solve_ss), np.random.default_rng(eval_ss)


def _seeds(args) -> list[int]:
    if args.seed is None:
        raise UsageError("--seed is required for stochastic runs")
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    return [args.seed + k for k in range(args.seeds)]


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUTPUT_ENV) or "hmdp-out")


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EVAL_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k, "")) for k in EVAL_HEADER})
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _manifest(args, source: str, timings: list[dict], files: list[str]) -> str:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    return dumps({
        "command": args.command,
        "config": config,
        "problem": source,
        "versions": {"hmdp": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timings": timings,
        "files": files,
    })


def _summary(rows: list[dict]) -> dict:
    means = np.array([r["mean"] for r in rows])
    return {"runs": len(rows), "mean": float(means.mean()),
            "std": float(means.std(ddof=1)) if len(rows) > 1 else 0.0}


def _oracle_config(args):
    if args.oracle == "mc":
        return MCConfig(samples=args.samples)
    if args.oracle == "eps":
        return EpsConfig(eps=args.eps)
    return MCMCConfig(chains=args.chains, sweeps=args.sweeps, temp_c=args.temp_c,
                      inner_steps=args.inner_steps)


def _oracle_echo(args) -> dict:
    cfg = _oracle_config(args)
    out = {"oracle": args.oracle}
    out.update({k: v for k, v in vars(cfg).items() if k != "proposal"})
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(args) -> int:
    mdp, basis, _, source = _load(args)
    if basis is None:
        raise UsageError("the problem has no basis section")
    out = _out_dir(args)
    cfg = _oracle_config(args)
    psi = StateRelevanceDensity.uniform()
    rows, timings, files = [], [], []
    for seed in _seeds(args):
        solve_rng, eval_rng = _streams(seed)
        t0 = time.perf_counter()
        limits = {} if args.oracle == "mc" else {"max_iters": args.max_iters}
        sol = solve(mdp, basis, psi, mdp.discount, cfg, solve_rng, **limits)
        t1 = time.perf_counter()
        row = {"seed": seed, "method": f"halp-{args.oracle}", "objective": sol.objective,
               "status": sol.status, "iterations": sol.iterations,
               "cuts": len(sol.constraints), "trajectories": args.trajectories,
               "horizon": args.horizon}
        if np.all(np.isfinite(sol.weights)):
            stats = evaluate_policy(mdp, GreedyPolicy(sol.value_function, mdp.discount),
                                    mdp.discount, args.trajectories, args.horizon, eval_rng)
            row.update(mean=stats.mean, std=stats.std)
        else:
            row.update(mean=float("nan"), std=float("nan"))
        t2 = time.perf_counter()
        rows.append(row)
        name = f"solution-seed{seed}.json"
        config = {"problem": source, **_oracle_echo(args), "max_iters": args.max_iters,
                  "discount": mdp.discount}
        write_atomic(out / name, dumps(solution_to_dict(
            sol, seed=seed, config=config, problem=problem_to_dict(mdp))))
        files.append(name)
        timings.append({"seed": seed, "solve_seconds": t1 - t0, "evaluate_seconds": t2 - t1})
        print(f"seed {seed}: objective {sol.objective:.6g} ({sol.status}, "
              f"{sol.iterations} rounds, {len(sol.constraints)} cuts), "
              f"return {row['mean']:.4g} +/- {row['std']:.3g}")
    _finish(args, out, source, rows, timings, files)
    return EXIT_OK


def _finish(args, out: Path, source: str, rows, timings, files) -> None:
    write_atomic(out / "evaluation.csv", _csv(rows))
    finite = [r for r in rows if np.isfinite(r["mean"])]
    summary = _summary(finite) if finite else {"runs": 0}
    write_atomic(out / "summary.json", dumps(summary))
    files = files + ["evaluation.csv", "summary.json"]
    write_atomic(out / "manifest.json", _manifest(args, source, timings, files))
    if len(rows) > 1 and finite:
        print(f"mean return over {summary['runs']} seeds: "
              f"{summary['mean']:.4g} +/- {summary['std']:.3g}")
    print(f"wrote {out}")


def cmd_evaluate(args) -> int:
    if bool(args.archive) == bool(args.policy):
        raise UsageError("give exactly one of --archive or --policy")
    out = _out_dir(args)
    if args.archive:
        doc = load_archive(args.archive)
        from .problem_io import problem_from_dict

        if "problem" not in doc:
            raise ContractError("archive does not embed its problem")
        mdp, _ = problem_from_dict(doc["problem"])
        policy = GreedyPolicy(LinearValueFunction(doc["basis"], doc["weights"]), mdp.discount)
        source, method = f"archive:{args.archive}", "greedy"
    else:
        if not args.benchmark:
            raise UsageError("heuristic policies need --benchmark")
        topo = parse_benchmark(args.benchmark)
        mdp, _ = make(topo)
        policy = heuristic(args.policy, topo)
        source, method = f"benchmark:{args.benchmark}", args.policy
    rows, timings = [], []
    for seed in _seeds(args):
        _, eval_rng = _streams(seed)
        t0 = time.perf_counter()
        stats = evaluate_policy(mdp, policy, mdp.discount, args.trajectories, args.horizon,
                                eval_rng)
        timings.append({"seed": seed, "evaluate_seconds": time.perf_counter() - t0})
        rows.append({"seed": seed, "method": method, "mean": stats.mean, "std": stats.std,
                     "trajectories": args.trajectories, "horizon": args.horizon})
        print(f"seed {seed}: return {stats.mean:.4g} +/- {stats.std:.3g}")
    _finish(args, out, source, rows, timings, [])
    return EXIT_OK


def cmd_baseline(args) -> int:
    mdp, basis, _, source = _load(args)
    out = _out_dir(args)
    rows, timings = [], []
    for seed in _seeds(args):
        solve_rng, eval_rng = _streams(seed)
        t0 = time.perf_counter()
        if args.grid == "uniform":
            points = uniform_points(mdp, args.eps)
        else:
            points = random_points(mdp, args.points, solve_rng)
        if args.method == "grid-vi":
            res = grid_vi(mdp, points, mdp.discount, args.max_iters)
            policy = GridLookaheadPolicy(res, mdp.discount)
        else:
            if basis is None:
                raise UsageError("least-squares VI needs a basis")
            res = l2_vi(mdp, basis, mdp.discount, points, args.max_iters)
            policy = GreedyPolicy(res.value_function(basis), mdp.discount)
        t1 = time.perf_counter()
        stats = evaluate_policy(mdp, policy, mdp.discount, args.trajectories, args.horizon,
                                eval_rng)
        t2 = time.perf_counter()
        timings.append({"seed": seed, "solve_seconds": t1 - t0, "evaluate_seconds": t2 - t1})
        rows.append({"seed": seed, "method": args.method, "status": "done",
                     "iterations": res.iterations, "mean": stats.mean, "std": stats.std,
                     "trajectories": args.trajectories, "horizon": args.horizon})
        print(f"seed {seed}: {res.iterations} iterations, "
              f"return {stats.mean:.4g} +/- {stats.std:.3g}")
    _finish(args, out, source, rows, timings, [])
    return EXIT_OK


def cmd_bound(args) -> int:
    topo = parse_benchmark(args.benchmark)
    print(f"{utopian_bound(topo, args.discount):.4f}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    topo = parse_benchmark(args.name)
    mdp, basis = make(topo, args.discount)
    path = Path(args.file) if args.file else _out_dir(args) / f"{args.name}.json"
    save_problem(path, mdp, basis)
    print(f"wrote {path}")
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot read numbers from {text!r}") from None


def cmd_expect(args) -> int:
    if args.demo == "example5":
        print(" ".join(f"{v:.4f}" for v in expectation_demo()))
        return EXIT_OK
    if args.alpha is None or args.beta is None:
        raise UsageError("give --alpha and --beta, or --demo example5")
    a, b = args.alpha, args.beta
    if args.monomial:
        n, m = (int(v) for v in _floats(args.monomial))
        val = expect_monomial(a, b, n, m)
    elif args.beta_pdf:
        af, bf = _floats(args.beta_pdf)
        val = expect_beta_pdf(a, b, af, bf)
    elif args.pwl:
        nums = _floats(args.pwl)
        if len(nums) % 4:
            raise UsageError("--pwl takes groups of four numbers: left,right,slope,intercept")
        val = expect_pwl(a, b, tuple(tuple(nums[i:i + 4]) for i in range(0, len(nums), 4)))
    else:
        raise UsageError("give one of --monomial, --beta-pdf or --pwl")
    print(f"{float(val):.10g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_problem(p):
    p.add_argument("--benchmark", help="builtin benchmark id, e.g. ring4 or irrigation-ring6")
    p.add_argument("--problem", help="problem file written by 'hmdp benchmark'")


def _add_seeds(p):
    p.add_argument("--seed", type=int, default=None, help="base random seed (required)")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")


def _add_eval(p):
    p.add_argument("--trajectories", type=int, default=100)
    p.add_argument("--horizon", type=int, default=300)


def _add_out(p):
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmdp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hmdp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="HALP with a constraint oracle")
    _add_problem(p)
    p.add_argument("--oracle", choices=("mc", "eps", "mcmc"), default="eps")
    p.add_argument("--eps", type=float, default=0.125, help="grid resolution")
    p.add_argument("--samples", type=int, default=1000, help="Monte Carlo constraint count")
    p.add_argument("--chains", type=int, default=50, help="MCMC chain count")
    p.add_argument("--sweeps", type=int, default=500, help="sweeps per MCMC chain")
    p.add_argument("--temp-c", type=float, default=0.2, help="initial temperature")
    p.add_argument("--inner-steps", type=int, default=10,
                   help="Metropolis steps per continuous conditional")
    p.add_argument("--max-iters", type=int, default=500, help="cutting-plane round cap")
    _add_seeds(p)
    _add_eval(p)
    _add_out(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="evaluate a solution archive or heuristic policy")
    p.add_argument("--archive", help="solution archive written by 'hmdp solve'")
    p.add_argument("--policy", choices=("dummy", "random", "server"))
    p.add_argument("--benchmark")
    _add_seeds(p)
    _add_eval(p)
    _add_out(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="grid-based or least-squares value iteration")
    _add_problem(p)
    p.add_argument("--method", choices=("grid-vi", "l2-vi"), default="grid-vi")
    p.add_argument("--grid", choices=("uniform", "random"), default="uniform")
    p.add_argument("--eps", type=float, default=0.125, help="uniform grid resolution")
    p.add_argument("--points", type=int, default=1250, help="random grid size")
    p.add_argument("--max-iters", type=int, default=100)
    _add_seeds(p)
    _add_eval(p)
    _add_out(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bound", help="utopian upper bound on the expected return")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--discount", type=float, default=0.95)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("benchmark", help="write a builtin benchmark to a problem file")
    p.add_argument("name")
    p.add_argument("--file", help="target path (default <out>/<name>.json)")
    p.add_argument("--discount", type=float, default=0.95)
    _add_out(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("expect", help="closed-form E[f(x)] for x ~ Beta(alpha, beta)")
    p.add_argument("--demo", choices=("example5",))
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--monomial", help="n,m for x^n (1-x)^m")
    p.add_argument("--beta-pdf", help="alpha_f,beta_f for a beta density factor")
    p.add_argument("--pwl", help="segments as l,r,slope,intercept;...")
    p.set_defaults(func=cmd_expect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HmdpError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except (ValueError, ArithmeticError, MemoryError) as exc:
        category = {ValueError: "contract", MemoryError: "resource"}.get(type(exc), "numeric")
        print(f"error[{category}]: {exc}", file=sys.stderr)
        return (EXIT_CONFIG if isinstance(exc, ValueError)
                else EXIT_RESOURCE if isinstance(exc, MemoryError) else EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
