"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 partial failure (some replicas
failed), 3 ensemble aborted.  QAOATHERM_OUTDIR sets the default output
directory.
"""

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .angles import DEFAULT_LAMBDA, optimize_angles, sweep, write_sweep_csv
from .circuit import CircuitParams, dump_state, prepare_state, probabilities
from .interference import (
    covariance_all,
    covariance_split_all,
    fit_covariance_law,
    write_covariance_csv,
)
from .mcmc import compare, metropolis_sample, write_comparison_csv
from .pipeline import (
    EnsembleAborted,
    ExperimentConfig,
    analyze_directory,
    read_instances_csv,
    run_pipeline,
)
from .plots import render_report
from .problems import (
    GraphSpec,
    full_spectrum,
    generate_problem,
    load_problem,
    operator_norm,
    save_problem,
)
from .thermal import fit_instance


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _default_outdir():
    return os.environ.get("QAOATHERM_OUTDIR", "results")


def build_parser():
    parser = _Parser(prog="qaoatherm",
                     description="Single-layer extended-QAOA simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="generate a problem instance JSON")
    p.add_argument("--family", required=True, choices=["qubo", "maxcut", "ising"])
    p.add_argument("--graph", required=True, help="gnm:<density> or regular:<degree>")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", default="problem.json")

    p = sub.add_parser("optimize", help="find energy-minimizing angles for a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--grid-points", type=int, default=32)
    p.add_argument("-o", "--output", default=None, help="write OptResult JSON here")

    p = sub.add_parser("simulate", help="prepare a state and report observables")
    p.add_argument("--problem", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--probabilities", default=None, help="write per-configuration CSV here")
    p.add_argument("--dump", default=None, help="write binary state dump at this base path")

    p = sub.add_parser("analyze", help="recompute ensemble summaries in a result directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--bins", type=int, default=None)

    p = sub.add_parser("covariance", help="per-configuration covariance profile for a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("-o", "--output", default="covariance.csv")

    p = sub.add_parser("mcmc-compare", help="rapid-mixing threshold comparison")
    p.add_argument("--problem", default=None)
    p.add_argument("--beta-qaoa", type=float, default=None)
    p.add_argument("--dir", default=None, help="batch mode over instances_*.csv")
    p.add_argument("--sample-sweeps", type=int, default=0,
                   help="also run this many recorded Metropolis sweeps at beta")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("replicate", help="run the full replica pipeline")
    p.add_argument("--family", required=True, choices=["qubo", "maxcut", "ising"])
    p.add_argument("--graph", required=True)
    p.add_argument("--n", required=True, help="comma-separated sizes, e.g. 10,12,14")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--grid-points", type=int, default=32)
    p.add_argument("--no-covariance", action="store_true")
    p.add_argument("-o", "--outdir", default=None)

    p = sub.add_parser("sweep", help="1-D angle sweep at otherwise optimal angles")
    p.add_argument("--problem", required=True)
    p.add_argument("--fix", required=True, choices=["theta", "gamma"],
                   help="angle held at its optimum while the other varies")
    p.add_argument("--points", type=int, default=48)
    p.add_argument("--span", type=float, default=4.0,
                   help="sweep up to span * optimal value (gamma) or over (0, pi) (theta)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("-o", "--output", default="sweep.csv")

    p = sub.add_parser("report", help="render figures from a result directory")
    p.add_argument("--dir", required=True)

    return parser


def _cmd_generate(args):
    problem = generate_problem(args.family, GraphSpec.parse(args.graph), args.n,
                               args.sigma2, args.seed)
    save_problem(problem, args.output)
    print(f"wrote {args.output} ({problem.edge_count} edges)")
    return 0


def _cmd_optimize(args):
    problem = load_problem(args.problem)
    spectrum = full_spectrum(problem)
    opt = optimize_angles(problem, spectrum, lam=args.lam, grid_points=args.grid_points)
    payload = dataclasses.asdict(opt) | {"lambda": args.lam}
    text = json.dumps(payload, indent=1)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    print(text)
    return 0


def _cmd_simulate(args):
    problem = load_problem(args.problem)
    spectrum = full_spectrum(problem)
    params = CircuitParams(gamma=args.gamma, theta=args.theta, lam=args.lam)
    state = prepare_state(problem, spectrum, params)
    p = probabilities(state)
    fit = fit_instance(p, spectrum)
    print(json.dumps({
        "energy": float(p @ spectrum.energies),
        "xi": float(p[spectrum.ground_index] * (1 << problem.n)),
        "beta": fit.beta, "beta_ci99": fit.ci99_halfwidth, "fit_r2": fit.r2,
    }, indent=1))
    if args.probabilities:
        lines = ["x,E_x,p"]
        for x in range(1 << problem.n):
            lines.append(f"{x},{spectrum.energies[x]!r},{p[x]!r}")
        with open(args.probabilities, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    if args.dump:
        dump_state(state, args.dump, params=params, problem_seed=problem.seed)
    return 0


def _cmd_analyze(args):
    analyze_directory(args.dir, bin_count=args.bins)
    print(f"recomputed summaries in {args.dir}")
    return 0


def _cmd_covariance(args):
    problem = load_problem(args.problem)
    spectrum = full_spectrum(problem)
    params = CircuitParams(gamma=args.gamma, theta=args.theta, lam=args.lam)
    degenerate = not np.any(problem.h)
    if degenerate:
        plus, minus, shift = covariance_split_all(spectrum)
        sigma_eh = plus  # degenerate convention: report the Plus hierarchy
        write_covariance_csv(args.output, spectrum, sigma_eh, plus, minus, shift)
    else:
        sigma_eh = covariance_all(spectrum, degenerate=False)
        write_covariance_csv(args.output, spectrum, sigma_eh)
    law = fit_covariance_law(sigma_eh, spectrum, params)
    print(json.dumps(dataclasses.asdict(law), indent=1))
    return 0


def _cmd_mcmc_compare(args):
    if args.dir:
        import glob

        rows = []
        for path in sorted(glob.glob(os.path.join(args.dir, "instances_*.csv"))):
            n = int(path.rsplit("_n", 1)[1].split(".")[0])
            for row in read_instances_csv(path):
                rows.append((row["seed"], n,
                             compare_from_row(row)))
        out = args.output or os.path.join(args.dir, "mcmc_comparison.csv")
        write_comparison_csv(out, rows)
        print(f"wrote {out} ({len(rows)} rows)")
        return 0
    if not args.problem or args.beta_qaoa is None:
        print("mcmc-compare needs either --dir or (--problem and --beta-qaoa)", file=sys.stderr)
        return 1
    problem = load_problem(args.problem)
    result = compare(problem, args.beta_qaoa)
    print(json.dumps(dataclasses.asdict(result), indent=1))
    if args.sample_sweeps > 0:
        samples = metropolis_sample(problem, args.beta_qaoa, args.sample_sweeps,
                                    args.burn_in, args.seed)
        print(f"recorded {samples.size} sweeps; sample mean energy "
              f"{_sample_energy(problem, samples):.6g}")
    return 0


def compare_from_row(row):
    from .mcmc import MixingComparison

    norm_j = row["norm_J"]
    product = row["beta"] * norm_j
    return MixingComparison(norm_J=norm_j, beta_mcmc_threshold=1.0 / norm_j,
                            beta_qaoa=row["beta"], product=product,
                            above_threshold=product > 1.0)


def _sample_energy(problem, samples):
    spectrum = full_spectrum(problem)
    return float(spectrum.energies[samples].mean())


def _cmd_replicate(args):
    config = ExperimentConfig(
        family=args.family, graph=GraphSpec.parse(args.graph),
        n_list=tuple(int(v) for v in args.n.split(",")),
        replicas=args.replicas, master_seed=args.seed, sigma2=args.sigma2,
        lam=args.lam, bin_count=args.bins, outdir=args.outdir or _default_outdir(),
        jobs=args.jobs, grid_points=args.grid_points, covariance=not args.no_covariance,
    )
    try:
        manifest = run_pipeline(config)
    except EnsembleAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest['files'])} files to {config.outdir}")
    if manifest["failures"]:
        print(f"{len(manifest['failures'])} replicas failed", file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args):
    problem = load_problem(args.problem)
    spectrum = full_spectrum(problem)
    opt = optimize_angles(problem, spectrum, lam=args.lam)
    if args.fix == "theta":
        grid = np.linspace(opt.gamma_opt * args.span / args.points,
                           opt.gamma_opt * args.span, args.points)
    else:
        grid = np.linspace(math.pi / (args.points + 1), math.pi, args.points,
                           endpoint=False)
    points = sweep(problem, spectrum, opt, fixed=args.fix, grid=grid, lam=args.lam)
    write_sweep_csv(args.output, points)
    print(f"wrote {args.output} ({len(points)} points)")
    return 0


def _cmd_report(args):
    written = render_report(args.dir)
    for path in written:
        print(path)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "covariance": _cmd_covariance,
    "mcmc-compare": _cmd_mcmc_compare,
    "replicate": _cmd_replicate,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
