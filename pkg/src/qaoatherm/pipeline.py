"""End-to-end replica ensembles: generate -> optimize -> simulate -> analyze -> compare.

Per-replica seeds derive from a stable SHA-256 hash of
(master_seed, family, n, replica_index), so results are independent of the
worker count and reproducible across runs.  All result files are written
atomically (temp file + rename) and listed in a manifest.
"""

import csv
import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .angles import DEFAULT_LAMBDA, optimize_angles
from .circuit import CircuitParams, ground_state_enhancement, prepare_state, probabilities
from .interference import (
    COVARIANCE_SPLIT_MAX_QUBITS,
    covariance_all,
    fit_covariance_law,
)
from .mcmc import compare
from .problems import (
    GraphSpec,
    ProblemFamily,
    _atomic_write_text,
    full_spectrum,
    generate_problem,
    operator_norm,
)
from .thermal import (
    DEFAULT_BIN_COUNT,
    NORMAL_QUANTILE_99,
    PROBABILITY_FLOOR,
    BoltzmannFit,
    ScalingPredictor,
    TargetStat,
    _ols,
    fit_instance,
    fit_scaling,
    summarize_replicas,
)

COVARIANCE_AGG_BINS = 50


class EnsembleAborted(RuntimeError):
    """More than the tolerated fraction of replicas failed."""


@dataclass(frozen=True)
class ExperimentConfig:
    family: ProblemFamily
    graph: GraphSpec
    n_list: tuple
    replicas: int
    master_seed: int
    sigma2: float = 1.0
    lam: float = DEFAULT_LAMBDA
    bin_count: int = DEFAULT_BIN_COUNT
    outdir: str = "results"
    jobs: int = 1
    grid_points: int = 32
    covariance: bool = True
    max_failure_fraction: float = 0.10

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        object.__setattr__(self, "family", ProblemFamily(self.family))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    def to_dict(self):
        return {
            "family": self.family.value,
            "graph": self.graph.to_dict(),
            "n_list": list(self.n_list),
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "sigma2": self.sigma2,
            "lambda": self.lam,
            "bin_count": self.bin_count,
            "outdir": self.outdir,
            "jobs": self.jobs,
            "grid_points": self.grid_points,
            "covariance": self.covariance,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=ProblemFamily(d["family"]), graph=GraphSpec.from_dict(d["graph"]),
            n_list=tuple(d["n_list"]), replicas=d["replicas"], master_seed=d["master_seed"],
            sigma2=d.get("sigma2", 1.0), lam=d.get("lambda", DEFAULT_LAMBDA),
            bin_count=d.get("bin_count", DEFAULT_BIN_COUNT), outdir=d.get("outdir", "results"),
            jobs=d.get("jobs", 1), grid_points=d.get("grid_points", 32),
            covariance=d.get("covariance", True),
        )


def replica_seed(master_seed, family, n, replica_index):
    """Stable 63-bit seed; the derivation is part of the reproducibility contract."""
    family = ProblemFamily(family)
    text = f"{master_seed}|{family.value}|{n}|{replica_index}"
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


@dataclass
class InstanceResult:
    replica: int
    seed: int
    row: dict
    bin_mass: np.ndarray
    bin_count: np.ndarray
    span: float
    cov_bin_sum: np.ndarray = None
    cov_bin_count: np.ndarray = None


def run_replica(config: ExperimentConfig, n, replica_index) -> InstanceResult:
    """Full per-instance pipeline; pure function of (config, n, replica_index)."""
    seed = replica_seed(config.master_seed, config.family, n, replica_index)
    problem = generate_problem(config.family, config.graph, n, config.sigma2, seed)
    spectrum = full_spectrum(problem)
    opt = optimize_angles(problem, spectrum, lam=config.lam, grid_points=config.grid_points)
    params = opt.params(config.lam)
    state = prepare_state(problem, spectrum, params)
    p = probabilities(state)
    fit = fit_instance(p, spectrum)
    enh = ground_state_enhancement(state, spectrum)
    norm_j = operator_norm(problem)
    mix = compare(problem, fit.beta) if norm_j > 0 else None

    scaled = spectrum.rescaled()
    bins = np.minimum((scaled * config.bin_count).astype(int), config.bin_count - 1)
    bin_mass = np.zeros(config.bin_count)
    bin_count = np.zeros(config.bin_count)
    np.add.at(bin_mass, bins, p)
    np.add.at(bin_count, bins, 1.0)

    row = {
        "replica": replica_index,
        "seed": seed,
        "beta": fit.beta,
        "beta_ci99": fit.ci99_halfwidth,
        "fit_r2": fit.r2,
        "n_points": fit.n_points,
        "xi": enh.xi,
        "xi_level": enh.level_probability * (1 << n),
        "ground_degeneracy": enh.degeneracy,
        "gamma_opt": opt.gamma_opt,
        "theta_opt": opt.theta_opt,
        "energy_opt": opt.energy_opt,
        "evaluations": opt.evaluations,
        "converged": int(opt.converged),
        "e_min": spectrum.e_min,
        "e_max": spectrum.e_max,
        "norm_J": norm_j,
        "product": mix.product if mix else float("nan"),
        "above_threshold": int(mix.above_threshold) if mix else 0,
        "cov_c": float("nan"),
        "cov_omega_std": float("nan"),
        "cov_r2": float("nan"),
        "cov_corr": float("nan"),
        "beta_predicted": float("nan"),
    }
    result = InstanceResult(
        replica=replica_index, seed=seed, row=row,
        bin_mass=bin_mass, bin_count=bin_count, span=spectrum.span,
    )

    degenerate = not np.any(problem.h)
    if config.covariance and (not degenerate or n <= COVARIANCE_SPLIT_MAX_QUBITS):
        sigma_eh = covariance_all(spectrum, degenerate=degenerate)
        law = fit_covariance_law(sigma_eh, spectrum, params)
        row.update({
            "cov_c": law.c, "cov_omega_std": law.omega_std, "cov_r2": law.fit_r2,
            "cov_corr": law.corr, "beta_predicted": law.beta_predicted,
        })
        # aggregate profile on rescaled energies (covariance scales by 1/span)
        cov_bins = np.minimum((scaled * COVARIANCE_AGG_BINS).astype(int), COVARIANCE_AGG_BINS - 1)
        cov_sum = np.zeros(COVARIANCE_AGG_BINS)
        cov_cnt = np.zeros(COVARIANCE_AGG_BINS)
        np.add.at(cov_sum, cov_bins, sigma_eh / spectrum.span)
        np.add.at(cov_cnt, cov_bins, 1.0)
        result.cov_bin_sum = cov_sum
        result.cov_bin_count = cov_cnt
    return result


def _replica_task(args):
    config, n, index = args
    try:
        return run_replica(config, n, index)
    except Exception as exc:  # recorded per replica, never crashes the pool
        return (index, replica_seed(config.master_seed, config.family, n, index),
                f"{type(exc).__name__}: {exc}")


INSTANCE_COLUMNS = [
    "replica", "seed", "beta", "beta_ci99", "fit_r2", "n_points", "xi", "xi_level",
    "ground_degeneracy", "gamma_opt", "theta_opt", "energy_opt", "evaluations",
    "converged", "e_min", "e_max", "norm_J", "product", "above_threshold",
    "cov_c", "cov_omega_std", "cov_r2", "cov_corr", "beta_predicted",
]


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _write_json(path, payload):
    _atomic_write_text(path, json.dumps(payload, indent=1, sort_keys=True))


def fit_protocol():
    """Analysis defaults, echoed into every summary for auditability."""
    return {
        "probability_floor": PROBABILITY_FLOOR,
        "weighting": "unweighted-ols",
        "ci_quantile": NORMAL_QUANTILE_99,
        "binned_statistic": "mean probability per state in bin",
        "covariance_energy_units": "raw per instance, rescaled for aggregates",
    }


def reduce_ensemble(config: ExperimentConfig, n, results):
    """Deterministic (replica-ordered) reduction to binned fit + summary tables."""
    results = sorted(results, key=lambda r: r.replica)
    mass = np.zeros(config.bin_count)
    count = np.zeros(config.bin_count)
    cov_sum = np.zeros(COVARIANCE_AGG_BINS)
    cov_cnt = np.zeros(COVARIANCE_AGG_BINS)
    spans = []
    for r in results:
        mass += r.bin_mass
        count += r.bin_count
        spans.append(r.span)
        if r.cov_bin_sum is not None:
            cov_sum += r.cov_bin_sum
            cov_cnt += r.cov_bin_count
    filled = count > 0
    centers = (np.arange(config.bin_count) + 0.5) / config.bin_count
    mean_span = float(np.mean(spans))
    binned_fit = None
    if filled.sum() >= config.bin_count / 2:
        slope, intercept, r2, stderr = _ols(centers[filled], np.log(mass[filled] / count[filled]))
        binned_fit = BoltzmannFit(
            beta=abs(slope) / mean_span, log_intercept=intercept, r2=r2,
            ci99_halfwidth=NORMAL_QUANTILE_99 * stderr / mean_span,
            n_points=int(filled.sum()),
        )
    rows = [r.row for r in results]
    summary = summarize_replicas(
        family=config.family.value, graph_meta=config.graph.label(), n=n,
        replicas=len(results),
        betas=[r["beta"] for r in rows], xis=[r["xi"] for r in rows],
        gammas=[r["gamma_opt"] for r in rows], thetas=[r["theta_opt"] for r in rows],
        mean_span=mean_span, sigma2=config.sigma2,
    )
    cov_table = None
    if cov_cnt.sum() > 0:
        cc = (np.arange(COVARIANCE_AGG_BINS) + 0.5) / COVARIANCE_AGG_BINS
        nz = cov_cnt > 0
        cov_table = (cc[nz], cov_sum[nz] / cov_cnt[nz], cov_cnt[nz])
    return rows, (centers, mass, count), binned_fit, summary, cov_table


def _ensemble_files(config: ExperimentConfig, n, rows, bins, binned_fit, summary, cov_table):
    tag = f"{config.family.value}_n{n}"
    out = config.outdir
    files = []

    path = os.path.join(out, f"instances_{tag}.csv")
    _write_csv(path, INSTANCE_COLUMNS, [[r[c] for c in INSTANCE_COLUMNS] for r in rows])
    files.append(path)

    centers, mass, count = bins
    path = os.path.join(out, f"binned_{tag}.csv")
    nz = count > 0
    _write_csv(path, ["bin_center", "mean_prob", "mass", "count"],
               [[c, m / k, m, k] for c, m, k in zip(centers[nz], mass[nz], count[nz])])
    files.append(path)

    if cov_table is not None:
        path = os.path.join(out, f"covariance_{tag}.csv")
        _write_csv(path, ["e_rescaled", "mean_sigma_eh", "count"],
                   list(zip(*cov_table)))
        files.append(path)

    path = os.path.join(out, f"mcmc_{tag}.csv")
    _write_csv(path, ["seed", "N", "norm_J", "beta_qaoa", "product", "threshold"],
               [[r["seed"], n, r["norm_J"], r["beta"], r["product"],
                 1.0 / r["norm_J"] if r["norm_J"] > 0 else float("inf")] for r in rows])
    files.append(path)

    payload = {
        "family": config.family.value,
        "graph": config.graph.to_dict(),
        "n": n,
        "replicas": summary.replicas,
        "binned_fit": None if binned_fit is None else dataclasses.asdict(binned_fit),
        "summary": dataclasses.asdict(summary),
        "fit_protocol": fit_protocol(),
    }
    path = os.path.join(out, f"summary_{tag}.json")
    _write_json(path, payload)
    files.append(path)
    return files


def run_pipeline(config: ExperimentConfig):
    """Run every (n, replica), reduce per size, fit scalings, write the manifest.

    Raises EnsembleAborted if more than max_failure_fraction of any size's
    replicas fail; individual failures are recorded in the manifest.
    """
    os.makedirs(config.outdir, exist_ok=True)
    t_start = time.time()
    failures = []
    files = []
    summaries = []
    per_size = {}
    tasks = [(config, n, k) for n in config.n_list for k in range(config.replicas)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_replica_task, tasks, chunksize=1))
    else:
        outcomes = [_replica_task(t) for t in tasks]
    for (_, n, _k), outcome in zip(tasks, outcomes):
        if isinstance(outcome, InstanceResult):
            per_size.setdefault(n, []).append(outcome)
        else:
            index, seed, message = outcome
            failures.append({"n": n, "replica": index, "seed": seed, "error": message})

    aborted = None
    for n in config.n_list:
        ok = per_size.get(n, [])
        failed = config.replicas - len(ok)
        if failed > config.max_failure_fraction * config.replicas:
            aborted = f"size n={n}: {failed}/{config.replicas} replicas failed"
            break
        rows, bins, binned_fit, summary, cov_table = reduce_ensemble(config, n, ok)
        files += _ensemble_files(config, n, rows, bins, binned_fit, summary, cov_table)
        summaries.append(summary)

    scaling = {}
    if aborted is None and len(summaries) >= 4:
        predictor = (ScalingPredictor.INV_SQRT_N_RHO if config.graph.kind == "gnm"
                     else ScalingPredictor.INV_SQRT_Z)
        for target, pred in ((TargetStat.GAMMA_OPT, predictor), (TargetStat.BETA, predictor),
                             (TargetStat.XI, ScalingPredictor.SQRT_TWO_TO_N)):
            fit = fit_scaling(summaries, target, pred)
            scaling[target.value] = {
                "exponent": fit.exponent, "prefactor": fit.prefactor,
                "r2": fit.r2, "predictor": fit.predictor.value,
            }
        path = os.path.join(config.outdir, "scaling.json")
        _write_json(path, scaling)
        files.append(path)

    manifest = {
        "config": config.to_dict(),
        "version": __version__,
        "status": "aborted" if aborted else ("partial" if failures else "complete"),
        "abort_reason": aborted,
        "failures": failures,
        "files": sorted(os.path.basename(f) for f in files),
        "fit_protocol": fit_protocol(),
        "runtime_seconds": round(time.time() - t_start, 3),
    }
    _write_json(os.path.join(config.outdir, "manifest.json"), manifest)
    if aborted:
        raise EnsembleAborted(aborted)
    return manifest


def analyze_directory(outdir, bin_count=None):
    """Recompute ensemble reductions from the manifest and per-instance records.

    Problems and states are regenerated from the recorded seeds and angles,
    so the rewritten summaries match the one-shot pipeline bit for bit.
    """
    with open(os.path.join(outdir, "manifest.json")) as fh:
        manifest = json.load(fh)
    config = ExperimentConfig.from_dict(manifest["config"])
    config = replace(config, outdir=outdir,
                     bin_count=bin_count or config.bin_count)
    for n in config.n_list:
        tag = f"{config.family.value}_n{n}"
        rows = read_instances_csv(os.path.join(outdir, f"instances_{tag}.csv"))
        results = []
        for row in rows:
            results.append(_rebuild_instance(config, n, row))
        rows2, bins, binned_fit, summary, cov_table = reduce_ensemble(config, n, results)
        _ensemble_files(config, n, rows2, bins, binned_fit, summary, cov_table)
    return manifest


def _rebuild_instance(config, n, row):
    """Re-simulate one replica at its recorded angles (no re-optimization)."""
    index = int(row["replica"])
    seed = replica_seed(config.master_seed, config.family, n, index)
    problem = generate_problem(config.family, config.graph, n, config.sigma2, seed)
    spectrum = full_spectrum(problem)
    params = CircuitParams(gamma=float(row["gamma_opt"]), theta=float(row["theta_opt"]),
                           lam=config.lam)
    state = prepare_state(problem, spectrum, params)
    p = probabilities(state)
    scaled = spectrum.rescaled()
    bins = np.minimum((scaled * config.bin_count).astype(int), config.bin_count - 1)
    bin_mass = np.zeros(config.bin_count)
    bin_cnt = np.zeros(config.bin_count)
    np.add.at(bin_mass, bins, p)
    np.add.at(bin_cnt, bins, 1.0)
    out = InstanceResult(replica=index, seed=seed, row=dict(row),
                         bin_mass=bin_mass, bin_count=bin_cnt, span=spectrum.span)
    degenerate = not np.any(problem.h)
    if config.covariance and (not degenerate or n <= COVARIANCE_SPLIT_MAX_QUBITS):
        sigma_eh = covariance_all(spectrum, degenerate=degenerate)
        cov_bins = np.minimum((scaled * COVARIANCE_AGG_BINS).astype(int), COVARIANCE_AGG_BINS - 1)
        cov_sum = np.zeros(COVARIANCE_AGG_BINS)
        cov_cnt = np.zeros(COVARIANCE_AGG_BINS)
        np.add.at(cov_sum, cov_bins, sigma_eh / spectrum.span)
        np.add.at(cov_cnt, cov_bins, 1.0)
        out.cov_bin_sum = cov_sum
        out.cov_bin_count = cov_cnt
    return out


def read_instances_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                if key in ("replica", "seed", "n_points", "evaluations", "converged",
                           "above_threshold", "ground_degeneracy"):
                    row[key] = int(value)
                else:
                    row[key] = float(value)
            rows.append(row)
    return rows
