"""Effective-temperature extraction.

Per-instance fits regress ln p(x) on E_x (unweighted least squares over
points above a probability floor, 99% CI from the normal quantile 2.576).
The replica protocol rescales each instance's energies to [0, 1], bins them
into bin_count sub-intervals, averages the per-state probability within
each bin across replicas, fits the binned curve, and converts the slope
back with the mean energy span of the ensemble.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .problems import Spectrum

PROBABILITY_FLOOR = 1e-18
NORMAL_QUANTILE_99 = 2.576
DEFAULT_BIN_COUNT = 100


@dataclass(frozen=True)
class BoltzmannFit:
    beta: float
    log_intercept: float
    r2: float
    ci99_halfwidth: float
    n_points: int


@dataclass(frozen=True)
class ReplicaSummary:
    family: str
    graph_meta: str
    n: int
    replicas: int
    beta_mean: float
    beta_ci99: float
    xi_geometric_mean: float
    xi_ci99: float           # multiplicative half-width factor minus 1, in linear scale
    xi_mean: float
    theta_opt_mean: float
    gamma_opt_mean: float
    mean_span: float
    sigma2: float = float("nan")


class TargetStat(str, Enum):
    GAMMA_OPT = "gamma_opt"
    BETA = "beta"
    XI = "xi"


class ScalingPredictor(str, Enum):
    INV_SQRT_N_RHO = "inv_sqrt_n_rho"   # variable (N-1)*rho, trend exponent -1/2
    INV_SQRT_Z = "inv_sqrt_z"           # variable Z (degree), trend exponent -1/2
    SQRT_TWO_TO_N = "sqrt_two_to_n"     # variable 2**N, trend exponent +1/2


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r2: float
    predictor: ScalingPredictor


def _ols(x, y):
    """Slope, intercept, r2, slope standard error of unweighted least squares."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("degenerate regression: zero variance in the predictor")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    stderr = math.sqrt(ss_res / max(n - 2, 1) / sxx)
    return slope, intercept, r2, stderr


def fit_instance(probabilities, spectrum: Spectrum, floor=PROBABILITY_FLOOR) -> BoltzmannFit:
    """Boltzmann fit of one state's configuration probabilities."""
    p = np.asarray(probabilities, dtype=float)
    if p.shape != spectrum.energies.shape:
        raise ValueError("probabilities do not match the spectrum")
    keep = p > floor
    if keep.sum() < 3:
        raise ValueError("fewer than 3 probabilities above the floor")
    slope, intercept, r2, stderr = _ols(spectrum.energies[keep], np.log(p[keep]))
    return BoltzmannFit(
        beta=-slope, log_intercept=intercept, r2=r2,
        ci99_halfwidth=NORMAL_QUANTILE_99 * stderr, n_points=int(keep.sum()),
    )


def bin_replicas(instances, bin_count=DEFAULT_BIN_COUNT):
    """Accumulate per-bin probability mass and state counts across replicas.

    Returns (centers, mass, counts, spans); mass sums to the number of
    replicas since every state's probabilities sum to one.
    """
    mass = np.zeros(bin_count)
    counts = np.zeros(bin_count)
    spans = []
    for p, spectrum in instances:
        scaled = spectrum.rescaled()
        bins = np.minimum((scaled * bin_count).astype(int), bin_count - 1)
        np.add.at(mass, bins, np.asarray(p, dtype=float))
        np.add.at(counts, bins, 1.0)
        spans.append(spectrum.span)
    centers = (np.arange(bin_count) + 0.5) / bin_count
    return centers, mass, counts, np.asarray(spans)


def fit_replicas(instances, bin_count=DEFAULT_BIN_COUNT, *, family="", graph_meta="",
                 gammas=None, thetas=None, xis=None, betas=None, sigma2=float("nan")):
    """Replica-averaged Boltzmann fit plus ensemble summary statistics.

    The fitted beta is |slope| / <E_max - E_min>: the regression runs on
    rescaled energies, so the mean span converts the slope back to energy
    units.  Optional keyword lists fill the per-ensemble angle/enhancement
    statistics recorded in the summary.
    """
    instances = list(instances)
    if len(instances) < 2:
        raise ValueError("need at least 2 replicas")
    n = instances[0][1].n
    for _, spec in instances:
        if spec.n != n:
            raise ValueError("replicas must share the same size")
    centers, mass, counts, spans = bin_replicas(instances, bin_count)
    filled = counts > 0
    if filled.sum() < bin_count / 2:
        raise ValueError(
            f"refusing fit: only {int(filled.sum())}/{bin_count} bins are populated"
        )
    mean_prob = mass[filled] / counts[filled]
    slope, intercept, r2, stderr = _ols(centers[filled], np.log(mean_prob))
    mean_span = float(spans.mean())
    fit = BoltzmannFit(
        beta=abs(slope) / mean_span, log_intercept=intercept, r2=r2,
        ci99_halfwidth=NORMAL_QUANTILE_99 * stderr / mean_span, n_points=int(filled.sum()),
    )
    summary = summarize_replicas(
        family=family, graph_meta=graph_meta, n=n, replicas=len(instances),
        betas=betas, xis=xis, gammas=gammas, thetas=thetas,
        mean_span=mean_span, sigma2=sigma2,
    )
    return fit, summary


def _mean_ci(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    se = values.std(ddof=1) / math.sqrt(values.size) if values.size > 1 else 0.0
    return float(values.mean()), NORMAL_QUANTILE_99 * float(se)


def summarize_replicas(*, family, graph_meta, n, replicas, betas=None, xis=None,
                       gammas=None, thetas=None, mean_span=float("nan"),
                       sigma2=float("nan")) -> ReplicaSummary:
    beta_mean, beta_ci = _mean_ci(betas if betas is not None else [])
    theta_mean, _ = _mean_ci(thetas if thetas is not None else [])
    gamma_mean, _ = _mean_ci(gammas if gammas is not None else [])
    if xis is not None and len(xis):
        xi_arr = np.asarray(xis, dtype=float)
        logs = np.log(np.maximum(xi_arr, 1e-300))
        log_mean, log_ci = _mean_ci(logs)
        xi_geo = float(np.exp(log_mean))
        xi_ci = float(np.expm1(log_ci))
        xi_mean = float(xi_arr.mean())
    else:
        xi_geo = xi_ci = xi_mean = float("nan")
    return ReplicaSummary(
        family=str(family), graph_meta=str(graph_meta), n=int(n), replicas=int(replicas),
        beta_mean=beta_mean, beta_ci99=beta_ci,
        xi_geometric_mean=xi_geo, xi_ci99=xi_ci, xi_mean=xi_mean,
        theta_opt_mean=theta_mean, gamma_opt_mean=gamma_mean,
        mean_span=float(mean_span), sigma2=float(sigma2),
    )


def predictor_value(summary: ReplicaSummary, predictor: ScalingPredictor):
    from .problems import GraphSpec

    spec = GraphSpec.parse(summary.graph_meta)
    if predictor is ScalingPredictor.INV_SQRT_N_RHO:
        if spec.kind != "gnm":
            raise ValueError("(N-1)*rho predictor needs gnm ensembles")
        return (summary.n - 1) * spec.density
    if predictor is ScalingPredictor.INV_SQRT_Z:
        if spec.kind != "regular":
            raise ValueError("degree predictor needs regular ensembles")
        return float(spec.degree)
    return 2.0 ** summary.n


def fit_scaling(summaries, target, predictor) -> ScalingFit:
    """Log-log least squares of an ensemble statistic against the predictor variable.

    gamma_opt and beta targets are multiplied by sigma first, so the
    returned prefactor is the dimensionless trend coefficient.
    """
    target = TargetStat(target)
    predictor = ScalingPredictor(predictor)
    summaries = list(summaries)
    if len(summaries) < 4:
        raise ValueError("need summaries for at least 4 sizes")
    xs, ys = [], []
    for s in summaries:
        sigma = math.sqrt(s.sigma2) if math.isfinite(s.sigma2) else 1.0
        if target is TargetStat.GAMMA_OPT:
            y = s.gamma_opt_mean * sigma
        elif target is TargetStat.BETA:
            y = s.beta_mean * sigma
        else:
            y = s.xi_geometric_mean
        xs.append(math.log(predictor_value(s, predictor)))
        ys.append(math.log(y))
    slope, intercept, r2, _ = _ols(np.array(xs), np.array(ys))
    return ScalingFit(exponent=slope, prefactor=math.exp(intercept), r2=r2, predictor=predictor)
