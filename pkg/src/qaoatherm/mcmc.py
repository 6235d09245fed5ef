"""Single-site Metropolis sampling and the rapid-mixing threshold comparison.

The sufficient condition beta < 1/||J|| guarantees rapid mixing for Ising
models, so a QAOA state with beta_QAOA * ||J|| > 1 sits outside the
guaranteed-fast regime; that is the statistic reported here, never a
hardness proof.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .problems import IsingProblem, Spectrum, operator_norm


@dataclass(frozen=True)
class MixingComparison:
    norm_J: float
    beta_mcmc_threshold: float
    beta_qaoa: float
    product: float
    above_threshold: bool


def acceptance_probability(delta_e, beta):
    """Metropolis rule min(1, exp(-beta * delta_e))."""
    return min(1.0, math.exp(-beta * delta_e)) if delta_e > 0 else 1.0


def metropolis_sample(problem: IsingProblem, beta, n_sweeps, burn_in, seed):
    """Sample configurations; one recorded configuration per sweep after burn-in.

    A sweep proposes one flip per spin in a fresh random order; the move
    energy is accumulated from the spin's neighborhood only.  Returns an
    int64 array of configuration integers (bit i = spin i up).
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if n_sweeps < 1:
        raise ValueError("need at least one recorded sweep")
    n = problem.n
    neighbors = [[] for _ in range(n)]
    weights = [[] for _ in range(n)]
    for i, j in problem.edges:
        neighbors[i].append(j)
        weights[i].append(problem.J[i, j])
        neighbors[j].append(i)
        weights[j].append(problem.J[i, j])
    neighbors = [np.asarray(nb, dtype=int) for nb in neighbors]
    weights = [np.asarray(w, dtype=float) for w in weights]
    h = problem.h

    rng = np.random.default_rng(seed)
    spins = rng.integers(0, 2, size=n).astype(np.int8) * 2 - 1
    samples = np.empty(n_sweeps, dtype=np.int64)
    bit_values = 1 << np.arange(n, dtype=np.int64)
    recorded = 0
    for sweep_index in range(burn_in + n_sweeps):
        order = rng.permutation(n)
        uniform = rng.random(n)
        for k, i in enumerate(order):
            local = weights[i] @ spins[neighbors[i]] + h[i] if neighbors[i].size else h[i]
            delta_e = -2.0 * spins[i] * local
            if delta_e <= 0 or uniform[k] < math.exp(-beta * delta_e):
                spins[i] = -spins[i]
        if sweep_index >= burn_in:
            samples[recorded] = int(bit_values[spins > 0].sum())
            recorded += 1
    return samples


def exact_boltzmann(spectrum: Spectrum, beta):
    """Normalized exp(-beta * E) over all configurations (log-sum-exp stabilized)."""
    logw = -beta * spectrum.energies
    logw = logw - logw.max()
    w = np.exp(logw)
    return w / w.sum()


def empirical_distribution(samples, n):
    counts = np.bincount(samples, minlength=1 << n).astype(float)
    return counts / counts.sum()


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def compare(problem: IsingProblem, beta_qaoa) -> MixingComparison:
    """Place a fitted QAOA temperature against the rapid-mixing bound 1/||J||."""
    norm = operator_norm(problem)
    if norm == 0.0:
        raise ValueError("operator norm is zero; threshold undefined")
    product = beta_qaoa * norm
    return MixingComparison(
        norm_J=norm, beta_mcmc_threshold=1.0 / norm, beta_qaoa=float(beta_qaoa),
        product=product, above_threshold=bool(product > 1.0),
    )


def write_comparison_csv(path, rows):
    """rows: iterables of (seed, n, comparison)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "N", "norm_J", "beta_qaoa", "product", "threshold"])
        for seed, n, cmp_ in rows:
            writer.writerow([
                seed, n, format(cmp_.norm_J, ".17g"), format(cmp_.beta_qaoa, ".17g"),
                format(cmp_.product, ".17g"), format(cmp_.beta_mcmc_threshold, ".17g"),
            ])
