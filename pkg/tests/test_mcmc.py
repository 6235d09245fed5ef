"""Metropolis sampler validity and the mixing-threshold comparison."""

import math

import numpy as np
import pytest

from conftest import hand_problem, single_spin_problem
from qaoatherm.bits import spins_of
from qaoatherm.mcmc import (
    acceptance_probability,
    compare,
    empirical_distribution,
    exact_boltzmann,
    metropolis_sample,
    total_variation,
)
from qaoatherm.problems import GraphSpec, full_spectrum, generate_problem, operator_norm


class TestAcceptanceRule:
    def test_detailed_balance_all_single_flip_pairs(self):
        # pi(x) P(x -> x') == pi(x') P(x' -> x) for every single-flip pair, n <= 4
        for seed in range(3):
            p = generate_problem("ising", GraphSpec("gnm", density=1.0), 4, 1.0, seed)
            s = full_spectrum(p)
            beta = 0.8
            weights = np.exp(-beta * (s.energies - s.e_min))
            for x in range(16):
                for i in range(4):
                    y = x ^ (1 << i)
                    forward = weights[x] * acceptance_probability(s.energies[y] - s.energies[x], beta)
                    backward = weights[y] * acceptance_probability(s.energies[x] - s.energies[y], beta)
                    assert abs(forward - backward) < 1e-12 * max(forward, 1.0)

    def test_downhill_always_accepted(self):
        assert acceptance_probability(-2.5, 3.0) == 1.0
        assert acceptance_probability(0.0, 3.0) == 1.0
        assert 0.0 < acceptance_probability(1.0, 3.0) < 1.0


class TestLocalMoveEnergy:
    def test_incremental_delta_matches_spectrum(self):
        # the sampler's local-field move energy vs full re-evaluation
        p = generate_problem("ising", GraphSpec("gnm", density=0.7), 9, 1.0, 5)
        s = full_spectrum(p)
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = int(rng.integers(0, 1 << 9))
            i = int(rng.integers(0, 9))
            spins = spins_of(x, 9)
            local = p.J[i] @ spins + p.h[i]
            delta = -2.0 * spins[i] * local
            assert abs(delta - (s.energies[x ^ (1 << i)] - s.energies[x])) < 1e-10


class TestSampling:
    def test_infinite_temperature_magnetizations(self):
        p = generate_problem("qubo", GraphSpec("gnm", density=0.8), 6, 1.0, 2)
        samples = metropolis_sample(p, beta=0.0, n_sweeps=4000, burn_in=100, seed=1)
        bits = (samples[:, None] >> np.arange(6)) & 1
        mags = 2 * bits.mean(axis=0) - 1
        stderr = 1.0 / math.sqrt(samples.size)
        assert np.abs(mags).max() < 5 * stderr

    def test_single_spin_detailed_balance_ratio(self):
        delta = 1.2
        beta = 0.9
        p = single_spin_problem(delta)
        samples = metropolis_sample(p, beta=beta, n_sweeps=20000, burn_in=500, seed=3)
        down = np.mean(samples == 0)  # bit clear: s = -1, energy -delta/2
        up = 1.0 - down
        ratio = down / up
        expected = math.exp(beta * delta)
        # delta-method error on the ratio
        stderr = ratio * math.sqrt(1 / (down * samples.size) + 1 / (up * samples.size))
        assert abs(ratio - expected) < 3 * stderr

    def test_total_variation_to_exact_boltzmann(self):
        p = generate_problem("qubo", GraphSpec("gnm", density=0.9), 5, 1.0, 7)
        s = full_spectrum(p)
        beta = 0.5 / operator_norm(p)
        samples = metropolis_sample(p, beta=beta, n_sweeps=30000, burn_in=1000, seed=11)
        tv = total_variation(empirical_distribution(samples, 5), exact_boltzmann(s, beta))
        assert tv < 0.08

    def test_energy_mean_small_beta(self):
        p = generate_problem("maxcut", GraphSpec("gnm", density=0.8), 8, 1.0, 9)
        s = full_spectrum(p)
        beta = 0.3 / operator_norm(p)
        samples = metropolis_sample(p, beta=beta, n_sweeps=20000, burn_in=1000, seed=13)
        sampled = s.energies[samples]
        exact = float(exact_boltzmann(s, beta) @ s.energies)
        # batch means absorb the sweep-to-sweep autocorrelation
        blocks = sampled[: 200 * (sampled.size // 200)].reshape(-1, 200).mean(axis=1)
        stderr = blocks.std(ddof=1) / math.sqrt(blocks.size)
        assert abs(sampled.mean() - exact) < 5 * stderr

    def test_deterministic(self):
        p = generate_problem("ising", GraphSpec("gnm", density=0.6), 6, 1.0, 21)
        a = metropolis_sample(p, beta=0.4, n_sweeps=50, burn_in=10, seed=5)
        b = metropolis_sample(p, beta=0.4, n_sweeps=50, burn_in=10, seed=5)
        assert np.array_equal(a, b)

    def test_preconditions(self):
        p = single_spin_problem(1.0)
        with pytest.raises(ValueError):
            metropolis_sample(p, beta=-0.1, n_sweeps=10, burn_in=0, seed=0)
        with pytest.raises(ValueError):
            metropolis_sample(p, beta=0.1, n_sweeps=0, burn_in=0, seed=0)


class TestCompare:
    def test_zero_beta_below_threshold(self):
        p = generate_problem("maxcut", GraphSpec("gnm", density=1.0), 8, 1.0, 4)
        result = compare(p, 0.0)
        assert result.product == 0.0
        assert not result.above_threshold
        assert result.beta_mcmc_threshold == 1.0 / result.norm_J

    def test_zero_norm_rejected(self):
        p = hand_problem(3, [], [1.0, -1.0, 0.5])
        with pytest.raises(ValueError):
            compare(p, 0.5)

    def test_sk_threshold_scale(self):
        p = generate_problem("maxcut", GraphSpec("gnm", density=1.0), 24, 1.0, 99)
        result = compare(p, 0.1)
        ratio = result.beta_mcmc_threshold / (1.0 / (2 * math.sqrt(24)))
        assert 0.8 < ratio < 1.2
