"""Interference-sum view of the circuit and the energy/Hamming covariance law.

The amplitude of configuration x is an average over all configurations x'
of cos(theta/2)^(N-H) [e^{-i lam} sin(theta/2)]^H e^{-i gamma E_{x'}} with
H the Hamming distance x<->x'.  For each reference x the pairs (H, E)
follow a joint distribution whose covariance sigma_EH(x) decreases roughly
linearly with E_x; the slope c sets the effective inverse temperature
through beta = -2 c gamma lam.

Note the interference sum is a unitary circuit only at lam = +-pi/2; away
from those points it is a formal object and does not reproduce statevector
probabilities.
"""

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bits import all_configurations, hamming_to_all, popcount
from .circuit import CircuitParams
from .problems import ResourceLimitError, Spectrum

EXACT_AMPLITUDE_MAX_QUBITS = 16
COVARIANCE_FAST_MAX_QUBITS = 20
COVARIANCE_SPLIT_MAX_QUBITS = 16


class Hierarchy(str, Enum):
    SINGLE = "single"
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class ReparamAngles:
    """Mixing angle rewritten as the exponent r = -log(tan(theta/2))."""

    r: float
    lam: float
    gamma: float

    @classmethod
    def from_circuit(cls, params: CircuitParams):
        if not 0.0 < params.theta < math.pi:
            raise ValueError("theta must lie strictly inside (0, pi)")
        return cls(r=-math.log(math.tan(params.theta / 2.0)), lam=params.lam, gamma=params.gamma)


@dataclass(frozen=True)
class JointMoments:
    """Empirical moments of the joint (Hamming, energy) distribution for one x.

    Energies are centered at the exact spectrum mean before any moment is
    taken, so mu_E vanishes for the full (single-hierarchy) distribution.
    """

    mu_E: float
    sigma_E: float
    mu_H: float
    sigma_H: float
    sigma_EH: float
    rho: float
    hierarchy: Hierarchy
    h0: float = 0.0


@dataclass(frozen=True)
class CovarianceLaw:
    """Linear law sigma_EH(x) ~ -c E_x + omega and the beta it predicts."""

    c: float
    omega_std: float
    fit_r2: float
    beta_predicted: float
    slope: float
    intercept: float
    corr: float


def exact_amplitude(x, spectrum: Spectrum, params: CircuitParams) -> complex:
    """Direct interference sum for one configuration; O(2**n) per call."""
    n = spectrum.n
    if n > EXACT_AMPLITUDE_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the interference-sum cap")
    table = _weight_table(n, params)
    ham = hamming_to_all(x, n)
    return complex(2.0 ** (-n / 2.0) * np.sum(table[ham] * np.exp(-1j * params.gamma * spectrum.energies)))


def exact_probabilities(spectrum: Spectrum, params: CircuitParams) -> np.ndarray:
    """|F(x)|^2 for every x from the interference sum; O(4**n) total."""
    n = spectrum.n
    if n > EXACT_AMPLITUDE_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the interference-sum cap")
    table = _weight_table(n, params)
    phases = np.exp(-1j * params.gamma * spectrum.energies)
    xs = all_configurations(n)
    out = np.empty(1 << n)
    for x in range(1 << n):
        ham = popcount(xs ^ np.uint64(x))
        out[x] = abs(np.sum(table[ham] * phases)) ** 2
    return out * 2.0 ** (-n)


def _weight_table(n, params):
    c = math.cos(params.theta / 2.0)
    s = math.sin(params.theta / 2.0)
    hs = np.arange(n + 1)
    return c ** (n - hs) * (s * np.exp(-1j * params.lam)) ** hs


@dataclass(frozen=True)
class JointDistribution:
    """Weighted support points of p(H, E; x), duplicates aggregated."""

    hamming: np.ndarray
    energy: np.ndarray
    weight: np.ndarray


def joint_distribution(x, spectrum: Spectrum) -> JointDistribution:
    n = spectrum.n
    if n > EXACT_AMPLITUDE_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the per-x exhaustive cap")
    ham = hamming_to_all(x, n)
    pairs = np.rec.fromarrays([ham, spectrum.energies], names="h,e")
    uniq, counts = np.unique(pairs, return_counts=True)
    return JointDistribution(
        hamming=uniq.h.astype(int),
        energy=uniq.e.astype(float),
        weight=counts / float(1 << n),
    )


def _moment_set(ham, centered, hierarchy, mu_h_ref):
    mu_e = float(centered.mean())
    mu_h = float(ham.mean())
    sigma_e = float(centered.std())
    sigma_h = float(ham.std())
    sigma_eh = float(((ham - mu_h) * (centered - mu_e)).mean())
    denom = sigma_e * sigma_h
    rho = sigma_eh / denom if denom > 0 else 0.0
    return JointMoments(
        mu_E=mu_e, sigma_E=sigma_e, mu_H=mu_h, sigma_H=sigma_h,
        sigma_EH=sigma_eh, rho=rho, hierarchy=hierarchy,
        h0=abs(mu_h_ref - mu_h),
    )


def moments(x, spectrum: Spectrum, degenerate=False):
    """Joint moments for reference x; split into +/- hierarchies when degenerate.

    The split assigns H < N/2 to Plus and H > N/2 to Minus; the H = N/2
    shell goes to Plus so the rule is deterministic.
    """
    n = spectrum.n
    ham = hamming_to_all(x, n).astype(float)
    centered = spectrum.energies - spectrum.energies.mean()
    if not degenerate:
        return _moment_set(ham, centered, Hierarchy.SINGLE, ham.mean())
    half = n / 2.0
    plus = ham <= half
    minus = ~plus
    return (
        _moment_set(ham[plus], centered[plus], Hierarchy.PLUS, half),
        _moment_set(ham[minus], centered[minus], Hierarchy.MINUS, half),
    )


def covariance_all(spectrum: Spectrum, degenerate=False) -> np.ndarray:
    """sigma_EH(x) for every configuration x.

    Non-degenerate path uses the subset-sum identity
    sum_{x'} H_{xx'} E_{x'} = sum_i [x_i (S - S_i) + (1 - x_i) S_i]
    (S = sum of energies, S_i = sum over configurations with bit i set),
    which costs O(n 2**n).  The degenerate path restricts to the Plus
    hierarchy per reference x and is quadratic, so it carries a lower cap.
    """
    n = spectrum.n
    if not degenerate:
        if n > COVARIANCE_FAST_MAX_QUBITS:
            raise ResourceLimitError(f"n={n} exceeds the covariance fast-path cap")
        centered = spectrum.energies - spectrum.energies.mean()
        bit_sums = np.empty(n)
        for i in range(n):
            bit_sums[i] = centered.reshape(-1, 2, 1 << i)[:, 1, :].sum()
        subset = np.zeros(1)
        for i in range(n):
            subset = np.concatenate([subset, subset + bit_sums[i]])
        total = bit_sums.sum()
        residual = centered.sum()  # ~0; kept for exactness of the identity
        pops = popcount(all_configurations(n)).astype(float)
        return (total - 2.0 * subset + pops * residual) / float(1 << n)
    if n > COVARIANCE_SPLIT_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the degenerate covariance cap")
    centered = spectrum.energies - spectrum.energies.mean()
    xs = all_configurations(n)
    half = n / 2.0
    out = np.empty(1 << n)
    for x in range(1 << n):
        ham = popcount(xs ^ np.uint64(x)).astype(float)
        mask = ham <= half
        hsub = ham[mask]
        esub = centered[mask]
        out[x] = ((hsub - hsub.mean()) * (esub - esub.mean())).mean()
    return out


def covariance_split_all(spectrum: Spectrum):
    """Per-x Plus/Minus covariances and the empirical shift h0, for h = 0 models."""
    n = spectrum.n
    if n > COVARIANCE_SPLIT_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the degenerate covariance cap")
    centered = spectrum.energies - spectrum.energies.mean()
    xs = all_configurations(n)
    half = n / 2.0
    plus = np.empty(1 << n)
    minus = np.empty(1 << n)
    shift = np.empty(1 << n)
    for x in range(1 << n):
        ham = popcount(xs ^ np.uint64(x)).astype(float)
        mask = ham <= half
        for target, sel in ((plus, mask), (minus, ~mask)):
            hsub = ham[sel]
            esub = centered[sel]
            target[x] = ((hsub - hsub.mean()) * (esub - esub.mean())).mean()
        shift[x] = half - ham[mask].mean()
    return plus, minus, shift


def covariance_brute_force(spectrum: Spectrum) -> np.ndarray:
    """O(4**n) unsplit covariance, the oracle for the fast path."""
    n = spectrum.n
    if n > 14:
        raise ResourceLimitError("brute-force covariance capped at n=14")
    centered = spectrum.energies - spectrum.energies.mean()
    xs = all_configurations(n)
    out = np.empty(1 << n)
    for x in range(1 << n):
        ham = popcount(xs ^ np.uint64(x)).astype(float)
        out[x] = ((ham - n / 2.0) * centered).mean()
    return out


def fit_covariance_law(sigma_eh, spectrum: Spectrum, params: CircuitParams) -> CovarianceLaw:
    """Least squares of sigma_EH(x) against raw energies E_x."""
    sigma_eh = np.asarray(sigma_eh, dtype=float)
    e = spectrum.energies
    if sigma_eh.shape != e.shape:
        raise ValueError("sigma_EH vector does not match the spectrum")
    if sigma_eh.size < 4:
        raise ValueError("need at least 4 points")
    var_e = e.var()
    if var_e == 0.0:
        raise ValueError("degenerate regression: spectrum has zero energy variance")
    slope = float(np.cov(e, sigma_eh, bias=True)[0, 1] / var_e)
    intercept = float(sigma_eh.mean() - slope * e.mean())
    resid = sigma_eh - (slope * e + intercept)
    dof = max(sigma_eh.size - 2, 1)
    omega_std = float(np.sqrt(resid @ resid / dof))
    ss_tot = float(((sigma_eh - sigma_eh.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 0.0
    c = -slope
    corr = math.copysign(math.sqrt(max(r2, 0.0)), slope)
    return CovarianceLaw(
        c=c, omega_std=omega_std, fit_r2=r2,
        beta_predicted=-2.0 * c * params.gamma * params.lam,
        slope=slope, intercept=intercept, corr=corr,
    )


def predict_logprob_nondegenerate(m: JointMoments, angles: ReparamAngles) -> float:
    """log |F|^2 up to normalization for a single-Gaussian joint distribution."""
    if m.hierarchy is not Hierarchy.SINGLE:
        raise ValueError("expected single-hierarchy moments")
    return (
        -angles.gamma ** 2 * m.sigma_E ** 2
        + (angles.r ** 2 - angles.lam ** 2) * m.sigma_H ** 2
        - 2.0 * angles.r * m.mu_H
        - 2.0 * angles.gamma * angles.lam * m.rho * m.sigma_E * m.sigma_H
    )


def predict_logprob_degenerate(plus: JointMoments, minus: JointMoments, angles: ReparamAngles):
    """(full, approximate) log |F|^2 for a two-Gaussian split.

    The full form keeps the interfering cos + cosh pair; the approximation
    drops everything but the dominant exponential, which reduces to the
    single-Gaussian law with rho = rho_plus.
    """
    g, lam, r = angles.gamma, angles.lam, angles.r
    sig_e, sig_h = plus.sigma_E, plus.sigma_H
    mu_h = (plus.mu_H + minus.mu_H) / 2.0  # == N/2 by reflection
    rho_sum = plus.rho + minus.rho
    h0 = plus.h0
    y_prime = (
        -g ** 2 * sig_e ** 2
        + (r ** 2 - lam ** 2) * sig_h ** 2
        - 2.0 * r * mu_h
        + g * lam * (minus.rho - plus.rho) * sig_e * sig_h
    )
    osc = math.cos(2.0 * h0 * lam + r * g * rho_sum * sig_e * sig_h)
    hyp = math.cosh(2.0 * h0 * r - g * lam * rho_sum * sig_e * sig_h)
    full = y_prime + math.log(osc + hyp)
    approx = (
        -g ** 2 * sig_e ** 2
        + (r ** 2 - lam ** 2) * sig_h ** 2
        - 2.0 * r * mu_h
        - 2.0 * g * lam * plus.rho * sig_e * sig_h
    )
    return full, approx


def write_covariance_csv(path, spectrum: Spectrum, sigma_eh, sigma_plus=None,
                         sigma_minus=None, h0=None):
    """Per-configuration covariance profile as CSV."""
    rescaled = spectrum.rescaled()
    degenerate = sigma_plus is not None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["x", "E_x", "E_rescaled", "sigma_EH"]
        if degenerate:
            header += ["sigma_EH_plus", "sigma_EH_minus", "h0"]
        writer.writerow(header)
        for x in range(spectrum.energies.size):
            row = [x, _f(spectrum.energies[x]), _f(rescaled[x]), _f(sigma_eh[x])]
            if degenerate:
                row += [_f(sigma_plus[x]), _f(sigma_minus[x]), _f(h0[x])]
            writer.writerow(row)


def _f(value):
    return format(float(value), ".17g")
