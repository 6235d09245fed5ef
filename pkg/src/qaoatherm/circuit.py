"""Exact dense statevector simulation of the single-layer extended-QAOA circuit.

The circuit is H^n -> diagonal phase exp(-i*gamma*E_x) -> per-qubit U1(lam)
-> per-qubit R_y(theta).  Basis convention: bit i of configuration x is spin
i with sigma^z eigenvalue s_i = 2*bit_i - 1, so U1 contributes the
per-configuration phase exp(-i*lam/2 * sum_i s_i) and the mixing kernel in
the (bit=0, bit=1) basis is [[c, s], [-s, c]] with c = cos(theta/2),
s = sin(theta/2).  This is the convention under which a single two-level
system with splitting D measures P(s) = (1 - s*sin(theta)*cos(gamma*D+lam))/2.
Only probabilities are contractual; global phase is ignored.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .bits import popcount
from .problems import IsingProblem, ResourceLimitError, Spectrum

STATE_MAX_QUBITS = 26


@dataclass(frozen=True)
class CircuitParams:
    """Variational angles: phase evolution gamma, mixing theta, direction lam."""

    gamma: float
    theta: float
    lam: float = -math.pi / 2

    def __post_init__(self):
        for name in ("gamma", "theta", "lam"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class QuantumState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n,):
            raise ValueError("amplitude vector length must be 2**n")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm_error(self):
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)


def _mixing_kernels(theta, max_group=4):
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    k1 = np.array([[c, s], [-s, c]])
    kernels = {1: k1}
    for k in range(2, max_group + 1):
        kernels[k] = np.kron(kernels[k - 1], k1)
    return kernels


def _apply_mixing(psi, n, theta):
    """Apply R_y(theta) to every qubit, grouping qubits 4 at a time.

    matmul may not alias input and output, so passes ping-pong between two
    buffers; returns whichever buffer holds the result.
    """
    kernels = _mixing_kernels(theta)
    scratch = np.empty_like(psi)
    cur, nxt = psi, scratch
    i = 0
    while i < n:
        k = min(4, n - i)
        shape = (-1, 1 << k, 1 << i)
        np.matmul(kernels[k], cur.reshape(shape), out=nxt.reshape(shape))
        cur, nxt = nxt, cur
        i += k
    return cur


def prepare_state(problem: IsingProblem, spectrum: Spectrum, params: CircuitParams) -> QuantumState:
    """Simulate the circuit exactly; all diagonal phases are fused into one pass."""
    n = problem.n
    if spectrum.n != n or spectrum.energies.shape[0] != (1 << n):
        raise ValueError("spectrum does not match problem size")
    if n > STATE_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the statevector cap {STATE_MAX_QUBITS}")
    phase = params.gamma * spectrum.energies + (params.lam / 2.0) * (
        2.0 * popcount(np.arange(1 << n, dtype=np.uint64)) - n
    )
    psi = np.exp(-1j * phase)
    psi *= 2.0 ** (-n / 2.0)
    psi = _apply_mixing(psi, n, params.theta)
    return QuantumState(n=n, amplitudes=psi)


def prepare_state_unfused(problem, spectrum, params) -> QuantumState:
    """Gate-by-gate reference path: U1 applied as per-qubit 2x2 kernels.

    Slower than prepare_state; exists to pin the fused diagonal against the
    literal gate ordering.
    """
    n = problem.n
    psi = np.full(1 << n, 2.0 ** (-n / 2.0), dtype=complex)
    psi *= np.exp(-1j * params.gamma * spectrum.energies)
    # bit=0 carries s=-1, hence the +lam/2 phase
    u1 = np.array([np.exp(1j * params.lam / 2.0), np.exp(-1j * params.lam / 2.0)])
    for i in range(n):
        v = psi.reshape(-1, 2, 1 << i)
        v[:, 0, :] *= u1[0]
        v[:, 1, :] *= u1[1]
    psi = _apply_mixing(psi, n, params.theta)
    return QuantumState(n=n, amplitudes=psi)


def probabilities(state: QuantumState) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def expectation_energy(state: QuantumState, spectrum: Spectrum) -> float:
    if spectrum.energies.shape != state.amplitudes.shape:
        raise ValueError("state and spectrum sizes differ")
    return float(probabilities(state) @ spectrum.energies)


@dataclass(frozen=True)
class GroundEnhancement:
    """Ground-state probability gain over uniform sampling."""

    xi: float                 # p[ground_index] * 2**n
    level_probability: float  # total probability within 1e-9 of e_min
    degeneracy: int


def ground_state_enhancement(state: QuantumState, spectrum: Spectrum, atol=1e-9) -> GroundEnhancement:
    p = probabilities(state)
    if p.shape != spectrum.energies.shape:
        raise ValueError("state and spectrum sizes differ")
    level = np.abs(spectrum.energies - spectrum.e_min) <= atol
    return GroundEnhancement(
        xi=float(p[spectrum.ground_index] * (1 << state.n)),
        level_probability=float(p[level].sum()),
        degeneracy=int(level.sum()),
    )


def dump_state(state: QuantumState, basepath, params: CircuitParams = None, problem_seed=None):
    """Debug dump: <basepath>.bin holds little-endian complex doubles, <basepath>.json the header."""
    bin_path = f"{basepath}.bin"
    with open(bin_path, "wb") as fh:
        fh.write(np.ascontiguousarray(state.amplitudes, dtype="<c16").tobytes())
    header = {"n": state.n, "problem_seed": problem_seed}
    if params is not None:
        header.update({"gamma": params.gamma, "theta": params.theta, "lambda": params.lam})
    with open(f"{basepath}.json", "w") as fh:
        json.dump(header, fh, indent=1)
    return bin_path


def load_state(basepath) -> QuantumState:
    with open(f"{basepath}.json") as fh:
        header = json.load(fh)
    raw = np.fromfile(f"{basepath}.bin", dtype="<c16")
    return QuantumState(n=header["n"], amplitudes=raw.astype(complex))


def state_file_exists(basepath):
    return os.path.exists(f"{basepath}.bin") and os.path.exists(f"{basepath}.json")
