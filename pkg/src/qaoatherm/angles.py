"""Variational angle search (coarse grid + Nelder-Mead) and 1-D angle sweeps."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .circuit import CircuitParams, _apply_mixing, expectation_energy, prepare_state, probabilities
from .bits import popcount
from .problems import IsingProblem, Spectrum
from .thermal import fit_instance

DEFAULT_LAMBDA = -math.pi / 2
NELDER_MEAD_MAX_ITER = 2000


@dataclass(frozen=True)
class OptResult:
    gamma_opt: float
    theta_opt: float
    energy_opt: float
    evaluations: int
    converged: bool

    def params(self, lam=DEFAULT_LAMBDA):
        return CircuitParams(gamma=self.gamma_opt, theta=self.theta_opt, lam=lam)


def gamma_grid_upper_bound(problem: IsingProblem, spectrum: Spectrum = None):
    """Search box for gamma, 4 / (sigma sqrt(2M/N)) per the observed optimal-angle trend.

    Field-only problems (no edges) fall back to 2*pi over the spectrum span,
    which brackets the single-spin optimum pi/(2*Delta) with a 4x margin.
    """
    m = problem.edge_count
    if m == 0:
        if spectrum is None or spectrum.span <= 0:
            raise ValueError("edge-free problem needs a spectrum with nonzero span")
        return 2.0 * math.pi / spectrum.span
    return 4.0 / (math.sqrt(problem.sigma2) * math.sqrt(2.0 * m / problem.n))


def optimize_angles(problem: IsingProblem, spectrum: Spectrum, lam=DEFAULT_LAMBDA,
                    grid_points=32) -> OptResult:
    """Minimize <E> over (gamma, theta) at fixed lam.

    Deterministic two-stage search: a grid_points x grid_points scan of
    gamma in (0, upper] x theta in (0, pi), then Nelder-Mead from the best
    grid point down to simplex size 1e-6.  The diagonal-phase state is
    cached per gamma so a grid column costs one phase pass plus one mixing
    pass per theta.
    """
    n = problem.n
    gammas = gamma_grid_upper_bound(problem, spectrum) * np.arange(1, grid_points + 1) / grid_points
    thetas = math.pi * np.arange(1, grid_points + 1) / (grid_points + 1)
    energies = spectrum.energies
    pop_term = 2.0 * popcount(np.arange(1 << n, dtype=np.uint64)) - n
    norm = 2.0 ** (-n / 2.0)

    best = (math.inf, gammas[0], thetas[0])
    evaluations = 0
    for gamma in gammas:
        base = norm * np.exp(-1j * (gamma * energies + (lam / 2.0) * pop_term))
        for theta in thetas:
            psi = _apply_mixing(base.copy(), n, theta)
            value = float((np.abs(psi) ** 2) @ energies)
            evaluations += 1
            if value < best[0]:
                best = (value, gamma, theta)

    def objective(point):
        params = CircuitParams(gamma=float(point[0]), theta=float(point[1]), lam=lam)
        return expectation_energy(prepare_state(problem, spectrum, params), spectrum)

    result = minimize(
        objective, np.array([best[1], best[2]]), method="Nelder-Mead",
        bounds=[(1e-12, np.inf), (1e-9, math.pi - 1e-9)],
        options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": NELDER_MEAD_MAX_ITER},
    )
    evaluations += int(result.nfev)
    if result.fun <= best[0]:
        gamma_opt, theta_opt, energy_opt = float(result.x[0]), float(result.x[1]), float(result.fun)
    else:  # never worse than the best probed grid point
        energy_opt, gamma_opt, theta_opt = best
    return OptResult(
        gamma_opt=gamma_opt, theta_opt=theta_opt, energy_opt=energy_opt,
        evaluations=evaluations, converged=bool(result.success),
    )


@dataclass(frozen=True)
class SweepPoint:
    angle: float
    energy: float
    beta: float
    beta_stderr: float
    fit_r2: float
    xi: float


def sweep(problem: IsingProblem, spectrum: Spectrum, opt: OptResult, fixed,
          grid, lam=DEFAULT_LAMBDA):
    """Vary one angle over `grid` while holding `fixed` ('theta' or 'gamma') at its optimum.

    Each point reports the Boltzmann fit over all configurations (however
    poor) plus the ground-state enhancement; quality shows up in fit_r2,
    nothing is filtered.
    """
    if fixed not in ("theta", "gamma"):
        raise ValueError("fixed must be 'theta' or 'gamma'")
    points = []
    for value in grid:
        if fixed == "theta":
            params = CircuitParams(gamma=float(value), theta=opt.theta_opt, lam=lam)
        else:
            params = CircuitParams(gamma=opt.gamma_opt, theta=float(value), lam=lam)
        state = prepare_state(problem, spectrum, params)
        p = probabilities(state)
        fit = fit_instance(p, spectrum)
        points.append(SweepPoint(
            angle=float(value),
            energy=float(p @ spectrum.energies),
            beta=fit.beta,
            beta_stderr=fit.ci99_halfwidth / 2.576,
            fit_r2=fit.r2,
            xi=float(p[spectrum.ground_index] * (1 << problem.n)),
        ))
    return points


def write_sweep_csv(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle", "energy", "beta", "beta_stderr", "fit_r2", "xi"])
        for pt in points:
            writer.writerow([format(v, ".17g") for v in
                             (pt.angle, pt.energy, pt.beta, pt.beta_stderr, pt.fit_r2, pt.xi)])
