import numpy as np

from qaoatherm.problems import GraphSpec, IsingProblem, ProblemFamily


def hand_problem(n, couplings, fields, family=ProblemFamily.RANDOM_ISING):
    """Build an instance directly from explicit couplings [(i, j, value), ...]."""
    J = np.zeros((n, n))
    edges = []
    for i, j, value in couplings:
        J[i, j] = J[j, i] = value
        edges.append((i, j))
    return IsingProblem(
        n=n, J=J, h=np.asarray(fields, dtype=float), family=ProblemFamily(family),
        sigma2=1.0, seed=0, graph_meta=GraphSpec("gnm", density=0.0), edges=tuple(edges),
    )


def single_spin_problem(delta):
    """One two-level system with splitting delta (energies -delta/2, +delta/2)."""
    return hand_problem(1, [], [delta / 2.0])
