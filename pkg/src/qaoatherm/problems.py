"""Random graph-embedded Ising-class problem generation and exact spectra.

Three families share the common form

    E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i,    s_i = 2 bit_i(x) - 1,

with couplings drawn once per undirected edge from Normal(0, sigma2):
QUBO (h_i = sum_j J_ij), MaxCut (h = 0) and random Ising (h_i drawn too).
"""

import json
import math
import os
import tempfile
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bits import all_configurations, spin_blocks

SPECTRUM_MAX_QUBITS = 26  # 2**26 float64 energies ~ 0.5 GiB
REGULAR_GRAPH_MAX_RETRIES = 1000


class ResourceLimitError(RuntimeError):
    """Raised when a request exceeds the desk-scale enumeration caps."""


class ProblemFamily(str, Enum):
    QUBO = "qubo"
    MAXCUT = "maxcut"
    RANDOM_ISING = "ising"


@dataclass(frozen=True)
class GraphSpec:
    """Random-graph ensemble label: kind 'gnm' with density or 'regular' with degree."""

    kind: str
    density: float | None = None
    degree: int | None = None

    def __post_init__(self):
        if self.kind not in ("gnm", "regular"):
            raise ValueError(f"unknown graph kind {self.kind!r}")
        if self.kind == "gnm" and self.density is None:
            raise ValueError("gnm graphs need a density")
        if self.kind == "regular" and self.degree is None:
            raise ValueError("regular graphs need a degree")

    @classmethod
    def parse(cls, text):
        """Parse 'gnm:0.9' or 'regular:4'."""
        kind, _, value = text.partition(":")
        if kind == "gnm":
            return cls("gnm", density=float(value))
        if kind == "regular":
            return cls("regular", degree=int(value))
        raise ValueError(f"unknown graph spec {text!r}")

    def label(self):
        if self.kind == "gnm":
            return f"gnm:{self.density:g}"
        return f"regular:{self.degree}"

    def to_dict(self):
        if self.kind == "gnm":
            return {"type": "gnm", "density": self.density}
        return {"type": "regular", "degree": self.degree}

    @classmethod
    def from_dict(cls, d):
        if d["type"] == "gnm":
            return cls("gnm", density=d["density"])
        return cls("regular", degree=d["degree"])


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1 with edges as (i, j), i < j."""

    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("graph needs at least 2 vertices")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    @property
    def edge_count(self):
        return len(self.edges)

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def gnm_edge_count(n, density):
    """Number of edges for a G_{n,M} graph: ceiling(density * n(n-1)/2)."""
    return math.ceil(density * n * (n - 1) / 2)


def gen_gnm_graph(n, density, seed):
    """Uniform G_{n,M} random graph with M = ceiling(density * n(n-1)/2) edges."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = gnm_edge_count(n, density)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(pairs), size=m, replace=False)
    edges = tuple(sorted(pairs[k] for k in chosen))
    return Graph(n=n, edges=edges)


def gen_regular_graph(n, degree, seed):
    """Random r-regular graph via the configuration (pairing) model.

    Pairings producing self-loops or duplicate edges are rejected and the
    whole shuffle retried, up to REGULAR_GRAPH_MAX_RETRIES attempts.
    """
    if not 0 < degree < n:
        raise ValueError("degree must satisfy 0 < degree < n")
    if (n * degree) % 2 != 0:
        raise ValueError("degree * n must be even")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(REGULAR_GRAPH_MAX_RETRIES):
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for a, b in zip(stubs[0::2], stubs[1::2]):
            if a == b:
                ok = False
                break
            e = (min(a, b), max(a, b))
            if e in edges:
                ok = False
                break
            edges.add(e)
        if ok:
            return Graph(n=n, edges=tuple(sorted((int(i), int(j)) for i, j in edges)))
    raise RuntimeError(
        f"no simple {degree}-regular pairing found in {REGULAR_GRAPH_MAX_RETRIES} attempts"
    )


def generate_graph(spec: GraphSpec, n, seed):
    if spec.kind == "gnm":
        return gen_gnm_graph(n, spec.density, seed)
    return gen_regular_graph(n, spec.degree, seed)


@dataclass(frozen=True)
class IsingProblem:
    """An Ising-form instance: symmetric couplings J, fields h, plus provenance."""

    n: int
    J: np.ndarray
    h: np.ndarray
    family: ProblemFamily
    sigma2: float
    seed: int
    graph_meta: GraphSpec
    edges: tuple

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if J.shape != (self.n, self.n) or h.shape != (self.n,):
            raise ValueError("J/h shapes do not match n")
        if not np.array_equal(J, J.T):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(J) != 0.0):
            raise ValueError("J must have zero diagonal")
        J.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    @property
    def edge_count(self):
        return len(self.edges)


def build_problem(family, graph: Graph, sigma2, seed, graph_meta=None):
    """Draw one coupling per edge (symmetrically assigned) and map to Ising form."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    family = ProblemFamily(family)
    rng = np.random.default_rng(seed)
    std = math.sqrt(sigma2)
    n = graph.n
    J = np.zeros((n, n))
    for i, j in graph.edges:
        q = rng.normal(0.0, std)
        J[i, j] = J[j, i] = q
    if family is ProblemFamily.QUBO:
        h = J.sum(axis=1)
    elif family is ProblemFamily.MAXCUT:
        h = np.zeros(n)
    else:  # random Ising: fields drawn after all couplings
        h = rng.normal(0.0, std, size=n)
    if graph_meta is None:
        graph_meta = _infer_spec(graph)
    return IsingProblem(
        n=n, J=J, h=h, family=family, sigma2=float(sigma2), seed=int(seed),
        graph_meta=graph_meta, edges=graph.edges,
    )


def _infer_spec(graph: Graph):
    deg = graph.degrees()
    if deg[0] > 0 and np.all(deg == deg[0]):
        return GraphSpec("regular", degree=int(deg[0]))
    density = 2 * graph.edge_count / (graph.n * (graph.n - 1))
    return GraphSpec("gnm", density=density)


def generate_problem(family, spec: GraphSpec, n, sigma2, seed):
    """Graph + couplings from a single seed (graph first, then coefficients)."""
    graph = generate_graph(spec, n, seed)
    return build_problem(family, graph, sigma2, seed, graph_meta=spec)


@dataclass(frozen=True)
class Spectrum:
    """Energies of all 2**n configurations, indexed by configuration integer."""

    n: int
    energies: np.ndarray
    e_min: float
    e_max: float
    ground_index: int

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @classmethod
    def from_energies(cls, n, energies):
        energies = np.asarray(energies, dtype=float)
        gi = int(np.argmin(energies))  # argmin takes the first index on ties
        return cls(n=n, energies=energies, e_min=float(energies[gi]),
                   e_max=float(energies.max()), ground_index=gi)

    @property
    def span(self):
        return self.e_max - self.e_min

    def rescaled(self):
        """Energies mapped affinely onto [0, 1]."""
        return (self.energies - self.e_min) / self.span


def full_spectrum(problem: IsingProblem) -> Spectrum:
    """Exact energies for all 2**n configurations.

    Evaluates E = (1/2) s.J.s + h.s blockwise so peak memory stays bounded
    for n up to SPECTRUM_MAX_QUBITS.
    """
    n = problem.n
    if n > SPECTRUM_MAX_QUBITS:
        raise ResourceLimitError(f"n={n} exceeds the spectrum cap {SPECTRUM_MAX_QUBITS}")
    energies = np.empty(1 << n)
    half_J = problem.J / 2.0
    for start, spins in spin_blocks(n):
        g = spins @ half_J
        energies[start:start + spins.shape[0]] = np.einsum("xi,xi->x", g, spins) + spins @ problem.h
    return Spectrum.from_energies(n, energies)


def spectrum_gray_code(problem: IsingProblem) -> Spectrum:
    """Spectrum by incremental single-flip (Gray-code) updates.

    Independent of full_spectrum's vectorized path; used for verification,
    so only sensible at small n.
    """
    n = problem.n
    if n > 20:
        raise ResourceLimitError("gray-code enumeration capped at n=20")
    J, h = problem.J, problem.h
    spins = -np.ones(n)
    energy = 0.5 * spins @ J @ spins + h @ spins
    energies = np.empty(1 << n)
    code = 0
    energies[0] = energy
    for k in range(1, 1 << n):
        flip = (k & -k).bit_length() - 1  # bit that changes between gray(k-1) and gray(k)
        energy -= 2.0 * spins[flip] * (J[flip] @ spins + h[flip])
        spins[flip] = -spins[flip]
        code ^= 1 << flip
        energies[code] = energy
    return Spectrum.from_energies(n, energies)


def operator_norm(problem: IsingProblem) -> float:
    """Spectral norm of the coupling matrix J."""
    if problem.n == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvalsh(problem.J)).max())


def qubo_matrix(problem: IsingProblem):
    """The Q matrix whose QUBO/MaxCut objective this instance encodes (Q = J off-diagonal)."""
    return problem.J.copy()


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_problem(problem: IsingProblem, path):
    """Write the instance as JSON; floats survive round-trip exactly."""
    payload = {
        "n": problem.n,
        "family": problem.family.value,
        "graph": problem.graph_meta.to_dict(),
        "sigma2": problem.sigma2,
        "seed": problem.seed,
        "edges": [[int(i), int(j), float(problem.J[i, j])] for i, j in problem.edges],
        "h": [float(v) for v in problem.h],
    }
    _atomic_write_text(path, json.dumps(payload, indent=1))


def load_problem(path) -> IsingProblem:
    with open(path) as fh:
        payload = json.load(fh)
    n = payload["n"]
    J = np.zeros((n, n))
    edges = []
    for i, j, value in payload["edges"]:
        J[i, j] = J[j, i] = value
        edges.append((i, j))
    return IsingProblem(
        n=n, J=J, h=np.asarray(payload["h"], dtype=float),
        family=ProblemFamily(payload["family"]), sigma2=payload["sigma2"],
        seed=payload["seed"], graph_meta=GraphSpec.from_dict(payload["graph"]),
        edges=tuple(edges),
    )
