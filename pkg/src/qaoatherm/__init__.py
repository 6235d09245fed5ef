"""Exact single-layer extended-QAOA simulation and effective-temperature analysis."""

__version__ = "0.1.0"

from .problems import (  # noqa: F401
    Graph,
    GraphSpec,
    IsingProblem,
    ProblemFamily,
    ResourceLimitError,
    Spectrum,
    build_problem,
    full_spectrum,
    gen_gnm_graph,
    gen_regular_graph,
    generate_problem,
    load_problem,
    operator_norm,
    save_problem,
)
from .circuit import (  # noqa: F401
    CircuitParams,
    QuantumState,
    expectation_energy,
    ground_state_enhancement,
    prepare_state,
    probabilities,
)
from .interference import (  # noqa: F401
    CovarianceLaw,
    JointMoments,
    ReparamAngles,
    covariance_all,
    exact_amplitude,
    fit_covariance_law,
    joint_distribution,
    moments,
    predict_logprob_degenerate,
    predict_logprob_nondegenerate,
)
from .angles import OptResult, optimize_angles, sweep  # noqa: F401
from .thermal import (  # noqa: F401
    BoltzmannFit,
    ReplicaSummary,
    ScalingFit,
    ScalingPredictor,
    TargetStat,
    fit_instance,
    fit_replicas,
    fit_scaling,
)
from .mcmc import MixingComparison, compare, metropolis_sample  # noqa: F401
from .pipeline import ExperimentConfig, replica_seed, run_pipeline  # noqa: F401
