"""Neural-network quantum states with brute-force oracles.

Configurations use the zero-one convention and big-endian basis order:
site 0 is the most significant bit of a basis index.
"""
from ._backend import BACKEND
from .circuit import (
    Circuit,
    DbmCircuitGraph,
    amplitude,
    amplitudes,
    apply_cz,
    apply_hadamard,
    apply_zrot,
    build_graph,
    init_graph,
    parse_circuit,
    random_circuit,
    statevector_oracle,
)
from .core import (
    PLUS_MINUS_ONE,
    ZERO_ONE,
    FeedForwardNet,
    Layer,
    NetworkParameters,
    SpinConfiguration,
    activate,
    all_configs,
    ffn_amplitude,
    perceptron_nand,
    smoothed_step,
)
from .entanglement import (
    Bipartition,
    arealaw_probe,
    entanglement_entropy,
    reduced_density,
    renyi_entropy,
)
from .errors import *  # noqa: F401,F403
from .exact import (
    DenseState,
    expectation,
    fidelity,
    ground_state_exact,
    kl_divergence,
    materialize,
    trace_distance,
)
from .hamiltonians import (
    PauliStringHamiltonian,
    build_afh,
    build_j1j2,
    build_tfim,
    local_energies,
    local_energy,
)
from .states import (
    BmState,
    DbmState,
    RbmState,
    bm_log_amplitude,
    convert_hidden_domain,
    dbm_log_amplitude_exact,
    rbm_log_amplitude,
    rbm_log_derivatives,
    state_from_json,
)
from .tensor import MpsState, mps_amplitude, rbm_to_mps, rbm_to_tensor_network
from .tomography import (
    MeasurementRecord,
    PurifiedRbm,
    TomoConfig,
    density_matrix,
    measurement_probabilities,
    purified_amplitude,
    tomo_mixed,
    tomo_pure,
)
from .vmc import (
    MetropolisChain,
    TrainConfig,
    estimate_energy,
    estimate_gradient,
    gd_update,
    metropolis_step,
    sample_configurations,
    sgd_update,
    solve_ground_state,
)

__version__ = "0.1.0"
