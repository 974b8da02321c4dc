"""Compressive quantum magnetometry toolkit.

Simulates a pi-pulse-controlled qubit sensor reading out a
time-dependent field, builds Walsh and random measurement matrices, and
reconstructs sparse or compressible fields by l1 minimization.
"""

from .errors import (
    ConfigurationError,
    InfeasibleError,
    OracleFailureError,
    PhaseRangeError,
    ResourceError,
    UnsupportedModelError,
)
from .walsh import (
    DiscreteWalshBasis,
    WalshCoefficients,
    WalshIndex,
    discrete_walsh_matrix,
    fast_walsh_inverse,
    fast_walsh_transform,
    gray_code,
    rademacher,
    walsh_coefficient,
    walsh_eval,
    walsh_spectrum,
)
from .signal_models import (
    DiscretizedField,
    MultiToneField,
    SpikeEvent,
    SpikeTrainField,
    Tone,
    discretize,
    load_field,
    sample_multitone,
    sample_spike_train,
    save_field,
    second_derivative_bound,
)
from .sensor_sim import (
    ControlSequence,
    MeasurementOutcome,
    NoiseModel,
    accumulated_phase,
    chi,
    filter_function,
    invert_phase,
    measurement_noise_norm,
    modulation_from_bits,
    outcome_probability,
    random_control_sequence,
    sensitivity,
    simulate_measurements,
    walsh_control_sequence,
)
from .sensing_matrix import (
    EXACT_RECOVERY_RIC_GATE,
    OrthonormalBasis,
    RipReport,
    SensingMatrix,
    coherence,
    compose_with_basis,
    exact_recovery_gate,
    fourier_real_basis,
    load_matrix,
    random_matrix,
    restricted_isometry_constant,
    rip_check,
    save_matrix,
    spike_basis,
    subsample_rows,
    walsh_basis,
)
from .l1_recovery import (
    RecoveryProblem,
    RecoveryResult,
    basis_pursuit,
    bpdn,
    compress,
    lp_oracle,
    synthesis_problem,
)
from .experiments import (
    ExperimentConfig,
    REFERENCE_TONE_FRACTIONS,
    SweepResult,
    TrialRecord,
    msqe,
    noisy_run,
    quadrature_gap_check,
    run_random_multitone_trial,
    run_random_spike_trial,
    run_sweep,
    run_trial,
    run_walsh_spike_trial,
)

__version__ = "0.1.0"
