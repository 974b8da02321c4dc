"""End-to-end reconstruction studies and their success-probability sweeps.

Three scenarios: `walsh_spike` measures spike trains in random Walsh
coefficients, `random_multitone` measures multitone fields with random
pulse sequences (symmetric Bernoulli matrix) against the real Fourier
basis, and `random_spike` applies the Bernoulli matrix to spike trains.

A trial counts as a success when the time-averaged squared error
msqe / T (in (nT)^2) falls below the scenario threshold; thresholds are
quoted on that per-sample scale, where successful spike reconstructions
sit many orders below 1e-9 and failed ones land near 1e-2.
"""

from __future__ import annotations

import json
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import l1_recovery, sensing_matrix, sensor_sim, signal_models, walsh
from .errors import ConfigurationError, InfeasibleError, PhaseRangeError

FORMAT_VERSION = "csmag-sweep/1"
RECON_FORMAT = "csmag-reconstruction/1"

SCENARIOS = ("walsh_spike", "random_multitone", "random_spike")

# Fixed 8-tone benchmark: frequency fractions x_j of the n/T cutoff.
REFERENCE_TONE_FRACTIONS = (
    1 / 2, 1 / 61, 1 / 78, 1 / 328, 1 / 551, 1 / 788, 1 / 881, 1 / 1022,
)

# Success thresholds on the time-averaged squared error, (nT)^2.
DEFAULT_THRESHOLDS = {
    "walsh_spike": 1e-9,
    "random_spike": 1e-9,
    "random_multitone": 5e-3,
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    grid_order: int = 10
    T: float = 1e-3
    m_values: tuple = (200,)
    trials: int = 200
    msqe_threshold: float | None = None
    master_seed: int = 0
    # spike-train scenario parameters
    n_events: int = 5
    event_half_width: float = 5e-6
    amplitude: float = 1.0
    # multitone scenario parameters
    n_tones: int = 8
    tone_fractions: tuple | None = None
    # measurement pipeline
    quadrature_points: int | None = None
    n_reps: int = 0
    noise_sigma: float = 0.0
    noise_model: sensor_sim.NoiseModel | None = None
    noise_margin: float = 0.25
    epsilon_floor: float = 1e-8
    # solver
    feasibility_tol: float = l1_recovery.FEASIBILITY_TOL
    optimality_tol: float = l1_recovery.OPTIMALITY_TOL
    max_iterations: int = l1_recovery.MAX_ITERATIONS
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; use one of {SCENARIOS}")
        n = 1 << self.grid_order
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        if any(m < 1 or m > n for m in self.m_values):
            raise ConfigurationError(f"every m must lie in [1, {n}]")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.msqe_threshold is None:
            object.__setattr__(self, "msqe_threshold", DEFAULT_THRESHOLDS[self.scenario])
        if self.msqe_threshold <= 0:
            raise ConfigurationError("msqe_threshold must be positive")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if self.tone_fractions is not None:
            object.__setattr__(self, "tone_fractions", tuple(self.tone_fractions))

    @property
    def n(self):
        return 1 << self.grid_order

    def solver_kwargs(self):
        return {
            "feasibility_tol": self.feasibility_tol,
            "optimality_tol": self.optimality_tol,
            "max_iterations": self.max_iterations,
        }


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    m: int
    msqe: float
    success: bool
    iterations: int
    converged: bool
    residual_norm: float
    duality_gap_estimate: float
    failure_reason: str | None
    wall_time: float


@dataclass(frozen=True)
class SweepRow:
    m: int
    trials: int
    successes: int
    p_suc: float
    mean_failure_msqe: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    config: ExperimentConfig
    format_version: str = FORMAT_VERSION

    def p_suc(self, m):
        for row in self.rows:
            if row.m == m:
                return row.p_suc
        raise KeyError(f"no sweep row for m={m}")


def msqe(b_sim, b_rec, T):
    """Time-weighted mean squared error (T/n) sum (B_sim - B_rec)^2, (nT)^2 s."""
    b_sim = np.asarray(b_sim, dtype=float)
    b_rec = np.asarray(b_rec, dtype=float)
    if b_sim.shape != b_rec.shape or b_sim.ndim != 1:
        raise ValueError("vectors must be 1-d and of equal length")
    diff = b_sim - b_rec
    return float(T / b_sim.size * np.dot(diff, diff))


def trial_seed(master_seed, scenario, m, index):
    """Stable per-trial seed; independent of execution order and thread count."""
    return np.random.SeedSequence(
        [int(master_seed), zlib.crc32(scenario.encode()), int(m), int(index)]
    )


def _success(error_msqe, cfg):
    # Thresholds are quoted on the time-averaged (nT)^2 scale.
    return bool(error_msqe < cfg.msqe_threshold * cfg.T)


def _record(seed_index, m, cfg, b_true, result, started, failure=None):
    if failure is not None:
        return TrialRecord(seed_index, m, float("inf"), False, 0, False,
                           float("nan"), float("nan"), failure,
                           time.perf_counter() - started)
    err = msqe(b_true, result["b_rec"], cfg.T)
    res = result["solver"]
    success = _success(err, cfg) and res.converged
    return TrialRecord(seed_index, m, err, success, res.iterations, res.converged,
                       res.residual_norm, res.duality_gap_estimate, None,
                       time.perf_counter() - started)


def _decoherence_visibilities(cfg, walsh_indices=None, bit_rows=None):
    """Fringe contrast per measurement; 1.0 without a noise model."""
    if cfg.noise_model is None:
        count = len(walsh_indices) if walsh_indices is not None else bit_rows.shape[0]
        return np.ones(count)
    vs = []
    if walsh_indices is not None:
        for j in walsh_indices:
            seq = sensor_sim.walsh_control_sequence(int(j), cfg.grid_order, cfg.T)
            vs.append(sensor_sim.chi(cfg.noise_model, seq).visibility)
    else:
        for bits in bit_rows:
            seq = sensor_sim.ControlSequence(bits, cfg.T)
            vs.append(sensor_sim.chi(cfg.noise_model, seq).visibility)
    return np.asarray(vs)


def _shot_noise_readout(rng, z_ideal, visibilities, cfg):
    """Run each ideal phase rate through the Ramsey readout with shot noise.

    Returns the estimated rates and the predicted noise norm on the
    rate vector.  Raises PhaseRangeError if an estimate leaves the
    fringe.
    """
    outcomes = []
    z_hat = np.empty_like(z_ideal)
    for i, (z, v) in enumerate(zip(z_ideal, visibilities)):
        p0 = sensor_sim.outcome_probability(z * cfg.T, v)
        p0_hat = sensor_sim.simulate_measurements(rng, p0, cfg.n_reps)
        z_est = sensor_sim.invert_phase(p0_hat, v, cfg.T)
        outcomes.append(sensor_sim.MeasurementOutcome(p0, p0_hat, cfg.n_reps, v, z_est))
        z_hat[i] = z_est
    return z_hat, sensor_sim.measurement_noise_norm(outcomes, cfg.T)


def run_walsh_spike_trial(seed, m, cfg):
    """One spike-train reconstruction from m random Walsh coefficients."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = cfg.n
    field_model = signal_models.sample_spike_train(
        rng, cfg.T, cfg.n_events, cfg.event_half_width, cfg.amplitude, cfg.grid_order
    )
    b_true = signal_models.discretize(field_model, cfg.grid_order).values
    q = cfg.quadrature_points or n
    averages = walsh.cell_averages(field_model, cfg.T, n, q)
    # sqrt(n) * continuous Walsh coefficients, all orders at once.
    y_full = walsh.fast_walsh_transform(averages)
    chosen = np.sort(rng.choice(n, size=m, replace=False))
    basis_rows = walsh.cached_walsh_matrix(cfg.grid_order).rows
    a = basis_rows[chosen]
    y = y_full[chosen]
    epsilon = 0.0

    try:
        if cfg.n_reps > 0:
            z_ideal = y / (np.sqrt(n) * cfg.T)  # phase rates (1/T) integral kappa b
            visibilities = _decoherence_visibilities(cfg, walsh_indices=chosen)
            z_hat, noise_norm = _shot_noise_readout(rng, z_ideal, visibilities, cfg)
            y = np.sqrt(n) * cfg.T * z_hat
            # the solver sees sqrt(n)-scaled coefficients, so the noise
            # norm on the rates scales the same way
            epsilon += np.sqrt(n) * cfg.T * noise_norm * (1.0 + cfg.noise_margin)
        if cfg.noise_sigma > 0:
            y = y + cfg.noise_sigma * rng.standard_normal(m)
            epsilon += cfg.noise_sigma * np.sqrt(m) * (1.0 + cfg.noise_margin)
        if epsilon > 0:
            res = l1_recovery.bpdn(a, y, epsilon, **cfg.solver_kwargs())
        else:
            res = l1_recovery.basis_pursuit(a, y, **cfg.solver_kwargs())
    except (InfeasibleError, PhaseRangeError) as exc:
        return _record(_seed_index(seed), m, cfg, b_true, None, started,
                       failure=type(exc).__name__)
    return _record(_seed_index(seed), m, cfg, b_true,
                   {"b_rec": res.x, "solver": res}, started)


def _bernoulli_measurement(rng, m, n, averages, b_true):
    """Random pulse sequences -> modulation rows -> scaled measurements.

    Returns the +-1 modulation rows K, the quadrature measurement vector
    y = K @ cell_averages / sqrt(m) and the ideal discrete z = K @ B / sqrt(m).
    """
    bits = rng.integers(0, 2, size=(m, n), dtype=np.uint8)
    rows = sensor_sim.modulation_rows(bits)
    y = rows @ averages / np.sqrt(m)
    z = rows @ b_true / np.sqrt(m)
    return rows, y, z


def run_random_multitone_trial(seed, m, cfg):
    """One multitone reconstruction from m random pulse sequences."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = cfg.n
    field_model = signal_models.sample_multitone(
        rng, cfg.n_tones, n, cfg.T, fractions=cfg.tone_fractions
    )
    b_true = signal_models.discretize(field_model, cfg.grid_order).values
    psi = sensing_matrix.fourier_real_basis(n)
    q = cfg.quadrature_points or n
    averages = walsh.cell_averages(field_model, cfg.T, n, q)
    rows, y, z = _bernoulli_measurement(rng, m, n, averages, b_true)
    quad_gap = float(np.linalg.norm(y - z))
    epsilon = max(quad_gap * (1.0 + 1e-9), cfg.epsilon_floor * np.linalg.norm(y))

    try:
        if cfg.noise_sigma > 0:
            y = y + cfg.noise_sigma * rng.standard_normal(m)
            epsilon += cfg.noise_sigma * np.sqrt(m) * (1.0 + cfg.noise_margin)
        a = rows @ psi.columns / np.sqrt(m)
        res = l1_recovery.bpdn(a, y, epsilon, **cfg.solver_kwargs())
    except InfeasibleError as exc:
        return _record(_seed_index(seed), m, cfg, b_true, None, started,
                       failure=type(exc).__name__)
    b_rec = psi.columns @ res.x
    return _record(_seed_index(seed), m, cfg, b_true,
                   {"b_rec": b_rec, "solver": res}, started)


def run_random_spike_trial(seed, m, cfg):
    """One spike-train reconstruction from m random pulse sequences."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = cfg.n
    field_model = signal_models.sample_spike_train(
        rng, cfg.T, cfg.n_events, cfg.event_half_width, cfg.amplitude, cfg.grid_order
    )
    b_true = signal_models.discretize(field_model, cfg.grid_order).values
    q = cfg.quadrature_points or n
    averages = walsh.cell_averages(field_model, cfg.T, n, q)
    rows, y, z = _bernoulli_measurement(rng, m, n, averages, b_true)
    quad_gap = float(np.linalg.norm(y - z))
    epsilon = quad_gap * (1.0 + 1e-9) if quad_gap > 0 else 0.0

    try:
        if cfg.noise_sigma > 0:
            y = y + cfg.noise_sigma * rng.standard_normal(m)
            epsilon += cfg.noise_sigma * np.sqrt(m) * (1.0 + cfg.noise_margin)
        a = rows / np.sqrt(m)
        if epsilon > 0:
            res = l1_recovery.bpdn(a, y, epsilon, **cfg.solver_kwargs())
        else:
            res = l1_recovery.basis_pursuit(a, y, **cfg.solver_kwargs())
    except InfeasibleError as exc:
        return _record(_seed_index(seed), m, cfg, b_true, None, started,
                       failure=type(exc).__name__)
    return _record(_seed_index(seed), m, cfg, b_true,
                   {"b_rec": res.x, "solver": res}, started)


_TRIAL_RUNNERS = {
    "walsh_spike": run_walsh_spike_trial,
    "random_multitone": run_random_multitone_trial,
    "random_spike": run_random_spike_trial,
}


def _seed_index(seed):
    """Reproducible integer label for a trial seed (trial index for sweeps)."""
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        if isinstance(entropy, (list, tuple)):
            return int(entropy[-1])
        return int(entropy)
    return int(seed)


def run_trial(seed, m, cfg):
    return _TRIAL_RUNNERS[cfg.scenario](seed, m, cfg)


def _run_indexed_trial(args):
    scenario, master_seed, m, index, cfg = args
    seed = trial_seed(master_seed, scenario, m, index)
    return m, _TRIAL_RUNNERS[scenario](seed, m, cfg)


def run_sweep(cfg, keep_records=False):
    """Success probability over the m grid; deterministic for a fixed
    master seed regardless of parallelism.

    Individual trial failures (non-convergence, infeasibility, off-fringe
    shot noise) count as unsuccessful trials and never abort the sweep.
    """
    tasks = [
        (cfg.scenario, cfg.master_seed, m, i, cfg)
        for m in cfg.m_values
        for i in range(cfg.trials)
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_run_indexed_trial, tasks, chunksize=8))
    else:
        outcomes = [_run_indexed_trial(t) for t in tasks]

    per_m = {m: [] for m in cfg.m_values}
    for m, record in outcomes:
        per_m[m].append(record)

    rows = []
    for m in cfg.m_values:
        records = per_m[m]
        successes = sum(r.success for r in records)
        failures = [r.msqe for r in records if not r.success and np.isfinite(r.msqe)]
        rows.append(SweepRow(
            m, len(records), successes, successes / len(records),
            float(np.mean(failures)) if failures else float("nan"),
        ))
    result = SweepResult(tuple(rows), cfg)
    if keep_records:
        return result, {m: tuple(recs) for m, recs in per_m.items()}
    return result


def noisy_run(cfg):
    """Sweep with additive Gaussian measurement noise (cfg.noise_sigma)."""
    if cfg.noise_sigma < 0:
        raise ConfigurationError("noise_sigma must be >= 0")
    return run_sweep(cfg)


@dataclass(frozen=True)
class QuadratureGapReport:
    kind: str
    n: int
    m: int
    empirical_gap: float
    gap_bound: float
    per_entry_gap: float
    per_entry_bound: float
    ok: bool
    worst_sequence: int


def quadrature_gap_check(field_model, kind="random", grid_order=10, m=250,
                         rng_seed=0, quadrature_points=None, indices=None):
    """Compare continuous-quadrature measurements against discrete inner
    products and check both against the analytic midpoint-rule bounds.

    `kind` selects the pipeline scaling: Walsh coefficients are compared
    on the sqrt(n)-scaled axis, random-sequence measurements on the
    n/(T sqrt(m)) axis.  Requires a smooth (multitone) field.
    """
    n = 1 << grid_order
    T = field_model.T
    q = quadrature_points or (n * 16)
    curvature = signal_models.second_derivative_bound(field_model)
    b_true = signal_models.discretize(field_model, grid_order).values
    averages = walsh.cell_averages(field_model, T, n, q)
    rng = np.random.default_rng(rng_seed)

    if kind == "walsh":
        if indices is None:
            indices = np.sort(rng.choice(n, size=m, replace=False))
        indices = np.asarray(indices)
        m = indices.size
        y = walsh.fast_walsh_transform(averages)[indices]
        z = walsh.fast_walsh_transform(b_true)[indices]
        per_entry_bound = T ** 2 / (24.0 * n ** 1.5) * curvature
        gap_bound = np.sqrt(m) * per_entry_bound
        labels = indices
    elif kind == "random":
        bits = rng.integers(0, 2, size=(m, n), dtype=np.uint8)
        rows = sensor_sim.modulation_rows(bits)
        y = rows @ averages / np.sqrt(m)
        z = rows @ b_true / np.sqrt(m)
        per_entry_bound = T ** 2 / (24.0 * n * np.sqrt(m)) * curvature
        gap_bound = np.sqrt(m) * T ** 2 / (24.0 * n) * curvature
        labels = np.arange(m)
    else:
        raise ValueError("kind must be 'walsh' or 'random'")

    entry_gaps = np.abs(y - z)
    worst = int(labels[np.argmax(entry_gaps)])
    empirical = float(np.linalg.norm(y - z))
    per_entry = float(entry_gaps.max())
    ok = empirical <= gap_bound and per_entry <= per_entry_bound
    return QuadratureGapReport(kind, n, m, empirical, float(gap_bound),
                               per_entry, float(per_entry_bound), bool(ok), worst)


def _config_dict(cfg):
    data = asdict(cfg)
    data.pop("noise_model", None)
    return data


def sweep_to_csv(result, stream):
    stream.write(f"# {result.format_version}\n")
    stream.write("m,trials,successes,p_suc\n")
    for row in result.rows:
        stream.write(f"{row.m},{row.trials},{row.successes},{row.p_suc:.6f}\n")


def sweep_to_json(result, stream, records=None):
    payload = {
        "format_version": result.format_version,
        "config": _config_dict(result.config),
        "rows": [asdict(row) for row in result.rows],
    }
    if records is not None:
        payload["records"] = {
            str(m): [asdict(r) for r in recs] for m, recs in records.items()
        }
    json.dump(payload, stream, indent=1)
    stream.write("\n")


def write_reconstruction(stream, midpoints, b_rec):
    stream.write(f"# {RECON_FORMAT}\n")
    for t, v in zip(midpoints, b_rec):
        stream.write(f"{t!r} {v!r}\n")
