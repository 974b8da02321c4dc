"""Pulsed-qubit sensor simulation.

A control sequence is a length-n bit string; bit j = 1 applies an ideal
instantaneous pi-pulse at t_j = jT/n.  The pulses build a +-1 modulation
function, the field accumulates phase against it, and a Ramsey readout
turns the phase into an outcome probability p0 = (1 + v sin(phi)) / 2
with fringe contrast v = exp(-chi) set by dephasing noise filtered
through the sequence's filter function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import walsh
from .errors import PhaseRangeError


@dataclass(frozen=True)
class ControlSequence:
    """Pulse pattern over [0, T): bits[j] == 1 means a pi-pulse at jT/n."""

    bits: np.ndarray
    T: float

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size < 1:
            raise ValueError("bits must be a non-empty 1-d array")
        if np.any(bits > 1):
            raise ValueError("bits must be 0 or 1")
        if self.T <= 0:
            raise ValueError("T must be positive")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self):
        return self.bits.size

    @property
    def pulse_times(self):
        return np.arange(self.n) * (self.T / self.n)


def modulation_from_bits(seq):
    """The +-1 modulation vector: sign flips at t_j exactly when bits[j] == 1.

    Entry j is (-1)^{parity(bits[0] + ... + bits[j])}; the modulation is
    +1 before the first pulse.
    """
    parity = np.cumsum(seq.bits.astype(np.int64)) & 1
    return (1 - 2 * parity).astype(np.int64)


def modulation_rows(bit_rows):
    """Row-wise modulation vectors for a 2-d array of bit strings."""
    parity = np.cumsum(bit_rows.astype(np.int64), axis=1) & 1
    return (1 - 2 * parity).astype(np.float64)


def walsh_control_sequence(j, order, T, ordering="sequency"):
    """Pulse pattern whose modulation reproduces Walsh function j.

    A pulse sits at every interior grid time where w_j switches sign;
    bit 0 makes the modulation start on w_j's initial sign.
    """
    signs = walsh.sign_table(j, order, ordering)
    bits = np.empty(signs.size, dtype=np.uint8)
    bits[0] = 1 if signs[0] < 0 else 0
    bits[1:] = signs[1:] != signs[:-1]
    return ControlSequence(bits, T)


def random_control_sequence(rng_seed, n, T):
    """Each bit an independent fair coin: pi-pulse at t_j with probability 1/2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    bits = rng.integers(0, 2, size=n, dtype=np.uint8)
    return ControlSequence(bits, T)


def accumulated_phase(field, seq, quadrature_points=None):
    """Phase integral of the modulated field over [0, T], in radians.

    Midpoint quadrature with a power-of-two multiple of n points, so the
    piecewise constant modulation is integrated exactly per cell.
    """
    n = seq.n
    q = n if quadrature_points is None else int(quadrature_points)
    if q % n:
        raise ValueError("quadrature_points must be a multiple of the sequence length")
    ratio = q // n
    if ratio & (ratio - 1):
        raise ValueError("quadrature_points must be n times a power of two")
    T = seq.T
    kappa = modulation_from_bits(seq)
    s = (np.arange(q) + 0.5) * (T / q)
    vals = np.asarray(field.evaluate(s), dtype=float)
    return float((T / q) * np.dot(np.repeat(kappa, ratio), vals))


def outcome_probability(phi, visibility=1.0):
    """Ramsey outcome probability p0 = (1 + v sin(phi)) / 2."""
    if not 0.0 < visibility <= 1.0:
        raise ValueError("visibility must lie in (0, 1]")
    return 0.5 * (1.0 + visibility * np.sin(phi))


def simulate_measurements(rng_seed, p0, n_reps):
    """Estimate p0 from n_reps binomial shots."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if not 0.0 <= p0 <= 1.0:
        raise ValueError("p0 must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    return rng.binomial(n_reps, p0) / n_reps


def invert_phase(p0_hat, visibility, T):
    """Recover the phase rate z = phi/T from an estimated probability.

    Raises PhaseRangeError when |2 p0_hat - 1| > visibility: shot noise
    pushed the estimate off the fringe, and clamping silently would bias
    downstream reconstructions.  The inversion is ambiguous for |zT|
    near pi/2.
    """
    if not 0.0 < visibility <= 1.0:
        raise ValueError("visibility must lie in (0, 1]")
    s = (2.0 * p0_hat - 1.0) / visibility
    if abs(s) > 1.0:
        raise PhaseRangeError(
            f"|2 p0_hat - 1| = {abs(2 * p0_hat - 1):.6g} exceeds visibility {visibility:.6g}"
        )
    return float(np.arcsin(s) / T)


def _segments(seq):
    """Switch-compressed view: segment edge times and the sign on each segment."""
    kappa = modulation_from_bits(seq)
    n, T = seq.n, seq.T
    changes = np.flatnonzero(np.diff(kappa)) + 1
    edges = np.concatenate(([0.0], changes * (T / n), [T]))
    signs = kappa[np.concatenate(([0], changes))].astype(float)
    return edges, signs


def filter_function(seq, omega):
    """Dephasing filter function F(omega T) of a pulse sequence.

    F = (omega^2 / 2) |integral of kappa(t) e^{i omega t} dt|^2, evaluated
    in closed form from the switch times; free evolution gives the
    familiar 2 sin^2(omega T / 2).  Other conventions differing by
    constant factors can be swapped by replacing this one function.
    """
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr < 0):
        raise ValueError("omega must be >= 0")
    edges, signs = _segments(seq)
    # (omega^2/2)|sum_s sign_s (e^{i w e_{s+1}} - e^{i w e_s}) / (i w)|^2:
    # the omega^2 cancels, leaving boundary-jump weights on e^{i w edge}.
    weights = np.zeros(edges.size)
    weights[0] = -signs[0]
    weights[-1] = signs[-1]
    if signs.size > 1:
        weights[1:-1] = signs[:-1] - signs[1:]
    phases = np.exp(1j * np.outer(omega_arr, edges))
    amplitude = phases @ weights
    out = 0.5 * np.abs(amplitude) ** 2
    if np.isscalar(omega):
        return float(out)
    return out


def default_omega_grid(omega_min=1e2, omega_max=1e9, points=2048):
    """Log-spaced angular-frequency cell edges for spectral integrals."""
    return np.geomspace(omega_min, omega_max, points + 1)


@dataclass(frozen=True)
class NoiseModel:
    """Dephasing noise spectrum S(omega) >= 0 with its integration grid.

    `psd` maps angular frequency (rad/s) to spectral density in
    (nT)^2 s; `omega_grid` holds the strictly increasing cell edges used
    by the decoherence integral.
    """

    kind: str
    psd: Callable
    omega_grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.omega_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("omega_grid must be strictly increasing with >= 2 points")
        if grid[0] <= 0:
            raise ValueError("omega_grid must be positive")
        grid.setflags(write=False)
        object.__setattr__(self, "omega_grid", grid)

    @staticmethod
    def zero(**grid_kwargs):
        return NoiseModel("none", _zero_psd, default_omega_grid(**grid_kwargs))

    @staticmethod
    def white(level, **grid_kwargs):
        if level < 0:
            raise ValueError("level must be >= 0")
        return NoiseModel("white", _WhitePsd(level), default_omega_grid(**grid_kwargs))

    @staticmethod
    def one_over_f(amplitude, exponent=1.0, **grid_kwargs):
        if amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        return NoiseModel(
            "one_over_f", _PowerLawPsd(amplitude, exponent), default_omega_grid(**grid_kwargs)
        )

    @staticmethod
    def from_table(omegas, values, **grid_kwargs):
        omegas = np.asarray(omegas, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(values < 0):
            raise ValueError("tabulated spectrum must be >= 0")
        return NoiseModel("custom", _TablePsd(omegas, values), default_omega_grid(**grid_kwargs))


def _zero_psd(omega):
    return np.zeros_like(np.asarray(omega, dtype=float))


class _WhitePsd:
    def __init__(self, level):
        self.level = level

    def __call__(self, omega):
        return np.full_like(np.asarray(omega, dtype=float), self.level)


class _PowerLawPsd:
    def __init__(self, amplitude, exponent):
        self.amplitude = amplitude
        self.exponent = exponent

    def __call__(self, omega):
        return self.amplitude / np.asarray(omega, dtype=float) ** self.exponent


class _TablePsd:
    def __init__(self, omegas, values):
        self.omegas = omegas
        self.values = values

    def __call__(self, omega):
        return np.interp(np.asarray(omega, dtype=float), self.omegas, self.values,
                         left=0.0, right=0.0)


class DecoherenceResult(NamedTuple):
    chi: float
    visibility: float


def chi(noise, seq):
    """Dephasing exponent chi = integral of S(omega)/omega^2 * F(omega T).

    Composite midpoint rule on the noise model's log-spaced grid
    (geometric midpoints, edge differences as weights).  Returns chi and
    the fringe contrast v = exp(-chi).
    """
    edges = noise.omega_grid
    mids = np.sqrt(edges[:-1] * edges[1:])
    widths = np.diff(edges)
    spectrum = np.asarray(noise.psd(mids), dtype=float)
    if np.any(spectrum < 0):
        raise ValueError("noise spectrum must be >= 0")
    integrand = spectrum / mids ** 2 * filter_function(seq, mids)
    if not np.all(np.isfinite(integrand)):
        raise ValueError("non-finite decoherence integrand")
    value = float(np.dot(integrand, widths))
    return DecoherenceResult(value, float(np.exp(-value)))


def sensitivity(n_reps, T, visibility):
    """Shot-noise uncertainty of one phase-rate estimate: 1/(sqrt(N) T v)."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if not 0.0 < visibility <= 1.0:
        raise ValueError("visibility must lie in (0, 1]")
    return 1.0 / (np.sqrt(n_reps) * T * visibility)


@dataclass(frozen=True)
class MeasurementOutcome:
    """One measured coefficient: true and estimated probability, shot count,
    fringe contrast and the inverted phase rate."""

    p0_true: float
    p0_hat: float
    n_reps: int
    visibility: float
    z_hat: float

    def __post_init__(self):
        lo = 0.5 * (1.0 - self.visibility)
        hi = 0.5 * (1.0 + self.visibility)
        if not lo - 1e-12 <= self.p0_true <= hi + 1e-12:
            raise ValueError("p0_true outside the fringe set by the visibility")
        if not 0.0 <= self.p0_hat <= 1.0:
            raise ValueError("p0_hat must lie in [0, 1]")


def measurement_noise_norm(outcomes, T):
    """2-norm scale of measurement noise: sqrt(sum 1/(N_j T^2 v_j^2)).

    This is the epsilon handed to the denoising reconstruction for
    shot-noise-limited coefficient estimates.
    """
    if not outcomes:
        raise ValueError("outcomes must be non-empty")
    total = sum(1.0 / (o.n_reps * T ** 2 * o.visibility ** 2) for o in outcomes)
    return float(np.sqrt(total))
