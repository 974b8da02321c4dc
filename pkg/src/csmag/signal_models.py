"""Parametric magnetic-field models and their dyadic-grid discretizations.

Two families cover the numerical studies: biphasic rectangular spike
trains (time-sparse, grid-aligned so the discretization is exactly
sparse) and random multitone fields (frequency-compressible).  Field
amplitudes are in nanotesla, times in seconds; the gyromagnetic ratio is
absorbed so 1 nT accumulates 1 rad/s of phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnsupportedModelError

FIELD_FORMAT = "csmag-field/1"

# Rejection-sampling cap when packing disjoint events onto the grid.
_MAX_PLACEMENT_ATTEMPTS = 100_000


def _time_array(t, T):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr >= T):
        raise ValueError(f"time argument must lie in [0, {T})")
    return arr


@dataclass(frozen=True)
class SpikeEvent:
    """One biphasic event: +amplitude on [t_start, t_start+half_width),
    -amplitude on the following half_width."""

    t_start: float
    amplitude: float
    half_width: float

    @property
    def t_end(self):
        return self.t_start + 2.0 * self.half_width


@dataclass(frozen=True)
class SpikeTrainField:
    """A train of pairwise disjoint biphasic rectangular spikes on [0, T)."""

    T: float
    events: tuple

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        for ev in events:
            if ev.half_width <= 0:
                raise ValueError("event half_width must be positive")
            if ev.t_start < 0 or ev.t_end > self.T:
                raise ValueError("event does not fit inside [0, T)")
        spans = sorted((ev.t_start, ev.t_end) for ev in events)
        for (_, prev_end), (start, _) in zip(spans, spans[1:]):
            # tolerance absorbs last-ulp rounding of grid-aligned times
            if start < prev_end - 1e-12 * self.T:
                raise ValueError("events must be pairwise disjoint")

    @property
    def n_events(self):
        return len(self.events)

    def evaluate(self, t):
        arr = _time_array(t, self.T)
        out = np.zeros(arr.shape)
        for ev in self.events:
            mid = ev.t_start + ev.half_width
            out[(arr >= ev.t_start) & (arr < mid)] = ev.amplitude
            out[(arr >= mid) & (arr < ev.t_end)] = -ev.amplitude
        if np.isscalar(t):
            return float(out)
        return out


@dataclass(frozen=True)
class Tone:
    amplitude: float
    frequency: float
    phase: float


@dataclass(frozen=True)
class MultiToneField:
    """b(t) = sum_j A_j cos(2 pi f_j t + phi_j) on [0, T)."""

    T: float
    tones: tuple

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        tones = tuple(self.tones)
        object.__setattr__(self, "tones", tones)
        for tone in tones:
            if tone.amplitude < 0 or not np.isfinite(tone.amplitude):
                raise ValueError("tone amplitude must be finite and >= 0")
            if tone.frequency < 0 or not np.isfinite(tone.frequency):
                raise ValueError("tone frequency must be finite and >= 0")

    def evaluate(self, t):
        arr = _time_array(t, self.T)
        out = np.zeros(arr.shape)
        for tone in self.tones:
            out += tone.amplitude * np.cos(2.0 * np.pi * tone.frequency * arr + tone.phase)
        if np.isscalar(t):
            return float(out)
        return out


@dataclass(frozen=True)
class DiscretizedField:
    """Midpoint samples B_j = b(s_j), s_j = (2j+1)T/(2n), n = 2^order."""

    order: int
    T: float
    values: np.ndarray
    midpoints: np.ndarray

    def __post_init__(self):
        if len(self.values) != len(self.midpoints):
            raise ValueError("values and midpoints must have equal length")
        if len(self.values) != 1 << self.order:
            raise ValueError("length must equal 2^order")
        self.values.setflags(write=False)
        self.midpoints.setflags(write=False)

    @property
    def n(self):
        return len(self.values)


def discretize(field, order):
    """Sample a field at the 2^order interval midpoints of [0, T)."""
    if order < 0:
        raise ValueError("order must be >= 0")
    n = 1 << order
    s = (2.0 * np.arange(n) + 1.0) * (field.T / (2.0 * n))
    values = np.asarray(field.evaluate(s), dtype=float)
    return DiscretizedField(order, field.T, values, s)


def sample_spike_train(rng_seed, T=1e-3, n_events=5, half_width=5e-6,
                       amplitude=1.0, grid_order=10):
    """Draw a spike train with uniformly placed, disjoint, grid-aligned events.

    Event starts are snapped to the 2^grid_order grid and each spike
    phase spans round(half_width * n / T) cells, so the discretization at
    grid_order is exactly (n_events * 2 * cells)-sparse with equally many
    positive and negative samples.
    """
    if n_events < 0:
        raise ConfigurationError("n_events must be >= 0")
    n = 1 << grid_order
    dt = T / n
    if n_events:
        if not dt < half_width:
            raise ConfigurationError(
                f"grid cell {dt:g}s does not resolve half_width {half_width:g}s"
            )
        if n_events * 2.0 * half_width >= T:
            raise ConfigurationError("events cannot be packed disjointly into [0, T)")
    cells = max(1, round(half_width / dt))
    event_cells = 2 * cells
    rng = np.random.default_rng(rng_seed)
    starts = []
    for _ in range(n_events):
        for _ in range(_MAX_PLACEMENT_ATTEMPTS):
            c = int(rng.integers(0, n - event_cells + 1))
            if all(c + event_cells <= s or c >= s + event_cells for s in starts):
                starts.append(c)
                break
        else:
            raise ConfigurationError("could not place events disjointly")
    events = tuple(
        SpikeEvent(c * dt, amplitude, cells * dt) for c in sorted(starts)
    )
    return SpikeTrainField(T, events)


def sample_multitone(rng_seed, n_tones=8, n=1024, T=1e-3, fractions=None):
    """Draw a multitone field with frequencies f_j = (n/T) x_j.

    The fractions x_j are drawn uniformly from {1/k : k = 1..n} unless
    given explicitly, so every frequency is at most the cutoff n/T.
    Phases are uniform on [0, 2 pi), amplitudes uniform on [0, 1].
    """
    if n_tones < 1 and fractions is None:
        raise ConfigurationError("n_tones must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if fractions is None:
        ks = rng.integers(1, n + 1, size=n_tones)
        fractions = 1.0 / ks
    else:
        fractions = np.asarray(fractions, dtype=float)
        n_tones = fractions.size
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_tones)
    amplitudes = rng.uniform(0.0, 1.0, size=n_tones)
    cutoff = n / T
    tones = tuple(
        Tone(float(a), float(cutoff * x), float(p))
        for a, x, p in zip(amplitudes, fractions, phases)
    )
    return MultiToneField(T, tones)


def second_derivative_bound(field):
    """Upper bound on max |b''(t)|, in nT/s^2, for smooth fields.

    For a multitone field this is sum_j A_j (2 pi f_j)^2.  Rectangular
    spike trains have no bounded second derivative, so they are rejected.
    """
    if isinstance(field, MultiToneField):
        return float(sum(t.amplitude * (2.0 * np.pi * t.frequency) ** 2 for t in field.tones))
    raise UnsupportedModelError(
        f"second_derivative_bound is only defined for smooth multitone fields, "
        f"not {type(field).__name__}"
    )


def field_to_dict(field):
    if isinstance(field, SpikeTrainField):
        return {
            "format": FIELD_FORMAT,
            "kind": "spike_train",
            "T": field.T,
            "events": [
                {"t_start": ev.t_start, "amplitude": ev.amplitude,
                 "half_width": ev.half_width}
                for ev in field.events
            ],
        }
    if isinstance(field, MultiToneField):
        return {
            "format": FIELD_FORMAT,
            "kind": "multitone",
            "T": field.T,
            "tones": [
                {"amplitude": t.amplitude, "frequency": t.frequency, "phase": t.phase}
                for t in field.tones
            ],
        }
    raise UnsupportedModelError(f"cannot serialize {type(field).__name__}")


def field_from_dict(data):
    if data.get("format") != FIELD_FORMAT:
        raise ValueError(f"not a {FIELD_FORMAT} document")
    kind = data["kind"]
    if kind == "spike_train":
        events = tuple(
            SpikeEvent(e["t_start"], e["amplitude"], e["half_width"])
            for e in data["events"]
        )
        return SpikeTrainField(data["T"], events)
    if kind == "multitone":
        tones = tuple(
            Tone(t["amplitude"], t["frequency"], t["phase"]) for t in data["tones"]
        )
        return MultiToneField(data["T"], tones)
    raise ValueError(f"unknown field kind {kind!r}")


def save_field(field, path):
    """Write a field to a JSON file; floats round-trip exactly."""
    with open(path, "w") as fh:
        json.dump(field_to_dict(field), fh, indent=1)
        fh.write("\n")


def load_field(path):
    with open(path) as fh:
        return field_from_dict(json.load(fh))
