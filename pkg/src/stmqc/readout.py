"""Phenomenological STM readout: a tunnelling-current trace modulated at the
electron Larmor frequency, heterodyned against a local oscillator, and a
periodogram estimator that decides the nuclear state from the beat frequency.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import ChainState
from .spin_model import ChainConfig, build_frequency_table, coupling_matrix

GROUND = "nuclear-ground"
EXCITED = "nuclear-excited"
INDETERMINATE = "indeterminate"


class ReadoutConfigError(ValueError):
    pass


class MeasurementFailure(RuntimeError):
    def __init__(self, site: int, detection: "DetectionResult"):
        super().__init__(f"indeterminate readout at site {site} (peak_snr={detection.peak_snr:.3g})")
        self.site = site
        self.detection = detection


@dataclass(frozen=True, eq=False)
class ReadoutTrace:
    samples: np.ndarray
    sample_rate: float
    mixdown_frequency: float

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class DetectionResult:
    estimated_frequency: float
    decided_state: str
    peak_snr: float

    @property
    def bit(self) -> int | None:
        return {GROUND: 0, EXCITED: 1}.get(self.decided_state)


@dataclass(frozen=True)
class ReadoutSettings:
    """Trace parameters for one nuclear measurement.

    ``duration=None`` picks ``resolution_factor`` / (A/h), i.e. a Fourier
    resolution that many times finer than the hyperfine splitting.
    ``sample_rate=None`` picks ``n_samples`` / duration.
    """

    modulation_depth: float = 0.1
    noise_sigma: float = 1.0
    resolution_factor: float = 10.0
    n_samples: int = 16384
    duration: float | None = None
    sample_rate: float | None = None
    snr_threshold: float = 5.0

    def resolve(self, splitting: float) -> tuple[float, float]:
        duration = self.duration if self.duration is not None else self.resolution_factor / splitting
        rate = self.sample_rate if self.sample_rate is not None else self.n_samples / duration
        return duration, rate


def minimum_sample_rate(true_frequency: float, mixdown_frequency: float) -> float:
    return 2.0 * abs(true_frequency - mixdown_frequency)


def synthesize_trace(
    true_frequency: float,
    modulation_depth: float,
    noise_sigma: float,
    duration: float,
    sample_rate: float,
    mixdown_frequency: float,
    seed: int,
) -> ReadoutTrace:
    n = int(round(duration * sample_rate))
    if n < 2:
        raise ReadoutConfigError(f"trace needs at least 2 samples (duration*sample_rate = {duration * sample_rate:g})")
    min_rate = minimum_sample_rate(true_frequency, mixdown_frequency)
    if not sample_rate > min_rate:
        raise ReadoutConfigError(
            f"sample rate {sample_rate:.6g} Hz violates Nyquist for beat "
            f"{abs(true_frequency - mixdown_frequency):.6g} Hz; minimum valid sample rate is {min_rate:.6g} Hz"
        )
    rng = np.random.default_rng(seed)
    phi0 = rng.uniform(0.0, 2 * np.pi)
    t = np.arange(n) / sample_rate
    beat = true_frequency - mixdown_frequency
    samples = 1.0 + modulation_depth * np.cos(2 * np.pi * np.mod(beat * t, 1.0) + phi0)
    if noise_sigma > 0:
        samples = samples + rng.normal(0.0, noise_sigma, n)
    return ReadoutTrace(samples, float(sample_rate), float(mixdown_frequency))


def _interpolate_peak(power: np.ndarray, i: int) -> float:
    """Bin offset of the parabola through log-power at i-1, i, i+1."""
    if i <= 0 or i >= power.size - 1:
        return 0.0
    a, b, c = np.log(power[i - 1 : i + 2] + 1e-300)
    denom = a - 2 * b + c
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def detect_larmor(trace: ReadoutTrace, candidates: dict, snr_threshold: float = 5.0) -> DetectionResult:
    """Estimate the modulation frequency and classify it against
    ``candidates = {"f_e0": ..., "f_e1": ...}``.

    The beat is taken as non-negative (real trace), so the local oscillator
    must sit below both candidates.
    """
    f0, f1 = float(candidates["f_e0"]), float(candidates["f_e1"])
    if f0 == f1:
        raise ValueError("candidate frequencies must be distinct")
    x = trace.samples - trace.samples.mean()
    n = x.size
    power = np.abs(np.fft.rfft(x)) ** 2
    power[0] = 0.0
    if not np.any(power > 0):
        return DetectionResult(trace.mixdown_frequency, INDETERMINATE, 0.0)
    i = int(np.argmax(power))
    peak = power[i]
    mask = np.ones(power.size, dtype=bool)
    mask[0] = False
    mask[max(i - 2, 0) : i + 3] = False
    floor = power[mask].mean() if mask.any() else 0.0
    snr = float(peak / floor) if floor > 0 else float("inf")
    beat = (i + _interpolate_peak(power, i)) * trace.sample_rate / n
    estimate = trace.mixdown_frequency + beat

    half_sep = abs(f0 - f1) / 2
    d0, d1 = abs(estimate - f0), abs(estimate - f1)
    state = INDETERMINATE
    if snr >= snr_threshold:
        if d0 <= d1 and d0 < half_sep:
            state = GROUND
        elif d1 < d0 and d1 < half_sep:
            state = EXCITED
    # Fourier limit: bins wider than the splitting cannot tell the lines apart
    if 1.0 / trace.duration >= abs(f0 - f1):
        state = INDETERMINATE
    return DetectionResult(float(estimate), state, snr)


def site_candidates(config: ChainConfig, k: int, state: ChainState | None = None) -> dict:
    """f_e0 / f_e1 of site k including the static dipole field of the
    neighbouring nuclei (their mean projection in ``state``)."""
    table = build_frequency_table(config)
    shift = 0.0
    if state is not None:
        _, nuc = state.excited_populations()
        shift = float(coupling_matrix(config)[k, :] @ (nuc - 0.5))
    return {"f_e0": float(table.f_e0[k] + shift), "f_e1": float(table.f_e1[k] + shift)}


def mixdown_for_site(candidates: dict) -> float:
    """Local oscillator half a splitting below the lower line, so both beats
    are positive and distinct."""
    lo, hi = sorted((candidates["f_e0"], candidates["f_e1"]))
    return lo - (hi - lo) / 2


class Measurement(NamedTuple):
    bit: int
    state: ChainState
    detection: DetectionResult


def measure_nuclear(
    state: ChainState,
    site: int,
    config: ChainConfig,
    settings: ReadoutSettings = ReadoutSettings(),
    seed: int = 0,
) -> Measurement:
    """Projective nuclear measurement through the simulated STM readout.

    Returns the detector's bit, the post-measurement state (nuclear site
    projected on the drawn outcome, monitored electron collapsed to ground)
    and the detection record. Raises MeasurementFailure on an indeterminate
    trace, leaving the state untouched.
    """
    if not 0 <= site < config.n_ions:
        raise IndexError(f"site {site} outside chain of {config.n_ions} ions")
    rng = np.random.default_rng(seed)
    idx = np.arange(state.amplitudes.size)
    nuc_bit = (idx >> (2 * site + 1)) & 1
    probs = state.probabilities()
    p1 = float(np.clip(probs[nuc_bit == 1].sum(), 0.0, 1.0))
    outcome = int(rng.random() < p1)

    cand = site_candidates(config, site, state)
    true_freq = cand["f_e1"] if outcome else cand["f_e0"]
    duration, rate = settings.resolve(config.species.hyperfine_A_over_h)
    trace = synthesize_trace(
        true_freq,
        settings.modulation_depth,
        settings.noise_sigma,
        duration,
        rate,
        mixdown_for_site(cand),
        seed=int(rng.integers(2**63)),
    )
    detection = detect_larmor(trace, cand, settings.snr_threshold)
    if detection.decided_state == INDETERMINATE:
        raise MeasurementFailure(site, detection)

    keep = nuc_bit == outcome
    amps = np.where(keep, state.amplitudes, 0.0)
    e_bit = (idx >> (2 * site)) & 1
    if np.sum(np.abs(amps[e_bit == 0]) ** 2) > 0:
        amps = np.where(e_bit == 0, amps, 0.0)
    amps = amps / np.linalg.norm(amps)
    return Measurement(detection.bit, ChainState(amps, state.time), detection)
