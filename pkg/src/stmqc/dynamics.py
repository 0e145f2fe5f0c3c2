"""Rectangular rotating-field pulses and unitary evolution of the chain.

The state is stored in the lab frame together with the absolute time. A pulse
with carrier f_c and phase phi drives every transition of its channel with the
rotating field f_R [cos(2 pi f_c t + phi) S_x + sin(2 pi f_c t + phi) S_y]
(rotating-wave approximation, counter-rotating terms dropped). In the frame
rotating at f_c the generator is time independent,

    G = H0 - f_c * n_exc + f_R (cos phi S_x + sin phi S_y),

where n_exc counts excited spins of the driven channel. G only connects states
that differ in driven-channel bits, so it is block diagonal with one block per
configuration of the other channel; each block is diagonalized densely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Union

import numpy as np

from .spin_model import (
    CONSTANTS,
    ChainConfig,
    IonSpecies,
    secular_energies,
)

CHANNELS = ("electron", "nuclear")
_CHANNEL_OFFSET = {"electron": 0, "nuclear": 1}

NORM_TOL = 1e-10


def _cycles(f: np.ndarray | float, t: float) -> np.ndarray:
    """Fractional part of f*t; keeps phase arguments small."""
    return np.mod(np.asarray(f, dtype=float) * t, 1.0)


@dataclass(frozen=True, eq=False)
class ChainState:
    """Normalized amplitudes over the 4**N basis (see spin_model for the bit
    layout) at absolute time ``time`` in seconds, lab frame."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        n = amps.size
        n_ions = round(math.log(n, 4)) if n > 0 else 0
        if amps.ndim != 1 or n_ions < 1 or 4**n_ions != n:
            raise ValueError(f"amplitude vector length {n} is not a power of 4")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_ions(self) -> int:
        return round(math.log(self.amplitudes.size, 4))

    @classmethod
    def from_bits(cls, electron_bits, nuclear_bits, time: float = 0.0) -> "ChainState":
        e = [int(b) for b in electron_bits]
        n = [int(b) for b in nuclear_bits]
        if len(e) != len(n):
            raise ValueError("electron and nuclear bit lists differ in length")
        index = basis_index(e, n)
        amps = np.zeros(4 ** len(e), dtype=complex)
        amps[index] = 1.0
        return cls(amps, time)

    @classmethod
    def ground(cls, n_ions: int) -> "ChainState":
        return cls.from_bits([0] * n_ions, [0] * n_ions)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def excited_populations(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-site excited-state populations (electron, nuclear)."""
        p = self.probabilities()
        n = self.n_ions
        bits = (np.arange(p.size)[:, None] >> np.arange(2 * n)[None, :]) & 1
        pops = p @ bits
        return pops[0::2], pops[1::2]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def rotating_frame(self, config: ChainConfig) -> np.ndarray:
        """Amplitudes in the interaction picture of the secular chain Hamiltonian."""
        _check_dims(self, config)
        e = _relative_energies(config)
        return self.amplitudes * np.exp(2j * np.pi * _cycles(e, self.time))

    @classmethod
    def from_rotating_frame(cls, amplitudes, config: ChainConfig, time: float) -> "ChainState":
        e = _relative_energies(config)
        amps = np.asarray(amplitudes, dtype=complex) * np.exp(-2j * np.pi * _cycles(e, time))
        return cls(amps, time)


def basis_index(electron_bits, nuclear_bits) -> int:
    index = 0
    for k, (e, n) in enumerate(zip(electron_bits, nuclear_bits)):
        index |= (int(e) & 1) << (2 * k)
        index |= (int(n) & 1) << (2 * k + 1)
    return index


def basis_bits(index: int, n_ions: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    e = tuple((index >> (2 * k)) & 1 for k in range(n_ions))
    n = tuple((index >> (2 * k + 1)) & 1 for k in range(n_ions))
    return e, n


@dataclass(frozen=True)
class PulseSpec:
    channel: str
    carrier_frequency: float
    rabi_frequency: float
    duration: float
    phase: float = 0.0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if not self.rabi_frequency > 0:
            raise ValueError("rabi_frequency must be positive")
        if not self.duration >= 0:
            raise ValueError("duration must be non-negative")

    @classmethod
    def pi(cls, channel: str, carrier: float, rabi: float, phase: float = 0.0) -> "PulseSpec":
        return cls(channel, carrier, rabi, pi_pulse_duration(rabi), phase)

    @classmethod
    def rotation(cls, channel: str, carrier: float, rabi: float, angle: float, phase: float = 0.0) -> "PulseSpec":
        return cls(channel, carrier, rabi, angle / (2 * math.pi * rabi), phase)


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("delay duration must be non-negative")


SequenceItem = Union[PulseSpec, Delay]


@dataclass
class PulseSequence:
    items: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def append(self, item: SequenceItem) -> None:
        self.items.append(item)

    @property
    def duration(self) -> float:
        return float(sum(item.duration for item in self.items))

    def to_text(self) -> str:
        lines = ["# channel carrier_hz rabi_hz phase_rad duration_s | delay duration_s"]
        for item in self.items:
            if isinstance(item, Delay):
                lines.append(f"delay {item.duration:.17g}")
            else:
                lines.append(
                    f"{item.channel} {item.carrier_frequency:.17g} {item.rabi_frequency:.17g} "
                    f"{item.phase:.17g} {item.duration:.17g}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<sequence>") -> "PulseSequence":
        seq = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "delay":
                    if len(parts) != 2:
                        raise ValueError("expected 'delay <duration_s>'")
                    seq.append(Delay(float(parts[1])))
                else:
                    if len(parts) != 5:
                        raise ValueError("expected '<channel> <carrier> <rabi> <phase> <duration>'")
                    channel, carrier, rabi, phase, duration = parts
                    seq.append(PulseSpec(channel, float(carrier), float(rabi), float(duration), float(phase)))
            except ValueError as exc:
                raise ValueError(f"{source}:{lineno}: {exc}") from None
        return seq


def rabi_from_field(species: IonSpecies, channel: str, b_perp: float) -> float:
    if not b_perp > 0:
        raise ValueError("b_perp must be positive")
    if channel == "nuclear":
        return species.nuclear_hz_per_tesla * b_perp
    if channel == "electron":
        return species.g_e * CONSTANTS.bohr_magneton * b_perp / CONSTANTS.planck_h
    raise ValueError(f"unknown channel {channel!r}")


def pi_pulse_duration(f_r: float) -> float:
    if not f_r > 0:
        raise ValueError("Rabi frequency must be positive")
    return 1.0 / (2.0 * f_r)


# --- propagators ------------------------------------------------------------


@lru_cache(maxsize=32)
def _relative_energies(config: ChainConfig) -> np.ndarray:
    e = secular_energies(config)
    rel = e - e[0]
    rel.setflags(write=False)
    return rel


@lru_cache(maxsize=16)
def _channel_layout(n_ions: int, channel: str):
    """Permutation grouping basis states into blocks of fixed other-channel
    bits, and the excitation count of the driven channel per state."""
    off = _CHANNEL_OFFSET[channel]
    idx = np.arange(4**n_ions)
    drive_bits = (idx[:, None] >> (2 * np.arange(n_ions) + off)[None, :]) & 1
    other_bits = (idx[:, None] >> (2 * np.arange(n_ions) + 1 - off)[None, :]) & 1
    weights = 1 << np.arange(n_ions)
    block = other_bits @ weights
    local = drive_bits @ weights
    perm = np.lexsort((local, block))
    n_exc = drive_bits.sum(axis=1)
    return perm, n_exc


@lru_cache(maxsize=16)
def _drive_matrix(n_ions: int, rabi: float, phase: float) -> np.ndarray:
    """f_R sum_k (cos phi S_x^k + sin phi S_y^k) over the driven channel."""
    dim = 2**n_ions
    d = np.zeros((dim, dim), dtype=complex)
    up = 0.5 * rabi * np.exp(-1j * phase)
    for i in range(dim):
        for k in range(n_ions):
            if not (i >> k) & 1:
                j = i | (1 << k)
                d[j, i] = up
                d[i, j] = np.conj(up)
    return d


@lru_cache(maxsize=16)
def _block_propagator(config: ChainConfig, channel: str, carrier: float, rabi: float, phase: float, duration: float):
    n = config.n_ions
    perm, n_exc = _channel_layout(n, channel)
    energies = _relative_energies(config)
    detuned = (energies - carrier * n_exc)[perm].reshape(2**n, 2**n)
    offsets = detuned[:, 0].copy()
    gen = _drive_matrix(n, rabi, phase)[None, :, :] + np.apply_along_axis(
        np.diag, 1, detuned - offsets[:, None]
    )
    values, vectors = np.linalg.eigh(gen)
    phases = np.exp(-2j * np.pi * _cycles(values, duration))
    blocks = np.einsum("bij,bj,bkj->bik", vectors, phases, vectors.conj())
    block_phase = np.exp(-2j * np.pi * _cycles(offsets, duration))
    blocks *= block_phase[:, None, None]
    blocks.setflags(write=False)
    return blocks


def _check_dims(state: ChainState, config: ChainConfig) -> None:
    if state.amplitudes.size != config.dim:
        raise ValueError(
            f"state dimension {state.amplitudes.size} does not match config dimension {config.dim}"
        )


def evolve_pulse(state: ChainState, pulse: PulseSpec, config: ChainConfig) -> ChainState:
    config.check_capacity()
    _check_dims(state, config)
    n = config.n_ions
    perm, n_exc = _channel_layout(n, pulse.channel)
    blocks = _block_propagator(
        config, pulse.channel, pulse.carrier_frequency, pulse.rabi_frequency, pulse.phase, pulse.duration
    )
    t0, t1 = state.time, state.time + pulse.duration
    # into the carrier frame at t0, evolve, back to the lab at t1
    psi = state.amplitudes * np.exp(2j * np.pi * n_exc * _cycles(pulse.carrier_frequency, t0))
    psi_blocks = psi[perm].reshape(2**n, 2**n)
    out_blocks = np.einsum("bij,bj->bi", blocks, psi_blocks)
    out = np.empty_like(psi)
    out[perm] = out_blocks.reshape(-1)
    out *= np.exp(-2j * np.pi * n_exc * _cycles(pulse.carrier_frequency, t1))
    return ChainState(out, t1)


def evolve_free(state: ChainState, duration: float, config: ChainConfig) -> ChainState:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    _check_dims(state, config)
    if duration == 0:
        return state
    e = _relative_energies(config)
    out = state.amplitudes * np.exp(-2j * np.pi * _cycles(e, duration))
    return ChainState(out, state.time + duration)


def run_sequence(state: ChainState, seq: Iterable[SequenceItem], config: ChainConfig) -> ChainState:
    for item in seq:
        if isinstance(item, Delay):
            state = evolve_free(state, item.duration, config)
        else:
            state = evolve_pulse(state, item, config)
    return state

