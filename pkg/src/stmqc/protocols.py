"""Chain initialization, one-qubit rotations and the three-step Control-Not.

Fidelities are evaluated in the interaction picture of the secular chain
Hamiltonian, where an ideal idle qubit does not evolve.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .dynamics import (
    ChainState,
    PulseSequence,
    PulseSpec,
    basis_index,
    evolve_pulse,
    run_sequence,
)
from .readout import MeasurementFailure, ReadoutSettings, measure_nuclear
from .spin_model import (
    ChainConfig,
    build_frequency_table,
    coupling_matrix,
    electron_excited_population,
    nuclear_transition_frequency,
)

ELECTRON_POLARIZATION_TOL = 1e-2

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


class ProtocolError(RuntimeError):
    pass


@dataclass
class ProtocolReport:
    name: str
    sequence: PulseSequence = field(default_factory=PulseSequence)
    frequencies: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)
    fidelity: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    aborted: bool = False

    @property
    def duration(self) -> float:
        return self.sequence.duration

    @property
    def n_pulses(self) -> int:
        return sum(1 for item in self.sequence if isinstance(item, PulseSpec))

    def to_text(self) -> str:
        lines = [
            f"protocol: {self.name}",
            f"aborted: {str(self.aborted).lower()}",
            f"duration_s: {self.duration:.17g}",
            f"n_pulses: {self.n_pulses}",
            f"outcomes: {','.join(str(b) for b in self.outcomes)}",
        ]
        lines += [f"frequency.{k}_hz: {v:.17g}" for k, v in self.frequencies.items()]
        lines += [f"fidelity.{k}: {v:.17g}" for k, v in self.fidelity.items()]
        lines += [f"warning: {w}" for w in self.warnings]
        lines += ["sequence:"] + ["  " + line for line in self.sequence.to_text().splitlines()]
        return "\n".join(lines) + "\n"

    def csv_row(self) -> dict:
        row = {
            "protocol": self.name,
            "aborted": int(self.aborted),
            "duration_s": f"{self.duration:.17g}",
            "n_pulses": self.n_pulses,
            "outcomes": "".join(str(b) for b in self.outcomes),
            "warnings": "; ".join(self.warnings),
        }
        row.update({f"f_{k}_hz": f"{v:.17g}" for k, v in self.frequencies.items()})
        row.update({f"fidelity_{k}": f"{v:.17g}" for k, v in self.fidelity.items()})
        return row


def reports_to_csv(reports: list[ProtocolReport]) -> str:
    rows = [r.csv_row() for r in reports]
    fieldnames = list(dict.fromkeys(k for row in rows for k in row))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# --- default drive strengths -------------------------------------------------


def leakage_null_rabi(detuning: float, order: int = 1) -> float:
    """Rabi frequency at which a rectangular pi-pulse leaves a transition
    detuned by ``detuning`` exactly unexcited: sqrt(f_R^2 + d^2) = 2 m f_R."""
    return abs(detuning) / math.sqrt(4 * order**2 - 1)


def default_gate_rabi(config: ChainConfig) -> float:
    return leakage_null_rabi(build_frequency_table(config).f_nd, 1)


def default_onequbit_rabi(config: ChainConfig) -> float:
    return leakage_null_rabi(build_frequency_table(config).delta_f_n, 2)


def default_electron_rabi(config: ChainConfig) -> float:
    return leakage_null_rabi(build_frequency_table(config).delta_f_e, 8)


# --- helpers -------------------------------------------------------------------


def reduced_density_matrix(amplitudes: np.ndarray, n_bits: int, keep_bits: list[int]) -> np.ndarray:
    """Partial trace keeping ``keep_bits``; the first kept bit is the most
    significant index of the result."""
    psi = np.asarray(amplitudes).reshape((2,) * n_bits)
    axes = [n_bits - 1 - b for b in keep_bits]
    rest = [a for a in range(n_bits) if a not in axes]
    m = np.transpose(psi, axes + rest).reshape(2 ** len(keep_bits), -1)
    return m @ m.conj().T


def qubit_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity of two single-qubit density matrices."""
    f = np.trace(rho @ sigma).real + 2 * math.sqrt(max(np.linalg.det(rho).real * np.linalg.det(sigma).real, 0.0))
    return float(min(max(f, 0.0), 1.0))


def rotation_matrix(angle: float, phase: float) -> np.ndarray:
    n_x, n_y = math.cos(phase), math.sin(phase)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -1j * s * (n_x + 1j * n_y)], [-1j * s * (n_x - 1j * n_y), c]], dtype=complex)


def _check_polarized(state: ChainState) -> None:
    elec, _ = state.excited_populations()
    worst = float(elec.max())
    if worst > ELECTRON_POLARIZATION_TOL:
        raise ProtocolError(f"electron spins not polarized (max excited population {worst:.3g})")


def _apply_nuclear_phases(state: ChainState, phases: dict[int, float]) -> ChainState:
    """Virtual Z: multiply amplitudes by exp(i * phi_k) for every excited nucleus k."""
    if not phases:
        return state
    idx = np.arange(state.amplitudes.size)
    total = np.zeros(idx.size)
    for k, phi in phases.items():
        total += phi * ((idx >> (2 * k + 1)) & 1)
    return ChainState(state.amplitudes * np.exp(1j * total), state.time)


# --- initialization ----------------------------------------------------------


def initialize_chain(
    config: ChainConfig,
    state: ChainState,
    settings: ReadoutSettings = ReadoutSettings(),
    seed: int = 0,
    rabi: float | None = None,
) -> tuple[ChainState, ProtocolReport]:
    """Read every site and flip the nuclei found excited back to ground."""
    _check_polarized(state)
    rabi = default_onequbit_rabi(config) if rabi is None else rabi
    report = ProtocolReport("initialize_chain")
    report.fidelity["thermal_electron_excitation"] = electron_excited_population(config)
    seeds = np.random.SeedSequence(seed).generate_state(config.n_ions)
    ground_electrons = [0] * config.n_ions
    for k in range(config.n_ions):
        try:
            bit, state, detection = measure_nuclear(state, k, config, settings, int(seeds[k]))
        except MeasurementFailure as exc:
            report.aborted = True
            report.warnings.append(str(exc))
            break
        report.outcomes.append(bit)
        report.frequencies[f"readout_site{k}"] = detection.estimated_frequency
        if bit == 1:
            carrier = nuclear_transition_frequency(config, k, ground_electrons)
            pulse = PulseSpec.pi("nuclear", carrier, rabi)
            state = evolve_pulse(state, pulse, config)
            report.sequence.append(pulse)
            report.frequencies[f"pi_site{k}"] = carrier
    ground = state.probabilities()[basis_index(ground_electrons, [0] * config.n_ions)]
    _, nuc = state.excited_populations()
    report.fidelity["all_ground_probability"] = float(np.sum(state.probabilities()[_nuclear_ground_mask(config.n_ions)]))
    report.fidelity["ground_state_probability"] = float(ground)
    report.fidelity["max_nuclear_excitation"] = float(nuc.max())
    return state, report


def _nuclear_ground_mask(n_ions: int) -> np.ndarray:
    idx = np.arange(4**n_ions)
    nuc_mask = sum(1 << (2 * k + 1) for k in range(n_ions))
    return (idx & nuc_mask) == 0


# --- one-qubit rotation ------------------------------------------------------


def one_qubit_rotation(
    state: ChainState,
    site: int,
    angle: float,
    phase: float,
    config: ChainConfig,
    rabi: float | None = None,
) -> tuple[ChainState, ProtocolReport]:
    """Selective nuclear rotation at the site's NMR frequency (electrons ground)."""
    if not 0 <= site < config.n_ions:
        raise IndexError(f"site {site} outside chain of {config.n_ions} ions")
    table = build_frequency_table(config)
    rabi = default_onequbit_rabi(config) if rabi is None else rabi
    report = ProtocolReport("one_qubit_rotation")
    if config.n_ions > 1 and not rabi < table.delta_f_n:
        report.warnings.append(f"f_nR = {rabi:.6g} Hz is not below delta_f_n = {table.delta_f_n:.6g} Hz")
    carrier = nuclear_transition_frequency(config, site, [0] * config.n_ions)
    pulse = PulseSpec.rotation("nuclear", carrier, rabi, angle, phase)
    report.frequencies["nuclear"] = carrier
    report.sequence.append(pulse)

    n_bits = 2 * config.n_ions
    before = state.rotating_frame(config)
    out = evolve_pulse(state, pulse, config)
    after = out.rotating_frame(config)
    r = rotation_matrix(angle, phase)
    rho_in = reduced_density_matrix(before, n_bits, [2 * site + 1])
    rho_out = reduced_density_matrix(after, n_bits, [2 * site + 1])
    report.fidelity["rotation"] = qubit_fidelity(rho_out, r @ rho_in @ r.conj().T)

    _, nuc_before = state.excited_populations()
    _, nuc_after = out.excited_populations()
    others = np.delete(np.abs(nuc_after - nuc_before), site)
    report.fidelity["spectator_leakage"] = float(others.max()) if others.size else 0.0
    return out, report


# --- Control-Not -------------------------------------------------------------


@dataclass(frozen=True)
class GateSpec:
    control_site: int
    target_site: int
    nuclear_rabi: float | None = None
    electron_rabi: float | None = None

    def __post_init__(self):
        if abs(self.control_site - self.target_site) != 1:
            raise ValueError("Control-Not is defined for nearest neighbours only (|control - target| = 1)")
        for r in (self.nuclear_rabi, self.electron_rabi):
            if r is not None and not r > 0:
                raise ValueError("Rabi frequencies must be positive")

    def resolved(self, config: ChainConfig) -> "GateSpec":
        for s in (self.control_site, self.target_site):
            if not 0 <= s < config.n_ions:
                raise IndexError(f"site {s} outside chain of {config.n_ions} ions")
        return GateSpec(
            self.control_site,
            self.target_site,
            default_gate_rabi(config) if self.nuclear_rabi is None else self.nuclear_rabi,
            default_electron_rabi(config) if self.electron_rabi is None else self.electron_rabi,
        )


def cn_pulses(config: ChainConfig, gate: GateSpec, step3: str = "adjusted") -> tuple[list[PulseSpec], dict]:
    """The three pulses of the gate and their carrier assignments.

    step3="adjusted" retunes the last electron pulse for the dipole field of
    the flipped target (reference target input |0>); "repeat" reuses the
    step-1 carrier.
    """
    gate = gate.resolved(config)
    if step3 not in ("adjusted", "repeat"):
        raise ValueError("step3 must be 'adjusted' or 'repeat'")
    table = build_frequency_table(config)
    k, t = gate.control_site, gate.target_site
    n = config.n_ions
    c1 = float(table.f_e1[k])
    flipped = [0] * n
    flipped[k] = 1
    c2 = nuclear_transition_frequency(config, t, flipped)
    c2_idle = nuclear_transition_frequency(config, t, [0] * n)
    c3 = c1 + coupling_matrix(config)[k, t] if step3 == "adjusted" else c1
    pulses = [
        PulseSpec.pi("electron", c1, gate.electron_rabi),
        PulseSpec.pi("nuclear", c2, gate.nuclear_rabi),
        PulseSpec.pi("electron", c3, gate.electron_rabi),
    ]
    freqs = {
        "step1_electron": c1,
        "step2_nuclear": c2,
        "step2_idle_nuclear": c2_idle,
        "step3_electron": c3,
    }
    return pulses, freqs


def _pair_input(config: ChainConfig, gate: GateSpec, vec: np.ndarray, time: float) -> ChainState:
    n = config.n_ions
    amps = np.zeros(4**n, dtype=complex)
    for idx2, a in enumerate(vec):
        c, t = idx2 >> 1, idx2 & 1
        nuc = [0] * n
        nuc[gate.control_site], nuc[gate.target_site] = c, t
        amps[basis_index([0] * n, nuc)] = a
    return ChainState.from_rotating_frame(amps, config, time)


def _pair_output(config: ChainConfig, gate: GateSpec, state: ChainState) -> np.ndarray:
    keep = [2 * gate.control_site + 1, 2 * gate.target_site + 1]
    return reduced_density_matrix(state.rotating_frame(config), 2 * config.n_ions, keep)


@lru_cache(maxsize=64)
def _calibrate_phases(config: ChainConfig, gate: GateSpec, step3: str, time: float) -> tuple[dict, dict]:
    """Virtual-Z phases (pre, post) that turn the raw pulse sequence into a
    CNOT on the nuclear pair: local Z rotations absorb the dynamical phases
    of the three pulses."""
    pulses, _ = cn_pulses(config, gate, step3)
    n = config.n_ions
    k, t = gate.control_site, gate.target_site
    arg = {}
    for c_in in (0, 1):
        for t_in in (0, 1):
            t_out = t_in ^ c_in
            vec = np.zeros(4, dtype=complex)
            vec[2 * c_in + t_in] = 1
            out = run_sequence(_pair_input(config, gate, vec, time), pulses, config).rotating_frame(config)
            nuc = [0] * n
            nuc[k], nuc[t] = c_in, t_out
            arg[(c_in, t_in)] = np.angle(out[basis_index([0] * n, nuc)])
    m00, m01, m10, m11 = arg[(0, 0)], arg[(0, 1)], arg[(1, 0)], arg[(1, 1)]
    # M ~ e^{ig} diag(post) CNOT diag(pre), control pre-phase fixed to zero
    pt_plus_qt = m01 - m00
    pt_minus_qt = m10 - m11
    post_t = 0.5 * (pt_plus_qt + pt_minus_qt)
    pre_t = 0.5 * (pt_plus_qt - pt_minus_qt)
    post_c = m10 - m00 - post_t
    return {t: -pre_t}, {k: -post_c, t: -post_t}


def cn_gate(
    state: ChainState,
    gate: GateSpec,
    config: ChainConfig,
    step3: str = "adjusted",
    phase_correction: bool = True,
    evaluate_fidelity: bool = True,
) -> tuple[ChainState, ProtocolReport]:
    """Three-step Control-Not on the nuclear spins of two adjacent ions.

    1. electron pi-pulse at f_e1(x_k): flips the control electron only if the
       control nucleus is excited;
    2. nuclear pi-pulse at the target frequency with the control electron
       flipped, f_n(x_t) - f'_nd in the bulk;
    3. electron pi-pulse restoring the control electron.
    """
    _check_polarized(state)
    gate = gate.resolved(config)
    table = build_frequency_table(config)
    pulses, freqs = cn_pulses(config, gate, step3)
    report = ProtocolReport("cn_gate", frequencies=dict(freqs))
    report.frequencies["f_nd"] = table.f_nd
    if not gate.nuclear_rabi < table.f_nd:
        report.warnings.append(
            f"gate f_nR = {gate.nuclear_rabi:.6g} Hz is not below f_nd = {table.f_nd:.6g} Hz; "
            "the target flip is no longer conditional"
        )
    if not gate.electron_rabi < table.delta_f_e:
        report.warnings.append(
            f"electron f_eR = {gate.electron_rabi:.6g} Hz is not below delta_f_e = {table.delta_f_e:.6g} Hz"
        )

    pre, post = _calibrate_phases(config, gate, step3, state.time) if phase_correction else ({}, {})
    out = _apply_nuclear_phases(state, pre)
    out = run_sequence(out, pulses, config)
    out = _apply_nuclear_phases(out, post)
    for p in pulses:
        report.sequence.append(p)

    elec, _ = out.excited_populations()
    report.fidelity["control_electron_excitation"] = float(elec[gate.control_site])
    if evaluate_fidelity:
        channel = cn_pair_channel(config, gate, step3, phase_correction, state.time)
        report.fidelity["process"] = gate_fidelity(channel, CNOT)
        table_ = cn_truth_table(config, gate, step3, phase_correction, state.time)
        report.fidelity["truth_table_min"] = min(p for p, _ in table_.values())
    return out, report


def cn_pair_channel(
    config: ChainConfig,
    gate: GateSpec,
    step3: str = "adjusted",
    phase_correction: bool = True,
    time: float = 0.0,
) -> Callable[[np.ndarray], np.ndarray]:
    """Map a two-qubit nuclear input (control, target) to the reduced output
    density matrix; electrons and spectator nuclei start in ground."""

    def channel(vec: np.ndarray) -> np.ndarray:
        start = _pair_input(config, gate, vec, time)
        out, _ = cn_gate(start, gate, config, step3, phase_correction, evaluate_fidelity=False)
        return _pair_output(config, gate, out)

    return channel


def cn_truth_table(
    config: ChainConfig,
    gate: GateSpec,
    step3: str = "adjusted",
    phase_correction: bool = True,
    time: float = 0.0,
) -> dict:
    """{(c, t): (population of the CNOT output, most probable output)}."""
    result = {}
    for c in (0, 1):
        for t in (0, 1):
            vec = np.zeros(4, dtype=complex)
            vec[2 * c + t] = 1
            pops = np.real(np.diag(cn_pair_channel(config, gate, step3, phase_correction, time)(vec)))
            best = int(np.argmax(pops))
            result[(c, t)] = (float(pops[2 * c + (t ^ c)]), (best >> 1, best & 1))
    return result


# --- fidelity ------------------------------------------------------------------

_SINGLE_PROBES = [
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / math.sqrt(2),
    np.array([1, 1j], dtype=complex) / math.sqrt(2),
]


def probe_states(kind: str = "full") -> list[np.ndarray]:
    """16 product probes {0, 1, +, +i}^2, or the 4 basis states."""
    if kind == "basis":
        return [np.eye(4, dtype=complex)[i] for i in range(4)]
    if kind != "full":
        raise ValueError("kind must be 'full' or 'basis'")
    return [np.kron(a, b) for a in _SINGLE_PROBES for b in _SINGLE_PROBES]


def gate_fidelity(channel: Callable[[np.ndarray], np.ndarray], ideal: np.ndarray = CNOT, probes: str = "full") -> float:
    """Mean overlap <ideal psi| rho_out |ideal psi> over the probe set.

    ``channel`` may return a state vector or a density matrix.
    """
    total = 0.0
    states = probe_states(probes)
    for psi in states:
        out = np.asarray(channel(psi))
        target = ideal @ psi
        if out.ndim == 1:
            norm = np.vdot(out, out).real
            overlap = abs(np.vdot(target, out)) ** 2
        else:
            norm = np.trace(out).real
            overlap = np.vdot(target, out @ target).real
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"probe output not normalized (trace = {norm!r})")
        total += overlap
    return float(total / len(states))
