"""Simulator and frequency planner for a gradient-addressed chain of
paramagnetic ions used as nuclear-spin qubits with STM readout."""

from .dynamics import ChainState, Delay, PulseSequence, PulseSpec, evolve_free, evolve_pulse, run_sequence
from .planner import ConstraintReport, PulsePlan, check_budget, scan_frequency_collisions
from .protocols import GateSpec, ProtocolReport, cn_gate, initialize_chain, one_qubit_rotation
from .readout import DetectionResult, ReadoutSettings, detect_larmor, measure_nuclear, synthesize_trace
from .spin_model import TE125, ChainConfig, FrequencyTable, IonSpecies, build_frequency_table, reference_config

__all__ = [
    "ChainConfig",
    "ChainState",
    "ConstraintReport",
    "Delay",
    "DetectionResult",
    "FrequencyTable",
    "GateSpec",
    "IonSpecies",
    "ProtocolReport",
    "PulsePlan",
    "PulseSequence",
    "PulseSpec",
    "ReadoutSettings",
    "TE125",
    "build_frequency_table",
    "check_budget",
    "cn_gate",
    "detect_larmor",
    "evolve_free",
    "evolve_pulse",
    "initialize_chain",
    "measure_nuclear",
    "one_qubit_rotation",
    "reference_config",
    "run_sequence",
    "scan_frequency_collisions",
    "synthesize_trace",
]
