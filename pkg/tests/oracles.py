"""Closed-form and brute-force references, written without the package's
own propagators or frequency tables."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm
from scipy.special import zeta


def breit_rabi_levels(f_e: float, f_n: float, a_hz: float) -> dict[tuple[int, int], float]:
    """Exact levels of f_e S_z + f_n I_z - A S.I for two spin-1/2, keyed by
    (electron bit, nuclear bit) with bit 1 meaning m = +1/2.

    The |+,+> and |-,-> states are eigenstates; the m_S + m_I = 0 pair mixes
    through the flip-flop term with eigenvalues A/4 +/- sqrt((f_e - f_n)^2 + A^2)/2.
    """
    root = 0.5 * math.hypot(f_e - f_n, a_hz)
    upper, lower = a_hz / 4 + root, a_hz / 4 - root
    # the mixed state dominated by |m_S=+1/2, m_I=-1/2> is the upper branch when f_e > f_n
    plus_minus, minus_plus = (upper, lower) if f_e > f_n else (lower, upper)
    return {
        (1, 1): 0.5 * (f_e + f_n) - a_hz / 4,
        (0, 0): -0.5 * (f_e + f_n) - a_hz / 4,
        (1, 0): plus_minus,
        (0, 1): minus_plus,
    }


def breit_rabi_transitions(f_e: float, f_n: float, a_hz: float) -> dict[str, float]:
    lv = breit_rabi_levels(f_e, f_n, a_hz)
    return {
        "f_e0": lv[(1, 0)] - lv[(0, 0)],
        "f_e1": lv[(1, 1)] - lv[(0, 1)],
        "f_n_electron_ground": lv[(0, 1)] - lv[(0, 0)],
        "f_n_electron_excited": lv[(1, 1)] - lv[(1, 0)],
    }


def rabi_probability(f_r: float, detuning: float, t: float) -> float:
    """Generalized Rabi excitation probability from the ground state."""
    w = math.hypot(f_r, detuning)
    if w == 0:
        return 0.0
    return (f_r / w) ** 2 * math.sin(math.pi * w * t) ** 2


def two_level_propagator(f_r: float, detuning: float, phase: float, t: float) -> np.ndarray:
    """Rotating-frame propagator on (ground, excited) with the excited level
    detuned by ``detuning`` from the carrier."""
    h = np.array([[0.0, 0.5 * f_r * np.exp(-1j * phase)], [0.5 * f_r * np.exp(1j * phase), detuning]])
    return expm(-2j * np.pi * h * t)


def ramsey_probability(f_r: float, detuning: float, delay: float) -> float:
    """pi/2 - free precession - pi/2 from the ground state, finite pulses."""
    half = two_level_propagator(f_r, detuning, 0.0, 1.0 / (4 * f_r))
    free = np.diag([1.0, np.exp(-2j * np.pi * detuning * delay)])
    psi = half @ free @ half @ np.array([1.0, 0.0])
    return float(abs(psi[1]) ** 2)


def zeta_tail() -> float:
    """sum over n >= 2 of 1/n^3."""
    return float(zeta(3) - 1.0)


def lattice_tail(n_terms: int) -> float:
    n = np.arange(2, n_terms + 2, dtype=float)
    return float(np.sum(1.0 / n**3))


def brute_force_collisions(transitions, widths: dict[str, float]) -> list[tuple[int, int, str, float]]:
    """O(n^2) pairwise scan over (frequency, site, label, channel) tuples."""
    found = []
    for i in range(len(transitions)):
        for j in range(i + 1, len(transitions)):
            f1, s1, l1, c1 = transitions[i]
            f2, s2, l2, c2 = transitions[j]
            if c1 != c2 or s1 == s2:
                continue
            if abs(f1 - f2) < widths[c1]:
                (a, la), (b, lb) = sorted([(s1, l1), (s2, l2)])
                found.append((a, b, f"{la}/{lb}", abs(f1 - f2)))
    return sorted(found)


def ideal_cnot_output(control: int, target: int) -> tuple[int, int]:
    return control, target ^ control
