"""Electron-nuclear spin chain in a graded field.

Energies are stored as H/h in Hz. Spin projections are labelled by energy
order: bit 0 is the ground (m = -1/2) state and bit 1 the excited (m = +1/2)
state of each spin, for both electron and nucleus. Frequencies are handled as
magnitudes; the sign of the nuclear moment is kept on the species only.

Basis layout shared by every module: in a chain of N ions the state index has
2N bits, bit 2k is the electron of site k and bit 2k+1 its nucleus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import constants as sc

MAX_IONS = 7


class CapacityError(ValueError):
    """Requested Hilbert space exceeds the state-vector cap."""


@dataclass(frozen=True)
class PhysicalConstants:
    bohr_magneton: float = sc.physical_constants["Bohr magneton"][0]
    nuclear_magneton: float = sc.physical_constants["nuclear magneton"][0]
    planck_h: float = sc.h
    boltzmann_k: float = sc.k
    vacuum_permeability_over_4pi: float = sc.mu_0 / (4 * math.pi)

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


CONSTANTS = PhysicalConstants()


def gamma_from_moment(moment_nuclear_magnetons: float, spin: float = 0.5) -> float:
    """Gyromagnetic ratio gamma/2pi in Hz/T for a nucleus of given moment.

    ``moment = gamma * hbar * I`` so ``gamma/2pi = moment * mu_N / (h * I)``.
    For the spin-1/2 Te-125 moment of -0.882 mu_N this gives -13.45 MHz/T.
    """
    c = CONSTANTS
    return moment_nuclear_magnetons * c.nuclear_magneton / (c.planck_h * spin)


@dataclass(frozen=True)
class IonSpecies:
    name: str
    g_e: float
    gamma_n_over_2pi: float  # Hz/T, signed
    hyperfine_A_over_h: float  # Hz

    def __post_init__(self):
        if not self.g_e > 0:
            raise ValueError("g_e must be positive")
        if not self.hyperfine_A_over_h > 0:
            raise ValueError("hyperfine_A_over_h must be positive")
        if self.gamma_n_over_2pi == 0:
            raise ValueError("gamma_n_over_2pi must be nonzero")

    @property
    def electron_hz_per_tesla(self) -> float:
        return self.g_e * CONSTANTS.bohr_magneton / CONSTANTS.planck_h

    @property
    def nuclear_hz_per_tesla(self) -> float:
        return abs(self.gamma_n_over_2pi)

    @property
    def nuclear_moment_sign(self) -> int:
        return 1 if self.gamma_n_over_2pi > 0 else -1


TE125 = IonSpecies(
    name="Te-125",
    g_e=2.0,
    gamma_n_over_2pi=gamma_from_moment(-0.882),
    hyperfine_A_over_h=3.5e9,
)

SPECIES_PRESETS = {"Te-125": TE125, "te125": TE125}


@dataclass(frozen=True)
class ChainConfig:
    n_ions: int
    spacing_a: float = 5e-9
    b0: float = 10.0
    gradient_dB0_dx: float = 1e5
    temperature: float = 1.0
    species: IonSpecies = TE125
    chain_axis_angle_theta: float = math.pi / 2

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ValueError("n_ions must be an integer >= 1")
        if not self.spacing_a > 0:
            raise ValueError("spacing_a must be positive")
        if not self.b0 > 0:
            raise ValueError("b0 must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def dim(self) -> int:
        return 4**self.n_ions

    def check_capacity(self) -> None:
        if self.n_ions > MAX_IONS:
            raise CapacityError(
                f"n_ions={self.n_ions} exceeds the state-vector cap of {MAX_IONS} "
                f"(dimension {4**MAX_IONS})"
            )


def reference_config(n_ions: int = 3, **overrides) -> ChainConfig:
    """Te-125 chain with a = 5 nm, dB/dx = 1e5 T/m, B0 = 10 T, T = 1 K."""
    return ChainConfig(n_ions=n_ions, **overrides)


def field_at_site(config: ChainConfig, k: int) -> float:
    if not 0 <= k < config.n_ions:
        raise IndexError(f"site {k} outside chain of {config.n_ions} ions")
    return config.b0 + k * config.spacing_a * config.gradient_dB0_dx


def _site_fields(config: ChainConfig) -> np.ndarray:
    return config.b0 + np.arange(config.n_ions) * config.spacing_a * config.gradient_dB0_dx


def dipole_coupling(config: ChainConfig, j: int, k: int) -> float:
    """Signed coefficient b_jk (Hz) of the secular term b_jk * S_z^j * I_z^k.

    Positive for theta = pi/2, in which case a ground-state electron lowers
    the neighbouring nuclear frequency by b_jk / 2.
    """
    if j == k:
        raise ValueError("dipole coupling needs two distinct sites")
    for s in (j, k):
        if not 0 <= s < config.n_ions:
            raise IndexError(f"site {s} outside chain of {config.n_ions} ions")
    return 2.0 * _signed_shift(config, abs(j - k))


def _signed_shift(config: ChainConfig, separation: int) -> float:
    c = CONSTANTS
    r = separation * config.spacing_a
    angular = 1.0 - 3.0 * math.cos(config.chain_axis_angle_theta) ** 2
    electron_moment = config.species.g_e * c.bohr_magneton / 2.0
    field_t = c.vacuum_permeability_over_4pi * electron_moment * angular / r**3
    return field_t * config.species.nuclear_hz_per_tesla


def dipole_shift(config: ChainConfig, source_site: int, target_site: int) -> float:
    """Magnitude (Hz) of the nuclear-frequency shift at ``target_site`` from one
    fully polarized electron at ``source_site``."""
    if source_site == target_site:
        raise ValueError("source and target sites must differ")
    for s in (source_site, target_site):
        if not 0 <= s < config.n_ions:
            raise IndexError(f"site {s} outside chain of {config.n_ions} ions")
    return abs(_signed_shift(config, abs(source_site - target_site)))


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Per-site transition frequencies (Hz) and chain-level spacings.

    ``f_nd_site`` / ``f_nd_prime_site`` are the static dipole shifts from the
    nearest / farther electrons of each site's actual neighbourhood. The
    chain-level ``f_nd`` is the bulk two-neighbour value, which is also the
    change of a nuclear frequency when one adjacent electron flips.
    """

    field_b: np.ndarray
    f_e0: np.ndarray
    f_e1: np.ndarray
    f_n: np.ndarray
    f_nd_site: np.ndarray
    f_nd_prime_site: np.ndarray
    delta_f_e: float
    delta_f_n: float
    f_nd: float
    f_nd_prime: float

    @property
    def n_sites(self) -> int:
        return len(self.f_n)

    @property
    def f_e(self) -> np.ndarray:
        return 0.5 * (self.f_e0 + self.f_e1)

    def __eq__(self, other):
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        arrays = ("field_b", "f_e0", "f_e1", "f_n", "f_nd_site", "f_nd_prime_site")
        scalars = ("delta_f_e", "delta_f_n", "f_nd", "f_nd_prime")
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays) and all(
            getattr(self, s) == getattr(other, s) for s in scalars
        )


def build_frequency_table(config: ChainConfig) -> FrequencyTable:
    sp_ = config.species
    fields = _site_fields(config)
    a_hz = sp_.hyperfine_A_over_h
    f_e = sp_.electron_hz_per_tesla * fields
    f_n = sp_.nuclear_hz_per_tesla * fields

    n = config.n_ions
    # per-separation shift magnitudes, index = |j - k|
    shifts = np.zeros(n)
    for s in range(1, n):
        shifts[s] = abs(_signed_shift(config, s))
    sites = np.arange(n)
    sep = np.abs(sites[:, None] - sites[None, :])
    shift_matrix = shifts[sep]
    f_nd_site = np.where(sep == 1, shift_matrix, 0.0).sum(axis=0)
    f_nd_prime_site = np.where(sep >= 2, shift_matrix, 0.0).sum(axis=0)

    step = config.spacing_a * config.gradient_dB0_dx
    return FrequencyTable(
        field_b=fields,
        f_e0=f_e + a_hz / 2,
        f_e1=f_e - a_hz / 2,
        f_n=f_n,
        f_nd_site=f_nd_site,
        f_nd_prime_site=f_nd_prime_site,
        delta_f_e=sp_.electron_hz_per_tesla * step,
        delta_f_n=sp_.nuclear_hz_per_tesla * step,
        f_nd=2.0 * abs(_signed_shift(config, 1)) if n >= 2 else 0.0,
        f_nd_prime=float(f_nd_prime_site.max()),
    )


def bulk_f_nd_prime(config: ChainConfig) -> float:
    """Farther-electron shift of a site in an infinite chain, 2 d (zeta(3) - 1)."""
    from scipy.special import zeta

    return 2.0 * abs(_signed_shift(config, 1)) * (zeta(3) - 1.0)


def electron_excited_population(config: ChainConfig) -> float:
    """Thermal excited-state population of one electron at the base field."""
    c = CONSTANTS
    f_e = config.species.electron_hz_per_tesla * config.b0
    x = c.planck_h * f_e / (c.boltzmann_k * config.temperature)
    return math.exp(-x) / (1.0 + math.exp(-x))


# --- Hamiltonians -----------------------------------------------------------

_SZ = np.diag([-0.5, 0.5]).astype(complex)
_SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
_SM = _SP.T.copy()
_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """H/h in Hz as a sparse matrix over the chain basis."""

    matrix: sp.csr_array
    n_ions: int
    secular: bool = field(default=True)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        """max|H - H^dagger| / max|H|."""
        diff = self.matrix - self.matrix.conj().T
        scale = abs(self.matrix).max()
        if scale == 0:
            return 0.0
        return float(abs(diff).max() / scale) if diff.nnz else 0.0

    @property
    def hermitian(self) -> bool:
        return self.hermiticity_error() <= 1e-12


def single_ion_hamiltonian(species: IonSpecies, b: float, secular: bool = False) -> HamiltonianMatrix:
    """Exact 4x4 H/h = f_e S_z + f_n I_z - A S.I in the |m_S, m_I> basis.

    Index = e_bit + 2 * n_bit, matching the chain layout for one ion.
    """
    if not b > 0:
        raise ValueError("field must be positive")
    f_e = species.electron_hz_per_tesla * b
    f_n = species.nuclear_hz_per_tesla * b
    a_hz = species.hyperfine_A_over_h
    sz = np.kron(_I2, _SZ)
    iz = np.kron(_SZ, _I2)
    h = f_e * sz + f_n * iz - a_hz * sz @ iz
    if not secular:
        s_plus, s_minus = np.kron(_I2, _SP), np.kron(_I2, _SM)
        i_plus, i_minus = np.kron(_SP, _I2), np.kron(_SM, _I2)
        h = h - a_hz * 0.5 * (s_plus @ i_minus + s_minus @ i_plus)
    return HamiltonianMatrix(sp.csr_array(h), n_ions=1, secular=secular)


def bit_projections(n_ions: int) -> tuple[np.ndarray, np.ndarray]:
    """m_S and m_I of every basis state, arrays of shape (4**n, n)."""
    idx = np.arange(4**n_ions)
    bits = (idx[:, None] >> np.arange(2 * n_ions)[None, :]) & 1
    m = bits - 0.5
    return m[:, 0::2], m[:, 1::2]


def coupling_matrix(config: ChainConfig) -> np.ndarray:
    """b[j, k]: electron j - nucleus k secular dipole coefficients (Hz)."""
    n = config.n_ions
    b = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            if j != k:
                b[j, k] = 2.0 * _signed_shift(config, abs(j - k))
    return b


@lru_cache(maxsize=32)
def secular_energies(config: ChainConfig) -> np.ndarray:
    """Diagonal of the secular chain Hamiltonian (Hz)."""
    config.check_capacity()
    table = build_frequency_table(config)
    m_s, m_i = bit_projections(config.n_ions)
    a_hz = config.species.hyperfine_A_over_h
    energies = m_s @ table.f_e + m_i @ table.f_n - a_hz * np.sum(m_s * m_i, axis=1)
    energies += np.einsum("sj,jk,sk->s", m_s, coupling_matrix(config), m_i)
    energies.setflags(write=False)
    return energies


def _embed(op: np.ndarray, bit: int, n_bits: int) -> sp.csr_array:
    left = sp.identity(2 ** (n_bits - bit - 1), dtype=complex, format="csr")
    right = sp.identity(2**bit, dtype=complex, format="csr")
    return sp.csr_array(sp.kron(sp.kron(left, sp.csr_array(op)), right))


def chain_hamiltonian(config: ChainConfig, secular: bool = True) -> HamiltonianMatrix:
    """Chain Hamiltonian: per-site Zeeman + hyperfine, plus secular
    electron-nuclear dipole terms between sites. Nuclear-nuclear dipole terms
    are omitted."""
    config.check_capacity()
    energies = secular_energies(config)
    h = sp.diags(energies.astype(complex), format="csr")
    if not secular:
        n_bits = 2 * config.n_ions
        a_hz = config.species.hyperfine_A_over_h
        for k in range(config.n_ions):
            e_bit, n_bit = 2 * k, 2 * k + 1
            flip_flop = _embed(_SP, e_bit, n_bits) @ _embed(_SM, n_bit, n_bits)
            flip_flop = flip_flop + flip_flop.conj().T
            h = h - 0.5 * a_hz * flip_flop
    return HamiltonianMatrix(sp.csr_array(h), n_ions=config.n_ions, secular=secular)


def nuclear_transition_frequency(config: ChainConfig, k: int, electron_bits) -> float:
    """Secular NMR frequency of nucleus k for a given electron configuration.

    With all electrons in the ground state this is
    f_n(x_k) + A/2h - f_nd_k - f'_nd_k (theta = pi/2).
    """
    table = build_frequency_table(config)
    m_s = np.asarray(electron_bits, dtype=float) - 0.5
    b = coupling_matrix(config)
    a_hz = config.species.hyperfine_A_over_h
    return float(table.f_n[k] - a_hz * m_s[k] + m_s @ b[:, k])


def electron_transition_frequency(config: ChainConfig, k: int, nuclear_bits) -> float:
    """Secular ESR frequency of electron k for a given nuclear configuration."""
    table = build_frequency_table(config)
    m_i = np.asarray(nuclear_bits, dtype=float) - 0.5
    b = coupling_matrix(config)
    a_hz = config.species.hyperfine_A_over_h
    return float(table.f_e[k] - a_hz * m_i[k] + b[k, :] @ m_i)


def exact_single_ion_transitions(species: IonSpecies, b: float) -> dict[str, float]:
    """Electron and nuclear transition frequencies from full diagonalization.

    Eigenstates are labelled by their dominant |m_S, m_I> component.
    """
    h = single_ion_hamiltonian(species, b, secular=False).toarray()
    values, vectors = np.linalg.eigh(h)
    labels = np.argmax(np.abs(vectors) ** 2, axis=0)
    if len(set(labels)) != 4:
        raise ValueError("eigenstates not separable into |m_S, m_I> labels at this field")
    energy = dict(zip(labels.tolist(), values.tolist()))
    # index = e_bit + 2 * n_bit
    return {
        "f_e0": energy[1] - energy[0],
        "f_e1": energy[3] - energy[2],
        "f_n_electron_ground": energy[2] - energy[0],
        "f_n_electron_excited": energy[3] - energy[1],
    }
