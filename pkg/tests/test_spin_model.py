import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import breit_rabi_levels, breit_rabi_transitions, lattice_tail, zeta_tail
from stmqc.spin_model import (
    TE125,
    CapacityError,
    ChainConfig,
    bulk_f_nd_prime,
    build_frequency_table,
    chain_hamiltonian,
    dipole_shift,
    electron_excited_population,
    exact_single_ion_transitions,
    field_at_site,
    gamma_from_moment,
    nuclear_transition_frequency,
    reference_config,
    single_ion_hamiltonian,
)

spacings = st.floats(min_value=1e-9, max_value=2e-8)
gradients = st.floats(min_value=1e3, max_value=1e6)
ion_counts = st.integers(min_value=2, max_value=12)


def test_field_at_site_reference():
    cfg = reference_config(3)
    assert field_at_site(cfg, 0) == 10.0
    assert field_at_site(cfg, 1) == pytest.approx(10.0005, abs=1e-12)
    with pytest.raises(IndexError):
        field_at_site(cfg, 3)


def test_species_preset_moment():
    assert TE125.gamma_n_over_2pi == pytest.approx(-13.45e6, rel=1e-3)
    assert gamma_from_moment(-0.882) == TE125.gamma_n_over_2pi


def test_reference_table_values():
    t = build_frequency_table(reference_config(3))
    assert t.delta_f_n == pytest.approx(6.75e3, rel=0.01)
    assert t.delta_f_e == pytest.approx(14e6, rel=0.01)
    assert float(t.f_e[0]) == pytest.approx(280e9, rel=0.005)
    np.testing.assert_allclose(t.f_e0 - t.f_e1, TE125.hyperfine_A_over_h, rtol=0, atol=1e-3)


def test_single_ion_has_no_dipole_shift():
    t = build_frequency_table(reference_config(1))
    assert t.f_nd == 0.0
    assert t.f_nd_prime == 0.0


def test_dipole_values(ref3):
    assert dipole_shift(ref3, 0, 1) == pytest.approx(100.0, rel=0.1)
    assert build_frequency_table(ref3).f_nd == pytest.approx(200.0, rel=0.1)
    with pytest.raises(ValueError):
        dipole_shift(ref3, 1, 1)
    with pytest.raises(IndexError):
        dipole_shift(ref3, 0, 5)


def test_bulk_tail_matches_lattice_sum(ref3):
    d = dipole_shift(ref3, 0, 1)
    assert bulk_f_nd_prime(ref3) == pytest.approx(2 * d * zeta_tail(), rel=1e-3)
    assert lattice_tail(100000) == pytest.approx(zeta_tail(), rel=1e-6)
    assert bulk_f_nd_prime(ref3) < 41.0


def test_magic_angle_kills_dipole():
    cfg = reference_config(3, chain_axis_angle_theta=math.acos(1 / math.sqrt(3)))
    assert dipole_shift(cfg, 0, 1) == pytest.approx(0.0, abs=1e-9)


def test_thermal_population_small(ref3):
    p = electron_excited_population(ref3)
    assert 0 < p < 1e-5


def test_capacity_cap():
    cfg = reference_config(8)
    build_frequency_table(cfg)  # tables are fine
    with pytest.raises(CapacityError):
        chain_hamiltonian(cfg)


@pytest.mark.parametrize("kwargs", [{"n_ions": 0}, {"spacing_a": -1e-9}, {"b0": 0.0}, {"temperature": -1.0}])
def test_invalid_configs(kwargs):
    base = dict(n_ions=3, spacing_a=5e-9, b0=10.0, gradient_dB0_dx=1e5, temperature=1.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        ChainConfig(**base)


@pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
def test_breit_rabi_eigenvalues(b):
    h = single_ion_hamiltonian(TE125, b).toarray()
    f_e, f_n = TE125.electron_hz_per_tesla * b, TE125.nuclear_hz_per_tesla * b
    levels = breit_rabi_levels(f_e, f_n, TE125.hyperfine_A_over_h)
    expected = np.sort(list(levels.values()))
    got = np.linalg.eigvalsh(h)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-10 * np.abs(expected).max())


@pytest.mark.parametrize("b", [1.0, 10.0])
def test_exact_transitions_match_oracle(b):
    got = exact_single_ion_transitions(TE125, b)
    f_e, f_n = TE125.electron_hz_per_tesla * b, TE125.nuclear_hz_per_tesla * b
    ref = breit_rabi_transitions(f_e, f_n, TE125.hyperfine_A_over_h)
    for key in ref:
        assert got[key] == pytest.approx(ref[key], rel=1e-10, abs=1e-3)


def test_secular_vs_full_within_second_order_bound():
    b = 10.0
    cfg = reference_config(1)
    t = build_frequency_table(cfg)
    exact = exact_single_ion_transitions(TE125, b)
    bound = TE125.hyperfine_A_over_h**2 / (2 * t.f_e[0])
    for key in ("f_e0", "f_e1"):
        assert abs(exact[key] - getattr(t, key)[0]) <= 1.01 * bound
    assert exact["f_e0"] - exact["f_e1"] == pytest.approx(TE125.hyperfine_A_over_h, abs=25e3)


def test_nuclear_frequency_with_ground_electrons(ref3):
    t = build_frequency_table(ref3)
    f = nuclear_transition_frequency(ref3, 1, [0, 0, 0])
    expected = t.f_n[1] + TE125.hyperfine_A_over_h / 2 - t.f_nd_site[1] - t.f_nd_prime_site[1]
    assert f == pytest.approx(expected, abs=1e-6)


# --- properties ---------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), secular=st.booleans(), b0=st.floats(1.0, 20.0))
def test_hermiticity(n, secular, b0):
    h = chain_hamiltonian(reference_config(n, b0=b0), secular=secular)
    assert h.hermiticity_error() <= 1e-12


@settings(max_examples=50, deadline=None)
@given(n=ion_counts, a=spacings, g=gradients, b0=st.floats(0.5, 20.0))
def test_hyperfine_identity(n, a, g, b0):
    t = build_frequency_table(reference_config(n, spacing_a=a, gradient_dB0_dx=g, b0=b0))
    # exact up to rounding of the two ~1e11 Hz operands
    ulp = np.spacing(np.abs(t.f_e0).max())
    np.testing.assert_allclose(t.f_e0 - t.f_e1, TE125.hyperfine_A_over_h, rtol=0, atol=4 * ulp)


@settings(max_examples=50, deadline=None)
@given(n=ion_counts, a=spacings, g=gradients)
def test_gradient_linearity(n, a, g):
    cfg = reference_config(n, spacing_a=a, gradient_dB0_dx=g)
    t = build_frequency_table(cfg)
    steps = np.diff(t.f_e0)
    np.testing.assert_allclose(steps, steps[0], rtol=1e-6, atol=1e-3)
    for scale_a, scale_g in ((2.0, 1.0), (1.0, 2.0), (3.0, 0.5)):
        t2 = build_frequency_table(reference_config(n, spacing_a=a * scale_a, gradient_dB0_dx=g * scale_g))
        s = scale_a * scale_g
        assert t2.delta_f_e == pytest.approx(s * t.delta_f_e, rel=1e-9)
        assert t2.delta_f_n == pytest.approx(s * t.delta_f_n, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(a=spacings, theta=st.floats(0.0, math.pi))
def test_inverse_cube_law(a, theta):
    cfg = reference_config(8, spacing_a=a, chain_axis_angle_theta=theta)
    values = [dipole_shift(cfg, 0, k) * k**3 for k in range(1, 8)]
    np.testing.assert_allclose(values, values[0], rtol=1e-10, atol=1e-300)
