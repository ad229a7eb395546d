import math

import numpy as np
import pytest

from phonon import (
    CouplingStencil,
    GaugeError,
    LatticeState,
    NormalMode,
    StencilFormatError,
    dft,
    idft,
    evolve_leapfrog,
    evolve_spectral,
    from_normal_mode,
    hamiltonian,
    to_normal_mode,
)
from phonon.dispersion import DispersionModel
from phonon.lattice import energy_pairing, integer_offsets

NN = CouplingStencil.named("nn")
DISP = DispersionModel(NN)


def random_state(N, seed, zero_mean_u=True, zero_mean_v=False):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((N, N, N))
    v = rng.standard_normal((N, N, N))
    if zero_mean_u:
        u -= u.mean()
    if zero_mean_v:
        v -= v.mean()
    return LatticeState(u, v)


def delta_field(N):
    f = np.zeros((N, N, N))
    f[0, 0, 0] = 1.0
    return f


# ---------------------------------------------------------------------------
# stencil parsing
# ---------------------------------------------------------------------------


def test_nn_stencil_table():
    assert NN.offsets.shape == (7, 3)
    assert NN.values.sum() == 0.0
    assert NN.radius == 1


def test_stencil_text_round_trip():
    text = NN.to_text()
    again = CouplingStencil.from_text(text)
    assert np.array_equal(again.offsets, NN.offsets)
    assert np.array_equal(again.values, NN.values)


def test_stencil_rejects_asymmetric():
    with pytest.raises(StencilFormatError, match="symmetric"):
        CouplingStencil.from_text("0 0 0 2\n1 0 0 -1\n")


def test_stencil_rejects_mismatched_mirror_value():
    with pytest.raises(StencilFormatError, match="symmetric"):
        CouplingStencil.from_text("0 0 0 2\n1 0 0 -1\n-1 0 0 -0.5\n")


def test_stencil_rejects_duplicates():
    with pytest.raises(StencilFormatError, match="duplicate"):
        CouplingStencil.from_text("0 0 0 2\n0 0 0 2\n")


def test_stencil_rejects_complex_values():
    with pytest.raises(StencilFormatError, match="real"):
        CouplingStencil(np.zeros((1, 3)), np.array([1.0 + 1.0j]))


def test_stencil_rejects_malformed_line():
    with pytest.raises(StencilFormatError, match="line 2"):
        CouplingStencil.from_text("0 0 0 2\n1 0 0\n")


def test_unknown_stencil_name():
    with pytest.raises(StencilFormatError):
        CouplingStencil.named("next-nearest")


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def test_dft_of_delta_is_constant():
    N = 8
    out = dft(delta_field(N))
    assert np.allclose(out, 1.0, atol=1e-13)


def test_dft_of_constant_is_delta():
    N = 8
    out = dft(np.ones((N, N, N)))
    expected = np.zeros((N, N, N))
    expected[0, 0, 0] = N**3
    assert np.allclose(out, expected, atol=1e-9)


def test_dft_round_trip():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((16, 16, 16)) + 1j * rng.standard_normal((16, 16, 16))
    back = idft(dft(x))
    assert np.max(np.abs(back - x)) <= 1e-12 * np.max(np.abs(x))


def test_parseval():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((12, 12, 12)) + 1j * rng.standard_normal((12, 12, 12))
    lhs = np.sum(np.abs(x) ** 2)
    rhs = np.sum(np.abs(dft(x)) ** 2) / 12**3
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_dft_rejects_odd_and_nonfinite():
    with pytest.raises(ValueError, match="even"):
        dft(np.zeros((5, 5, 5)))
    bad = np.zeros((4, 4, 4))
    bad[1, 2, 3] = np.nan
    with pytest.raises(ValueError, match="finite"):
        dft(bad)


def test_integer_offsets_order():
    assert list(integer_offsets(6)) == [0, 1, 2, -3, -2, -1]


# ---------------------------------------------------------------------------
# hamiltonian
# ---------------------------------------------------------------------------


def test_hamiltonian_displacement_delta():
    N = 8
    state = LatticeState(delta_field(N), np.zeros((N, N, N)))
    assert hamiltonian(state, NN) == pytest.approx(3.0, rel=1e-14)


def test_hamiltonian_zero_state():
    N = 8
    state = LatticeState(np.zeros((N, N, N)), np.zeros((N, N, N)))
    assert hamiltonian(state, NN) == 0.0


def test_hamiltonian_velocity_delta():
    N = 8
    state = LatticeState(np.zeros((N, N, N)), delta_field(N))
    assert hamiltonian(state, NN) == pytest.approx(0.5, rel=1e-14)


def test_hamiltonian_rejects_oversized_stencil():
    wide = CouplingStencil.from_text("0 0 0 2\n2 0 0 -1\n-2 0 0 -1\n")
    state = random_state(4, 0)
    with pytest.raises(ValueError, match="fit"):
        hamiltonian(state, wide)


# ---------------------------------------------------------------------------
# normal-mode maps
# ---------------------------------------------------------------------------


def test_mode_of_velocity_delta_is_constant_imaginary():
    N = 8
    state = LatticeState(np.zeros((N, N, N)), delta_field(N))
    mode = to_normal_mode(state, DISP)
    assert np.allclose(mode.psi_hat, 1j / math.sqrt(2.0), atol=1e-13)


def test_mode_of_pure_displacement():
    state = random_state(8, 7)
    state.v[:] = 0.0
    mode = to_normal_mode(state, DISP)
    expected = DISP.omega_grid(8) * dft(state.u) / math.sqrt(2.0)
    assert np.allclose(mode.psi_hat, expected, atol=1e-12)


def test_mode_mass_equals_energy():
    for seed in range(5):
        state = random_state(10, seed)
        mode = to_normal_mode(state, DISP)
        assert mode.mass() == pytest.approx(hamiltonian(state, NN), rel=1e-10)


def test_companion_mode_reflection():
    # psi_minus = (omega u_hat - i v_hat)/sqrt(2) must equal conj(psi_plus(-k))
    state = random_state(8, 11)
    omega = DISP.omega_grid(8)
    u_hat, v_hat = dft(state.u), dft(state.v)
    psi_p = (omega * u_hat + 1j * v_hat) / math.sqrt(2.0)
    psi_m = (omega * u_hat - 1j * v_hat) / math.sqrt(2.0)
    refl = np.roll(psi_p[::-1, ::-1, ::-1], (1, 1, 1), (0, 1, 2))
    assert np.max(np.abs(psi_m - np.conj(refl))) <= 1e-12 * np.max(np.abs(psi_p))


def test_round_trip_zero_mean_displacement():
    state = random_state(8, 13)
    back = from_normal_mode(to_normal_mode(state, DISP), DISP)
    assert np.max(np.abs(back.u - state.u)) <= 1e-10
    assert np.max(np.abs(back.v - state.v)) <= 1e-10


def test_round_trip_recovers_velocity_delta():
    N = 8
    state = LatticeState(np.zeros((N, N, N)), delta_field(N))
    back = from_normal_mode(to_normal_mode(state, DISP), DISP)
    assert np.max(np.abs(back.u)) <= 1e-12
    assert np.max(np.abs(back.v - state.v)) <= 1e-12


def test_gauge_error_on_real_zero_mode():
    N = 8
    psi = np.zeros((N, N, N), dtype=complex)
    psi[0, 0, 0] = 1.0
    with pytest.raises(GaugeError):
        from_normal_mode(NormalMode(psi), DISP)


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def test_spectral_t0_is_identity():
    state = random_state(8, 17)
    mode = to_normal_mode(state, DISP)
    out = evolve_spectral(mode, DISP, 0.0)
    assert np.array_equal(out.psi_hat, mode.psi_hat)


def test_spectral_norm_invariance():
    state = random_state(8, 19)
    mode = to_normal_mode(state, DISP)
    out = evolve_spectral(mode, DISP, 100.0)
    assert out.mass() == pytest.approx(mode.mass(), rel=1e-12)
    out = evolve_spectral(mode, DISP, -703.25)
    assert out.mass() == pytest.approx(mode.mass(), rel=1e-12)


def test_spectral_single_mode_phase():
    N = 8
    j = (1, 3, 6)
    psi = np.zeros((N, N, N), dtype=complex)
    psi[j] = 1.0
    t = 2.75
    out = evolve_spectral(NormalMode(psi), DISP, t)
    k0 = np.array(j) / N
    expected = np.exp(-1j * float(DISP.omega(k0)) * t)
    assert out.psi_hat[j] == pytest.approx(expected, rel=1e-12)
    assert out.time == t


def test_spectral_composition():
    state = random_state(8, 23)
    mode = to_normal_mode(state, DISP)
    one = evolve_spectral(evolve_spectral(mode, DISP, 0.7), DISP, 1.6)
    two = evolve_spectral(mode, DISP, 2.3)
    assert np.max(np.abs(one.psi_hat - two.psi_hat)) <= 1e-12 * np.max(np.abs(mode.psi_hat))


def test_leapfrog_zero_steps_is_identity():
    state = random_state(8, 29)
    out = evolve_leapfrog(state, NN, 0.1, 0)
    assert np.array_equal(out.u, state.u)
    assert np.array_equal(out.v, state.v)


def _leapfrog_error(state, dt, t_final):
    steps = int(round(t_final / dt))
    lf = evolve_leapfrog(state, NN, dt, steps)
    sp = from_normal_mode(
        evolve_spectral(to_normal_mode(state, DISP), DISP, t_final), DISP
    )
    return max(np.max(np.abs(lf.u - sp.u)), np.max(np.abs(lf.v - sp.v)))


def test_leapfrog_second_order():
    # spectral evolution is exact, so the dt scaling of the gap is the order
    state = random_state(8, 31, zero_mean_u=True, zero_mean_v=True)
    e1 = _leapfrog_error(state, 0.05, 1.0)
    e2 = _leapfrog_error(state, 0.025, 1.0)
    order = math.log2(e1 / e2)
    assert 1.8 <= order <= 2.2


def test_leapfrog_energy_drift():
    state = random_state(8, 37)
    h0 = hamiltonian(state, NN)
    out = evolve_leapfrog(state, NN, 1e-3, 10_000)
    assert hamiltonian(out, NN) == pytest.approx(h0, rel=1e-4)
    assert out.time == pytest.approx(10.0)


def test_leapfrog_blowup_detection():
    state = random_state(8, 41)
    with pytest.raises(FloatingPointError):
        evolve_leapfrog(state, NN, 1.5, 400)   # above the stability threshold


# ---------------------------------------------------------------------------
# energy pairing
# ---------------------------------------------------------------------------


def test_energy_pairing_constant_test_function():
    state = random_state(8, 43)
    mode = to_normal_mode(state, DISP)
    val = energy_pairing(mode, lambda x: np.ones(x.shape[:-1]))
    assert val.imag == pytest.approx(0.0, abs=1e-12)
    assert val.real == pytest.approx(mode.mass(), rel=1e-12)


def test_energy_pairing_delta_mode():
    N = 8
    psi = np.ones((N, N, N), dtype=complex)   # position-space delta at 0
    mode = NormalMode(psi)

    def gauss(x):
        return np.exp(-np.pi * np.sum(x**2, axis=-1) / 0.04)

    val = energy_pairing(mode, gauss)
    assert val == pytest.approx(1.0, rel=1e-12)
