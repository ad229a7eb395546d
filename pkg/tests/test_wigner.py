"""Wigner pairings: identities, certified bounds, and the exact oracle."""

import math

import numpy as np
import pytest

from phonon.lattice import NormalMode, dft, integer_offsets
from phonon.symbols import (
    AdmissibleTestFunction,
    ConstantQ,
    ConstY,
    DirectionalQ,
    GaussianAtom,
    PlaneAtom,
    SymbolTerm,
    TrigPolyK,
    VmfY,
    WindowK,
)
from phonon.wigner import (
    _circular_interval,
    l2_wigner_pair,
    pad_field,
    wigner_pair,
    wigner_pair_exact,
)


def enveloped_mode(N, seed, width=0.2, center=(0.0, 0.0, 0.0)):
    """Random mode whose field decays away from ``center`` in the box."""
    rng = np.random.default_rng(seed)
    field = rng.normal(size=(N, N, N)) + 1j * rng.normal(size=(N, N, N))
    offs = integer_offsets(N)
    x = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1) / N
    d = x - np.asarray(center)
    d -= np.rint(d)   # envelope lives on the torus
    field *= np.exp(-np.pi * np.sum(d**2, axis=-1) / width**2)
    return NormalMode(dft(field), 0.0)


def dense_mode(N, seed):
    rng = np.random.default_rng(seed)
    psi_hat = rng.normal(size=(N, N, N)) + 1j * rng.normal(size=(N, N, N))
    return NormalMode(psi_hat, 0.0)


def random_symbol(rng):
    """Random admissible one- or two-term symbol mixing both routes."""
    terms = []
    f = GaussianAtom(center=rng.uniform(-0.1, 0.1, 3),
                     width=rng.uniform(0.15, 0.3),
                     modulation=rng.integers(-2, 3, 3).astype(float),
                     amplitude=complex(*rng.normal(size=2)))
    center = rng.integers(0, 3, 3) / 3.0
    terms.append(SymbolTerm(f, TrigPolyK.fejer_bump(center, 3),
                            ConstantQ(complex(*rng.normal(size=2)))))
    if rng.random() < 0.7:
        f2 = GaussianAtom(center=rng.uniform(-0.1, 0.1, 3),
                          width=rng.uniform(0.2, 0.35))
        y = VmfY(rng.normal(size=3), kappa=rng.uniform(0.0, 5.0))
        terms.append(SymbolTerm(f2, WindowK(scale=0.125),
                                DirectionalQ(y, R0=rng.uniform(2.0, 5.0))))
    return AdmissibleTestFunction(terms)


class TestLatticePairing:
    def test_constant_symbol_returns_mass(self):
        mode = dense_mode(16, 0)
        res = wigner_pair(mode, AdmissibleTestFunction.constant(1.0), p_max=0)
        assert res.truncation_error_bound == 0.0
        assert res.value == pytest.approx(mode.mass(), rel=1e-12)

    def test_point_mass_closed_form(self):
        # psi concentrated at gamma = 0 has a flat spectrum, so every S(p)
        # equals the k-average of conj(g h); the pairing collapses to
        # conj(sum of retained f coefficients) * conj(c0 h)
        N = 16
        field = np.zeros((N, N, N), dtype=np.complex128)
        field[0, 0, 0] = 1.0
        mode = NormalMode(dft(field), 0.0)
        f = GaussianAtom(center=[0.03, 0.0, -0.02], width=0.2)
        g = TrigPolyK.fejer_bump([0.25, 0.0, 0.0], 3)
        h = 0.8 - 0.3j
        a = AdmissibleTestFunction([SymbolTerm(f, g, ConstantQ(h))])
        res = wigner_pair(mode, a, p_max=N // 2)

        pts, coeffs = f.series_ball(N // 2)
        c0 = g.coeffs[np.all(g.offsets == 0, axis=1)][0]
        want = np.conj(np.sum(coeffs)) * np.conj(c0 * h)
        assert res.value == pytest.approx(want, rel=1e-10)
        # and the retained sum is close to f(0) (narrow atom, tiny tail)
        assert res.value == pytest.approx(np.conj(f(np.zeros(3)) * c0 * h),
                                          rel=2e-3)

    def test_truncated_within_bound_random_symbols(self):
        N = 12
        for seed in range(4):
            rng = np.random.default_rng(100 + seed)
            mode = enveloped_mode(N, seed, width=0.22)
            a = random_symbol(rng)
            res = wigner_pair(mode, a, p_max=N // 2)
            exact = wigner_pair_exact(mode, a)
            assert abs(res.value - exact) <= res.truncation_error_bound + 1e-12

    def test_support_crossing_the_seam_stays_within_bound(self):
        # envelope centered near the box edge: the midpoint interval check
        # falls back to the whole box and the sparse route has to wrap
        N = 12
        mode = enveloped_mode(N, 42, width=0.15, center=(0.45, 0.0, 0.0))
        f = GaussianAtom(center=[0.4, 0.0, 0.0], width=0.25)
        a = AdmissibleTestFunction([
            SymbolTerm(f, TrigPolyK.fejer_bump(np.zeros(3), 3), ConstantQ(1.0)),
            SymbolTerm(f, WindowK(0.125), DirectionalQ(ConstY(1.0), R0=3.0)),
        ])
        res = wigner_pair(mode, a, p_max=N // 2)
        exact = wigner_pair_exact(mode, a)
        assert abs(res.value - exact) <= res.truncation_error_bound + 1e-12

    def test_spatial_marginal_matches_energy_pairing(self):
        from phonon.lattice import energy_pairing

        N = 32
        for seed, width in ((0, 0.15), (1, 0.2)):
            mode = dense_mode(N, seed)
            f = GaussianAtom(center=[0.05, -0.04, 0.0], width=width)
            a = AdmissibleTestFunction.from_spatial(f)
            res = wigner_pair(mode, a, p_max=N // 2)
            marginal = energy_pairing(mode, f)
            assert abs(res.value - marginal) <= (
                1e-8 * abs(marginal) + res.truncation_error_bound)

    def test_conjugate_linearity_in_the_symbol(self):
        N = 12
        mode = enveloped_mode(N, 7)
        f = GaussianAtom(center=np.zeros(3), width=0.2)
        g = TrigPolyK.fejer_bump([0.25, 0.0, 0.0], 3)
        a = AdmissibleTestFunction([SymbolTerm(f, g, ConstantQ(1.0))])
        c = 0.3 - 1.1j
        f_scaled = GaussianAtom(f.center, f.width, f.modulation, c)
        a_scaled = AdmissibleTestFunction([SymbolTerm(f_scaled, g, ConstantQ(1.0))])
        r = wigner_pair(mode, a, p_max=6)
        r_scaled = wigner_pair(mode, a_scaled, p_max=6)
        assert r_scaled.value == pytest.approx(np.conj(c) * r.value, rel=1e-12)

    def test_additive_over_terms(self):
        N = 12
        mode = enveloped_mode(N, 3)
        f = GaussianAtom(center=[0.05, 0.0, 0.0], width=0.25)
        t1 = SymbolTerm(f, TrigPolyK.fejer_bump(np.zeros(3), 3), ConstantQ(0.5))
        t2 = SymbolTerm(f, WindowK(0.125), DirectionalQ(ConstY(1.0), R0=3.0))
        r1 = wigner_pair(mode, AdmissibleTestFunction([t1]), p_max=6)
        r2 = wigner_pair(mode, AdmissibleTestFunction([t2]), p_max=6)
        r12 = wigner_pair(mode, AdmissibleTestFunction([t1, t2]), p_max=6)
        assert r12.value == pytest.approx(r1.value + r2.value, rel=1e-12)
        assert r12.truncation_error_bound == pytest.approx(
            r1.truncation_error_bound + r2.truncation_error_bound, rel=1e-12)

    def test_p_max_validation(self):
        mode = dense_mode(8, 0)
        a = AdmissibleTestFunction.constant(1.0)
        with pytest.raises(ValueError):
            wigner_pair(mode, a, p_max=5)
        with pytest.raises(ValueError):
            wigner_pair(mode, a, p_max=-1)
        with pytest.raises(TypeError):
            wigner_pair(mode, lambda x, k, q: 1.0, p_max=2)

    def test_exact_refuses_large_boxes(self):
        mode = dense_mode(32, 0)
        with pytest.raises(ValueError):
            wigner_pair_exact(mode, AdmissibleTestFunction.constant(1.0))


class TestPadding:
    def test_pad_field_interleaves_spectrum(self):
        # doubling the box must leave values at the original wave numbers
        # untouched: FFT of the padded field at even indices == original DFT
        N = 8
        rng = np.random.default_rng(1)
        field = rng.normal(size=(N, N, N)) + 1j * rng.normal(size=(N, N, N))
        big = np.fft.fftn(pad_field(field, 2 * N))
        assert big[::2, ::2, ::2] == pytest.approx(dft(field), rel=1e-12)

    def test_pad_field_rejects_shrinking(self):
        with pytest.raises(ValueError):
            pad_field(np.zeros((8, 8, 8)), 4)

    def test_circular_interval_plain_and_wrapped(self):
        mask = np.zeros(10, dtype=bool)
        mask[3:6] = True
        assert _circular_interval(mask) == (3, 3)
        mask = np.zeros(10, dtype=bool)
        mask[8:] = True
        mask[:2] = True
        assert _circular_interval(mask) == (8, 4)
        assert _circular_interval(np.ones(4, dtype=bool)) == (0, 4)
        assert _circular_interval(np.zeros(4, dtype=bool)) == (0, 0)


class MacroStub:
    """Minimal field carrier for the continuum pairing."""

    def __init__(self, values, box_side):
        self.values = values
        self.box_side = box_side

    def norm_sq(self):
        h = self.box_side / self.values.shape[0]
        return float(np.sum(np.abs(self.values) ** 2) * h**3)


def make_macro(M, L, seed, width=1.0):
    rng = np.random.default_rng(seed)
    offs = integer_offsets(M)
    x = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1) * (L / M)
    vals = rng.normal(size=(M, M, M)) + 1j * rng.normal(size=(M, M, M))
    vals *= np.exp(-np.pi * np.sum(x**2, axis=-1) / width**2)
    return MacroStub(vals, L)


class TestContinuumPairing:
    def test_constant_returns_squared_norm(self):
        phi = make_macro(16, 4.0, 0)
        res = l2_wigner_pair(phi, AdmissibleTestFunction.constant(1.0))
        assert res.value == pytest.approx(phi.norm_sq(), rel=1e-12)
        assert res.truncation_error_bound == 0.0

    def test_gaussian_weight_matches_direct_sum(self):
        M, L = 16, 4.0
        phi = make_macro(M, L, 5, width=0.9)
        f = GaussianAtom(center=[0.3, 0.0, -0.5], width=1.0)
        res = l2_wigner_pair(phi, AdmissibleTestFunction.from_spatial(f),
                             p_max=M // 2)
        offs = integer_offsets(M)
        x = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1) * (L / M)
        direct = complex(np.sum(np.conj(f(x)) * np.abs(phi.values) ** 2) * (L / M) ** 3)
        assert abs(res.value - direct) <= res.truncation_error_bound + 1e-9

    def test_directional_weight_matches_roll_brute_force(self):
        M, L = 8, 2.0
        phi = make_macro(M, L, 9, width=0.5)
        f = GaussianAtom(center=np.zeros(3), width=0.8)
        y = VmfY([1.0, 0.0, 0.0], 2.0)
        b = AdmissibleTestFunction([
            SymbolTerm(f, WindowK(0.125), DirectionalQ(y, R0=1.5))])
        res = l2_wigner_pair(phi, b, p_max=3)

        # brute force with rolls on the doubled grid
        h = L / M
        Phi = (h**3) * np.fft.fftn(pad_field(phi.values, 2 * M))
        ax = np.fft.fftfreq(2 * M) * M / L
        q = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
        W = np.conj(complex(b.terms[0].k(np.zeros(3))) * b.terms[0].q(q))
        from phonon.wigner import _macro_series_ball

        pts, coeffs = _macro_series_ball(f, 3, L)
        want = 0.0 + 0.0j
        for p, c in zip(pts, coeffs):
            shift_m = np.roll(Phi, shift=tuple(p), axis=(0, 1, 2))
            shift_p = np.roll(Phi, shift=tuple(-p), axis=(0, 1, 2))
            S = np.sum(W * np.conj(shift_m) * shift_p) / (2.0 * L) ** 3
            want += np.conj(c) * S
        assert res.value == pytest.approx(want, rel=1e-10)

    def test_scale_guard(self):
        phi = make_macro(8, 2.0, 0)
        with pytest.raises(ValueError):
            l2_wigner_pair(phi, AdmissibleTestFunction.constant(1.0), scale=2)
