"""Scalar harmonic lattice states, normal modes, and exact spectral evolution.

Conventions used throughout the package:

* Fields live on the periodic box ``gamma in {-N/2, ..., N/2-1}^3`` (N even),
  stored in FFT order, so ``field[0, 0, 0]`` is the origin and negative
  offsets wrap around.  :func:`integer_offsets` returns the signed offsets in
  that storage order.
* The discrete Fourier transform follows
  ``psi_hat(k) = sum_gamma exp(-2 pi i k . gamma) psi(gamma)`` on the dual
  grid ``k_j = j / N``; the torus carries total measure one, so integrals over
  k become ``N**-3`` times grid sums and Parseval reads
  ``sum |psi|^2 = N**-3 sum |psi_hat|^2``.  ``numpy.fft`` implements exactly
  this pair.
* The equation of motion is ``u''(gamma) = -(alpha * u)(gamma)`` with a real,
  symmetric, finitely supported coupling ``alpha``; the conserved energy is
  ``H = (sum v^2 + sum u (alpha * u)) / 2``.
* Normal modes: ``psi_hat = (omega u_hat + i v_hat) / sqrt(2)``.  The mode at
  ``k = 0`` has ``omega = 0``; real data make ``psi_hat(0)`` purely imaginary
  and the inverse map fixes the free constant by the zero-mean gauge
  ``u_hat(0) = 0``.  The lattice energy equals the squared mode norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NN_STENCIL_TEXT = """\
0 0 0 6
1 0 0 -1
-1 0 0 -1
0 1 0 -1
0 -1 0 -1
0 0 1 -1
0 0 -1 -1
"""

#: Relative tolerance for "this quantity should vanish" gauge checks.
GAUGE_TOL = 1e-9


class StencilFormatError(ValueError):
    """Raised for malformed, asymmetric, or non-real coupling tables."""


class GaugeError(ValueError):
    """Raised when mode data are incompatible with real (u, v) fields."""


# ---------------------------------------------------------------------------
# coupling stencil
# ---------------------------------------------------------------------------


@dataclass
class CouplingStencil:
    """Finite real coupling table ``alpha(gamma)`` with ``alpha(-g) = alpha(g)``.

    Parameters
    ----------
    offsets : (n, 3) int array
        Distinct lattice offsets carrying nonzero coupling.
    values : (n,) float array
        Coupling values, one per offset.
    """

    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 3)
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            if np.any(values.imag != 0.0):
                raise StencilFormatError("coupling values must be real")
            values = values.real
        self.values = np.asarray(values, dtype=np.float64).reshape(-1)
        if self.values.shape[0] != self.offsets.shape[0]:
            raise StencilFormatError("offsets and values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise StencilFormatError("coupling values must be finite")
        keys = [tuple(g) for g in self.offsets]
        if len(set(keys)) != len(keys):
            raise StencilFormatError("duplicate offsets in coupling table")
        table = dict(zip(keys, self.values))
        for g, a in table.items():
            mirrored = table.get((-g[0], -g[1], -g[2]))
            if mirrored is None or mirrored != a:
                raise StencilFormatError(
                    f"coupling is not symmetric at offset {g}: "
                    f"alpha(g)={a!r}, alpha(-g)={mirrored!r}"
                )

    @classmethod
    def named(cls, name: str) -> "CouplingStencil":
        """Built-in tables.  ``"nn"`` is the nearest-neighbour Laplacian."""
        if name == "nn":
            return cls.from_text(NN_STENCIL_TEXT)
        raise StencilFormatError(f"unknown stencil name {name!r}")

    @classmethod
    def from_text(cls, text: str) -> "CouplingStencil":
        """Parse ``g1 g2 g3 value`` lines; blank lines and ``#`` comments ok."""
        offsets, values = [], []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise StencilFormatError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            try:
                g = [int(p) for p in parts[:3]]
                a = float(parts[3])
            except ValueError as exc:
                raise StencilFormatError(f"line {lineno}: {exc}") from exc
            offsets.append(g)
            values.append(a)
        if not offsets:
            raise StencilFormatError("empty coupling table")
        return cls(np.array(offsets), np.array(values))

    @classmethod
    def from_file(cls, path) -> "CouplingStencil":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = [
            f"{g[0]} {g[1]} {g[2]} {float(v)!r}"
            for g, v in zip(self.offsets, self.values)
        ]
        return "\n".join(lines) + "\n"

    @property
    def radius(self) -> int:
        """Largest ``|gamma|_inf`` in the support."""
        return int(np.max(np.abs(self.offsets)))

    def convolve(self, u: np.ndarray) -> np.ndarray:
        """Periodic ``(alpha * u)(gamma) = sum_i alpha_i u(gamma - g_i)``."""
        out = np.zeros_like(u)
        for g, a in zip(self.offsets, self.values):
            out += a * np.roll(u, shift=tuple(g), axis=(0, 1, 2))
        return out


# ---------------------------------------------------------------------------
# grids and transforms
# ---------------------------------------------------------------------------


def integer_offsets(N: int) -> np.ndarray:
    """Signed offsets ``{-N/2..N/2-1}`` in FFT storage order, shape (N,)."""
    return np.rint(np.fft.fftfreq(N) * N).astype(np.int64)


def k_axis(N: int) -> np.ndarray:
    """Dual grid ``j/N`` along one axis in FFT order, shape (N,)."""
    return np.fft.fftfreq(N)


def k_grid(N: int) -> np.ndarray:
    """Full dual grid, shape (N, N, N, 3).  Prefer axis arrays for large N."""
    ax = k_axis(N)
    k1, k2, k3 = np.meshgrid(ax, ax, ax, indexing="ij")
    return np.stack([k1, k2, k3], axis=-1)


def dft(field: np.ndarray) -> np.ndarray:
    """Forward transform ``sum_gamma exp(-2 pi i k . gamma) field(gamma)``."""
    field = np.asarray(field)
    _check_cube(field, "field")
    if not np.all(np.isfinite(field)):
        raise ValueError("field contains non-finite entries")
    return np.fft.fftn(field)


def idft(field_hat: np.ndarray) -> np.ndarray:
    """Inverse transform (torus integral = normalized grid sum)."""
    field_hat = np.asarray(field_hat)
    _check_cube(field_hat, "field_hat")
    if not np.all(np.isfinite(field_hat)):
        raise ValueError("field contains non-finite entries")
    return np.fft.ifftn(field_hat)


def _check_cube(a: np.ndarray, name: str) -> int:
    if a.ndim != 3 or len({a.shape[0], a.shape[1], a.shape[2]}) != 1:
        raise ValueError(f"{name} must be a cubic 3d array, got shape {a.shape}")
    N = a.shape[0]
    if N % 2 != 0:
        raise ValueError(f"box size must be even, got N={N}")
    return N


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass
class LatticeState:
    """Real displacement/velocity pair on the periodic box.

    ``time`` is in lattice units; macroscopic time is ``eps * time`` with
    ``eps = 1/N``.
    """

    u: np.ndarray
    v: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        N = _check_cube(self.u, "u")
        if self.v.shape != self.u.shape:
            raise ValueError("u and v shapes differ")
        _check_cube(self.v, "v")
        self.N = N

    @property
    def eps(self) -> float:
        return 1.0 / self.N

    def copy(self) -> "LatticeState":
        return LatticeState(self.u.copy(), self.v.copy(), self.time)


@dataclass
class NormalMode:
    """Spectral normal-mode field ``psi_hat`` on the dual grid (FFT order)."""

    psi_hat: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.psi_hat = np.asarray(self.psi_hat, dtype=np.complex128)
        self.N = _check_cube(self.psi_hat, "psi_hat")
        self._field = None

    @property
    def eps(self) -> float:
        return 1.0 / self.N

    def mass(self) -> float:
        """Squared mode norm ``sum_gamma |psi(gamma)|^2`` (= lattice energy)."""
        return float(np.vdot(self.psi_hat, self.psi_hat).real) / self.N**3

    def field(self) -> np.ndarray:
        """Position-space mode ``psi(gamma)``, cached."""
        if self._field is None:
            self._field = idft(self.psi_hat)
        return self._field

    def copy(self) -> "NormalMode":
        return NormalMode(self.psi_hat.copy(), self.time)


# ---------------------------------------------------------------------------
# energy and mode maps
# ---------------------------------------------------------------------------


def _check_fit(stencil: CouplingStencil, N: int):
    if stencil.radius >= N // 2:
        raise ValueError(
            f"stencil radius {stencil.radius} does not fit in a box of side {N}"
        )


def hamiltonian(state: LatticeState, stencil: CouplingStencil) -> float:
    """Conserved energy ``(sum v^2 + sum u (alpha*u)) / 2``."""
    _check_fit(stencil, state.N)
    pot = float(np.sum(state.u * stencil.convolve(state.u)))
    kin = float(np.sum(state.v * state.v))
    return 0.5 * (kin + pot)


def to_normal_mode(state: LatticeState, dispersion) -> NormalMode:
    """Map real ``(u, v)`` to ``psi_hat = (omega u_hat + i v_hat)/sqrt(2)``."""
    omega = dispersion.omega_grid(state.N)
    u_hat = dft(state.u)
    v_hat = dft(state.v)
    psi_hat = (omega * u_hat + 1j * v_hat) / math.sqrt(2.0)
    return NormalMode(psi_hat, time=state.time)


def _reflect(a: np.ndarray) -> np.ndarray:
    """Index map ``j -> (-j) mod N`` on all three axes."""
    return np.roll(a[::-1, ::-1, ::-1], shift=(1, 1, 1), axis=(0, 1, 2))


def from_normal_mode(mode: NormalMode, dispersion) -> LatticeState:
    """Invert :func:`to_normal_mode` under the zero-mean gauge ``u_hat(0) = 0``.

    The companion mode is ``psi_hat_minus(k) = conj(psi_hat(-k))``, which is
    what makes the reconstructed fields real.  Raises :class:`GaugeError` if
    ``psi_hat(0)`` has a real part too large to gauge away, since no real
    ``(u, v)`` produces one.
    """
    N = mode.N
    omega = dispersion.omega_grid(N)
    psi_p = mode.psi_hat
    psi_m = np.conj(_reflect(psi_p))

    scale = float(np.max(np.abs(psi_p))) or 1.0
    if abs(psi_p[0, 0, 0].real) > GAUGE_TOL * scale:
        raise GaugeError(
            "Re psi_hat(0) = %.3e exceeds the gauge tolerance; "
            "no real (u, v) pair matches this mode" % psi_p[0, 0, 0].real
        )
    if np.any((omega == 0.0) & (np.abs(psi_p + psi_m) > GAUGE_TOL * scale)):
        zeros = int(np.count_nonzero(omega == 0.0))
        if zeros > 1:
            raise GaugeError("omega vanishes away from k=0; stencil is not regular acoustic")

    v_hat = -1j * (psi_p - psi_m) / math.sqrt(2.0)
    sum_hat = psi_p + psi_m
    u_hat = np.zeros_like(psi_p)
    nz = omega != 0.0
    u_hat[nz] = sum_hat[nz] / (math.sqrt(2.0) * omega[nz])

    u = idft(u_hat)
    v = idft(v_hat)
    imag = max(float(np.max(np.abs(u.imag))), float(np.max(np.abs(v.imag))))
    if imag > GAUGE_TOL * max(scale / N**1.5, 1e-300):
        raise GaugeError(f"reconstructed fields are not real (max imag {imag:.3e})")
    return LatticeState(u.real, v.real, time=mode.time)


def evolve_spectral(mode: NormalMode, dispersion, t: float) -> NormalMode:
    """Exact evolution ``psi_hat -> exp(-i omega t) psi_hat`` (lattice time)."""
    omega = dispersion.omega_grid(mode.N)
    return NormalMode(np.exp(-1j * omega * t) * mode.psi_hat, time=mode.time + t)


def evolve_leapfrog(state: LatticeState, stencil: CouplingStencil,
                    dt: float, steps: int) -> LatticeState:
    """Kick-drift-kick integrator, the time-domain check on spectral evolution.

    Second order in dt and stable for ``dt < 2 / max omega``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    _check_fit(stencil, state.N)
    u = state.u.copy()
    v = state.v.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        force = -stencil.convolve(u)
        for _ in range(steps):
            v_half = v + 0.5 * dt * force
            u = u + dt * v_half
            force = -stencil.convolve(u)
            v = v_half + 0.5 * dt * force
            if not np.isfinite(v[0, 0, 0]):
                raise FloatingPointError(
                    f"leapfrog diverged (dt={dt!r}; stability needs dt < 2/max(omega))"
                )
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise FloatingPointError("leapfrog produced non-finite fields")
    return LatticeState(u, v, time=state.time + steps * dt)


def lattice_points(N: int) -> np.ndarray:
    """Macroscopic positions ``eps * gamma`` in FFT order, shape (N, N, N, 3)."""
    ax = integer_offsets(N) / N
    x1, x2, x3 = np.meshgrid(ax, ax, ax, indexing="ij")
    return np.stack([x1, x2, x3], axis=-1)


def energy_pairing(mode: NormalMode, f) -> complex:
    """Pair the energy density against a test function:
    ``sum_gamma conj(f(eps gamma)) |psi(gamma)|^2``.

    ``f`` maps (..., 3) position arrays to complex values and is evaluated at
    the true (unwrapped) box positions.
    """
    density = np.abs(mode.field()) ** 2
    x = lattice_points(mode.N)
    values = np.conj(np.asarray(f(x), dtype=np.complex128))
    return complex(np.sum(values * density))
