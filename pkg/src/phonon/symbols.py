"""Separable multiscale test functions a(x, k, q) = sum_i f_i(x) g_i(k) h_i(q).

The x-factors have closed-form Fourier transforms (Gaussian wave packets and
pure plane waves), the k-factors are trigonometric polynomials on the torus
or smooth compactly supported radial windows, and the q-factors are either
constants or direction symbols ``eta(|q|) Y(q/|q|)`` that freeze to a
function of the direction alone outside a finite ball.

Structural rule: a term whose q-factor actually varies must carry a k-window
supported in ``|k| < 1/4``; this keeps the q-dependence confined to the
near-acoustic region and is enforced at construction, not checked at use.
All factors carry explicit sup/series bounds so pairings can report certified
truncation errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutoff import phi_radius, ramp_eta


class SymbolError(ValueError):
    """Raised for structurally inadmissible symbols."""


def _vec3(v, dtype=np.float64) -> np.ndarray:
    out = np.asarray(v, dtype=dtype).reshape(3)
    return out


# ---------------------------------------------------------------------------
# x-factors
# ---------------------------------------------------------------------------


@dataclass
class GaussianAtom:
    """``amplitude * exp(-pi |x-center|^2 / width^2) * exp(2 pi i modulation.x)``.

    Fourier transform (same phase convention as the lattice transforms):
    ``width^3 exp(-pi width^2 |p-p0|^2) exp(-2 pi i (p-p0).center)``.
    """

    center: np.ndarray
    width: float
    modulation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    amplitude: complex = 1.0

    def __post_init__(self):
        self.center = _vec3(self.center)
        self.modulation = _vec3(self.modulation)
        self.width = float(self.width)
        self.amplitude = complex(self.amplitude)
        if self.width <= 0.0:
            raise SymbolError("Gaussian width must be positive")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d2 = np.sum((x - self.center) ** 2, axis=-1)
        phase = 2.0 * math.pi * (x @ self.modulation)
        return self.amplitude * np.exp(-math.pi * d2 / self.width**2 + 1j * phase)

    def fourier(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        d = p - self.modulation
        mag = self.width**3 * np.exp(-math.pi * self.width**2 * np.sum(d * d, axis=-1))
        return self.amplitude * mag * np.exp(-2j * math.pi * (d @ self.center))

    def series_ball(self, p_max: int):
        """Integer points with non-negligible coefficients, and those values."""
        reach = math.sqrt(40.0 / math.pi) / self.width   # e^{-40} floor
        lo = np.maximum(np.ceil(self.modulation - reach), -p_max).astype(int)
        hi = np.minimum(np.floor(self.modulation + reach), p_max).astype(int)
        if np.any(hi < lo):
            return np.zeros((0, 3), dtype=int), np.zeros(0, dtype=complex)
        axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        return pts, self.fourier(pts)

    def tail_sum(self, p_max: int) -> float:
        """``sum_{|p|_inf > p_max} |fourier(p)|`` via per-axis partial sums."""
        w2 = self.width**2
        full, inside = 1.0, 1.0
        for nu in range(3):
            c = self.modulation[nu]
            grid = np.arange(math.floor(c) - p_max - 60, math.ceil(c) + p_max + 61)
            vals = np.exp(-math.pi * w2 * (grid - c) ** 2)
            full *= float(vals.sum())
            inside *= float(vals[(grid >= -p_max) & (grid <= p_max)].sum())
        return abs(self.amplitude) * self.width**3 * max(full - inside, 0.0)

    def periodization_sup(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """``sup_{x in [lo,hi]} sum_{m != 0} |f(x+m)|`` (box-interval distances)."""
        axis_sums = np.empty(3)
        for nu in range(3):
            ms = np.arange(-4, 5)
            target = self.center[nu] - ms           # f(x+m) peaks where x = c - m
            d = np.maximum(0.0, np.maximum(lo[nu] - target, target - hi[nu]))
            axis_sums[nu] = float(np.sum(np.exp(-math.pi * d**2 / self.width**2)))
        total = float(np.prod(axis_sums))
        m0 = np.exp(
            -math.pi
            * np.maximum(0.0, np.maximum(lo - self.center, self.center - hi)) ** 2
            / self.width**2
        )
        return abs(self.amplitude) * max(total - float(np.prod(m0)), 0.0)

    def sup(self) -> float:
        return abs(self.amplitude)

    def to_dict(self) -> dict:
        return {
            "kind": "gaussian",
            "center": self.center.tolist(),
            "width": self.width,
            "modulation": self.modulation.tolist(),
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }


@dataclass
class PlaneAtom:
    """``amplitude * exp(2 pi i p0.x)`` with integer p0: one exact series mode."""

    modulation: np.ndarray
    amplitude: complex = 1.0

    def __post_init__(self):
        mod = np.asarray(self.modulation)
        if not np.allclose(mod, np.rint(mod)):
            raise SymbolError("plane-wave modulation must be an integer vector")
        self.modulation = _vec3(np.rint(mod), dtype=np.int64)
        self.amplitude = complex(self.amplitude)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.amplitude * np.exp(
            2j * math.pi * (x @ self.modulation.astype(np.float64))
        )

    def series_ball(self, p_max: int):
        if np.max(np.abs(self.modulation)) <= p_max:
            return self.modulation[None, :].copy(), np.array([self.amplitude])
        return np.zeros((0, 3), dtype=int), np.zeros(0, dtype=complex)

    def tail_sum(self, p_max: int) -> float:
        return 0.0 if np.max(np.abs(self.modulation)) <= p_max else abs(self.amplitude)

    def periodization_sup(self, lo, hi) -> float:
        return 0.0    # already 1-periodic, the series is exact

    def sup(self) -> float:
        return abs(self.amplitude)

    def to_dict(self) -> dict:
        return {
            "kind": "plane",
            "modulation": self.modulation.tolist(),
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }


# ---------------------------------------------------------------------------
# k-factors
# ---------------------------------------------------------------------------


@dataclass
class TrigPolyK:
    """Finite Fourier series ``g(k) = sum_delta c_delta exp(2 pi i delta.k)``."""

    offsets: np.ndarray
    coeffs: np.ndarray

    is_trig_poly = True

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 3)
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        if len(self.offsets) != len(self.coeffs):
            raise SymbolError("offsets and coeffs length mismatch")
        keys = [tuple(d) for d in self.offsets]
        if len(set(keys)) != len(keys):
            raise SymbolError("duplicate offsets in trigonometric polynomial")

    @classmethod
    def constant(cls, value: complex) -> "TrigPolyK":
        return cls(np.zeros((1, 3), dtype=int), np.array([value]))

    @classmethod
    def fejer_bump(cls, center, n: int) -> "TrigPolyK":
        """Nonnegative bump of degree n-1 centered at ``center``; the family
        over centers j/n is an exact partition of unity on the torus."""
        if n < 1:
            raise SymbolError("fejer order must be >= 1")
        center = _vec3(center)
        ax = np.arange(-(n - 1), n)
        w1 = (1.0 - np.abs(ax) / n) / n
        offs = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        cs = (w1[offs[:, 0] + n - 1] * w1[offs[:, 1] + n - 1] * w1[offs[:, 2] + n - 1])
        phase = np.exp(-2j * math.pi * (offs @ center))
        return cls(offs, cs * phase)

    @property
    def degree(self) -> int:
        return int(np.max(np.abs(self.offsets)))

    def __call__(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        out = np.zeros(k.shape[:-1], dtype=complex)
        for d, c in zip(self.offsets, self.coeffs):
            out += c * np.exp(2j * math.pi * (k @ d.astype(np.float64)))
        return out

    def conj_table(self):
        """Offsets/coefficients of ``conj(g)``: coefficient conj(c) at -delta."""
        return -self.offsets, np.conj(self.coeffs)

    def l1(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def sup(self) -> float:
        return self.l1()

    def to_dict(self) -> dict:
        return {
            "kind": "trigpoly",
            "offsets": self.offsets.tolist(),
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
        }


@dataclass
class WindowK:
    """Smooth radial window ``amplitude * f(|k|/scale)``, support ``|k| <= 2 scale``.

    ``scale <= 1/8`` keeps the support inside ``|k|_inf < 1/4``, which is what
    admissibility demands of terms with varying q-factors.
    """

    scale: float = 0.125
    amplitude: complex = 1.0

    is_trig_poly = False

    def __post_init__(self):
        self.scale = float(self.scale)
        self.amplitude = complex(self.amplitude)
        if not 0.0 < self.scale <= 0.125:
            raise SymbolError("window scale must lie in (0, 1/8]")

    def __call__(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        folded = k - np.rint(k)
        r = np.linalg.norm(folded, axis=-1)
        return self.amplitude * phi_radius(r / self.scale)

    def sup(self) -> float:
        return abs(self.amplitude)

    def to_dict(self) -> dict:
        return {
            "kind": "window",
            "scale": self.scale,
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }


# ---------------------------------------------------------------------------
# q-factors
# ---------------------------------------------------------------------------


@dataclass
class ConstY:
    value: complex = 1.0

    def __call__(self, qhat: np.ndarray) -> np.ndarray:
        qhat = np.asarray(qhat, dtype=np.float64)
        return np.full(qhat.shape[:-1], complex(self.value))

    def sup(self) -> float:
        return abs(self.value)

    def to_dict(self) -> dict:
        return {"kind": "const", "value": [complex(self.value).real, complex(self.value).imag]}


@dataclass
class VmfY:
    """Smooth directional bump ``amplitude * exp(kappa (qhat.axis - 1))``."""

    axis: np.ndarray
    kappa: float
    amplitude: complex = 1.0

    def __post_init__(self):
        self.axis = _vec3(self.axis)
        norm = float(np.linalg.norm(self.axis))
        if norm == 0.0:
            raise SymbolError("direction axis must be nonzero")
        self.axis = self.axis / norm
        self.kappa = float(self.kappa)
        self.amplitude = complex(self.amplitude)
        if self.kappa < 0.0:
            raise SymbolError("kappa must be nonnegative")

    def __call__(self, qhat: np.ndarray) -> np.ndarray:
        qhat = np.asarray(qhat, dtype=np.float64)
        return self.amplitude * np.exp(self.kappa * ((qhat @ self.axis) - 1.0))

    def sup(self) -> float:
        return abs(self.amplitude)

    def to_dict(self) -> dict:
        return {
            "kind": "vmf",
            "axis": self.axis.tolist(),
            "kappa": self.kappa,
            "amplitude": [self.amplitude.real, self.amplitude.imag],
        }


@dataclass
class ConstantQ:
    value: complex = 1.0

    is_constant = True

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        return np.full(q.shape[:-1], complex(self.value))

    def radial_limit_y(self):
        return ConstY(self.value)

    def sup(self) -> float:
        return abs(complex(self.value))

    def to_dict(self) -> dict:
        return {
            "kind": "constant",
            "value": [complex(self.value).real, complex(self.value).imag],
        }


@dataclass
class DirectionalQ:
    """``eta(|q|) Y(q/|q|)``: 0 near q = 0, exactly ``Y(qhat)`` for |q| >= R0."""

    y: object
    R0: float = 8.0

    is_constant = False

    def __post_init__(self):
        self.R0 = float(self.R0)
        if self.R0 <= 0.0:
            raise SymbolError("R0 must be positive")

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        r = np.linalg.norm(q, axis=-1)
        safe = np.where(r[..., None] > 0.0, r[..., None], 1.0)
        return ramp_eta(r, self.R0) * self.y(q / safe)

    def radial_limit_y(self):
        return self.y

    def sup(self) -> float:
        return self.y.sup()

    def to_dict(self) -> dict:
        return {"kind": "directional", "R0": self.R0, "y": self.y.to_dict()}


# ---------------------------------------------------------------------------
# assembled symbols
# ---------------------------------------------------------------------------


@dataclass
class SymbolTerm:
    x: object
    k: object
    q: object

    def __post_init__(self):
        if not self.q.is_constant and self.k.is_trig_poly:
            raise SymbolError(
                "a term with varying q-factor needs a k-window vanishing for "
                "|k| >= 1/4; trigonometric k-factors are not allowed there"
            )


@dataclass
class AdmissibleTestFunction:
    """Finite sum of separable admissible terms."""

    terms: list

    def __post_init__(self):
        if not self.terms:
            raise SymbolError("symbol needs at least one term")
        self.terms = [
            t if isinstance(t, SymbolTerm) else SymbolTerm(*t) for t in self.terms
        ]

    # -- evaluation ----------------------------------------------------------

    def __call__(self, x, k, q) -> np.ndarray:
        """Pointwise a(x, k, q); arguments broadcast over a common batch."""
        total = None
        for t in self.terms:
            val = t.x(x) * t.k(k) * t.q(q)
            total = val if total is None else total + val
        return total

    def radial_limit(self, x, k, qhat) -> np.ndarray:
        """b(x, k, qhat): q-factors replaced by their large-|q| limits."""
        total = None
        for t in self.terms:
            val = t.x(x) * t.k(k) * t.q.radial_limit_y()(qhat)
            total = val if total is None else total + val
        return total

    def sup_bound(self) -> float:
        return sum(t.x.sup() * t.k.sup() * t.q.sup() for t in self.terms)

    # -- constructors ----------------------------------------------------------

    @classmethod
    def from_spatial(cls, *atoms) -> "AdmissibleTestFunction":
        """a(x, k, q) = f(x): the symbol whose pairing is the energy density."""
        one_k = TrigPolyK.constant(1.0)
        return cls([SymbolTerm(atom, one_k, ConstantQ(1.0)) for atom in atoms])

    @classmethod
    def constant(cls, value: complex = 1.0) -> "AdmissibleTestFunction":
        return cls([SymbolTerm(PlaneAtom(np.zeros(3), value),
                               TrigPolyK.constant(1.0), ConstantQ(1.0))])

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"x": t.x.to_dict(), "k": t.k.to_dict(), "q": t.q.to_dict()}
                for t in self.terms
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AdmissibleTestFunction":
        terms = []
        for td in data["terms"]:
            terms.append(SymbolTerm(
                _x_from_dict(td["x"]), _k_from_dict(td["k"]), _q_from_dict(td["q"])
            ))
        return cls(terms)


def _cplx(pair) -> complex:
    return complex(pair[0], pair[1])


def _x_from_dict(d: dict):
    if d["kind"] == "gaussian":
        return GaussianAtom(d["center"], d["width"], d["modulation"], _cplx(d["amplitude"]))
    if d["kind"] == "plane":
        return PlaneAtom(d["modulation"], _cplx(d["amplitude"]))
    raise SymbolError(f"unknown x-factor kind {d['kind']!r}")


def _k_from_dict(d: dict):
    if d["kind"] == "trigpoly":
        return TrigPolyK(np.array(d["offsets"]), np.array([_cplx(c) for c in d["coeffs"]]))
    if d["kind"] == "window":
        return WindowK(d["scale"], _cplx(d["amplitude"]))
    raise SymbolError(f"unknown k-factor kind {d['kind']!r}")


def _y_from_dict(d: dict):
    if d["kind"] == "const":
        return ConstY(_cplx(d["value"]))
    if d["kind"] == "vmf":
        return VmfY(d["axis"], d["kappa"], _cplx(d["amplitude"]))
    raise SymbolError(f"unknown direction factor kind {d['kind']!r}")


def _q_from_dict(d: dict):
    if d["kind"] == "constant":
        return ConstantQ(_cplx(d["value"]))
    if d["kind"] == "directional":
        return DirectionalQ(_y_from_dict(d["y"]), d["R0"])
    raise SymbolError(f"unknown q-factor kind {d['kind']!r}")
