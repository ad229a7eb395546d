"""Dispersion relation of the lattice: derivatives, certification, caustics.

Everything derives from the cosine sum
``lambda(k) = sum_gamma alpha(gamma) cos(2 pi gamma . k)`` and
``omega = sqrt(lambda)``.  Derivatives are analytic in the stencil; finite
differences of ``sqrt(lambda)`` are ill-conditioned near the acoustic
singularity at ``k = 0``, so they are never used internally.

Wave-number arguments are in torus units (the dual cell is ``[-1/2, 1/2)^3``)
and all formulas are 1-periodic in each component, so arguments outside the
cell are fine.  Macroscopic transport speeds carry the ``1/(2 pi)`` from the
``exp(2 pi i k . gamma)`` phase convention: a wave packet at ``k`` moves at
``grad omega(k) / (2 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import CouplingStencil, k_axis

TWO_PI = 2.0 * math.pi


@dataclass
class AcousticData:
    """Quadratic approximation at the acoustic point: ``omega0(q) = sqrt(q . A0 q)``."""

    A0: np.ndarray

    def __post_init__(self):
        self.A0 = np.asarray(self.A0, dtype=np.float64).reshape(3, 3)

    def omega0(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        quad = np.einsum("...i,ij,...j->...", q, self.A0, q)
        return np.sqrt(np.maximum(quad, 0.0))

    def grad_omega0(self, q: np.ndarray) -> np.ndarray:
        """``A0 q / omega0(q)``; 0-homogeneous, rejects q = 0 samples."""
        q = np.asarray(q, dtype=np.float64)
        w = self.omega0(q)
        if np.any(w == 0.0):
            raise ValueError("grad_omega0 is undefined at q = 0")
        return np.einsum("ij,...j->...i", self.A0, q) / w[..., None]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.A0)

    @property
    def isotropic_speed(self):
        """If ``A0 = s^2 I`` within 1e-9, the speed ``s`` (else None)."""
        s2 = float(np.trace(self.A0)) / 3.0
        if np.max(np.abs(self.A0 - s2 * np.eye(3))) <= 1e-9 * max(s2, 1.0):
            return math.sqrt(s2)
        return None


@dataclass
class AcousticCertificate:
    """Outcome of the regular-acoustic checks, with margins."""

    ok: bool
    failures: list
    lambda_at_zero: float
    grad_at_zero: np.ndarray
    A0_eigenvalues: np.ndarray
    min_lambda: float
    argmin_k: np.ndarray
    grid_resolution: int
    isotropic_speed: object = None

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failures": list(self.failures),
            "lambda_at_zero": self.lambda_at_zero,
            "grad_at_zero": [float(x) for x in self.grad_at_zero],
            "A0_eigenvalues": [float(x) for x in self.A0_eigenvalues],
            "min_lambda": self.min_lambda,
            "argmin_k": [float(x) for x in self.argmin_k],
            "grid_resolution": self.grid_resolution,
            "isotropic_speed": self.isotropic_speed,
        }


@dataclass
class CausticSlice:
    """Degenerate set ``det D^2 omega = 0`` mapped to the plane ``x3 = 0``."""

    t: float
    x: np.ndarray          # (M, 2) plane positions
    k: np.ndarray          # (M, 3) wave numbers producing them

    def scaled(self, t_new: float) -> "CausticSlice":
        return CausticSlice(t_new, self.x * (t_new / self.t), self.k)


@dataclass
class BallisticDensity:
    """Histogram of the free-flight map ``x = t grad omega / (2 pi)``."""

    t: float
    edges: tuple
    cell_mass: np.ndarray   # sums to 1 exactly

    @property
    def mass(self) -> float:
        return float(self.cell_mass.sum())


class DispersionModel:
    """Dispersion relation and its analytic derivatives for one stencil."""

    def __init__(self, stencil: CouplingStencil):
        self.stencil = stencil
        self._g = stencil.offsets.astype(np.float64)   # (n, 3)
        self._a = stencil.values                        # (n,)
        self._scale = float(np.sum(np.abs(self._a))) or 1.0
        self._grid_cache: dict = {}
        self._certificate: AcousticCertificate | None = None
        self._acoustic: AcousticData | None = None

    # -- pointwise evaluations ---------------------------------------------

    def lam(self, k: np.ndarray) -> np.ndarray:
        """``sum alpha(g) cos(2 pi g . k)`` for k of shape (..., 3)."""
        k = np.asarray(k, dtype=np.float64)
        out = np.zeros(k.shape[:-1])
        for g, a in zip(self._g, self._a):
            out += a * np.cos(TWO_PI * (k @ g))
        return out

    def omega(self, k: np.ndarray) -> np.ndarray:
        lam = self.lam(k)
        bad = lam < -1e-9 * self._scale
        if np.any(bad):
            kb = np.asarray(k, dtype=np.float64).reshape(-1, 3)[np.flatnonzero(np.ravel(bad))[0]]
            raise ValueError(
                f"lambda({tuple(kb)}) = {float(np.min(lam)):.3e} < 0; stencil is not stable"
            )
        return np.sqrt(np.maximum(lam, 0.0))

    def grad_lam(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        out = np.zeros(k.shape[:-1] + (3,))
        for g, a in zip(self._g, self._a):
            out += (-TWO_PI * a) * np.sin(TWO_PI * (k @ g))[..., None] * g
        return out

    def hess_lam(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        out = np.zeros(k.shape[:-1] + (3, 3))
        for g, a in zip(self._g, self._a):
            gg = np.outer(g, g)
            out += (-(TWO_PI**2) * a) * np.cos(TWO_PI * (k @ g))[..., None, None] * gg
        return out

    def grad_omega(self, k: np.ndarray) -> np.ndarray:
        """``grad lambda / (2 omega)``; rejects samples with omega = 0."""
        w = self.omega(k)
        if np.any(w == 0.0):
            raise ValueError("grad_omega is undefined where omega = 0 (k = 0)")
        return self.grad_lam(k) / (2.0 * w[..., None])

    def group_velocity(self, k: np.ndarray) -> np.ndarray:
        """Macroscopic transport speed ``grad omega(k) / (2 pi)``, k != 0."""
        return self.grad_omega(k) / TWO_PI

    def hess_omega(self, k: np.ndarray) -> np.ndarray:
        lam = self.lam(k)
        if np.any(lam <= 0.0):
            raise ValueError("hess_omega is undefined where lambda = 0")
        w = np.sqrt(lam)
        gl = self.grad_lam(k)
        hl = self.hess_lam(k)
        outer = gl[..., :, None] * gl[..., None, :]
        return (hl - outer / (2.0 * lam[..., None, None])) / (2.0 * w[..., None, None])

    # -- grids ----------------------------------------------------------------

    def omega_grid(self, N: int) -> np.ndarray:
        """``omega`` on the full dual grid ``j/N`` in FFT order, cached per N."""
        cached = self._grid_cache.get(N)
        if cached is not None:
            return cached
        ax = k_axis(N)
        lam = np.zeros((N, N, N))
        for g, a in zip(self.stencil.offsets, self._a):
            phase = TWO_PI * (
                g[0] * ax[:, None, None] + g[1] * ax[None, :, None] + g[2] * ax[None, None, :]
            )
            lam += a * np.cos(phase)
        np.maximum(lam, 0.0, out=lam)
        grid = np.sqrt(lam)
        self._grid_cache[N] = grid
        return grid

    # -- acoustic structure -----------------------------------------------

    @property
    def acoustic(self) -> AcousticData:
        if self._acoustic is None:
            A0 = np.zeros((3, 3))
            for g, a in zip(self._g, self._a):
                A0 += a * np.outer(g, g)
            A0 *= -(TWO_PI**2) / 2.0
            self._acoustic = AcousticData(A0)
        return self._acoustic

    def certify(self, grid_resolution: int = 48) -> AcousticCertificate:
        """Check the regular-acoustic conditions, with margins.

        Conditions: ``lambda(0) = 0``; ``grad lambda(0) = 0``; ``A0`` positive
        definite; ``lambda > 0`` on a grid excluding the origin.  The grid
        minimum and its location are reported either way.
        """
        failures = []
        lam0 = float(self.lam(np.zeros(3)))
        if abs(lam0) > 1e-12 * self._scale:
            failures.append(f"lambda(0) = {lam0:.3e} != 0")
        grad0 = self.grad_lam(np.zeros(3))
        if np.max(np.abs(grad0)) > 1e-12 * self._scale:
            failures.append("grad lambda(0) != 0")
        eig = self.acoustic.eigenvalues
        if eig.min() <= 1e-12 * max(eig.max(), 1.0):
            failures.append(f"A0 is not positive definite (eigenvalues {eig})")

        n = grid_resolution
        ax = (np.arange(n) + 0.5) / n - 0.5   # cell centers, origin excluded
        lam = np.zeros((n, n, n))
        for g, a in zip(self._g, self._a):
            phase = TWO_PI * (
                g[0] * ax[:, None, None] + g[1] * ax[None, :, None] + g[2] * ax[None, None, :]
            )
            lam += a * np.cos(phase)
        imin = np.unravel_index(int(np.argmin(lam)), lam.shape)
        min_lambda = float(lam[imin])
        argmin_k = np.array([ax[imin[0]], ax[imin[1]], ax[imin[2]]])
        if min_lambda <= 0.0:
            failures.append(f"lambda({tuple(argmin_k)}) = {min_lambda:.3e} <= 0 away from origin")

        cert = AcousticCertificate(
            ok=not failures,
            failures=failures,
            lambda_at_zero=lam0,
            grad_at_zero=grad0,
            A0_eigenvalues=eig,
            min_lambda=min_lambda,
            argmin_k=argmin_k,
            grid_resolution=n,
            isotropic_speed=self.acoustic.isotropic_speed if not failures else None,
        )
        self._certificate = cert
        return cert

    @property
    def is_regular_acoustic(self) -> bool:
        if self._certificate is None:
            self.certify()
        return self._certificate.ok

    def max_group_speed(self, n_grid: int = 256) -> float:
        """``sup_k |grad omega| / (2 pi)`` over a grid plus the ``k -> 0`` limit.

        The limit along direction u gives speeds up to
        ``sqrt(max eig A0) / (2 pi)``, which a grid never quite reaches when
        the supremum sits at the singularity.
        """
        limit = math.sqrt(float(self.acoustic.eigenvalues.max())) / TWO_PI
        ax = (np.arange(n_grid) + 0.5) / n_grid - 0.5
        best = 0.0
        for i in range(n_grid):                     # chunk rows: n_grid^3 points total
            k1 = np.full((n_grid, n_grid), ax[i])
            k2, k3 = np.meshgrid(ax, ax, indexing="ij")
            k = np.stack([k1, k2, k3], axis=-1)
            lam = self.lam(k)
            gl = self.grad_lam(k)
            speed2 = np.einsum("...i,...i->...", gl, gl) / np.maximum(4.0 * lam, 1e-300)
            best = max(best, float(speed2.max()))
        return max(limit, math.sqrt(best) / TWO_PI)

    # -- caustics ----------------------------------------------------------

    def _det_hess_omega(self, k: np.ndarray) -> np.ndarray:
        return np.linalg.det(self.hess_omega(k))

    def _caustic_points_on_subtorus(self, k3: float, n_grid: int,
                                    bisect_steps: int, k_min: float) -> np.ndarray:
        """Zeros of ``det D^2 omega`` on the plane ``k = (k1, k2, k3)``.

        Sign changes along grid edges, then bisection.  The grid is
        cell-centered and symmetric under negation, which preserves the
        lattice symmetries of the zero set to round-off.
        """
        ax = (np.arange(n_grid) + 0.5) / n_grid - 0.5
        det = np.empty((n_grid, n_grid))
        for i in range(0, n_grid, 64):
            j = min(i + 64, n_grid)
            k1, k2 = np.meshgrid(ax[i:j], ax, indexing="ij")
            k = np.stack([k1, k2, np.full_like(k1, k3)], axis=-1)
            det[i:j] = self._det_hess_omega(k)

        pts = []
        sgn = np.sign(det)
        for axis in (0, 1):
            if axis == 0:
                flip = sgn[:-1, :] * sgn[1:, :] < 0
                ia, ja = np.nonzero(flip)
                a = np.stack([ax[ia], ax[ja]], axis=-1)
                b = np.stack([ax[ia + 1], ax[ja]], axis=-1)
                da = det[ia, ja]
            else:
                flip = sgn[:, :-1] * sgn[:, 1:] < 0
                ia, ja = np.nonzero(flip)
                a = np.stack([ax[ia], ax[ja]], axis=-1)
                b = np.stack([ax[ia], ax[ja + 1]], axis=-1)
                da = det[ia, ja]
            if len(ia) == 0:
                continue
            a = a.astype(np.float64)
            b = b.astype(np.float64)
            for _ in range(bisect_steps):
                mid = 0.5 * (a + b)
                kmid = np.concatenate([mid, np.full((len(mid), 1), k3)], axis=1)
                dm = self._det_hess_omega(kmid)
                take_a = (np.sign(dm) == np.sign(da)) | (dm == 0.0)
                a = np.where(take_a[:, None], mid, a)
                da = np.where(take_a, dm, da)
                b = np.where(take_a[:, None], b, mid)
            mid = 0.5 * (a + b)
            kpts = np.concatenate([mid, np.full((len(mid), 1), k3)], axis=1)
            keep = np.linalg.norm(kpts, axis=1) >= k_min
            pts.append(kpts[keep])
        if not pts:
            return np.zeros((0, 3))
        return np.concatenate(pts, axis=0)

    def caustic_slice(self, t: float, n_grid: int = 2048, bisect_steps: int = 40,
                      k_min: float = 1e-3) -> CausticSlice:
        """Caustic points in the plane ``x3 = 0`` at time ``t``.

        For stencils even in each coordinate, ``d omega / d k3`` vanishes on
        the sub-tori ``k3 = 0`` and ``k3 = 1/2``, so wave numbers there are
        exactly the ones transported into the plane.  Output scales linearly
        in t.
        """
        k_all = []
        for k3 in (0.0, 0.5):
            k_all.append(self._caustic_points_on_subtorus(k3, n_grid, bisect_steps, k_min))
        k_pts = np.concatenate(k_all, axis=0)
        if len(k_pts) == 0:
            return CausticSlice(t, np.zeros((0, 2)), k_pts)
        v = self.group_velocity(k_pts)
        x = t * v[:, :2]
        return CausticSlice(t, x, k_pts)

    # -- ballistic transport ------------------------------------------------

    def ballistic_density(self, t: float, n_axis: int = 128, bins: int = 128,
                          seed: int = 0, x_range: float | None = None) -> BallisticDensity:
        """Stratified pushforward of the uniform k-measure through ``t * v(k)``.

        One jittered sample per cell of an ``n_axis^3`` partition of the dual
        cell, each carrying mass ``n_axis**-3``; the histogram range is padded
        to contain every sample so the total mass is exactly 1.
        """
        if t <= 0.0:
            raise ValueError("ballistic_density needs t > 0")
        rng = np.random.default_rng(seed)
        idx = (np.arange(n_axis) + 0.0) / n_axis
        base = np.stack(np.meshgrid(idx, idx, idx, indexing="ij"), axis=-1).reshape(-1, 3)
        k = base + rng.random(base.shape) / n_axis - 0.5
        x = np.empty_like(k)
        chunk = 1 << 18
        for i in range(0, len(k), chunk):
            x[i:i + chunk] = t * self.group_velocity(k[i:i + chunk])
        if x_range is None:
            x_range = float(np.max(np.abs(x))) * (1.0 + 1e-9)
        edges = np.linspace(-x_range, x_range, bins + 1)
        hist, used_edges = np.histogramdd(x, bins=(edges, edges, edges))
        hist /= float(len(k))
        return BallisticDensity(t, tuple(used_edges), hist)

    # -- empirical regularity constants --------------------------------------

    def verify_lemma_bounds(self, n_samples: int = 200_000,
                            eps_list=(1 / 16, 1 / 32, 1 / 64, 1 / 128),
                            seed: int = 0) -> dict:
        """Empirical constants for the regularity inequalities of the dispersion.

        Five suprema/infima over explicitly stated admissible sets:

        * C1: ``inf omega(k)/|k|`` over ``|k|_inf <= 3/4``
        * C2: ``sup |grad lambda(k)|/|k|`` over the same box
        * C3: second-difference bound ``|omega(k+eps p/2) - omega(k-eps p/2)
          - eps p . grad omega(k)| <= C3 eps^2 |p|^2 / |k|`` for ``|k| > eps |p|``
        * C4: ``|[omega - omega0](eps q+) - [omega - omega0](eps q-)|
          <= C4 eps^2 |p| |q|`` for ``q+- = q +- p/2``, ``|p|, |q|_inf <= 1/(2 eps)``
        * C5: ``|omega0(q+) - omega0(q-) - p . grad omega0(q/|q|)| <= C5 |p|^2/|q|``
          for ``|p| <= |q|``

        Sampling is deterministic (seeded) and biased toward the regions where
        each ratio peaks; the first half of each stream is a prefix of the
        full stream, so ``rel_change`` measures stability under doubling.
        Values are estimates of the best constants, not certified bounds.
        """
        n2 = 2 * int(n_samples)
        rng = np.random.default_rng(seed)
        report = {}

        def record(name, ratios):
            ratios = np.asarray(ratios)
            half = ratios[: len(ratios) // 2]
            if name == "C1":
                full_v, half_v = float(ratios.min()), float(half.min())
            else:
                full_v, half_v = float(ratios.max()), float(half.max())
            rel = abs(full_v - half_v) / max(abs(full_v), 1e-300)
            report[name] = {"value": full_v, "rel_change": rel, "n_samples": len(ratios)}

        def unit_dirs(m):
            d = rng.standard_normal((m, 3))
            norms = np.linalg.norm(d, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            return d / norms

        # C1 / C2: half uniform box samples, half log-spaced radii toward 0,
        # interleaved so each prefix mixes both populations.
        m = n2
        k_box = rng.uniform(-0.75, 0.75, size=(m, 3))
        r = 10.0 ** rng.uniform(-6.0, math.log10(0.75), size=m)
        k_small = unit_dirs(m) * r[:, None]
        k = np.where((np.arange(m) % 2 == 0)[:, None], k_box, k_small)
        nk = np.linalg.norm(k, axis=1)
        ok = nk > 0
        k, nk = k[ok], nk[ok]
        record("C1", self.omega(k) / nk)
        record("C2", np.linalg.norm(self.grad_lam(k), axis=1) / nk)

        # C3: |k| = u * eps|p| with u log-spaced just above 1 (where the ratio
        # peaks); eps|p| log-spaced well above round-off noise.
        eps = rng.choice(np.asarray(eps_list, dtype=np.float64), size=n2)
        s = 10.0 ** rng.uniform(-4.0, -0.8, size=n2)          # eps|p|
        u = 1.0 + 10.0 ** rng.uniform(-3.0, math.log10(3.0), size=n2)
        p = unit_dirs(n2) * (s / eps)[:, None]
        k = unit_dirs(n2) * (u * s)[:, None]
        lhs = np.abs(
            self.omega(k + 0.5 * eps[:, None] * p)
            - self.omega(k - 0.5 * eps[:, None] * p)
            - eps * np.einsum("ij,ij->i", p, self.grad_omega(k))
        )
        record("C3", lhs * (u * s) / (eps**2 * np.linalg.norm(p, axis=1) ** 2))

        # C4: |q|_inf biased toward its cap 1/(2 eps); includes p nearly
        # parallel to q (every 4th sample), where q- approaches 0.
        eps = rng.choice(np.asarray(eps_list, dtype=np.float64), size=n2)
        w = np.where(np.arange(n2) % 2 == 0,
                     rng.uniform(0.7, 1.0, size=n2),
                     10.0 ** rng.uniform(-2.0, 0.0, size=n2))
        dq = unit_dirs(n2)
        q = dq * (w / (2.0 * eps * np.max(np.abs(dq), axis=1)))[:, None]
        p_len = 10.0 ** rng.uniform(-3.0, 0.0, size=n2) / (2.0 * eps)
        dp = unit_dirs(n2)
        aligned = np.arange(n2) % 4 == 0
        dp[aligned] = dq[aligned]
        p = dp * p_len[:, None]
        qp = eps[:, None] * (q + 0.5 * p)
        qm = eps[:, None] * (q - 0.5 * p)
        om0 = self.acoustic.omega0
        lhs = np.abs(self.omega(qp) - self.omega(qm) - om0(qp) + om0(qm))
        record("C4", lhs / (eps**2 * p_len * np.linalg.norm(q, axis=1)))

        # C5: scale invariant, so fix |q| = 1; include parallel p.
        dq = unit_dirs(n2)
        p_len = 10.0 ** rng.uniform(-2.0, 0.0, size=n2)
        dp = unit_dirs(n2)
        aligned = np.arange(n2) % 4 == 0
        dp[aligned] = dq[aligned] * np.where(np.arange(n2)[aligned] % 8 == 0, 1.0, -1.0)[:, None]
        p = dp * p_len[:, None]
        lhs = np.abs(
            om0(dq + 0.5 * p) - om0(dq - 0.5 * p)
            - np.einsum("ij,ij->i", p, self.acoustic.grad_omega0(dq))
        )
        record("C5", lhs / p_len**2)

        return report
