"""Lattice and continuum Wigner pairings.

The pairing of a separable symbol ``a = f(x) g(k) h(q)`` with the scale-eps
Wigner transform of a mode field psi is computed as

    <a, W> = sum_p conj(fhat(p)) S(p),
    S(p)   = G^-3 sum_m conj(g h)(k_m) conj(Psi(m-p)) Psi(m+p),

where ``Psi(m) = psihat(m / G)`` on the doubled grid ``G = 2N`` comes from
zero-padding psi into a G-box (so the half-integer shifts ``k +- eps p/2``
land on grid points exactly) and ``fhat`` is the Fourier series of the
1-periodization of f.  Two evaluation routes:

* trig-poly g, constant h: expanding conj(g) collapses the m-sum exactly to
  a scatter of shifted products ``psi(gamma) conj(psi(gamma + delta))`` onto
  the G-box, after which one FFT yields every S(p) at once.  No quadrature
  error at all; only the p-truncation and the periodization of f separate
  the result from the infinite-lattice pairing, and both get certified
  bounds from Gaussian tails.
* varying h (or windowed g): W is smooth but not band-limited, so S(p) is
  summed directly per p over the numerical support of Psi (grown by p_max).
  Small boxes double the grid once more to 4N, which pins the quadrature to
  the one the exact oracle uses; at production sizes the 2N sum stands (the
  weight's Fourier series decays far below the alias threshold there).

``wigner_pair_exact`` is the O(N^6) position-space oracle used to validate
all of the above at small N: it evaluates the x-factor at its true,
unperiodized argument, so the certified bounds must cover the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import NormalMode, integer_offsets
from .symbols import AdmissibleTestFunction, GaussianAtom, PlaneAtom

#: boxes up to this N use the 4N quadrature grid for varying-h terms
FINE_GRID_N_LIMIT = 48

#: relative magnitude below which spectrum entries count as unsupported
#: (comfortably above the FFT rounding floor, far below anything that
#: matters at the tolerances the pairing is used with)
SUPPORT_TOL = 1e-12


@dataclass
class PairingResult:
    """Pairing value with a certified bound on what the computation dropped."""

    value: complex
    truncation_error_bound: float

    def __post_init__(self):
        if self.truncation_error_bound < 0.0:
            raise ValueError("error bound must be nonnegative")


# ---------------------------------------------------------------------------
# padding and support helpers
# ---------------------------------------------------------------------------


def pad_field(field: np.ndarray, G: int) -> np.ndarray:
    """Embed an N-box field into a G-box (G >= N), preserving signed offsets."""
    N = field.shape[0]
    if G < N:
        raise ValueError("target box smaller than source")
    if G == N:
        return field.astype(np.complex128, copy=True)
    out = np.zeros((G, G, G), dtype=np.complex128)
    h = N // 2
    src = (slice(0, h), slice(N - h, N))
    dst = (slice(0, h), slice(G - h, G))
    for b0 in range(2):
        for b1 in range(2):
            for b2 in range(2):
                out[dst[b0], dst[b1], dst[b2]] = field[src[b0], src[b1], src[b2]]
    return out


def _circular_interval(mask: np.ndarray):
    """Shortest circular index interval (start, length) covering the True set.

    The complement of the longest circular run of False entries.
    """
    n = len(mask)
    if not mask.any():
        return 0, 0
    if mask.all():
        return 0, n
    gaps = np.flatnonzero(~mask)
    runs = []
    start = prev = int(gaps[0])
    for g in gaps[1:]:
        g = int(g)
        if g == prev + 1:
            prev = g
        else:
            runs.append((start, prev))
            start = prev = g
    runs.append((start, prev))
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == n - 1:
        first = runs.pop(0)
        last = runs.pop()
        runs.append((last[0], first[1] + n))
    best = max(runs, key=lambda r: r[1] - r[0])
    lo = (best[1] + 1) % n
    return lo, n - (best[1] - best[0] + 1)


def _support_box(arr_abs: np.ndarray, tol_rel: float = SUPPORT_TOL):
    """Circular per-axis support box of |arr|, or None when all zero."""
    peak = float(arr_abs.max())
    if peak == 0.0:
        return None
    mask = arr_abs > tol_rel * peak
    los = np.empty(3, dtype=int)
    lens = np.empty(3, dtype=int)
    for axis in range(3):
        other = tuple(i for i in range(3) if i != axis)
        los[axis], lens[axis] = _circular_interval(np.any(mask, axis=other))
    return los, lens


def _gather(arr: np.ndarray, lo: np.ndarray, size: np.ndarray) -> np.ndarray:
    G = arr.shape[0]
    ix = [np.arange(lo[a], lo[a] + size[a]) % G for a in range(3)]
    return arr[np.ix_(*ix)]


def _x_interval(field_abs: np.ndarray):
    """Per-axis range of pair midpoints (gamma + gamma') / (2N), in box units.

    Conservative when the support crosses the +-1/2 seam (falls back to the
    full box), which only enlarges the periodization bound, never breaks it.
    """
    N = field_abs.shape[0]
    box = _support_box(field_abs)
    if box is None:
        return np.zeros(3), np.zeros(3)
    lo_idx, size = box
    offs = integer_offsets(N)
    lo = np.empty(3)
    hi = np.empty(3)
    for a in range(3):
        if size[a] >= N:
            lo[a], hi[a] = -0.5, 0.5 - 1.0 / N
        else:
            cover = offs[(lo_idx[a] + np.arange(size[a])) % N]
            lo[a], hi[a] = cover.min() / N, cover.max() / N
    return lo, hi


# ---------------------------------------------------------------------------
# term evaluation routes
# ---------------------------------------------------------------------------


def _delta_route(psi: np.ndarray, term, p_pts: np.ndarray,
                 p_coeffs: np.ndarray) -> complex:
    """All S(p) at once for trig-poly g and constant h.

    Scatters ``conj(c_delta) psi(gamma) conj(psi(gamma + delta))`` to G-box
    offset ``2 gamma + delta``; the padding keeps pair offsets unambiguous
    mod G, so one FFT of the scatter gives S exactly.
    """
    N = psi.shape[0]
    G = 2 * N
    deg = int(np.max(np.abs(term.k.offsets))) if len(term.k.offsets) else 0
    if deg >= N // 2:
        raise ValueError(f"trig-poly degree {deg} too large for box N={N}")
    hconj = np.conj(complex(term.q.value))
    E = np.zeros((G, G, G), dtype=np.complex128)
    for delta, c in zip(term.k.offsets, term.k.coeffs):
        shifted = np.roll(psi, shift=tuple(-delta), axis=(0, 1, 2))
        # zero wrapped strips: gamma + delta must remain a true offset
        for axis in range(3):
            d = int(delta[axis])
            if d > 0:
                sl = [slice(None)] * 3
                sl[axis] = slice(N // 2 - d, N // 2)
                shifted[tuple(sl)] = 0.0
            elif d < 0:
                sl = [slice(None)] * 3
                sl[axis] = slice(N // 2, N // 2 - d)
                shifted[tuple(sl)] = 0.0
        T = psi * np.conj(shifted)
        T *= np.conj(c)
        par = [int(d) % 2 for d in delta]
        fl = [(int(d) - q) // 2 for d, q in zip(delta, par)]
        view = E[par[0]::2, par[1]::2, par[2]::2]
        view += np.roll(T, shift=tuple(fl), axis=(0, 1, 2))
    S = np.fft.fftn(E)
    vals = S[tuple((p_pts % G).T)]
    return hconj * complex(np.sum(np.conj(p_coeffs) * vals))


def _eval_weight_grid(term, G: int, eps: float) -> np.ndarray:
    """``conj(g(k) h(k/eps))`` on the G-grid, built in slabs to cap memory."""
    ax = np.fft.fftfreq(G)
    W = np.empty((G, G, G), dtype=np.complex128)
    slab = max(1, (1 << 22) // (G * G))
    for s in range(0, G, slab):
        kx = ax[s:s + slab]
        k = np.stack(np.meshgrid(kx, ax, ax, indexing="ij"), axis=-1)
        W[s:s + slab] = np.conj(term.k(k) * term.q(k / eps))
    return W


def _p_route(Psi: np.ndarray, W: np.ndarray, p_pts: np.ndarray,
             p_coeffs: np.ndarray, p_max: int) -> complex:
    """Direct S(p) sums restricted to the support box of Psi.

    The core box C is the support grown by p_max (the only m where both
    shifted factors can be nonzero); Psi is gathered once on C grown by
    p_max again, after which each p needs pure slicing.  Axes whose grown
    box saturates the grid fall back to modular index arrays.
    """
    G = Psi.shape[0]
    box = _support_box(np.abs(Psi))
    if box is None:
        return 0.0 + 0.0j
    supp_lo, supp_size = box
    core_size = np.minimum(supp_size + 2 * p_max, G)
    core_lo = (supp_lo - p_max) % G
    g2_size = np.minimum(core_size + 2 * p_max, G)
    g2_lo = (core_lo - p_max) % G
    Wc = _gather(W, core_lo, core_size)
    PG = _gather(Psi, g2_lo, g2_size)
    # index of m = core_lo + j in PG is (p_max + j) mod G on saturated axes,
    # p_max + j otherwise
    wrap = g2_size == G
    total = 0.0 + 0.0j
    for p, c in zip(p_pts, p_coeffs):
        idx_m, idx_p = [], []
        for a in range(3):
            start_m = p_max - int(p[a])
            start_p = p_max + int(p[a])
            if wrap[a]:
                idx_m.append((start_m + np.arange(core_size[a])) % G)
                idx_p.append((start_p + np.arange(core_size[a])) % G)
            else:
                idx_m.append(np.arange(start_m, start_m + core_size[a]))
                idx_p.append(np.arange(start_p, start_p + core_size[a]))
        minus = PG[np.ix_(*idx_m)]
        plus = PG[np.ix_(*idx_p)]
        total += np.conj(c) * np.sum(Wc * np.conj(minus) * plus)
    return complex(total) / G**3


# ---------------------------------------------------------------------------
# main pairings
# ---------------------------------------------------------------------------


def wigner_pair(mode: NormalMode, a: AdmissibleTestFunction,
                p_max: int) -> PairingResult:
    """Pair an admissible symbol against the mode's Wigner transform.

    Parameters
    ----------
    mode : NormalMode
        State in normal-mode form; the transform lives at scale eps = 1/N.
    a : AdmissibleTestFunction
        Sum of separable terms f(x) g(k) h(q).
    p_max : int
        Spatial Fourier modes with |p|_inf > p_max are dropped.  Must not
        exceed N/2 (half-shifts k +- eps p/2 must stay on the doubled grid).

    Returns
    -------
    PairingResult
        ``value`` is conjugate-linear in ``a``; ``truncation_error_bound``
        covers both the dropped modes and the 1-periodization of the
        x-factors relative to the infinite-lattice pairing.
    """
    if not isinstance(a, AdmissibleTestFunction):
        raise TypeError("symbol must be an AdmissibleTestFunction")
    N = mode.N
    if not 0 <= p_max <= N // 2:
        raise ValueError(f"p_max must lie in [0, N/2] = [0, {N // 2}]")
    psi = mode.field()
    norm_sq = mode.mass()
    x_lo, x_hi = _x_interval(np.abs(psi))

    value = 0.0 + 0.0j
    bound = 0.0
    Psi_fine = None

    for term in a.terms:
        p_pts, p_coeffs = term.x.series_ball(p_max)
        if term.k.is_trig_poly and term.q.is_constant:
            if len(p_pts):
                value += _delta_route(psi, term, p_pts, p_coeffs)
            w_sup = term.k.l1() * term.q.sup()
            w_l1 = w_sup
        else:
            G = 4 * N if N <= FINE_GRID_N_LIMIT else 2 * N
            if Psi_fine is None or Psi_fine.shape[0] != G:
                Psi_fine = np.fft.fftn(pad_field(psi, G))
            W = _eval_weight_grid(term, G, mode.eps)
            if len(p_pts):
                value += _p_route(Psi_fine, W, p_pts, p_coeffs, p_max)
            w_sup = float(np.max(np.abs(W)))
            w_l1 = float(np.sum(np.abs(np.fft.fftn(W)))) / G**3
        bound += norm_sq * (w_sup * term.x.tail_sum(p_max)
                            + w_l1 * term.x.periodization_sup(x_lo, x_hi))
    return PairingResult(value, bound)


def wigner_pair_exact(mode: NormalMode, a: AdmissibleTestFunction,
                      size_limit: int = 24) -> complex:
    """Position-space O(N^6) oracle for the same pairing.

    Evaluates

        sum_{g,g'} conj(psi(g')) psi(g) conj(f(eps (g+g')/2)) J(g'-g),
        J(s) = integral conj(g(k) h(k/eps)) e^{2 pi i k.s} dk,

    with f at its true (unperiodized) midpoint argument in [-1, 1)^3 and J
    by 4N-grid quadrature (exact for trig-poly g, the pinned convention
    otherwise).  Refuses boxes past ``size_limit``: cost grows as N^6.
    """
    N = mode.N
    if N > size_limit:
        raise ValueError(f"exact pairing is O(N^6); refusing N={N} > {size_limit}")
    psi = mode.field().reshape(-1)
    offs1 = integer_offsets(N)
    O = np.stack(
        np.meshgrid(offs1, offs1, offs1, indexing="ij"), axis=-1
    ).reshape(-1, 3)
    G4 = 4 * N
    total = 0.0 + 0.0j
    for term in a.terms:
        W4 = _eval_weight_grid(term, G4, mode.eps)
        Jfull = np.fft.ifftn(W4)
        # midpoints (g + g')/(2N) take at most (2N-1)^3 values; tabulate f
        # once on s/(2N), s in [-2N, 2N), instead of exp-ing N^6 times
        s_ax = np.arange(-2 * N, 2 * N)
        s_grid = np.stack(
            np.meshgrid(s_ax, s_ax, s_ax, indexing="ij"), axis=-1
        ) / (2.0 * N)
        Ftab = np.conj(term.x(s_grid))
        chunk = max(1, (1 << 22) // len(O))
        for start in range(0, len(O), chunk):
            Osub = O[start:start + chunk]
            diff = (Osub[:, None, :] - O[None, :, :]) % G4
            J = Jfull[diff[..., 0], diff[..., 1], diff[..., 2]]
            mid = Osub[:, None, :] + O[None, :, :] + 2 * N
            J *= Ftab[mid[..., 0], mid[..., 1], mid[..., 2]]
            total += np.einsum(
                "i,ij,j->", np.conj(psi[start:start + chunk]), J, psi
            )
    return complex(total)


def l2_wigner_pair(phi, b: AdmissibleTestFunction, scale: int = 1,
                   p_max: int | None = None) -> PairingResult:
    """Continuum Wigner pairing of a macroscopic field on its periodic box.

    ``phi`` supplies samples on an M-point grid over a box of side L (any
    object with ``values``, ``box_side`` and ``norm_sq()``).  The grid sums
    are exact Riemann quadratures for fields band-limited to the box, so
    with ``b = 1`` the pairing returns ||phi||^2 to rounding.  k-factors of
    ``b`` are frozen at k = 0: the continuum symbol has no lattice
    wave-number slot.
    """
    if scale != 1:
        raise ValueError("only scale=1 shifts are supported on the grid")
    vals = np.asarray(phi.values)
    M = vals.shape[0]
    L = float(phi.box_side)
    if p_max is None:
        p_max = M // 2
    if not 0 <= p_max <= M // 2:
        raise ValueError(f"p_max must lie in [0, M/2] = [0, {M // 2}]")
    h = L / M
    norm_sq = phi.norm_sq()
    x_lo, x_hi = _x_interval(np.abs(vals))
    x_lo, x_hi = x_lo * L, x_hi * L

    value = 0.0 + 0.0j
    bound = 0.0
    rho_fft = None
    Phi = None
    for term in b.terms:
        g0 = complex(term.k(np.zeros(3)))
        p_pts, p_coeffs = _macro_series_ball(term.x, p_max, L)
        if term.q.is_constant:
            if rho_fft is None:
                rho_fft = np.fft.fftn(np.abs(vals) ** 2)
            hq = complex(term.q.value)
            if len(p_pts):
                svals = (h**3) * rho_fft[tuple((p_pts % M).T)]
                value += np.conj(g0 * hq) * complex(
                    np.sum(np.conj(p_coeffs) * svals)
                )
            w_sup = w_l1 = abs(g0 * hq)
        else:
            if Phi is None:
                Phi = (h**3) * np.fft.fftn(pad_field(vals, 2 * M))
            ax = np.fft.fftfreq(2 * M) * M / L          # q_m = m / (2L)
            W = np.empty((2 * M,) * 3, dtype=np.complex128)
            slab = max(1, (1 << 22) // (4 * M * M))
            for s in range(0, 2 * M, slab):
                q = np.stack(
                    np.meshgrid(ax[s:s + slab], ax, ax, indexing="ij"), axis=-1
                )
                W[s:s + slab] = np.conj(g0 * term.q(q))
            if len(p_pts):
                raw = _p_route(Phi, W, p_pts, p_coeffs, p_max)
                # _p_route divides by (2M)^3; the q-integral wants (2L)^-3
                value += raw * (2 * M) ** 3 / (2.0 * L) ** 3
            w_sup = float(np.max(np.abs(W)))
            w_l1 = float(np.sum(np.abs(np.fft.fftn(W)))) / (2 * M) ** 3
        bound += norm_sq * (w_sup * _macro_tail(term.x, p_max, L)
                            + w_l1 * _macro_perio(term.x, x_lo, x_hi, L))
    return PairingResult(value, bound)


# ---------------------------------------------------------------------------
# series data for L-periodic boxes
# ---------------------------------------------------------------------------


def _macro_series_ball(atom, p_max: int, L: float):
    """Series points l (wavenumbers l/L) and coefficients of the atom's
    L-periodization, thresholded and clipped to |l|_inf <= p_max."""
    if isinstance(atom, PlaneAtom):
        lmod = atom.modulation * L
        if not np.allclose(lmod, np.rint(lmod)):
            raise ValueError("plane-wave modulation incompatible with box side")
        lmod = np.rint(lmod).astype(int)
        if np.max(np.abs(lmod)) <= p_max:
            return lmod[None, :], np.array([atom.amplitude])
        return np.zeros((0, 3), dtype=int), np.zeros(0, dtype=complex)
    if isinstance(atom, GaussianAtom):
        reach = math.sqrt(40.0 / math.pi) / atom.width * L
        lo = np.maximum(np.ceil(atom.modulation * L - reach), -p_max).astype(int)
        hi = np.minimum(np.floor(atom.modulation * L + reach), p_max).astype(int)
        if np.any(hi < lo):
            return np.zeros((0, 3), dtype=int), np.zeros(0, dtype=complex)
        axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        return pts, atom.fourier(pts / L) / L**3
    raise TypeError(f"unsupported x-factor {type(atom).__name__}")


def _macro_tail(atom, p_max: int, L: float) -> float:
    """ell-1 mass of the series coefficients outside the p_max box."""
    if isinstance(atom, PlaneAtom):
        lmod = np.rint(atom.modulation * L).astype(int)
        return 0.0 if np.max(np.abs(lmod)) <= p_max else abs(atom.amplitude)
    w = atom.width
    span = p_max + int(math.ceil(math.sqrt(80.0 / math.pi) / w * L)) + 4
    full, inside = 1.0, 1.0
    for nu in range(3):
        c = atom.modulation[nu] * L
        grid = np.arange(math.floor(c) - span, math.ceil(c) + span + 1)
        v = np.exp(-math.pi * w**2 * (grid / L - atom.modulation[nu]) ** 2)
        full *= float(v.sum())
        inside *= float(v[(grid >= -p_max) & (grid <= p_max)].sum())
    return abs(atom.amplitude) * w**3 / L**3 * max(full - inside, 0.0)


def _macro_perio(atom, x_lo: np.ndarray, x_hi: np.ndarray, L: float) -> float:
    """Sup over the support interval of the non-principal periodic images."""
    if isinstance(atom, PlaneAtom):
        return 0.0
    axis_sums = np.empty(3)
    for nu in range(3):
        images = atom.center[nu] - np.arange(-4, 5) * L
        d = np.maximum(0.0, np.maximum(x_lo[nu] - images, images - x_hi[nu]))
        axis_sums[nu] = float(np.sum(np.exp(-math.pi * d**2 / atom.width**2)))
    total = float(np.prod(axis_sums))
    d0 = np.maximum(0.0, np.maximum(x_lo - atom.center, atom.center - x_hi))
    main = float(np.prod(np.exp(-math.pi * d0**2 / atom.width**2)))
    return abs(atom.amplitude) * max(total - main, 0.0)
