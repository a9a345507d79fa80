"""The integral-equation kernel K(z, s) and its collocation matrix.

K(z, s) = (d^2/ds^2 + k^2) P(z, s),   P(z, s) = int g(z, z') G(s - z') dz'.

Two regularized routes are provided.

Singular form
    Pointwise, K = F1 - F2 + F3 with
        F1 = k^2 int g(z, z') G(s - z') dz'
        F2 = g(z, s) d/ds [G(s - L) - G(s + L)]
        F3 = PV int (g(z, z') - g(z, s)) G''(s - z') dz'.
    For the matrix, the s-integral over a segment turns d^2/ds^2 into a jump
    of dP/ds, so each entry needs only G' (a principal-value integral) and the
    running integral of G.

Spectral form
    K = iπR int (k^2 - h^2) H0(κR) J0(κR) e^{ihs} ĝ(h, z) dh with ĝ the
    Fourier image of g.  Writing (k^2 - h^2) = (α^2 - h^2) + (k^2 - α^2)
    isolates a part that collapses back onto G (evaluated spectrally) and a
    rapidly decaying remainder.

Matrix entries are segment integrals, values[i, j] = int_{seg j} K(z_i, s) ds,
which is the midpoint rule K(z_i, s_j) Δs made exact across the log
singularity at s = z_i.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .conductivity import ResponseRecord
from .errors import InvalidParameterError, RegularizationError, TruncationError
from .green import (
    GreenParams,
    _angular_integral,
    _end_ratios,
    _gauss,
    big_g,
    check_resonance,
    g_fourier,
    g_sturm,
    green_derivative,
    hankel_bessel,
    spectral_g_antiderivative,
    spectral_rule,
    static_g,
    static_g_antiderivative,
)
from .model import CONST, CntSystem


class KernelForm(str, enum.Enum):
    SINGULAR = "Singular"
    SPECTRAL = "Spectral"


# Above this value of Im(alpha) * Δs/2 the 1-D Green function is a delta-like
# spike inside one half-segment and a moment expansion replaces quadrature.
LOCAL_EXPANSION_THRESHOLD = 30.0


@dataclass(frozen=True)
class CollocationGrid:
    """Uniform segmentation of [-L, L] with collocation at segment midpoints."""

    n_segments: int
    half_length: float

    def __post_init__(self):
        if int(self.n_segments) != self.n_segments or self.n_segments < 11:
            raise InvalidParameterError("n_segments must be an integer >= 11")
        if self.half_length <= 0:
            raise InvalidParameterError("half_length must be positive")

    @property
    def step(self) -> float:
        return 2.0 * self.half_length / self.n_segments

    @property
    def boundaries(self) -> np.ndarray:
        return -self.half_length + self.step * np.arange(self.n_segments + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return -self.half_length + self.step * (np.arange(self.n_segments) + 0.5)


def make_grid(n_segments: int, half_length: float) -> CollocationGrid:
    return CollocationGrid(int(n_segments), float(half_length))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    n_segments: int
    grid_midpoints: np.ndarray
    values: np.ndarray
    form_tag: KernelForm
    frequency: float          # angular frequency, rad/s
    half_length: float
    alpha_tilde: complex
    method: str = ""

    def __post_init__(self):
        for arr in (self.grid_midpoints, self.values):
            arr.setflags(write=False)
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("kernel matrix contains non-finite entries")

    @property
    def grid(self) -> CollocationGrid:
        return CollocationGrid(self.n_segments, self.half_length)


def green_params(system: CntSystem, record: ResponseRecord, **overrides) -> GreenParams:
    """GreenParams for one tube at the frequency of ``record``."""
    return GreenParams(alpha_tilde=record.alpha_tilde, half_length=system.half_length,
                       k_free=record.omega / CONST.c_light, radius=system.radius,
                       omega=record.omega, **overrides)


# ------------------------------------------------------------------ pointwise kernels

def _graded_panels(a, b, points, finest, n=16):
    """Gauss-Legendre nodes on [a, b], geometrically refined toward ``points``."""
    cuts = {a, b}
    for p in points:
        if not a <= p <= b:
            continue
        cuts.add(p)
        for side in (-1.0, 1.0):
            d = finest
            while True:
                q = p + side * d
                if not a < q < b:
                    break
                cuts.add(q)
                d *= 2.0
    edges = np.array(sorted(cuts))
    x, w = _gauss(n)
    lo, hi = edges[:-1, None], edges[1:, None]
    return (lo + (hi - lo) * x).ravel(), ((hi - lo) * w).ravel()


def _check_point(z, s, L):
    if abs(z) > L * (1 + 1e-12) or abs(s) > L * (1 + 1e-12):
        raise InvalidParameterError("z and s must lie in [-L, L]")


def kernel_singular(z, s, params: GreenParams, exclusion=None, levels=3, tol=1e-4):
    """K(z, s) = F1 - F2 + F3 evaluated pointwise.

    The principal value in F3 is taken by excluding |z' - s| < ε symmetrically
    and Richardson-extrapolating ε -> 0 over ``levels`` halvings.
    """
    L = params.half_length
    z, s = float(z), float(s)
    _check_point(z, s, L)
    check_resonance(params)
    if abs(z) >= L or abs(s) >= L:
        if abs(z) >= L:
            return 0j
        raise InvalidParameterError("K(z, s) is log-singular at s = +-L")
    if z == s:
        raise RegularizationError("K(z, s) is log-singular at z = s")
    k2 = params.k_free ** 2
    finest = 1e-9 * L

    x, w = _graded_panels(-L, L, (s, z), finest)
    keep = x != s
    f1 = k2 * np.sum(w[keep] * g_sturm(z, x[keep], params) * big_g(s - x[keep], params))

    gzs = g_sturm(z, s, params)
    d1 = green_derivative(np.array([s - L, s + L]), params, 1)
    f2 = gzs * (d1[0] - d1[1])

    eps0 = exclusion if exclusion is not None else min(1e-3 * L, 0.25 * abs(z - s),
                                                     0.5 * (L - abs(s)))
    vals = []
    for lev in range(levels):
        eps = eps0 / 2 ** lev
        total = 0j
        for a, b in ((-L, s - eps), (s + eps, L)):
            if b <= a:
                continue
            pts = [p for p in (s - eps, s + eps, z) if a <= p <= b]
            xx, ww = _graded_panels(a, b, pts, min(finest, 0.25 * eps))
            total += np.sum(ww * (g_sturm(z, xx, params) - gzs) * green_derivative(s - xx, params, 2))
        vals.append(total)
    # error is O(eps); Richardson table
    table = [vals]
    for order in range(1, levels):
        prev = table[-1]
        fac = 2.0 ** order
        table.append([(fac * prev[i + 1] - prev[i]) / (fac - 1.0) for i in range(len(prev) - 1)])
    f3 = table[-1][-1]
    if levels >= 3:
        spread = abs(table[-1][-1] - table[-2][-1])
        if spread > tol * max(abs(f3), abs(f1 - f2 + f3)) and spread > 1e-12 * abs(vals[0]):
            raise RegularizationError(
                f"principal value not settled under exclusion halving (spread {spread:.3e})")
    return complex(f1 - f2 + f3)


def _remainder_h_max(params: GreenParams):
    L = params.half_length
    return min(params.spectral_h_max, max(2000.0 / L, 100.0 * abs(params.alpha)))


def _alpha_refinement(params: GreenParams):
    a = params.alpha
    return ((abs(a.real), max(abs(a.imag), 1e-3 / params.half_length)),)


def kernel_spectral(z, s, params: GreenParams, h_max=None):
    """K(z, s) from the wavenumber representation.

    (k^2 - h^2) ĝ is split as -F / sin(2αL) + (k^2 - α^2) ĝ: the first part
    reproduces G itself and is evaluated with the spectral form of G, the
    second decays like h^-3 and is integrated over [-h_max, h_max].
    """
    L = params.half_length
    z, s = float(z), float(s)
    _check_point(z, s, L)
    check_resonance(params)
    if abs(z) >= L:
        return 0j
    if abs(s) >= L:
        raise InvalidParameterError("K(z, s) is log-singular at s = +-L")
    if z == s:
        raise RegularizationError("K(z, s) is log-singular at z = s")
    a = params.alpha
    R = params.radius
    r_m, r_p = _end_ratios(np.array(z), params)
    gvals = big_g(np.array([s - z, s + L, s - L]), params, form="spectral")
    first = -(gvals[0] + r_m * gvals[1] - r_p * gvals[2])
    hm = _remainder_h_max(params) if h_max is None else h_max
    nodes, weights = spectral_rule(params, 2 * L, hm, extra=_alpha_refinement(params))
    hb = hankel_bessel(nodes, params) * weights
    body = (g_fourier(nodes, z, params) * np.exp(1j * nodes * s)
            + g_fourier(-nodes, z, params) * np.exp(-1j * nodes * s))
    rest = 1j * math.pi * R * (params.k_free ** 2 - a * a) * np.sum(hb * body)
    return complex(first + rest)


# ------------------------------------------------------------------ lattice tables

@lru_cache(maxsize=16)
def _integration_matrix(n):
    """S[l, l'] = int_0^{x_l} ell_{l'}(t) dt for the Lagrange basis on GL nodes in [0, 1]."""
    x, _ = _gauss(n)
    y = 2.0 * x - 1.0
    leg = np.polynomial.legendre
    V = np.stack([leg.legval(y, np.eye(n)[k]) for k in range(n)], axis=1)
    J = np.empty((n, n))
    for k in range(n):
        if k == 0:
            J[:, 0] = 0.5 * (y + 1.0)
        else:
            up = leg.legval(y, np.eye(n + 1)[k + 1])
            dn = leg.legval(y, np.eye(n + 1)[k - 1])
            J[:, k] = 0.5 * (up - dn) / (2 * k + 1)
    return J @ np.linalg.inv(V)


@dataclass(frozen=True, eq=False)
class GreenTables:
    """G' and int_0^u G on the lattice u = (m + x_l) Δs/2 used by the singular matrix.

    Depends only on k, R, the grid and the node count, so it can be shared
    between runs that differ only in alpha (e.g. the local-limit override).
    """

    k_free: float
    radius: float
    grid: CollocationGrid
    nodes: int
    d1: np.ndarray            # G'(u_{m,l}), shape (2N, n)
    anti: np.ndarray          # int_0^{u_{m,l}} G, shape (2N, n)
    odd_u: np.ndarray         # (2m + 1) Δs/2, m = 0..N-1
    odd_anti: np.ndarray
    odd_d1: np.ndarray
    odd_d3: np.ndarray | None
    odd_d5: np.ndarray | None


def build_tables(params: GreenParams, grid: CollocationGrid, nodes=16, with_high=False) -> GreenTables:
    n2 = 2 * grid.n_segments
    h2 = 0.5 * grid.step
    x, w = _gauss(nodes)
    u = (np.arange(n2)[:, None] + x[None, :]) * h2
    R = params.radius
    flat = u.ravel()
    d1 = (static_g(flat, R, 1) + _angular_integral(flat, params, 1, True)).reshape(u.shape)
    gd = _angular_integral(flat, params, 0, True).reshape(u.shape)
    panel = h2 * (gd @ w)
    cum = np.concatenate(([0.0 + 0j], np.cumsum(panel)))
    smat = _integration_matrix(nodes)
    anti_d = cum[:-1, None] + h2 * (gd @ smat.T)
    anti = static_g_antiderivative(u, R) + anti_d
    odd_u = (2 * np.arange(grid.n_segments) + 1) * h2
    odd_cum = cum[1::2]
    odd_anti = static_g_antiderivative(odd_u, R) + odd_cum
    odd_d1 = green_derivative(odd_u, params, 1)
    odd_d3 = green_derivative(odd_u, params, 3) if with_high else None
    odd_d5 = green_derivative(odd_u, params, 5) if with_high else None
    for arr in (d1, anti, odd_u, odd_anti, odd_d1, odd_d3, odd_d5):
        if arr is not None:
            arr.setflags(write=False)
    return GreenTables(params.k_free, R, grid, nodes, d1, anti, odd_u, odd_anti, odd_d1,
                       odd_d3, odd_d5)


def _nodes_for(params: GreenParams, grid: CollocationGrid):
    return int(min(256, 16 + math.ceil(abs(params.alpha) * grid.step / 2.0)))


def uses_local_expansion(params: GreenParams, grid: CollocationGrid) -> bool:
    return params.alpha.imag * grid.step / 2.0 > LOCAL_EXPANSION_THRESHOLD


# ------------------------------------------------------------------ matrix assembly

_ROW_BLOCK = 64
_PANEL_BLOCK = 64


def _row_blocks(n):
    return [(i, min(i + _ROW_BLOCK, n)) for i in range(0, n, _ROW_BLOCK)]


def _run_blocks(fn, blocks, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, blocks))
    return [fn(b) for b in blocks]


def _singular_quadrature(params, grid, tables, workers):
    """values via int g(z_i, x) [W_{j+1}(x) - W_j(x)] dx, W_j(x) = G'(b_j - x) + k^2 int_0^{b_j - x} G."""
    N = grid.n_segments
    n = tables.nodes
    h2 = 0.5 * grid.step
    L = grid.half_length
    x, w = _gauss(n)
    wtab = tables.d1 + params.k_free ** 2 * tables.anti
    z = grid.midpoints
    j = np.arange(N + 1)
    panels = np.arange(2 * N)

    def w_block(p):
        d = 2 * j[None, :] - p[:, None]                   # (P, N+1)
        pos = d >= 1
        m = np.where(pos, d - 1, -d)
        ll = np.arange(n)
        lsel = np.where(pos[:, None, :], n - 1 - ll[None, :, None], ll[None, :, None])
        vals = wtab[m[:, None, :], lsel]                  # (P, n, N+1)
        vals = np.where(pos[:, None, :], vals, -vals)
        return vals.reshape(-1, N + 1)

    pblocks = [panels[i:i + _PANEL_BLOCK] for i in range(0, 2 * N, _PANEL_BLOCK)]
    wblocks = [w_block(p) for p in pblocks]
    xq = [(-L + (p[:, None] + x[None, :]) * h2).ravel() for p in pblocks]
    wq = np.tile(w * h2, _PANEL_BLOCK)

    def rows(block):
        lo, hi = block
        acc = np.zeros((hi - lo, N + 1), dtype=complex)
        for xs, wb in zip(xq, wblocks):
            gw = g_sturm(z[lo:hi, None], xs[None, :], params) * wq[None, :xs.size]
            acc += gw @ wb
        return acc

    out = np.vstack(_run_blocks(rows, _row_blocks(N), workers))
    return out[:, 1:] - out[:, :-1]


def _singular_local(params, grid, tables):
    """Moment expansion int g φ = -φ/α^2 + φ''/α^4 - φ''''/α^6 for a spike-like g."""
    N = grid.n_segments
    a2 = params.alpha ** 2
    k2 = params.k_free ** 2
    w0 = tables.odd_d1 + k2 * tables.odd_anti
    w2 = tables.odd_d3 + k2 * tables.odd_d1
    w4 = tables.odd_d5 + k2 * tables.odd_d3
    comb = -w0 / a2 + w2 / a2 ** 2 - w4 / a2 ** 3
    i = np.arange(N)[:, None]
    j = np.arange(N + 1)[None, :]
    d = j - i
    pos = d >= 1
    m = np.where(pos, d - 1, -d)
    vals = np.where(pos, comb[m], -comb[m])
    return vals[:, 1:] - vals[:, :-1]


def _spectral_values(params, grid, workers, h_max=None):
    N = grid.n_segments
    L = grid.half_length
    h2 = 0.5 * grid.step
    R = params.radius
    a = params.alpha
    z = grid.midpoints
    # Λ(v) = int_0^v G at v = m Δs/2, m = 0..2N (odd in v)
    lam = spectral_g_antiderivative(np.arange(2 * N + 1) * h2, params, h_max=h_max)

    def lam_at(m):
        return np.sign(m) * lam[np.abs(m)]

    def gamma(mc):
        """int over a segment centred at mc * Δs/2 of G."""
        return lam_at(mc + 1) - lam_at(mc - 1)

    i = np.arange(N)[:, None]
    jj = np.arange(N)[None, :]
    r_m, r_p = _end_ratios(z, params)
    first = -(gamma(2 * (jj - i)) + r_m[:, None] * gamma(2 * jj + 1) - r_p[:, None] * gamma(2 * jj + 1 - 2 * N))

    hm = _remainder_h_max(params)
    nodes, weights = spectral_rule(params, 2 * L, hm, extra=_alpha_refinement(params))
    coef = (1j * math.pi * R * (params.k_free ** 2 - a * a)
            * hankel_bessel(nodes, params) * weights * 2.0 * np.sin(nodes * h2) / nodes)
    s = grid.midpoints
    chunk = 2048

    def rows(block):
        lo, hi = block
        acc = np.zeros((hi - lo, N), dtype=complex)
        for c0 in range(0, nodes.size, chunk):
            hh = nodes[c0:c0 + chunk]
            cc = coef[c0:c0 + chunk]
            gp = g_fourier(hh[None, :], z[lo:hi, None], params) * cc
            gm = g_fourier(-hh[None, :], z[lo:hi, None], params) * cc
            ph = np.exp(1j * np.outer(hh, s))
            acc += gp @ ph + gm @ ph.conj()
        return acc

    rest = np.vstack(_run_blocks(rows, _row_blocks(N), workers))
    return first + rest


def assemble(grid: CollocationGrid, params: GreenParams, form=KernelForm.SINGULAR,
             tables: GreenTables | None = None, workers=None, method="auto",
             nodes=None) -> KernelMatrix:
    """Dense collocation matrix values[i, j] = int_{segment j} K(z_i, s) ds.

    For the singular form ``method`` is "quadrature", "local-expansion" or
    "auto" (expansion once g is confined well inside a half-segment).
    ``nodes`` overrides the Gauss points per half-segment of the quadrature.
    """
    form = KernelForm(form)
    if abs(grid.half_length - params.half_length) > 1e-12 * params.half_length:
        raise InvalidParameterError("grid and Green parameters disagree on L")
    if method not in ("auto", "quadrature", "local-expansion"):
        raise InvalidParameterError(f"unknown assembly method {method!r}")
    check_resonance(params)
    if form is KernelForm.SINGULAR:
        if method == "auto":
            method = "local-expansion" if uses_local_expansion(params, grid) else "quadrature"
        if method == "local-expansion":
            if tables is None or tables.odd_d3 is None:
                tables = build_tables(params, grid, with_high=True)
            values = _singular_local(params, grid, tables)
        else:
            n = _nodes_for(params, grid) if nodes is None else int(nodes)
            if tables is None or tables.nodes != n:
                tables = build_tables(params, grid, nodes=n)
            values = _singular_quadrature(params, grid, tables, workers)
            method = f"quadrature-{n}"
    else:
        if 100.0 * abs(params.alpha) > params.spectral_h_max:
            raise TruncationError(
                "spectral kernel needs h_max well above |alpha|; use the singular form",
                suggested_h_max=100.0 * abs(params.alpha))
        values = _spectral_values(params, grid, workers)
        method = "spectral"
    return KernelMatrix(grid.n_segments, grid.midpoints.copy(), values, form,
                        params.omega if params.omega is not None else float("nan"),
                        grid.half_length, complex(params.alpha_tilde), method)


def self_convergence(z, s, params: GreenParams):
    """Relative change of kernel_spectral when the remainder cut-off doubles."""
    hm = _remainder_h_max(params)
    a = kernel_spectral(z, s, params, h_max=hm)
    b = kernel_spectral(z, s, params, h_max=2 * hm)
    return abs(a - b) / abs(b)


__all__ = [
    "CollocationGrid", "GreenTables", "KernelForm", "KernelMatrix", "LOCAL_EXPANSION_THRESHOLD",
    "assemble", "build_tables", "green_params", "kernel_singular", "kernel_spectral", "make_grid",
    "self_convergence", "uses_local_expansion", "TruncationError",
]
