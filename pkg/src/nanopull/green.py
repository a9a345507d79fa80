"""Green functions used by the integral equation.

* ``g`` -- the 1-D Sturm-Liouville Green function on [-L, L] with Dirichlet
  ends, solving g'' + alpha^2 g = -delta(z - z').
* ``g_fourier`` -- its image integral_{-L}^{L} g(z, z') exp(-i h z') dz'.
* ``G`` -- the free-space Helmholtz kernel integrated around the tube
  circumference, G(u) = R * integral_0^{2 pi} exp(i k rho) / rho dphi.

G is split into a static part (k = 0), which has a closed form in complete
elliptic integrals and carries the logarithmic singularity at u = 0, and a
smooth dynamic remainder that is integrated over the angle numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import InternalResonanceError, InvalidParameterError, TruncationError

# Asymptotic expansion K0(y) I0(y) ~ 1/(2y) * sum_m a_m / y^(2m)
_K0I0_ASYMPTOTIC = (1.0, 1.0 / 8.0, 27.0 / 128.0, 1125.0 / 1024.0)


@dataclass(frozen=True)
class GreenParams:
    alpha_tilde: complex
    half_length: float
    k_free: float
    radius: float
    modal_cutoff: int = 4000
    azimuthal_quadrature_order: int = 64
    h_max: float | None = None
    omega: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.modal_cutoff < 64:
            raise InvalidParameterError("modal_cutoff must be >= 64")
        if self.azimuthal_quadrature_order < 32:
            raise InvalidParameterError("azimuthal_quadrature_order must be >= 32")
        if self.half_length <= 0 or self.radius <= 0 or self.k_free < 0:
            raise InvalidParameterError("half_length and radius must be positive")

    @property
    def alpha(self) -> complex:
        """alpha with the root chosen so that Im(alpha) >= 0 (g is even in alpha)."""
        a = complex(self.alpha_tilde)
        return -a if a.imag < 0 or (a.imag == 0 and a.real < 0) else a

    @property
    def spectral_h_max(self) -> float:
        return self.h_max if self.h_max is not None else 40.0 / self.radius


# ------------------------------------------------------------------ 1-D part

def _sin_ratio(alpha, a, b):
    """sin(alpha*a) / sin(alpha*b) for 0 <= a <= b and Im(alpha) >= 0, overflow-free."""
    e = np.exp
    return e(1j * alpha * (b - a)) * (1.0 - e(2j * alpha * a)) / (1.0 - e(2j * alpha * b))


def check_resonance(params: GreenParams):
    a = params.alpha
    two_al = 2.0 * a * params.half_length
    if two_al.imag > 30.0:
        return
    if abs(np.sin(two_al)) < 1e-12 * abs(a * params.half_length):
        raise InternalResonanceError(
            f"internal resonance: sin(2 alpha L) ~ 0 (alpha L = {a * params.half_length:.6g}, "
            f"omega = {params.omega})", omega=params.omega, alpha_l=a * params.half_length)


def g_sturm(z, zp, params: GreenParams, form="closed"):
    """1-D Green function g(z, z').

    ``closed`` evaluates the piecewise sine formula in a factored exponential
    form that cannot overflow when Im(alpha) L is large.  ``modal`` sums the
    Dirichlet eigenfunction expansion up to ``params.modal_cutoff`` terms.
    """
    check_resonance(params)
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    L = params.half_length
    if np.any(np.abs(z) > L * (1 + 1e-12)) or np.any(np.abs(zp) > L * (1 + 1e-12)):
        raise InvalidParameterError("z and z' must lie in [-L, L]")
    a = params.alpha
    if form == "closed":
        p = np.minimum(z, zp) + L
        q = L - np.maximum(z, zp)
        d = np.abs(z - zp)
        e = np.exp
        out = (-e(1j * a * d) * (1.0 - e(2j * a * p)) * (1.0 - e(2j * a * q))
               / (2j * a * (1.0 - e(4j * a * L))))
        return out[()] if out.ndim == 0 else out
    if form == "modal":
        # Kummer acceleration: the alpha^0 and alpha^2 parts of the series are
        # the static Green function and its iterate, both polynomials; what is
        # left, alpha^4 u_n u_n' / (k_n^4 (k_n^2 - alpha^2)), falls off like n^-6
        n = np.arange(1, params.modal_cutoff + 1)
        kn = n * math.pi / (2.0 * L)
        weight = a**4 / (kn**4 * (kn * kn - a * a))
        zb, zpb = np.broadcast_arrays(z, zp)
        ell = 2.0 * L
        x = np.minimum(zb, zpb) + L
        y = np.maximum(zb, zpb) + L
        static = x * (ell - y) / ell
        iterated = x * (ell - y) * (2.0 * ell * y - x * x - y * y) / (6.0 * ell)
        out = static + a * a * iterated + 0j
        for idx in np.ndindex(zb.shape):
            # orthonormal on [-L, L]: u_n = sin(k_n (z + L)) / sqrt(L)
            un = np.sin(kn * (zb[idx] + L))
            unp = np.sin(kn * (zpb[idx] + L))
            out[idx] += np.sum(un * unp * weight) / L
        return out[()] if out.ndim == 0 else out
    raise InvalidParameterError(f"unknown g form {form!r}")


def big_f(h, z, params: GreenParams):
    """F(h, z) = e^{-ihz} sin 2aL + e^{ihL} sin a(z-L) - e^{-ihL} sin a(z+L)."""
    a = params.alpha
    L = params.half_length
    return (np.exp(-1j * h * z) * np.sin(2 * a * L) + np.exp(1j * h * L) * np.sin(a * (z - L))
            - np.exp(-1j * h * L) * np.sin(a * (z + L)))


def _end_ratios(z, params):
    """sin(a(z-L))/sin(2aL) and sin(a(z+L))/sin(2aL), evaluated stably."""
    a = params.alpha
    L = params.half_length
    r_minus = -_sin_ratio(a, L - z, 2 * L)
    r_plus = _sin_ratio(a, z + L, 2 * L)
    return r_minus, r_plus


def _phi_derivative(h, z, L, r_minus, r_plus, n):
    """n-th h-derivative of F(h, z) / sin(2 a L)."""
    return ((-1j * z) ** n * np.exp(-1j * h * z) + r_minus * (1j * L) ** n * np.exp(1j * h * L)
            - r_plus * (-1j * L) ** n * np.exp(-1j * h * L))


def g_fourier(h, z, params: GreenParams, switch=1e-4):
    """integral_{-L}^{L} g(z, z') exp(-i h z') dz'  =  -F(h,z) / ((a^2 - h^2) sin 2aL).

    Within ``|h -+ a| L < switch`` of the removable singularities a three-term
    Taylor expansion of F about h = +-a is used instead.
    """
    check_resonance(params)
    a = params.alpha
    L = params.half_length
    scalar = np.ndim(h) == 0 and np.ndim(z) == 0
    h, z = np.broadcast_arrays(np.atleast_1d(h), np.atleast_1d(np.asarray(z, dtype=float)))
    r_m, r_p = _end_ratios(z, params)
    phi = _phi_derivative(h, z, L, r_m, r_p, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -phi / ((a - h) * (a + h))
    for root, other_sign in ((a, 1.0), (-a, -1.0)):
        near = np.abs(h - root) * L < switch
        if np.any(near):
            hn, zn = h[near], z[near]
            rm, rp = r_m[near], r_p[near]
            eps = hn - root
            d1 = _phi_derivative(root, zn, L, rm, rp, 1)
            d2 = _phi_derivative(root, zn, L, rm, rp, 2)
            d3 = _phi_derivative(root, zn, L, rm, rp, 3)
            series = d1 + 0.5 * d2 * eps + d3 * eps * eps / 6.0
            # -phi / ((a - h)(a + h)) with phi ~ series * eps
            if other_sign > 0:      # near h = a: a - h = -eps
                out[near] = series / (a + hn)
            else:                   # near h = -a: a + h = eps
                out[near] = -series / (a - hn)
    return out[0] if scalar else out


# ------------------------------------------------------------------ G: static part

def _elliptic_parts(u, radius):
    u = np.asarray(u, dtype=float)
    s2 = u * u + 4.0 * radius * radius
    p = u * u / s2                        # complementary parameter 1 - m
    m = 4.0 * radius * radius / s2
    with np.errstate(divide="ignore"):
        kk = special.ellipkm1(p)
    ee = special.ellipe(m)
    return u, s2, kk, ee


def static_g(u, radius, order=0):
    """Static (k = 0) part of G on the surface and its u-derivatives up to 2.

    G0(u)   = 4R K(m) / sqrt(u^2 + 4R^2),  m = 4R^2 / (u^2 + 4R^2)
    G0'(u)  = -4R E(m) / (u sqrt(u^2 + 4R^2))
    G0''(u) = 4R [E - K + E (2u^2 + 4R^2)/u^2] / (u^2 + 4R^2)^(3/2)
    """
    u, s2, kk, ee = _elliptic_parts(u, radius)
    R = radius
    with np.errstate(divide="ignore", invalid="ignore"):
        if order == 0:
            out = 4.0 * R * kk / np.sqrt(s2)
        elif order == 1:
            out = -4.0 * R * ee / (u * np.sqrt(s2))
        elif order == 2:
            out = 4.0 * R * (ee - kk + ee * (2 * u * u + 4 * R * R) / (u * u)) / s2**1.5
        else:
            raise InvalidParameterError("static_g supports order 0..2")
    return out


def _static_g_offsurface(u, r, radius):
    a = r * r + radius * radius + u * u
    b = 2.0 * r * radius
    one_minus_m = ((r - radius) ** 2 + u * u) / ((r + radius) ** 2 + u * u)
    with np.errstate(divide="ignore"):
        kk = special.ellipkm1(one_minus_m)
    return 4.0 * radius * kk / np.sqrt(a + b)


# ------------------------------------------------------------------ G: angular quadrature

@lru_cache(maxsize=32)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=256)
def _angle_rule(width, order):
    """Nodes/weights on psi in [0, pi/2], graded toward psi = 0 on the scale ``width``."""
    x, w = _gauss(max(8, order // 4))
    edges = [0.0]
    step = max(min(width, math.pi / 2), 1e-9)
    while edges[-1] + step < math.pi / 2:
        edges.append(edges[-1] + step)
        step *= 2.0
    edges.append(math.pi / 2)
    edges = np.asarray(edges)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (lo + (hi - lo) * x).ravel()
    weights = ((hi - lo) * w).ravel()
    return nodes, weights


@lru_cache(maxsize=8)
def _radial_coeffs(nmax):
    """c[n][j] with D^n(e^{ik rho}/rho) = e^{ik rho} sum_j c[n][j] (ik)^j rho^(j - 2n - 1)."""
    coeffs = [np.array([1.0])]
    for n in range(1, nmax + 1):
        prev = coeffs[-1]
        new = np.zeros(len(prev) + 1)
        for j, c in enumerate(prev):
            new[j + 1] += c
            new[j] += c * (j - 2 * (n - 1) - 1)
        coeffs.append(new)
    return coeffs


_SERIES_TERMS = 28


@lru_cache(maxsize=8)
def _dynamic_series(n):
    """b_m with D^n((e^{ik rho} - 1)/rho) = rho^(-2n-1) sum_m b_m (ik rho)^m."""
    b = np.zeros(_SERIES_TERMS + 1)
    for m in range(1, _SERIES_TERMS + 1):
        c = 1.0
        for i in range(n):
            c *= (m - 1 - 2 * i)
        b[m] = c / math.factorial(m)
    return b


def _radial_d(rho, k, nmax, dynamic_only):
    """D^n f for n = 0..nmax, D = (1/rho) d/drho.

    f = exp(ik rho)/rho, or (exp(ik rho) - 1)/rho when ``dynamic_only``; the
    latter uses its Taylor series where k rho is small to avoid cancellation.
    """
    rho = np.asarray(rho, dtype=float)
    ik = 1j * k
    coeffs = _radial_coeffs(nmax)
    out = []
    if dynamic_only and k * float(np.max(rho, initial=0.0)) < 2.0:
        x = ik * rho
        for n in range(nmax + 1):
            b = _dynamic_series(n)
            acc = np.full(rho.shape, b[-1], dtype=complex)
            for m in range(len(b) - 2, -1, -1):
                acc = acc * x + b[m]
            out.append(acc * rho ** (-2 * n - 1))
        return out
    e = np.exp(ik * rho)
    ikr = ik * rho
    for n in range(nmax + 1):
        c = coeffs[n]
        acc = np.full(rho.shape, c[-1], dtype=complex)
        for j in range(len(c) - 2, -1, -1):
            acc = acc * ikr + c[j]
        val = acc * e * rho ** (-2 * n - 1)
        if dynamic_only:
            dfac = float(np.prod(np.arange(1, 2 * n, 2))) if n else 1.0
            val = val - (-1) ** n * dfac * rho ** (-2 * n - 1)
        out.append(val)
    if dynamic_only:
        small = k * rho < 2.0
        if np.any(small):
            series = _radial_d(rho[small], k, nmax, True)
            for n in range(nmax + 1):
                out[n][small] = series[n]
    return out


def _u_derivative_from_radial(u, dn, order):
    """Combine D^n f into d^order f / du^order (rho^2 = u^2 + const)."""
    if order == 0:
        return dn[0]
    if order == 1:
        return u * dn[1]
    if order == 2:
        return dn[1] + u * u * dn[2]
    if order == 3:
        return 3 * u * dn[2] + u**3 * dn[3]
    if order == 4:
        return 3 * dn[2] + 6 * u * u * dn[3] + u**4 * dn[4]
    if order == 5:
        return 15 * u * dn[3] + 10 * u**3 * dn[4] + u**5 * dn[5]
    raise InvalidParameterError("derivative order must be 0..5")


def _angular_integral(u, params, order, dynamic_only, r=None):
    """4R * int_0^{pi/2} d^order/du^order f(rho(psi, u)) dpsi for each u.

    Points sharing the same (power-of-two) grading scale are evaluated
    together on one angular rule.
    """
    R = params.radius
    r = R if r is None else r
    u = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    out = np.empty(u.shape, dtype=complex)
    nq = params.azimuthal_quadrature_order
    gap = np.sqrt((r - R) ** 2 + u * u)
    with np.errstate(divide="ignore"):
        width = 0.25 * gap / (2.0 * math.sqrt(r * R))
        level = np.where(width > 0, np.floor(np.log2(np.maximum(width, 1e-300))), -30.0)
    level = np.clip(level, -30.0, 1.0)
    for lev in np.unique(level):
        sel = np.nonzero(level == lev)[0]
        psi, w = _angle_rule(float(2.0 ** lev), nq)
        sin2 = 4.0 * r * R * np.sin(psi) ** 2
        for c0 in range(0, sel.size, 4096):
            idx = sel[c0:c0 + 4096]
            uu = u[idx, None]
            rho = np.sqrt(gap[idx, None] ** 2 + sin2)
            dn = _radial_d(rho, params.k_free, order, dynamic_only)
            out[idx] = 4.0 * R * (_u_derivative_from_radial(uu, dn, order) @ w)
    return out


def static_g_antiderivative(t, radius):
    """int_0^t G0(u) du = 4R int_0^{pi/2} asinh(t / (2R sin psi)) dpsi (odd in t)."""
    t = np.asarray(t, dtype=float)
    flat = np.abs(t).ravel()
    psi, w = _log_graded_rule()
    out = np.empty(flat.shape)
    inv = 1.0 / (2.0 * radius * np.sin(psi))
    eps = _LOG_SLIVER
    for c0 in range(0, flat.size, 4096):
        tt = flat[c0:c0 + 4096, None]
        with np.errstate(divide="ignore"):
            body = np.arcsinh(tt * inv) @ w
            # asinh(c / sin psi) ~ log(2c / psi) on [0, eps]
            c = tt[:, 0] / (2.0 * radius)
            sliver = np.where(c > 0, eps * (np.log(2.0 * np.maximum(c, 1e-300) / eps) + 1.0), 0.0)
        out[c0:c0 + 4096] = 4.0 * radius * (body + sliver)
    return (np.sign(t).ravel() * out).reshape(t.shape)


_LOG_SLIVER = 1e-13


@lru_cache(maxsize=1)
def _log_graded_rule():
    """Geometric panels on [eps, pi/2] for integrands with a log end singularity."""
    x, w = _gauss(12)
    edges = [_LOG_SLIVER]
    while edges[-1] < math.pi / 2:
        edges.append(min(2.0 * edges[-1], math.pi / 2))
    edges = np.asarray(edges)
    lo, hi = edges[:-1, None], edges[1:, None]
    return (lo + (hi - lo) * x).ravel(), ((hi - lo) * w).ravel()


def green_derivative(u, params: GreenParams, order=0):
    """d^order G / du^order on the surface (r = R), order 0..5.

    Orders 0-2: elliptic closed form for the static part plus angular
    quadrature of the smooth dynamic remainder.  Orders 3-5: angular
    quadrature of the differentiated full integrand (requires u != 0).
    """
    u = np.asarray(u, dtype=float)
    if order <= 2:
        out = static_g(u, params.radius, order) + _angular_integral(u, params, order, True).reshape(u.shape)
    else:
        if np.any(u == 0):
            raise InvalidParameterError("higher derivatives of G are singular at u = 0")
        out = _angular_integral(u, params, order, False).reshape(u.shape)
    return out[()] if out.ndim == 0 else out


def big_g(delta_z, params: GreenParams, r=None, form="direct"):
    """Circumferentially integrated Helmholtz kernel G(r, delta_z).

    ``direct`` integrates over the angle; ``spectral`` evaluates the
    Hankel-Bessel wavenumber integral.  On the surface G diverges
    logarithmically at delta_z = 0, which is rejected.
    """
    R = params.radius
    r = R if r is None else float(r)
    if r < R * (1 - 1e-12):
        raise InvalidParameterError("r must be >= radius")
    dz = np.asarray(delta_z, dtype=float)
    if np.any((dz == 0) & (abs(r - R) <= 1e-12 * R)):
        raise InvalidParameterError(
            "G is logarithmically singular at delta_z = 0 on the surface (r = radius)")
    if form == "direct":
        if abs(r - R) <= 1e-12 * R:
            out = static_g(dz, R, 0) + _angular_integral(dz, params, 0, True).reshape(dz.shape)
        else:
            out = (_static_g_offsurface(dz, r, R)
                   + _angular_integral(dz, params, 0, True, r=r).reshape(dz.shape))
    elif form == "spectral":
        out = spectral_g(dz, params, r=r)
    else:
        raise InvalidParameterError(f"unknown big_g form {form!r}")
    return out[()] if np.ndim(out) == 0 else out


# ------------------------------------------------------------------ spectral machinery

def hankel_bessel(h, params: GreenParams, r=None):
    """H0^(1)(kappa r) J0(kappa R), kappa = sqrt(k^2 - h^2) with Im kappa >= 0."""
    R = params.radius
    r = R if r is None else r
    k = params.k_free
    h = np.abs(np.asarray(h, dtype=float))
    out = np.empty(h.shape, dtype=complex)
    lo = h < k
    if np.any(lo):
        kap = np.maximum(np.sqrt(k * k - h[lo] ** 2), 1e-30 * k)
        out[lo] = special.hankel1(0, kap * r) * special.j0(kap * R)
    hi = ~lo
    if np.any(hi):
        y = np.maximum(np.sqrt(h[hi] ** 2 - k * k), 1e-30 * k)
        # H0(i y r) J0(i y R) = (2 / (i pi)) K0(y r) I0(y R)
        out[hi] = (-2j / math.pi) * special.k0e(y * r) * special.i0e(y * R) * np.exp(-y * (r - R))
    return out


def spectral_rule(params: GreenParams, span: float, h_max: float, extra=(), per_panel=12):
    """Quadrature nodes/weights on [0, h_max] for wavenumber integrals.

    Handles the logarithmic branch point at h = k by substitution, grades the
    panels geometrically away from it and caps the panel width at pi/span so
    that exp(i h u) with |u| <= span is resolved.  ``extra`` lists additional
    (centre, width) pairs that get local refinement.
    """
    k = params.k_free
    x, w = _gauss(per_panel)
    nodes, weights = [], []
    if k > 0:
        # kappa -> 0 at h = k gives a log branch point; grade toward it
        grade = np.concatenate(([0.0], 2.0 ** -np.arange(40.0, -1.0, -2.0)))
        lo, hi = grade[:-1, None], grade[1:, None]
        s = (lo + (hi - lo) * x).ravel()
        ws = ((hi - lo) * w).ravel()
        th = 0.5 * math.pi * s                     # h = k cos(th), kappa = k sin(th)
        nodes.append(k * np.cos(th))
        weights.append(0.5 * math.pi * ws * k * np.sin(th))
        tmax = math.acosh(2.0)
        tau = tmax * s
        nodes.append(k * np.cosh(tau))
        weights.append(tmax * ws * k * np.sinh(tau))
        start = 2.0 * k
    else:
        start = 0.0
    w_cap = math.pi / max(span, 1e-30)
    edges = [start]
    step = max(start, min(w_cap, 1.0 / params.radius) * 1e-3)
    while edges[-1] < h_max:
        step = min(2.0 * step, w_cap)
        edges.append(min(edges[-1] + step, h_max))
    edges = np.asarray(edges)
    for centre, width in extra:
        if width <= 0 or not start < centre < h_max:
            continue
        fine = np.linspace(max(start, centre - 8 * width), min(h_max, centre + 8 * width), 33)
        edges = np.union1d(edges, fine)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes.append(((lo + (hi - lo) * x)).ravel())
    weights.append(((hi - lo) * w).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _expint_cf(n, z):
    """E_n(z) by the modified Lentz continued fraction (|z| >= 1, Re z >= 0)."""
    tiny = 1e-300
    bb = z + n
    c = np.full(z.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / bb
    h = d.copy()
    for i in range(1, 5000):
        an = -i * (n - 1 + i)
        bb = bb + 2.0
        d = 1.0 / (an * d + bb)
        c = bb + an / c
        step = c * d
        h *= step
        if np.all(np.abs(step - 1.0) < 1e-16):
            break
    return h * np.exp(-z)


def _tail_moments(x, nmax):
    """C_n(x) = int_x^inf cos t / t^n dt and S_n likewise, n = 1..nmax (x > 0).

    Upward recursion from the sine/cosine integrals for x < 1, the
    continued fraction of E_n(-ix) otherwise.
    """
    x = np.asarray(x, dtype=float)
    si, ci = special.sici(x)
    e = {1: -ci + 1j * (0.5 * math.pi - si)}
    small = x < 1.0
    for n in range(1, nmax):
        nxt = np.empty(x.shape, dtype=complex)
        xs = x[small]
        nxt[small] = (1j * np.exp(1j * xs) * xs ** (-n) - e[n][small]) / (1j * n)
        if np.any(~small):
            xb = x[~small]
            nxt[~small] = xb ** (-n) * _expint_cf(n + 1, -1j * xb)
        e[n + 1] = nxt
    cn = {n: v.real for n, v in e.items()}
    sn = {n: v.imag for n, v in e.items()}
    return cn, sn


def _asymptotic_tail(u, params, h_max, kind):
    """Analytic tail h > h_max of the surface spectral integrals.

    kind="cos": 2 i pi R int cos(hu) H0 J0 dh       (value of G)
    kind="sin": 2 i pi R int sin(hu)/h H0 J0 dh     (antiderivative of G)
    Uses H0 J0 -> -(2i/pi) K0 I0(hR) with its large-argument series; returns
    the tail and an estimate of the first omitted term.
    """
    R = params.radius
    sign = np.sign(np.asarray(u, dtype=float))
    u = np.abs(np.asarray(u, dtype=float))
    nterms = len(_K0I0_ASYMPTOTIC) - 1
    total = np.zeros(u.shape)
    omitted = np.zeros(u.shape)
    for m, a in enumerate(_K0I0_ASYMPTOTIC):
        coef = 2.0 * a / R ** (2 * m)      # 2 i pi R * (-2i/pi) * a / (2 R^(2m+1)) * R
        n = 2 * m + 1 if kind == "cos" else 2 * m + 2
        with np.errstate(divide="ignore", invalid="ignore"):
            x = h_max * u
            pos = x > 0
            val = np.empty(u.shape)
            if np.any(pos):
                cn, sn = _tail_moments(x[pos], n)
                mom = cn[n] if kind == "cos" else sn[n]
                val[pos] = u[pos] ** (n - 1) * mom
            if np.any(~pos):
                val[~pos] = (h_max ** (1 - n) / (n - 1)) if (kind == "cos" and n > 1) else (
                    np.inf if kind == "cos" else 0.0)
        term = coef * val
        if m < nterms:
            total = total + term
        else:
            omitted = np.abs(term)
    if kind == "sin":
        total = total * sign
    return total, omitted


def spectral_g(u, params: GreenParams, r=None, h_max=None, tol=1e-9):
    """G(u) = i pi R int_{-inf}^{inf} exp(i h u) H0(kappa r) J0(kappa R) dh."""
    R = params.radius
    r = R if r is None else r
    h_max = params.spectral_h_max if h_max is None else h_max
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape, dtype=complex)
    on_surface = abs(r - R) <= 1e-12 * R
    if not on_surface and h_max * (r - R) < 36.0:
        raise TruncationError("spectral tail not negligible off the surface",
                              suggested_h_max=40.0 / (r - R))
    for idx, uu in np.ndenumerate(u):
        nodes, weights = spectral_rule(params, max(abs(uu), R), h_max)
        hb = hankel_bessel(nodes, params, r)
        val = 2j * math.pi * R * np.sum(weights * hb * np.cos(nodes * uu))
        if on_surface:
            tail, omitted = _asymptotic_tail(np.array([uu]), params, h_max, "cos")
            if omitted[0] > tol * abs(val + tail[0]):
                raise TruncationError(f"spectral tail estimate {omitted[0]:.2e} above tolerance",
                                      suggested_h_max=2.0 * h_max)
            val = val + tail[0]
        out[idx] = val
    return out.reshape(np.shape(u))


def spectral_g_antiderivative(v, params: GreenParams, h_max=None):
    """int_0^v G(t) dt = 2 i pi R int_0^inf sin(h v)/h H0 J0 dh on the surface."""
    R = params.radius
    h_max = params.spectral_h_max if h_max is None else h_max
    v = np.atleast_1d(np.asarray(v, dtype=float))
    span = max(float(np.max(np.abs(v))), R)
    nodes, weights = spectral_rule(params, span, h_max)
    hb = hankel_bessel(nodes, params) * weights / nodes
    out = np.empty(v.shape, dtype=complex)
    chunk = max(1, 2_000_000 // len(nodes))
    flat = v.ravel()
    res = np.empty(flat.shape, dtype=complex)
    for s in range(0, flat.size, chunk):
        vv = flat[s:s + chunk]
        res[s:s + chunk] = 2j * math.pi * R * (np.sin(np.outer(vv, nodes)) @ hb)
    tail, _ = _asymptotic_tail(flat, params, h_max, "sin")
    out = (res + tail).reshape(v.shape)
    return out
