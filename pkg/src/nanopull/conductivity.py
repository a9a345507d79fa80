"""Nonlocal axial surface conductivity of a metallic zigzag nanotube.

Time dependence is exp(-i omega t).  The causal limit omega + i0 is
represented by omega * (1 + i*delta_rel).

Notation used throughout::

    sigma_inter(w) = C/w * [H(hw - 2mu) - (i/pi) ln|4mu^2 / (4mu^2 - (hw)^2)|],
    C = e^2 v_F / (2 pi hbar R)                                   (T = 0)
    sigma_intra(w) = i e^2 v_F tanh(mu / 2kT) / (pi^2 hbar w R)
    xi = v_F^2/2 * d^2 sigma / d w^2,  alpha = sqrt(sigma / xi)
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DegenerateDistributionError, InvalidParameterError, ThresholdWarning
from .model import CONST, CntSystem

DELTA_REL = 1e-6
THRESHOLD_BAND = 1e-3
LOCAL_FACTOR = 1e3
# Closed (zero-temperature) forms are used when k_B T < mu / ZERO_T_RATIO.
ZERO_T_RATIO = 50.0


class Regime(str, enum.Enum):
    INTRABAND = "Intraband"
    INTERBAND = "Interband"
    THRESHOLD = "Threshold"


def fermi(eps, mu, temp):
    """Fermi-Dirac occupation; a step (0.5 at eps == mu) when ``temp == 0``."""
    eps = np.asarray(eps, dtype=float)
    if temp < 0:
        raise InvalidParameterError("temperature must be >= 0")
    if temp == 0:
        out = np.where(eps < mu, 1.0, np.where(eps > mu, 0.0, 0.5))
    else:
        out = special.expit(-(eps - mu) / (CONST.k_boltzmann * temp))
    return out[()] if out.ndim == 0 else out


def uses_zero_t(system: CntSystem) -> bool:
    return CONST.k_boltzmann * system.temperature < system.mu_chem / ZERO_T_RATIO


def regime_of(omega, system: CntSystem, band=THRESHOLD_BAND) -> Regime:
    x = CONST.hbar * omega
    two_mu = 2.0 * system.mu_chem
    if abs(x - two_mu) < band * two_mu:
        return Regime.THRESHOLD
    return Regime.INTERBAND if x > two_mu else Regime.INTRABAND


def _check_omega(omega):
    if not omega > 0:
        raise InvalidParameterError(f"omega must be positive, got {omega!r}")


def _inter_prefactor(system):
    return CONST.e_charge**2 * system.v_fermi / (2.0 * math.pi * CONST.hbar * system.radius)


def _inter_closed(omega, system, delta_rel, band):
    c = _inter_prefactor(system)
    x = CONST.hbar * omega
    four_mu2 = 4.0 * system.mu_chem**2
    near = abs(x - 2.0 * system.mu_chem) < band * 2.0 * system.mu_chem
    if near:
        warnings.warn(f"hbar*omega within the threshold band of 2 mu (omega={omega:.6e})",
                      ThresholdWarning, stacklevel=3)
        if delta_rel is None:
            delta_rel = DELTA_REL
    if delta_rel:
        # The principal branch of the complex log produces the step by itself.
        w = omega * (1.0 + 1j * delta_rel)
        xt = CONST.hbar * w
        return c / w * (-1j / math.pi) * np.log(four_mu2 / (four_mu2 - xt * xt))
    if x == 2.0 * system.mu_chem:
        raise InvalidParameterError("Im sigma_inter is log-infinite at hbar*omega = 2 mu without broadening")
    step = 1.0 if x > 2.0 * system.mu_chem else 0.0
    return c / omega * (step - 1j / math.pi * math.log(abs(four_mu2 / (four_mu2 - x * x))))


def _occupation_difference(eps, system):
    """F(-eps) - F(eps)."""
    return fermi(-eps, system.mu_chem, system.temperature) - fermi(eps, system.mu_chem,
                                                                   system.temperature)


def _inter_quadrature(omega, system):
    """Energy integral of the interband term, split by Sokhotski-Plemelj.

    The delta-function part gives Re sigma exactly; the principal value is
    done with a Cauchy-weighted rule plus an analytic tail.
    """
    x = CONST.hbar * omega
    mu = system.mu_chem
    kt = CONST.k_boltzmann * system.temperature
    pole = 0.5 * x
    width = max(40.0 * kt, 1e-3 * mu)

    def reg(eps):
        return -_occupation_difference(eps, system) / (2.0 * eps * (x + 2.0 * eps))

    def full(eps):
        return _occupation_difference(eps, system) / (eps * (x * x - 4.0 * eps * eps))

    half = 0.25 * min(pole, abs(pole - mu) if abs(pole - mu) > 0 else pole)
    half = max(half, 1e-6 * pole)
    lo, hi = pole - half, pole + half
    top = max(hi, mu + width) + 5.0 * mu
    pv, _ = integrate.quad(reg, lo, hi, weight="cauchy", wvar=pole, limit=400)
    cuts = sorted({0.0, lo, hi, top, *[p for p in (mu - width, mu, mu + width) if 0 < p < top]})
    rest = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if a >= lo and b <= hi:
            continue
        if a < lo < b or a < hi < b:
            raise AssertionError("interval bookkeeping")  # pragma: no cover
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(full, a, b, limit=400, epsabs=0.0, epsrel=1e-10)
        rest += val
    tail = 0.5 / x**2 * math.log(abs(x * x - 4.0 * top * top) / (4.0 * top * top))
    pv_total = pv + rest + tail
    pref = CONST.e_charge**2 * CONST.hbar * omega * system.v_fermi / (math.pi**2 * system.radius)
    im = pref * pv_total
    re = _inter_prefactor(system) / omega * float(_occupation_difference(pole, system))
    return complex(re, im)


def sigma_inter(omega, system: CntSystem, method="auto", delta_rel=None, band=THRESHOLD_BAND):
    """Interband surface conductivity (S).

    ``closed_zero_t`` is the zero-temperature closed form.  With
    ``delta_rel=None`` it is evaluated on the real axis (exact Heaviside step)
    except inside the threshold band, where the regularized form is returned
    and a :class:`ThresholdWarning` is issued.  A positive ``delta_rel``
    evaluates at omega*(1 + i*delta_rel) everywhere.

    ``quadrature`` integrates the finite-temperature energy integral.
    ``auto`` picks the closed form when k_B T < mu/50.
    """
    _check_omega(omega)
    if method == "auto":
        method = "closed_zero_t" if uses_zero_t(system) else "quadrature"
    if method == "closed_zero_t":
        return complex(_inter_closed(omega, system, delta_rel, band))
    if method == "quadrature":
        return _inter_quadrature(omega, system)
    raise InvalidParameterError(f"unknown sigma_inter method {method!r}")


def _thermal_factor(system):
    """-integral of sign(eps) dF/deps over the real line, i.e. tanh(mu / 2kT)."""
    if system.temperature == 0:
        if system.mu_chem == 0:
            raise DegenerateDistributionError("mu = 0 at T = 0: sign(eps) is undefined at the step")
        return math.copysign(1.0, system.mu_chem)
    return math.tanh(system.mu_chem / (2.0 * CONST.k_boltzmann * system.temperature))


def _thermal_factor_quadrature(system):
    kt = CONST.k_boltzmann * system.temperature
    if kt == 0:
        return _thermal_factor(system)
    mu = system.mu_chem

    def dfde(eps):
        # derivative of the Fermi function, written to avoid overflow
        a = (eps - mu) / kt
        return -0.25 / kt / math.cosh(0.5 * a) ** 2 if abs(a) < 700 else 0.0

    span = 60.0 * kt
    pos, _ = integrate.quad(dfde, 0.0, mu + span, points=[mu], limit=200, epsabs=0.0)
    neg, _ = integrate.quad(dfde, min(-span, mu - span), 0.0, limit=200, epsabs=0.0)
    return -(pos - neg)


def sigma_intra(omega, system: CntSystem, method="closed", delta_rel=None):
    """Intraband (Drude-like) surface conductivity (S).

    The occupation integral reduces to tanh(mu/2kT) at any temperature.  The
    sign is fixed so that Re sigma_intra >= 0 under the omega + i0 rule.
    ``method="quadrature"`` evaluates the occupation integral numerically.
    """
    _check_omega(omega)
    if method == "closed":
        s = _thermal_factor(system)
    elif method == "quadrature":
        s = _thermal_factor_quadrature(system)
    else:
        raise InvalidParameterError(f"unknown sigma_intra method {method!r}")
    w = omega * (1.0 + 1j * delta_rel) if delta_rel else omega
    pref = CONST.e_charge**2 * system.v_fermi / (math.pi**2 * CONST.hbar * system.radius)
    return complex(1j * pref * s / w)


def sigma_total(omega, system, method="auto", delta_rel=None, band=THRESHOLD_BAND):
    return (sigma_inter(omega, system, method, delta_rel, band)
            + sigma_intra(omega, system, delta_rel=delta_rel))


def _xi_inter_closed(omega, system, delta_rel):
    w = omega * (1.0 + 1j * delta_rel) if delta_rel else omega
    xt = CONST.hbar * w
    mu = system.mu_chem
    brace = 1.0 - xt**4 / (xt**2 - 4.0 * mu**2) ** 2
    return 1j * 16.0 * system.sigma0 * mu * system.v_fermi**2 / (math.pi * CONST.hbar * w**3) * brace


def _xi_intra(omega, system, delta_rel):
    # sigma_intra = a / w  =>  d^2/dw^2 = 2 a / w^3 = 2 sigma_intra / w^2
    w = omega * (1.0 + 1j * delta_rel) if delta_rel else omega
    return system.v_fermi**2 * sigma_intra(omega, system, delta_rel=delta_rel) / w**2


def second_derivative(fun, x, step, levels=2):
    """Central second difference with Richardson extrapolation.

    ``levels=1`` is the plain three-point stencil; each further level halves
    the step and removes the next even power of the error.
    """
    table = []
    h = step
    for _ in range(levels):
        table.append((fun(x + h) - 2.0 * fun(x) + fun(x - h)) / (h * h))
        h *= 0.5
    for order in range(1, levels):
        fac = 4.0**order
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0) for i in range(len(table) - 1)]
    return table[0]


def xi(omega, system: CntSystem, method="closed", delta_rel=None, sigma_method="auto",
       band=THRESHOLD_BAND, rel_step=2e-3, levels=3):
    """Nonlocality factor (S m^2); returns ``(xi_inter, xi_intra)``.

    ``closed`` uses the zero-temperature closed form for the interband part.
    ``derivative`` differentiates the chosen conductivity twice in omega.
    The intraband part is always the analytic second derivative of the
    closed Drude term.
    """
    _check_omega(omega)
    if regime_of(omega, system, band) is Regime.THRESHOLD:
        warnings.warn("xi evaluated inside the threshold band", ThresholdWarning, stacklevel=2)
    x_intra = complex(_xi_intra(omega, system, delta_rel))
    if method == "closed":
        x_inter = complex(_xi_inter_closed(omega, system, delta_rel))
    elif method == "derivative":
        def f(w):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ThresholdWarning)
                return sigma_inter(w, system, sigma_method, delta_rel, band)
        x_inter = 0.5 * system.v_fermi**2 * second_derivative(f, omega, rel_step * omega, levels)
    else:
        raise InvalidParameterError(f"unknown xi method {method!r}")
    return x_inter, x_intra


def alpha_tilde(sigma_tot, xi_tot, local_factor=None):
    """Nonlocality wavenumber sqrt(sigma/xi), principal root, optionally scaled."""
    if xi_tot == 0:
        raise ZeroDivisionError("xi_total = 0; use the local-limit path instead")
    a = complex(np.sqrt(complex(sigma_tot) / complex(xi_tot)))
    return a * local_factor if local_factor else a


@dataclass(frozen=True)
class ResponseRecord:
    omega: float
    sigma_inter: complex
    sigma_intra: complex
    xi_inter: complex
    xi_intra: complex
    alpha_tilde: complex
    regime: Regime
    local_factor: float | None = None
    sigma_method: str = ""
    xi_method: str = ""

    @property
    def sigma_total(self) -> complex:
        return self.sigma_inter + self.sigma_intra

    @property
    def xi_total(self) -> complex:
        return self.xi_inter + self.xi_intra

    @property
    def threshold_flag(self) -> bool:
        return self.regime is Regime.THRESHOLD


def response(omega, system: CntSystem, *, sigma_method="auto", xi_method="auto",
             delta_rel=DELTA_REL, local_factor=None, band=THRESHOLD_BAND) -> ResponseRecord:
    """All conductivity-derived quantities at one frequency.

    ``auto`` selects the closed zero-temperature forms when k_B T < mu/50 and
    otherwise the finite-temperature quadrature with a numerical xi.
    ``local_factor`` multiplies alpha (the local-limit override).
    """
    zero_t = uses_zero_t(system)
    if sigma_method == "auto":
        sigma_method = "closed_zero_t" if zero_t else "quadrature"
    if xi_method == "auto":
        xi_method = "closed" if zero_t else "derivative"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThresholdWarning)
        s_inter = sigma_inter(omega, system, sigma_method, delta_rel, band)
        s_intra = sigma_intra(omega, system, delta_rel=delta_rel)
        x_inter, x_intra = xi(omega, system, xi_method, delta_rel, sigma_method, band)
    alpha = alpha_tilde(s_inter + s_intra, x_inter + x_intra, local_factor)
    return ResponseRecord(float(omega), s_inter, s_intra, x_inter, x_intra, alpha,
                          regime_of(omega, system, band), local_factor, sigma_method, xi_method)
