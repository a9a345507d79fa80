"""Axial optical force on the tube.

The force follows from the zz-relevant Maxwell stress components integrated
over a surface hugging the tube; in terms of the surface current and the
total axial field it reduces to

    F_z = (iπR/ω) ∫ (∂E*/∂z j - ∂E/∂z j*) dz = -(2πR/ω) ∫ Im(∂E*/∂z j) dz.

The full stress tensor is never integrated directly: with a local
conductivity its diagonal part has non-integrable end singularities.

Three evaluations are offered: from a solved current (numeric), from the
zeroth-order current j = -B in closed form (analytic), and with a uniform
current j = σE_inc (local).
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .conductivity import Regime, ResponseRecord, regime_of, response
from .errors import AnalyticSingularityError
from .model import CONST, CntSystem, Excitation, config_echo
from .solver import CurrentSolution, first_derivative

FEMTONEWTON = 1e-15


class ForceMethod(str, enum.Enum):
    NUMERIC = "Numeric"
    ANALYTIC = "Analytic"
    LOCAL = "Local"


@dataclass(frozen=True)
class ForceResult:
    f_z: float
    method: ForceMethod
    regime: Regime
    parameters_echo: dict = field(default_factory=dict, compare=False)
    imaginary_residue: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.f_z):
            raise ValueError("force must be finite")

    @property
    def is_pulling(self) -> bool:
        return self.f_z < 0.0

    @property
    def f_z_fn(self) -> float:
        return self.f_z / FEMTONEWTON


def _prefactor(system: CntSystem, excitation: Excitation):
    th = excitation.theta0
    return (4.0 * math.pi * excitation.e0_amplitude**2 * system.radius
            * math.sin(th) ** 2 * math.cos(th) / CONST.c_light)


def force_density_integral(e_field, j, step, omega, radius):
    """Return (manifestly real force, imaginary part of the complex form)."""
    de = first_derivative(np.asarray(e_field), step)
    j = np.asarray(j)
    real_form = -(2.0 * math.pi * radius / omega) * step * float(np.sum(np.imag(np.conj(de) * j)))
    complex_form = (1j * math.pi * radius / omega) * step * np.sum(np.conj(de) * j - de * np.conj(j))
    return real_form, float(complex_form.imag)


def force_numeric(solution: CurrentSolution, omega, radius, system=None, excitation=None,
                  regime=None) -> ForceResult:
    """Force from a solved current on its collocation grid (midpoint weights)."""
    f, im = force_density_integral(solution.e_z_total, solution.j_z, solution.step, omega, radius)
    echo = config_echo(system, excitation) if system is not None and excitation is not None else {}
    if regime is None:
        regime = regime_of(omega, system) if system is not None else Regime.INTERBAND
    echo = {**echo, "sign_convention": solution.sign_convention.value,
            "n_segments": int(solution.j_z.size), "residual_norm": solution.residual_norm}
    return ForceResult(f, ForceMethod.NUMERIC, regime, echo, im)


def _stable_trig(x):
    """(cot x, 1/sin x) for Im x >= 0 without overflow."""
    q = cmath.exp(2j * x)
    den = q - 1.0
    return 1j * (q + 1.0) / den, 2j * cmath.exp(1j * x) / den


def analytic_bracket(alpha, beta, L):
    """L + α (cos 2αL - cos 2βL) / (sin(2αL) (α² - β²))."""
    a = complex(alpha)
    if a.imag < 0:
        a = -a
    d = a * a - beta * beta
    if abs(d) < 1e-8 * abs(a * a):
        raise AnalyticSingularityError("alpha^2 = (k cos theta)^2: analytic force undefined")
    x = 2.0 * a * L
    if x.imag < 30.0 and abs(cmath.sin(x)) < 1e-8 * abs(cmath.cos(x)):
        raise AnalyticSingularityError("sin(2 alpha L) ~ 0: internal resonance")
    cot, csc = _stable_trig(x)
    return L + a * (cot - math.cos(2.0 * beta * L) * csc) / d


def force_analytic(omega, system: CntSystem, excitation: Excitation,
                   record: ResponseRecord | None = None) -> ForceResult:
    """Closed form of the force carried by the zeroth-order current j = -B.

    F = A Re{ σα²/(α² - β²) [L + α (cos 2αL - cos 2βL) / (sin 2αL (α² - β²))] },
    β = k cos θ0, A = 4π E0² R sin²θ0 cos θ0 / c.
    """
    record = response(omega, system) if record is None else record
    a = record.alpha_tilde
    beta = excitation.k_free * math.cos(excitation.theta0)
    L = system.half_length
    br = analytic_bracket(a, beta, L)
    val = record.sigma_total * a * a / (a * a - beta * beta) * br
    f = _prefactor(system, excitation) * val.real
    return ForceResult(f, ForceMethod.ANALYTIC, record.regime, config_echo(system, excitation))


def force_local(omega, system: CntSystem, excitation: Excitation,
                record: ResponseRecord | None = None) -> ForceResult:
    """Uniform current j = σ E_inc: F = A L Re σ."""
    record = response(omega, system) if record is None else record
    f = _prefactor(system, excitation) * system.half_length * record.sigma_total.real
    return ForceResult(f, ForceMethod.LOCAL, record.regime, config_echo(system, excitation))


__all__ = [
    "FEMTONEWTON", "ForceMethod", "ForceResult", "analytic_bracket", "force_analytic",
    "force_density_integral", "force_local", "force_numeric",
]
