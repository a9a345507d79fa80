import math

import numpy as np
import pytest

from nanopull.conductivity import Regime, response
from nanopull.errors import AnalyticSingularityError
from nanopull.force import (
    FEMTONEWTON, ForceMethod, ForceResult, analytic_bracket, force_analytic, force_density_integral,
    force_local, force_numeric,
)
from nanopull.model import build_excitation, build_system, ev_to_joule
from nanopull.solver import incident_field, rhs_B, solve_system

L = 100e-9
MU = ev_to_joule(0.413)


@pytest.fixture(scope="module")
def system():
    return build_system(12, L, MU, temperature=0.0)


def zeroth_order_force(system, exc, nodes=2000):
    """F for j = -B, whose field is E_inc, by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = system.half_length
    z, w = half * x, half * w
    j = -rhs_B(z, exc.omega, system, exc)
    beta = exc.k_free * math.cos(exc.theta0)
    de = 1j * beta * incident_field(z, exc)
    return -(2 * math.pi * system.radius / exc.omega) * float(np.sum(w * np.imag(np.conj(de) * j)))


@pytest.mark.parametrize("f_thz,half", [(170.0, L), (200.5, L), (215.0, L), (240.0, 40e-9),
                                        (205.0, 300e-9)])
def test_analytic_matches_zeroth_order_quadrature(f_thz, half):
    system = build_system(12, half, MU, temperature=0.0)
    exc = build_excitation(1e7, math.radians(30), f_thz * 1e12)
    ref = zeroth_order_force(system, exc)
    assert force_analytic(exc.omega, system, exc).f_z == pytest.approx(ref, rel=1e-6)


def test_analytic_singularities():
    beta = 1e7
    with pytest.raises(AnalyticSingularityError):
        analytic_bracket(beta * (1 + 1e-12), beta, L)
    with pytest.raises(AnalyticSingularityError):
        analytic_bracket(math.pi / (2 * L), beta, L)


def test_normal_incidence_gives_zero(system):
    exc = build_excitation(1e7, math.pi / 2, 215e12)
    assert force_analytic(exc.omega, system, exc).f_z == pytest.approx(0.0, abs=1e-30)
    assert force_local(exc.omega, system, exc).f_z == pytest.approx(0.0, abs=1e-30)


def test_analytic_tends_to_local_with_override(system):
    exc = build_excitation(1e7, math.radians(30), 215e12)
    rec = response(exc.omega, system, local_factor=1e3)
    a = force_analytic(exc.omega, system, exc, rec).f_z
    assert a == pytest.approx(force_local(exc.omega, system, exc).f_z, rel=1e-2)


def test_local_force_scaling_and_sign(system):
    for f in (150e12, 215e12, 250e12):
        exc = build_excitation(1e7, math.radians(30), f)
        one = force_local(exc.omega, system, exc)
        two = force_local(exc.omega, build_system(12, 2 * L, MU, temperature=0.0), exc)
        assert two.f_z == pytest.approx(2 * one.f_z, rel=1e-14)
        assert math.copysign(1, one.f_z) == math.copysign(1, response(exc.omega, system).sigma_total.real)


def test_local_force_angle_maximizer(system):
    angles = np.linspace(0.01, math.pi / 2 - 0.01, 2001)
    vals = [force_local(2 * math.pi * 215e12, system, build_excitation(1e7, t, 215e12)).f_z
            for t in angles]
    best = angles[int(np.argmax(vals))]
    assert best == pytest.approx(math.atan(math.sqrt(2)), abs=1e-3)


@pytest.fixture(scope="module")
def interband(system):
    exc = build_excitation(1e7, math.radians(30), 215e12)
    sol, _, rec = solve_system(system, exc, 81)
    return exc, sol, rec


def test_numeric_force_positive_in_interband_regime(system, interband):
    exc, sol, rec = interband
    res = force_numeric(sol, exc.omega, system.radius, system, exc, rec.regime)
    assert res.f_z > 0 and not res.is_pulling
    assert res.method is ForceMethod.NUMERIC and res.regime is Regime.INTERBAND
    assert res.parameters_echo["sign_convention"] == sol.sign_convention.value
    assert abs(res.imaginary_residue) < 1e-8 * abs(res.f_z)


def test_numeric_force_quadratic_in_amplitude(system):
    base = build_excitation(1e7, math.radians(30), 215e12)
    f1 = force_numeric(solve_system(system, base, 81)[0], base.omega, system.radius).f_z
    exc = build_excitation(4e7, math.radians(30), 215e12)
    f4 = force_numeric(solve_system(system, exc, 81)[0], exc.omega, system.radius).f_z
    assert f4 == pytest.approx(16 * f1, rel=1e-12)
    zero = build_excitation(0.0, math.radians(30), 215e12)
    assert force_numeric(solve_system(system, zero, 81)[0], zero.omega, system.radius).f_z == 0


def test_density_integral_real_and_complex_forms_agree():
    rng = np.random.default_rng(8)
    e = rng.normal(size=40) + 1j * rng.normal(size=40)
    j = rng.normal(size=40) + 1j * rng.normal(size=40)
    real_form, residue = force_density_integral(e, j, 1e-9, 1e15, 1e-9)
    assert math.isfinite(real_form) and residue == pytest.approx(0.0, abs=1e-12 * abs(real_form))


def test_force_result_contract():
    r = ForceResult(-2e-15, ForceMethod.ANALYTIC, Regime.THRESHOLD)
    assert r.is_pulling and r.f_z_fn == pytest.approx(-2.0)
    assert FEMTONEWTON == 1e-15
    with pytest.raises(ValueError):
        ForceResult(float("nan"), ForceMethod.LOCAL, Regime.INTRABAND)
