import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import j0

from nanopull.conductivity import response
from nanopull.errors import InvalidParameterError, ResonanceOrDiscretizationError
from nanopull.kernel import KernelMatrix, assemble, green_params, make_grid
from nanopull.model import CONST, build_excitation, build_system, ev_to_joule
from nanopull.solver import (
    DEFAULT_SIGN, SignConvention, calibrate_sign, coupling_constant, hertz_field, incident_field,
    reconstruct_field, rhs_B, solve, solve_system, surface_field,
)

L = 100e-9
F = 210e12


@pytest.fixture(scope="module")
def system():
    return build_system(12, L, ev_to_joule(0.413), temperature=0.0)


@pytest.fixture(scope="module")
def excitation():
    return build_excitation(1e7, math.radians(30), F)


@pytest.fixture(scope="module")
def setup(system, excitation):
    record = response(excitation.omega, system)
    kernel = assemble(make_grid(81, L), green_params(system, record))
    return record, kernel


def test_incident_field_shapes():
    z = np.linspace(-L, L, 9)
    assert np.all(incident_field(z, build_excitation(1e7, 0.0, F)) == 0)
    np.testing.assert_allclose(incident_field(z, build_excitation(1e7, math.pi / 2, F)), 1e7,
                               rtol=1e-15)
    e = incident_field(z, build_excitation(2e6, 0.4, F))
    np.testing.assert_allclose(np.abs(e), 2e6 * math.sin(0.4), rtol=1e-15)


def test_rhs_vanishes_at_ends(system, excitation):
    b = rhs_B(np.array([-L, L]), excitation.omega, system, excitation)
    assert np.all(b == 0)


def test_rhs_closed_matches_quadrature(system, excitation):
    z = np.random.default_rng(5).uniform(-0.98 * L, 0.98 * L, 20)
    closed = rhs_B(z, excitation.omega, system, excitation, "closed")
    quad = rhs_B(z, excitation.omega, system, excitation, "quadrature")
    assert np.max(np.abs(closed - quad) / np.abs(quad)) < 1e-8


def test_rhs_local_limit(system):
    exc = build_excitation(1e7, math.radians(30), 215e12)
    rec = response(exc.omega, system, local_factor=1e3)
    z = np.linspace(-0.5 * L, 0.5 * L, 11)
    b = rhs_B(z, exc.omega, system, exc, record=rec)
    expected = -rec.sigma_total * incident_field(z, exc)
    assert np.max(np.abs(b - expected) / np.abs(expected)) < 1e-2


def test_residual_and_metadata(system, excitation, setup):
    record, kernel = setup
    sol = solve(excitation.omega, system, excitation, kernel, record=record)
    assert sol.residual_norm < 1e-8
    assert sol.sign_convention is DEFAULT_SIGN
    assert sol.j_z.shape == (81,)
    c = coupling_constant(excitation.omega, record.sigma_total, record.alpha_tilde)
    lhs = sol.j_z + c * (kernel.values @ sol.j_z)
    np.testing.assert_allclose(lhs, -sol.rhs, rtol=0, atol=1e-8 * np.abs(sol.rhs).max())
    with pytest.raises(ValueError):
        sol.j_z[0] = 0


def test_zero_amplitude_gives_zero_current(system, setup):
    record, kernel = setup
    exc = build_excitation(0.0, math.radians(30), F)
    sol = solve(exc.omega, system, exc, kernel, record=record)
    assert np.all(sol.j_z == 0) and sol.residual_norm == 0


def test_linear_in_amplitude(system, setup):
    record, kernel = setup
    one = solve(2 * math.pi * F, system, build_excitation(1e7, math.radians(30), F), kernel,
                record=record)
    three = solve(2 * math.pi * F, system, build_excitation(3e7, math.radians(30), F), kernel,
                  record=record)
    np.testing.assert_allclose(three.j_z, 3 * one.j_z, rtol=1e-13, atol=0)
    np.testing.assert_allclose(three.e_z_total, 3 * one.e_z_total, rtol=1e-12, atol=0)


def test_mirror_incidence(system, setup):
    record, kernel = setup
    w = 2 * math.pi * F
    a = solve(w, system, build_excitation(1e7, math.radians(30), F), kernel, record=record)
    b = solve(w, system, build_excitation(1e7, math.radians(150), F), kernel, record=record)
    np.testing.assert_allclose(np.abs(a.j_z), np.abs(b.j_z[::-1]), rtol=1e-8)


def test_current_smaller_at_ends_in_interband_regime(system):
    exc = build_excitation(1e7, math.radians(30), 215e12)
    sol, _, _ = solve_system(system, exc, 81)
    mid = np.abs(sol.j_z[40])
    assert np.abs(sol.j_z[0]) < mid and np.abs(sol.j_z[-1]) < mid


def test_mismatched_kernel_rejected(system, setup):
    _, kernel = setup
    exc = build_excitation(1e7, math.radians(30), 220e12)
    with pytest.raises(InvalidParameterError):
        solve(exc.omega, system, exc, kernel)


def test_singular_system_reported(system, excitation, setup):
    record, kernel = setup
    c = coupling_constant(excitation.omega, record.sigma_total, record.alpha_tilde)
    vals = -np.eye(81, dtype=complex) / c
    vals[0, 1] = 1e-3 / c
    bad = KernelMatrix(81, kernel.grid_midpoints.copy(), vals, kernel.form_tag, kernel.frequency,
                       kernel.half_length, kernel.alpha_tilde)
    with pytest.raises(ResonanceOrDiscretizationError):
        solve(excitation.omega, system, excitation, bad, SignConvention.PLUS, record)


def test_field_of_zeroth_order_current_is_incident_field(system, excitation):
    # j = -B inverts to E = E_inc; the stencil error falls at second order
    rec = response(excitation.omega, system)
    errs = []
    for n in (41, 81, 161):
        grid = make_grid(n, L)
        z = grid.midpoints
        b = rhs_B(z, excitation.omega, system, excitation, record=rec)
        e = reconstruct_field(-b, grid.step, rec.sigma_total, rec.alpha_tilde)
        core = np.abs(z) < 0.5 * L
        ref = incident_field(z[core], excitation)
        errs.append(np.max(np.abs(e[core] - ref)) / np.max(np.abs(ref)))
    assert errs[-1] < 1e-2
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_local_limit_field_tracks_current(system):
    exc = build_excitation(1e7, math.radians(30), 215e12)
    sol, _, rec = solve_system(system, exc, 81, local_factor=1e3)
    e = surface_field(sol)
    core = np.abs(sol.grid_midpoints) < 0.8 * L
    ratio = sol.j_z[core] / (rec.sigma_total * e[core])
    assert np.max(np.abs(ratio - 1)) < 1e-3


def test_radiated_power_matches_far_field(system):
    # power drawn from an arbitrary current by its own field equals the
    # power it radiates to infinity; fixes the Hertz-potential normalization
    w = 2 * math.pi * F
    params = green_params(system, response(w, system))
    grid = make_grid(201, L)
    z = grid.midpoints
    j = np.cos(math.pi * z / (2 * L)) * (1 + 0.3j * z / L)
    R = system.radius
    drawn = -0.5 * np.real(np.sum(np.conj(j) * hertz_field(z, j, grid, params))) * grid.step * 2 * math.pi * R
    k = w / CONST.c_light
    total = 2 * math.pi * R * j * grid.step

    def moment(theta):
        b = k * math.cos(theta)
        return np.sum(total * np.sinc(b * grid.step / (2 * math.pi)) * np.exp(-1j * b * z)) * j0(k * R * math.sin(theta))

    eta = math.sqrt(CONST.mu0 / CONST.eps0)
    integral = integrate.quad(lambda t: math.sin(t) ** 3 * abs(moment(t)) ** 2, 0, math.pi, epsrel=1e-12)[0]
    far = w**2 * CONST.mu0**2 / (32 * math.pi**2 * eta) * 2 * math.pi * integral
    assert drawn == pytest.approx(far, rel=1e-5)


def test_sign_calibration_selects_default(system):
    exc = build_excitation(1e7, math.radians(30), 215e12)
    chosen, dev, mismatch = calibrate_sign(system, exc)
    assert chosen is DEFAULT_SIGN
    assert dev[chosen] < 0.1
    assert mismatch[chosen] < 1e-2 < mismatch[SignConvention.MINUS]
