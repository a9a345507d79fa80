"""Right-hand side, collocation solve and surface-field reconstruction.

The current obeys j = -σα² ∫ g (E_inc + E_scat) dz' with g the Dirichlet
Green function (g'' + α²g = -δ) and E_scat = (∂² + k²) Π generated by the
SI Hertz potential Π = (i/(4π ωε0)) ∫ j G ds, G being the circumferential
integral of exp(ikρ)/ρ.  On the collocation grid this becomes

    (I ± c K) j = -B,    c = iσα²/(4π ωε0),    B = σα² ∫ g E_inc dz',

so that j = -B is the zeroth-order (no re-radiation) current.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .conductivity import ResponseRecord, response
from .errors import InvalidParameterError, ResonanceOrDiscretizationError
from .green import GreenParams, _gauss, g_fourier, g_sturm
from .kernel import CollocationGrid, KernelMatrix, assemble, green_params, make_grid
from .model import CONST, CntSystem, Excitation

CONDITION_LIMIT = 1e12
# exp(ikr)/r solves the Helmholtz equation with source -4π δ
HERTZ_NORMALIZATION = 1.0 / (4.0 * math.pi)
RESIDUAL_LIMIT = 1e-8


class SignConvention(str, enum.Enum):
    """Sign in front of the re-radiation term of the collocation system."""

    MINUS = "minus"
    PLUS = "plus"

    @property
    def factor(self) -> float:
        return 1.0 if self is SignConvention.PLUS else -1.0


# Fixed by the local-limit calibration (see calibrate_sign and its test).
DEFAULT_SIGN = SignConvention.PLUS


@dataclass(frozen=True, eq=False)
class CurrentSolution:
    grid_midpoints: np.ndarray
    j_z: np.ndarray
    e_z_total: np.ndarray
    residual_norm: float
    sign_convention: SignConvention
    frequency: float            # rad/s
    step: float
    half_length: float
    sigma_total: complex
    alpha_tilde: complex
    rhs: np.ndarray
    condition: float

    def __post_init__(self):
        for arr in (self.grid_midpoints, self.j_z, self.e_z_total, self.rhs):
            arr.setflags(write=False)


def incident_field(z, excitation: Excitation):
    """E0 sin(theta0) exp(i k z cos(theta0))."""
    z = np.asarray(z, dtype=float)
    th = excitation.theta0
    return excitation.e0_amplitude * math.sin(th) * np.exp(1j * excitation.k_free * z * math.cos(th))


def _rhs_params(omega, system, excitation, record):
    if abs(omega - excitation.omega) > 1e-9 * omega:
        raise InvalidParameterError("omega does not match the excitation frequency")
    record = response(omega, system) if record is None else record
    return record, green_params(system, record)


def rhs_B(z, omega, system: CntSystem, excitation: Excitation, method="closed",
          record: ResponseRecord | None = None):
    """B(z) = σα² ∫ g(z, z') E_inc(z') dz'.

    ``closed`` uses the Fourier image of g at h = -k cos(theta0);
    ``quadrature`` integrates g E_inc with Gauss-Legendre panels split at z.
    """
    record, params = _rhs_params(omega, system, excitation, record)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    L = system.half_length
    if np.any(np.abs(z) > L * (1 + 1e-12)):
        raise InvalidParameterError("z must lie in [-L, L]")
    pref = record.sigma_total * record.alpha_tilde ** 2
    amp = excitation.e0_amplitude * math.sin(excitation.theta0)
    if method == "closed":
        h = -excitation.k_free * math.cos(excitation.theta0)
        out = pref * amp * g_fourier(np.full(z.shape, h), z, params)
    elif method == "quadrature":
        out = pref * _g_convolve(z, params, lambda x: incident_field(x, excitation))
    else:
        raise InvalidParameterError(f"unknown rhs method {method!r}")
    # g vanishes at the tube ends
    out = np.where(np.abs(z) >= L, 0.0, out)
    return out


def _g_convolve(z, params: GreenParams, fun, per_panel=24):
    """∫ g(z, z') fun(z') dz' for each z, panels sized to the decay/oscillation of g."""
    L = params.half_length
    a = params.alpha
    x, w = _gauss(per_panel)
    out = np.empty(z.shape, dtype=complex)
    for idx, zz in np.ndenumerate(z):
        total = 0j
        for lo, hi in ((-L, zz), (zz, L)):
            if hi <= lo:
                continue
            npan = int(min(20000, 8 + math.ceil(abs(a) * (hi - lo) / 4.0)))
            edges = np.linspace(lo, hi, npan + 1)
            xs = (edges[:-1, None] + np.diff(edges)[:, None] * x).ravel()
            ws = (np.diff(edges)[:, None] * w).ravel()
            total += np.sum(ws * g_sturm(zz, xs, params) * fun(xs))
        out[idx] = total
    return out


def _second_derivative(f, h):
    d = np.empty_like(f)
    d[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / h**2
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
    d[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    return d


def first_derivative(f, h):
    """Central differences inside, 4-point one-sided stencils at the ends."""
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d[0] = (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / (6.0 * h)
    d[-1] = (11.0 * f[-1] - 18.0 * f[-2] + 9.0 * f[-3] - 2.0 * f[-4]) / (6.0 * h)
    return d


def reconstruct_field(j, step, sigma, alpha):
    """E = (j'' + α² j) / (σ α²): inverts j = -σα² ∫ g E."""
    j = np.asarray(j)
    if j.size < 11:
        raise InvalidParameterError("need at least 11 grid points")
    return (_second_derivative(j, step) + alpha**2 * j) / (sigma * alpha**2)


def surface_field(solution: CurrentSolution, omega=None, system=None):
    """Total axial field on the tube surface reconstructed from the current."""
    return reconstruct_field(solution.j_z, solution.step, solution.sigma_total, solution.alpha_tilde)


def coupling_constant(omega, sigma, alpha):
    """Coefficient c of the re-radiation term (I ± cK) j = -B."""
    return HERTZ_NORMALIZATION * 1j * sigma * alpha**2 / (omega * CONST.eps0)


def hertz_field(z, j, grid: CollocationGrid, params: GreenParams):
    """Scattered axial field (∂² + k²) Π at points z for a piecewise-constant current.

    With j constant on each segment, ∂²_z ∫ j G collapses onto jumps of G'
    at the segment boundaries.
    """
    from .green import green_derivative, spectral_g_antiderivative

    z = np.atleast_1d(np.asarray(z, dtype=float))
    b = grid.boundaries
    u = z[:, None] - b[None, :]
    # on the grid the offsets repeat; evaluate each distinct one once
    key = np.round(u * (2.0 / grid.step), 6)
    uniq, inv = np.unique(key, return_inverse=True)
    if uniq.size * 2 < u.size and np.allclose(key, np.round(key)):
        pts, inv = uniq * (grid.step / 2.0), inv.reshape(u.shape)
    else:
        pts, inv = u.ravel(), np.arange(u.size).reshape(u.shape)
    d1 = green_derivative(pts, params, 1)[inv]
    anti = spectral_g_antiderivative(pts, params)[inv]
    seg = (d1[:, :-1] - d1[:, 1:]) + params.k_free ** 2 * (anti[:, :-1] - anti[:, 1:])
    return HERTZ_NORMALIZATION * 1j / (params.omega * CONST.eps0) * (seg @ np.asarray(j))


def solve(omega, system: CntSystem, excitation: Excitation, kernel_matrix: KernelMatrix,
          sign_convention=DEFAULT_SIGN, record: ResponseRecord | None = None,
          rhs_method="closed") -> CurrentSolution:
    """Dense LU solve of the collocation system on the kernel's grid."""
    sign_convention = SignConvention(sign_convention)
    if abs(kernel_matrix.frequency - omega) > 1e-9 * omega:
        raise InvalidParameterError("kernel matrix was built at a different frequency")
    if abs(kernel_matrix.half_length - system.half_length) > 1e-12 * system.half_length:
        raise InvalidParameterError("kernel matrix was built for a different tube length")
    record, _ = _rhs_params(omega, system, excitation, record)
    if abs(record.alpha_tilde - kernel_matrix.alpha_tilde) > 1e-9 * abs(record.alpha_tilde):
        raise InvalidParameterError("kernel matrix alpha does not match the response record")
    grid = kernel_matrix.grid
    z = grid.midpoints
    sigma = record.sigma_total
    alpha = record.alpha_tilde
    c = coupling_constant(omega, sigma, alpha)
    n = grid.n_segments
    mat = np.eye(n, dtype=complex) + sign_convention.factor * c * kernel_matrix.values
    b = rhs_B(z, omega, system, excitation, rhs_method, record)
    lu, piv = linalg.lu_factor(mat, check_finite=True)
    anorm = np.linalg.norm(mat, 1)
    rcond, info = linalg.lapack.zgecon(lu, anorm, norm="1")
    cond = math.inf if rcond == 0 else 1.0 / rcond
    if cond > CONDITION_LIMIT:
        raise ResonanceOrDiscretizationError(
            f"collocation matrix condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    rhs = -b
    j = linalg.lu_solve((lu, piv), rhs)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        residual = float(np.linalg.norm(mat @ j))
    else:
        r = rhs - mat @ j
        residual = float(np.linalg.norm(r) / bnorm)
        if residual > RESIDUAL_LIMIT:
            j = j + linalg.lu_solve((lu, piv), r)
            residual = float(np.linalg.norm(rhs - mat @ j) / bnorm)
    if residual > RESIDUAL_LIMIT:
        raise ResonanceOrDiscretizationError(f"residual {residual:.3e} above {RESIDUAL_LIMIT:.0e}")
    e = reconstruct_field(j, grid.step, sigma, alpha)
    return CurrentSolution(z.copy(), j, e, residual, sign_convention, float(omega), grid.step,
                           grid.half_length, complex(sigma), complex(alpha), b, cond)


def solve_system(system: CntSystem, excitation: Excitation, n_segments=411, *,
                 local_factor=None, sign_convention=DEFAULT_SIGN, form="Singular",
                 record: ResponseRecord | None = None, kernel: KernelMatrix | None = None):
    """Convenience pipeline: response -> kernel -> solve.  Returns (solution, kernel, record)."""
    omega = excitation.omega
    if record is None:
        record = response(omega, system, local_factor=local_factor)
    if kernel is None:
        grid = make_grid(n_segments, system.half_length)
        kernel = assemble(grid, green_params(system, record), form)
    sol = solve(omega, system, excitation, kernel, sign_convention, record)
    return sol, kernel, record


def calibrate_sign(system: CntSystem, excitation: Excitation, n_segments=161, local_factor=1e3,
                   tolerance=0.1):
    """Pick the sign in front of the re-radiation term.

    A sign qualifies when its local-limit force reproduces the
    homogeneous-current force within ``tolerance``.  Among qualifying signs
    the one whose reconstructed field satisfies E_tot - E_inc = E_scat(j)
    in the central half of the tube wins, E_scat being the field radiated
    by the solved current.

    Returns (chosen sign or None, {sign: force deviation}, {sign: field mismatch}).
    """
    from .force import force_local, force_numeric

    record = response(excitation.omega, system, local_factor=local_factor)
    grid = make_grid(n_segments, system.half_length)
    params = green_params(system, record)
    kernel = assemble(grid, params)
    ref = force_local(excitation.omega, system, excitation).f_z
    core = np.abs(grid.midpoints) < 0.5 * system.half_length
    dev, mismatch = {}, {}
    for sign in SignConvention:
        sol = solve(excitation.omega, system, excitation, kernel, sign, record)
        f = force_numeric(sol, excitation.omega, system.radius).f_z
        dev[sign] = abs(f / ref - 1.0) if ref > 0 and f > 0 else math.inf
        scat = hertz_field(grid.midpoints[core], sol.j_z, grid, params)
        diff = sol.e_z_total[core] - incident_field(grid.midpoints[core], excitation)
        mismatch[sign] = float(np.linalg.norm(diff - scat) / np.linalg.norm(scat))
    ok = [s for s, d in dev.items() if d < tolerance]
    chosen = min(ok, key=lambda s: mismatch[s]) if ok else None
    return chosen, dev, mismatch


__all__ = [
    "CONDITION_LIMIT", "CurrentSolution", "DEFAULT_SIGN", "HERTZ_NORMALIZATION", "RESIDUAL_LIMIT",
    "SignConvention", "calibrate_sign", "coupling_constant", "first_derivative", "hertz_field",
    "incident_field", "reconstruct_field", "rhs_B", "solve", "solve_system", "surface_field",
]
