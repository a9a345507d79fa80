"""Physical constants, unit conversions and validated parameter sets.

Everything inside the library is SI.  Electron-volts, nanometres, THz and
degrees only appear in :func:`read_config` / :func:`config_from` and in the
CLI output columns.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

from scipy import constants as _sc

from .errors import (
    ConfigError,
    InvalidParameterError,
    ModelAssumptionError,
    ValidityWarning,
)

BOND_LENGTH = 0.142e-9  # C-C bond length in graphene, m


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    e_charge: float = _sc.e
    eps0: float = _sc.epsilon_0
    # derived from eps0 and c so that c^2 eps0 mu0 = 1 holds to round-off
    # (the measured CODATA values differ by ~1e-12, far inside their uncertainty)
    mu0: float = 1.0 / (_sc.epsilon_0 * _sc.c**2)
    c_light: float = _sc.c
    k_boltzmann: float = _sc.k
    sigma0: float = _sc.e**2 / (4.0 * _sc.hbar)
    v_fermi_default: float = 9.71e5


CONST = PhysicalConstants()

# Conventions for the "quantum of conductivity" appearing in the closed form
# of the nonlocality factor.
SIGMA0_MODELS = {
    "e2_over_4hbar": CONST.e_charge**2 / (4.0 * CONST.hbar),
    "e2_over_h": CONST.e_charge**2 / _sc.h,
    "2e2_over_h": 2.0 * CONST.e_charge**2 / _sc.h,
}
DEFAULT_SIGMA0_MODEL = "e2_over_4hbar"


def ev_to_joule(x):
    return x * CONST.e_charge


def joule_to_ev(x):
    return x / CONST.e_charge


def photon_energy(omega):
    """Return hbar*omega in joules."""
    if omega < 0:
        raise InvalidParameterError(f"omega must be >= 0, got {omega!r}")
    return CONST.hbar * omega


def radius_from_index(m_index: int) -> float:
    """Radius of a zigzag (m, 0) tube, sqrt(3) * b * m / (2 pi)."""
    if int(m_index) != m_index or m_index <= 0:
        raise InvalidParameterError(f"zigzag index must be a positive integer, got {m_index!r}")
    return math.sqrt(3.0) * BOND_LENGTH * m_index / (2.0 * math.pi)


@dataclass(frozen=True)
class CntSystem:
    """One metallic zigzag tube.

    ``half_length`` is L, half of the physical tube length.  ``mu_chem`` is in
    joules.  ``sigma0`` is only used by the closed form of the nonlocality factor.
    """

    m_index: int
    radius: float
    half_length: float
    mu_chem: float
    temperature: float
    v_fermi: float = CONST.v_fermi_default
    sigma0: float = SIGMA0_MODELS[DEFAULT_SIGMA0_MODEL]
    sigma0_model: str = DEFAULT_SIGMA0_MODEL

    def validity_warnings(self) -> list[str]:
        out = []
        if self.radius >= 30e-9:
            out.append(f"radius {self.radius:.3e} m is not below 30 nm")
        if not 10e-9 < 2.0 * self.half_length < 1e-3:
            out.append(f"tube length {2 * self.half_length:.3e} m outside (10 nm, 1 mm)")
        if self.mu_chem >= ev_to_joule(0.5):
            out.append(f"mu = {joule_to_ev(self.mu_chem):.4f} eV is not below 0.5 eV")
        return out

    def with_(self, **changes) -> "CntSystem":
        return build_system(**{**dataclasses.asdict(self), **changes})


@dataclass(frozen=True)
class Excitation:
    """Plane wave of amplitude ``e0_amplitude`` hitting the tube at ``theta0``
    (measured from the tube axis)."""

    e0_amplitude: float
    theta0: float
    frequency: float

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def k_free(self) -> float:
        return self.omega / CONST.c_light

    def validity_warnings(self) -> list[str]:
        if self.frequency >= 300e12:
            return [f"frequency {self.frequency / 1e12:.1f} THz is not below 300 THz"]
        return []

    def with_(self, **changes) -> "Excitation":
        return build_excitation(**{**dataclasses.asdict(self), **changes})


def _finite(name, value):
    if value is None or not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


def _emit(messages):
    for msg in messages:
        warnings.warn(msg, ValidityWarning, stacklevel=3)


def build_system(
    m_index: int,
    half_length: float,
    mu_chem: float,
    temperature: float = 300.0,
    v_fermi: float = CONST.v_fermi_default,
    radius: float | None = None,
    sigma0: float | None = None,
    sigma0_model: str = DEFAULT_SIGMA0_MODEL,
) -> CntSystem:
    """Validate raw SI inputs and return a :class:`CntSystem`.

    Structural problems raise; soft violations of the model's validity window
    are reported as :class:`ValidityWarning` and leave the numbers untouched.
    """
    for name, val in [("half_length", half_length), ("mu_chem", mu_chem),
                      ("temperature", temperature), ("v_fermi", v_fermi)]:
        _finite(name, val)
    if int(m_index) != m_index or m_index <= 0:
        raise InvalidParameterError(f"m_index must be a positive integer, got {m_index!r}")
    if m_index % 3:
        raise ModelAssumptionError(f"zigzag ({m_index},0) is not metallic: m must be a multiple of 3")
    if radius is None:
        radius = radius_from_index(m_index)
    _finite("radius", radius)
    if radius <= 0 or half_length <= 0:
        raise InvalidParameterError("radius and half_length must be positive")
    if mu_chem <= 0 or v_fermi <= 0:
        raise InvalidParameterError("mu_chem and v_fermi must be positive")
    if temperature < 0:
        raise InvalidParameterError("temperature must be >= 0")
    if sigma0_model not in SIGMA0_MODELS:
        raise InvalidParameterError(
            f"unknown sigma0_model {sigma0_model!r}; choose from {sorted(SIGMA0_MODELS)}")
    if sigma0 is None:
        sigma0 = SIGMA0_MODELS[sigma0_model]
    system = CntSystem(int(m_index), float(radius), float(half_length), float(mu_chem),
                       float(temperature), float(v_fermi), float(sigma0), sigma0_model)
    _emit(system.validity_warnings())
    return system


def build_excitation(e0_amplitude: float, theta0: float, frequency: float) -> Excitation:
    """Validate a plane-wave excitation.

    The incidence angle may lie anywhere in [0, pi]; angles past pi/2 are the
    mirror image of the usual geometry and are used by the symmetry checks.
    """
    for name, val in [("e0_amplitude", e0_amplitude), ("theta0", theta0), ("frequency", frequency)]:
        _finite(name, val)
    if frequency <= 0:
        raise InvalidParameterError("frequency must be positive")
    if not 0.0 <= theta0 <= math.pi:
        raise InvalidParameterError("theta0 must lie in [0, pi]")
    exc = Excitation(float(e0_amplitude), float(theta0), float(frequency))
    _emit(exc.validity_warnings())
    return exc


# ---------------------------------------------------------------- config I/O

CONFIG_DEFAULTS = {
    "m_index": 12,
    "half_length_nm": 100.0,
    "mu_ev": 0.413,
    "temperature_k": 300.0,
    "e0_v_per_m": 1.0e7,
    "theta0_deg": 30.0,
    "frequency_thz": 200.0,
    "v_fermi_m_per_s": CONST.v_fermi_default,
    "sigma0_model": DEFAULT_SIGMA0_MODEL,
}
PHYSICAL_KEYS = tuple(CONFIG_DEFAULTS)


def load_config(source) -> dict:
    """Read a JSON config (path, JSON text or dict) and fill in defaults."""
    if isinstance(source, dict):
        doc = dict(source)
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return {**CONFIG_DEFAULTS, **doc}


def config_from(doc: dict) -> tuple[CntSystem, Excitation]:
    """Build the system and excitation described by a config dictionary."""
    doc = load_config(doc)
    try:
        system = build_system(
            m_index=doc["m_index"],
            half_length=float(doc["half_length_nm"]) * 1e-9,
            mu_chem=ev_to_joule(float(doc["mu_ev"])),
            temperature=float(doc["temperature_k"]),
            v_fermi=float(doc["v_fermi_m_per_s"]),
            sigma0_model=doc["sigma0_model"],
        )
        exc = build_excitation(
            e0_amplitude=float(doc["e0_v_per_m"]),
            theta0=math.radians(float(doc["theta0_deg"])),
            frequency=float(doc["frequency_thz"]) * 1e12,
        )
    except (TypeError, KeyError) as err:
        raise ConfigError(f"malformed config: {err}") from err
    return system, exc


def _tidy(x: float) -> float:
    """Drop unit-conversion noise (12 significant digits)."""
    return float(format(x, ".12g"))


def config_echo(system: CntSystem, exc: Excitation) -> dict:
    """Inverse of :func:`config_from` (physical keys only)."""
    return {
        "m_index": system.m_index,
        "half_length_nm": _tidy(system.half_length * 1e9),
        "mu_ev": _tidy(joule_to_ev(system.mu_chem)),
        "temperature_k": system.temperature,
        "e0_v_per_m": exc.e0_amplitude,
        "theta0_deg": _tidy(math.degrees(exc.theta0)),
        "frequency_thz": _tidy(exc.frequency / 1e12),
        "v_fermi_m_per_s": system.v_fermi,
        "sigma0_model": system.sigma0_model,
    }
