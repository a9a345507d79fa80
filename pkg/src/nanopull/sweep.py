"""Parameter sweeps over frequency, chemical potential, length or incidence angle.

A sweep is a list of independent points.  Each point builds its own system
and excitation from the fixed configuration with one field replaced, runs
the requested force methods and records either a value or an error string
per method.  Rows come back in axis order whatever the worker count.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conductivity import ResponseRecord, response
from .errors import ConfigError, NanopullError, OutputError
from .force import FEMTONEWTON, ForceMethod, force_analytic, force_local, force_numeric
from .kernel import KernelForm, assemble, green_params, make_grid
from .model import CntSystem, Excitation, config_echo, config_from, load_config
from .solver import DEFAULT_SIGN, SignConvention, solve


class SweepAxis(str, enum.Enum):
    FREQUENCY = "Frequency"
    CHEMICAL_POTENTIAL = "ChemicalPotential"
    HALF_LENGTH = "HalfLength"
    INCIDENCE_ANGLE = "IncidenceAngle"


# config key, CSV column, admissible range in axis units
_AXES = {
    SweepAxis.FREQUENCY: ("frequency_thz", "f_THz", (0.0, 1e4)),
    SweepAxis.CHEMICAL_POTENTIAL: ("mu_ev", "mu_eV", (0.0, 5.0)),
    SweepAxis.HALF_LENGTH: ("half_length_nm", "L_nm", (0.0, 1e7)),
    SweepAxis.INCIDENCE_ANGLE: ("theta0_deg", "theta_deg", (0.0, 180.0)),
}

METHOD_ORDER = (ForceMethod.NUMERIC, ForceMethod.ANALYTIC, ForceMethod.LOCAL)
_METHOD_NAMES = {"numeric": ForceMethod.NUMERIC, "analytic": ForceMethod.ANALYTIC,
                 "local": ForceMethod.LOCAL}


def parse_method(name) -> ForceMethod:
    if isinstance(name, ForceMethod):
        return name
    key = str(name).strip().lower()
    if key not in _METHOD_NAMES:
        raise ConfigError(f"unknown force method {name!r}; expected one of {sorted(_METHOD_NAMES)}")
    return _METHOD_NAMES[key]


def default_workers() -> int:
    raw = os.environ.get("NANOPULL_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"NANOPULL_THREADS={raw!r} is not an integer") from exc
        if n < 1:
            raise ConfigError("NANOPULL_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SweepSpec:
    axis: SweepAxis
    start: float
    end: float
    points: int
    system: CntSystem
    excitation: Excitation
    methods: frozenset = frozenset(METHOD_ORDER)
    n_segments: int = 411
    local_override: float | None = None
    sign_convention: SignConvention = DEFAULT_SIGN
    kernel_form: KernelForm = KernelForm.SINGULAR
    name: str = ""

    def __post_init__(self):
        try:
            object.__setattr__(self, "axis", SweepAxis(self.axis))
            object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))
            object.__setattr__(self, "kernel_form", KernelForm(self.kernel_form))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "methods", frozenset(parse_method(m) for m in self.methods))
        if isinstance(self.points, bool) or int(self.points) != self.points or self.points < 2:
            raise ConfigError("points must be an integer >= 2")
        if not (math.isfinite(self.start) and math.isfinite(self.end)) or not self.start < self.end:
            raise ConfigError("need finite start < end")
        lo, hi = _AXES[self.axis][2]
        if not (lo < self.start and self.end <= hi):
            unit = _AXES[self.axis][1].split("_")[1]
            raise ConfigError(f"{self.axis.value} range [{self.start}, {self.end}] is not in "
                              f"({lo}, {hi}] {unit}")
        if ForceMethod.NUMERIC in self.methods and self.n_segments < 11:
            raise ConfigError("n_segments must be >= 11")
        if self.local_override is not None and not self.local_override > 0:
            raise ConfigError("local_override must be positive")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.end, int(self.points))

    @property
    def column(self) -> str:
        return _AXES[self.axis][1]

    def to_config(self) -> dict:
        """Config document that rebuilds this spec through :func:`spec_from_config`."""
        doc = config_echo(self.system, self.excitation)
        doc["sweep"] = {
            "axis": self.axis.value,
            "start": float(self.start),
            "end": float(self.end),
            "points": int(self.points),
            "methods": [m.value.lower() for m in METHOD_ORDER if m in self.methods],
            "n_segments": int(self.n_segments),
            "local_override": self.local_override,
            "sign_convention": self.sign_convention.value,
            "kernel_form": self.kernel_form.value,
        }
        if self.name:
            doc["name"] = self.name
        return doc


def spec_from_config(source) -> SweepSpec:
    """Build a SweepSpec from a config path, JSON text or dict with a ``sweep`` block."""
    doc = load_config(source)
    block = doc.get("sweep")
    if not isinstance(block, dict):
        raise ConfigError("config has no 'sweep' object")
    system, exc = config_from(doc)
    known = {"axis", "start", "end", "points", "methods", "n_segments", "local_override",
             "sign_convention", "kernel_form"}
    extra = set(block) - known
    if extra:
        raise ConfigError(f"unknown sweep keys: {sorted(extra)}")
    try:
        return SweepSpec(
            axis=block["axis"],
            start=float(block["start"]),
            end=float(block["end"]),
            points=block.get("points", 101),
            system=system,
            excitation=exc,
            methods=block.get("methods", [m.value for m in METHOD_ORDER]),
            n_segments=int(block.get("n_segments", 411)),
            local_override=block.get("local_override"),
            sign_convention=block.get("sign_convention", DEFAULT_SIGN.value),
            kernel_form=block.get("kernel_form", KernelForm.SINGULAR.value),
            name=str(doc.get("name", "")),
        )
    except KeyError as err:
        raise ConfigError(f"sweep block is missing {err}") from err
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"malformed sweep block: {err}") from err


@dataclass(frozen=True)
class SweepRow:
    index: int
    axis_value: float
    forces: dict            # ForceMethod -> ForceResult for the methods that succeeded
    errors: dict            # method name (or "point") -> "ErrorType: message"
    response: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    rows: tuple
    metadata: dict

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def column(self, method) -> np.ndarray:
        """Force values in newtons for one method, NaN where the point failed."""
        m = parse_method(method)
        return np.array([r.forces[m].f_z if m in r.forces else math.nan for r in self.rows])

    @property
    def axis_values(self) -> np.ndarray:
        return np.array([r.axis_value for r in self.rows])


def _describe(err: Exception) -> str:
    return f"{type(err).__name__}: {err}"


def _response_summary(rec: ResponseRecord) -> dict:
    return {
        "sigma_total": rec.sigma_total,
        "alpha_tilde": rec.alpha_tilde,
        "regime": rec.regime.value,
        "threshold_flag": bool(rec.threshold_flag),
    }


def _point_inputs(spec: SweepSpec, value: float):
    doc = config_echo(spec.system, spec.excitation)
    doc[_AXES[spec.axis][0]] = float(value)
    return config_from(doc)


def _evaluate(spec: SweepSpec, index: int, value: float, shared_kernel=None) -> SweepRow:
    forces, errors, diag = {}, {}, {}
    try:
        system, exc = _point_inputs(spec, value)
        omega = exc.omega
        rec = response(omega, system, local_factor=spec.local_override)
    except (NanopullError, ArithmeticError, ValueError) as err:
        return SweepRow(index, float(value), {}, {"point": _describe(err)})
    summary = _response_summary(rec)

    if ForceMethod.NUMERIC in spec.methods:
        try:
            kernel = shared_kernel
            if kernel is None:
                grid = make_grid(spec.n_segments, system.half_length)
                kernel = assemble(grid, green_params(system, rec), spec.kernel_form, workers=1)
            sol = solve(omega, system, exc, kernel, spec.sign_convention, rec)
            forces[ForceMethod.NUMERIC] = force_numeric(sol, omega, system.radius, system, exc,
                                                        rec.regime)
            diag["residual_norm"] = sol.residual_norm
            diag["condition"] = sol.condition
        except (NanopullError, ArithmeticError, ValueError, np.linalg.LinAlgError) as err:
            errors[ForceMethod.NUMERIC.value.lower()] = _describe(err)
    for method, fun in ((ForceMethod.ANALYTIC, force_analytic), (ForceMethod.LOCAL, force_local)):
        if method not in spec.methods:
            continue
        try:
            # the local (uniform-current) force never sees the alpha override
            r = rec if method is ForceMethod.ANALYTIC else None
            forces[method] = fun(omega, system, exc, r)
        except (NanopullError, ArithmeticError, ValueError) as err:
            errors[method.value.lower()] = _describe(err)
    return SweepRow(index, float(value), forces, errors, summary, diag)


def _shared_kernel(spec: SweepSpec):
    """The angle axis leaves the kernel untouched: build it once."""
    if spec.axis is not SweepAxis.INCIDENCE_ANGLE or ForceMethod.NUMERIC not in spec.methods:
        return None
    try:
        system, exc = _point_inputs(spec, spec.values[0])
        rec = response(exc.omega, system, local_factor=spec.local_override)
        grid = make_grid(spec.n_segments, system.half_length)
        return assemble(grid, green_params(system, rec), spec.kernel_form)
    except (NanopullError, ArithmeticError, ValueError):
        return None     # every point then reports its own failure


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Evaluate every point of the sweep; rows are returned in axis order."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    values = spec.values
    kernel = _shared_kernel(spec)
    tasks = list(enumerate(values))
    if workers == 1 or len(tasks) == 1:
        rows = [_evaluate(spec, i, v, kernel) for i, v in tasks]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(lambda t: _evaluate(spec, t[0], t[1], kernel), tasks))
    meta = spec.to_config()
    meta["code_version"] = __version__
    return SweepResult(spec, tuple(rows), meta)


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".12g")


def table_columns(spec: SweepSpec) -> list[str]:
    cols = ["index", spec.column]
    cols += [f"Fz_fN_{m.value.lower()}" for m in METHOD_ORDER if m in spec.methods]
    cols += ["regime", "sigma_re_S", "sigma_im_S", "alpha_re_per_m", "alpha_im_per_m",
             "residual_norm", "error"]
    return cols


def _row_cells(spec: SweepSpec, row: SweepRow) -> list[str]:
    cells = [str(row.index), _num(row.axis_value)]
    for m in METHOD_ORDER:
        if m in spec.methods:
            cells.append(_num(row.forces[m].f_z / FEMTONEWTON) if m in row.forces else "")
    s = row.response.get("sigma_total")
    a = row.response.get("alpha_tilde")
    cells += [
        row.response.get("regime", ""),
        _num(s.real) if s is not None else "", _num(s.imag) if s is not None else "",
        _num(a.real) if a is not None else "", _num(a.imag) if a is not None else "",
        _num(row.diagnostics.get("residual_norm")),
        "; ".join(f"{k}: {v}" for k, v in sorted(row.errors.items())),
    ]
    return cells


def render(result: SweepResult, fmt: str = "csv") -> str:
    """Text of the CSV table or the JSON document (metadata block plus rows)."""
    if not result.rows:
        raise ValueError("sweep result has no rows")
    cols = table_columns(result.spec)
    cells = [_row_cells(result.spec, r) for r in result.rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        writer.writerows(cells)
        return buf.getvalue()
    if fmt == "json":
        doc = {"metadata": result.metadata, "columns": cols, "rows": cells}
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


def emit(result: SweepResult, path, fmt: str | None = None) -> Path:
    """Write the sweep to ``path`` as CSV or JSON (chosen from the suffix when fmt is None)."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    text = render(result, fmt)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


__all__ = [
    "METHOD_ORDER", "SweepAxis", "SweepResult", "SweepRow", "SweepSpec",
    "default_workers", "emit", "parse_method", "render", "run_sweep", "spec_from_config",
    "table_columns",
]
