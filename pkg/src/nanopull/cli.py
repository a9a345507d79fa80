"""Command-line entry point: ``nanopull <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .conductivity import response
from .errors import ConfigError, NanopullError
from .force import FEMTONEWTON, force_analytic, force_local, force_numeric
from .green import big_g, g_sturm
from .kernel import KernelForm, green_params
from .model import config_echo, config_from, load_config
from .presets import load_preset, preset_names
from .solver import DEFAULT_SIGN, SignConvention, solve_system
from .sweep import emit, run_sweep, spec_from_config


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("give --config or --preset, not both")
    if args.preset:
        doc = load_preset(args.preset)
    elif args.config:
        doc = load_config(args.config)
    else:
        doc = load_config({})
    doc = dict(doc)
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        doc[key.strip()] = _coerce(value.strip())
    return load_config(doc)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise NanopullError(f"cannot write {path}: {exc}") from exc


def _write_csv(path, header, rows, preamble=None):
    fh, close = _open_out(path)
    try:
        if preamble is not None:
            fh.write(preamble)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


def cmd_conductivity(args) -> int:
    system, exc = config_from(_config(args))
    if args.sweep:
        try:
            a, b, n = args.sweep.split(",")
            freqs = np.linspace(float(a), float(b), int(n))
        except ValueError as err:
            raise ConfigError("--sweep expects f_start,f_end,n (THz)") from err
    else:
        freqs = np.array([exc.frequency / 1e12])
    rows = []
    for f in freqs:
        rec = response(2.0 * math.pi * f * 1e12, system, local_factor=args.local_override)
        xi = rec.xi_total
        rows.append([_fmt(f), _fmt(rec.sigma_inter.real), _fmt(rec.sigma_inter.imag),
                     _fmt(rec.sigma_intra.real), _fmt(rec.sigma_intra.imag),
                     _fmt(xi.real), _fmt(xi.imag),
                     _fmt(abs(rec.alpha_tilde) * system.half_length), rec.regime.value])
    header = ["f_THz", "sigma_inter_re_S", "sigma_inter_im_S", "sigma_intra_re_S",
              "sigma_intra_im_S", "xi_re_S_m2", "xi_im_S_m2", "abs_alpha_L", "regime"]
    _write_csv(args.out, header, rows)
    return 0


def _dump_green(path, system, params):
    L = system.half_length
    z = np.linspace(-L, L, 201)
    rows = []
    for zp in (-0.5 * L, 0.0, 0.5 * L):
        vals = g_sturm(z, np.full_like(z, zp), params)
        rows += [["g", _fmt(a * 1e9), _fmt(zp * 1e9), _fmt(v.real), _fmt(v.imag)]
                 for a, v in zip(z, vals)]
    u = np.linspace(L / 200.0, 2.0 * L, 200)
    for a, v in zip(u, big_g(u, params)):
        rows.append(["G", _fmt(a * 1e9), "", _fmt(v.real), _fmt(v.imag)])
    _write_csv(path, ["table", "x_nm", "xp_nm", "re", "im"], rows)


def _dump_kernel(path, kernel):
    n = kernel.n_segments
    rows = [[str(i), str(j), _fmt(kernel.values[i, j].real), _fmt(kernel.values[i, j].imag)]
            for i in range(n) for j in range(n)]
    _write_csv(path, ["i", "j", "re_m", "im_m"], rows)


def _solve(args, doc):
    system, exc = config_from(doc)
    sol, kernel, rec = solve_system(system, exc, args.n_segments,
                                    local_factor=args.local_override,
                                    sign_convention=args.sign, form=args.form)
    if getattr(args, "dump_green", None):
        _dump_green(args.dump_green, system, green_params(system, rec))
    if getattr(args, "dump_kernel", None):
        _dump_kernel(args.dump_kernel, kernel)
    return system, exc, sol, rec


def cmd_solve(args) -> int:
    doc = _config(args)
    system, exc, sol, rec = _solve(args, doc)
    meta = {**config_echo(system, exc), "n_segments": args.n_segments,
            "local_override": args.local_override, "sign_convention": sol.sign_convention.value,
            "kernel_form": KernelForm(args.form).value, "residual_norm": sol.residual_norm,
            "condition": sol.condition, "regime": rec.regime.value, "code_version": __version__}
    rows = [[_fmt(z * 1e9), _fmt(j.real), _fmt(j.imag), _fmt(e.real), _fmt(e.imag)]
            for z, j, e in zip(sol.grid_midpoints, sol.j_z, sol.e_z_total)]
    _write_csv(args.out, ["z_nm", "j_re_A_per_m", "j_im_A_per_m", "E_re_V_per_m", "E_im_V_per_m"],
               rows, preamble="# " + json.dumps(meta) + "\n")
    return 0


def cmd_force(args) -> int:
    doc = _config(args)
    methods = ["numeric", "analytic", "local"] if args.method == "all" else [args.method]
    system, exc = config_from(doc)
    rows, status = [], 0
    for m in methods:
        try:
            if m == "numeric":
                _, _, sol, rec = _solve(args, doc)
                res = force_numeric(sol, exc.omega, system.radius, system, exc, rec.regime)
            elif m == "analytic":
                rec = response(exc.omega, system, local_factor=args.local_override)
                res = force_analytic(exc.omega, system, exc, rec)
            else:
                res = force_local(exc.omega, system, exc)
            rows.append([m, _fmt(res.f_z), _fmt(res.f_z / FEMTONEWTON), res.regime.value, ""])
        except NanopullError as err:
            rows.append([m, "", "", "", f"{type(err).__name__}: {err}"])
            status = 2
    _write_csv(args.out, ["method", "Fz_N", "Fz_fN", "regime", "error"], rows)
    return status


def cmd_sweep(args) -> int:
    doc = _config(args)
    spec = spec_from_config(doc)
    result = run_sweep(spec, workers=args.workers)
    if args.out in (None, "-"):
        from .sweep import render
        sys.stdout.write(render(result, args.format or "csv"))
    else:
        emit(result, args.out, args.format)
    if not result.all_ok:
        bad = sum(not r.ok for r in result.rows)
        print(f"nanopull: {bad} of {len(result.rows)} points failed", file=sys.stderr)
        return 2
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(f"{name}\t{load_preset(name).get('description', '')}")
    else:
        if not args.name:
            raise ConfigError("presets show needs a preset name")
        print(json.dumps(load_preset(args.name), indent=2))
    return 0


def _config_options(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", help="named preset instead of --config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable), e.g. --set frequency_thz=210")
    p.add_argument("--out", help="output file (default: stdout)")


def _solver_options(p):
    p.add_argument("--n-segments", type=int, default=411)
    p.add_argument("--local-override", type=float, default=None, metavar="FACTOR",
                   help="multiply the nonlocal wavenumber by FACTOR (local limit)")
    p.add_argument("--sign", choices=[s.value for s in SignConvention], default=DEFAULT_SIGN.value)
    p.add_argument("--form", choices=[f.value for f in KernelForm], default=KernelForm.SINGULAR.value)
    p.add_argument("--dump-green", metavar="CSV", help="write sampled g and G tables")
    p.add_argument("--dump-kernel", metavar="CSV", help="write the kernel matrix entries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nanopull", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nanopull {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conductivity", help="conductivity, nonlocality factor and |alpha| L")
    _config_options(p)
    p.add_argument("--sweep", metavar="F0,F1,N", help="frequency sweep in THz")
    p.add_argument("--local-override", type=float, default=None, metavar="FACTOR")
    p.set_defaults(func=cmd_conductivity)

    p = sub.add_parser("solve", help="surface current and field on the collocation grid")
    _config_options(p)
    _solver_options(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("force", help="axial optical force")
    _config_options(p)
    _solver_options(p)
    p.add_argument("--method", choices=["numeric", "analytic", "local", "all"], default="all")
    p.set_defaults(func=cmd_force)

    p = sub.add_parser("sweep", help="parameter sweep from a config with a 'sweep' block")
    _config_options(p)
    p.add_argument("--format", choices=["csv", "json"], default=None,
                   help="output format (default: from the --out suffix)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: NANOPULL_THREADS or CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("presets", help="list or show the shipped sweep presets")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NanopullError as err:
        print(f"nanopull: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
