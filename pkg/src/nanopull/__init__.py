"""Optical force on a finite metallic zigzag carbon nanotube with nonlocal conductivity."""

__version__ = "0.1.0"

from .conductivity import Regime, ResponseRecord, response
from .force import ForceMethod, ForceResult, force_analytic, force_local, force_numeric
from .kernel import KernelForm, KernelMatrix, assemble, make_grid
from .model import CONST, CntSystem, Excitation, build_excitation, build_system, config_from
from .solver import DEFAULT_SIGN, CurrentSolution, SignConvention, solve, solve_system

__all__ = [
    "CONST", "CntSystem", "CurrentSolution", "DEFAULT_SIGN", "Excitation", "ForceMethod",
    "ForceResult", "KernelForm", "KernelMatrix", "Regime", "ResponseRecord", "SignConvention",
    "__version__", "assemble", "build_excitation", "build_system", "config_from",
    "force_analytic", "force_local", "force_numeric", "make_grid", "response", "solve",
    "solve_system",
]
