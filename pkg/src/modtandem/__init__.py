"""Overflow probabilities of a Markov-modulated tandem walk via harmonic functions."""

__version__ = "0.1.0"

from .model import ModelParams, check_stability, load_model, parse_model, reference_model, stationary_distribution
from .roots import RootCatalog, SurfacePoint, build_root_catalog
from .harmonic import HarmonicFn, assemble_haK, build_frak_h, c_star
from .exact import compare_grids, simulate_pn, solve_pn, solve_tau_inf

__all__ = [
    "ModelParams", "check_stability", "load_model", "parse_model", "reference_model", "stationary_distribution",
    "RootCatalog", "SurfacePoint", "build_root_catalog",
    "HarmonicFn", "assemble_haK", "build_frak_h", "c_star",
    "compare_grids", "simulate_pn", "solve_pn", "solve_tau_inf",
]
