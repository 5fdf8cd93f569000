"""Unbalanced optimal transport of Wasserstein-Fisher-Rao type.

Thin wrapper around the C++ core; see ``help(wfr._wfr)`` for signatures.
"""
from ._wfr import (
    Grid,
    GridMeasure,
    NumericalFailure,
    SolverOptions,
    bounded_lipschitz,
    dirac_distance,
    dist_proportional,
    dist_to_zero,
    estimate_beckner_constant,
    rasterize_atoms,
    run_flow,
    solve_distance,
    suite_names,
    verify,
    w2_vs_d_gap,
    wasserstein2_1d,
)

__all__ = [
    "Grid",
    "GridMeasure",
    "NumericalFailure",
    "SolverOptions",
    "bounded_lipschitz",
    "dirac_distance",
    "dist_proportional",
    "dist_to_zero",
    "estimate_beckner_constant",
    "rasterize_atoms",
    "run_flow",
    "solve_distance",
    "suite_names",
    "verify",
    "w2_vs_d_gap",
    "wasserstein2_1d",
]
