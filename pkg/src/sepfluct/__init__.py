"""Symmetric exclusion process on random geometric grids and its fluctuation fields."""

from .manifold import ManifoldModel, TestFunction, circle, eigenfunction, flat_torus, sphere2
from .grid import Grid, build_grid, laplacian_apply, laplacian_error, spectral_decompose
from .sep import Configuration, EventSampler, AliasTable, init_bernoulli, run, step
from .fluctuation import FieldObservable, FieldTrajectory, field_eval, finalize_martingales, gamma_eval

__all__ = [
    "ManifoldModel", "TestFunction", "circle", "eigenfunction", "flat_torus", "sphere2",
    "Grid", "build_grid", "laplacian_apply", "laplacian_error", "spectral_decompose",
    "Configuration", "EventSampler", "AliasTable", "init_bernoulli", "run", "step",
    "FieldObservable", "FieldTrajectory", "field_eval", "finalize_martingales", "gamma_eval",
]

__version__ = "0.1.0"
