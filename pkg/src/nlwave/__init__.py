"""Pseudospectral simulator and statistical-experiment toolkit for the
defocusing nonlinear wave equation on the torus and the radial unit ball."""

__version__ = "0.1.0"

from .spectral import (
    ModeGrid,
    SpectralField,
    StatePair,
    SymbolSpec,
    apply_multiplier,
    to_physical,
    to_spectral,
    sobolev_norm,
    pair_norm,
    lebesgue_norm,
    project_leq,
    project_nonzero,
    BumpSpec,
    bump_dilate,
)

__all__ = [
    "ModeGrid",
    "SpectralField",
    "StatePair",
    "SymbolSpec",
    "apply_multiplier",
    "to_physical",
    "to_spectral",
    "sobolev_norm",
    "pair_norm",
    "lebesgue_norm",
    "project_leq",
    "project_nonzero",
    "BumpSpec",
    "bump_dilate",
    "__version__",
]
