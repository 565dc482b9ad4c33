"""Finite Dirichlet-form models with certified Liouville-type inequalities."""
from .config import Tolerances, get_tolerances, load_tolerances
from .form import (DirichletFormModel, LocalPart, ModelError, StateSpace, apply_generator,
                   assemble_generator, energy_bilinear, gamma_measures, gamma_pairing, restrict)

__all__ = [
    "DirichletFormModel", "LocalPart", "ModelError", "StateSpace", "Tolerances",
    "apply_generator", "assemble_generator", "energy_bilinear", "gamma_measures",
    "gamma_pairing", "get_tolerances", "load_tolerances", "restrict",
]
__version__ = "0.1.0"
