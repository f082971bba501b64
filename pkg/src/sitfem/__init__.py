"""P1 finite element / theta-IMEX simulator for a sex-structured sterile
insect reaction-diffusion model with Ricker recruitment."""

__version__ = "0.1.0"

from .mesh import Mesh, assemble_mass, assemble_stiffness, build_mesh
from .model import ModelParams, lambda_crit, positive_equilibrium, reaction_G, reaction_f
from .stepper import Discretization, SchemeConfig, State, imex_step, run_simulation

__all__ = [
    "Mesh", "build_mesh", "assemble_mass", "assemble_stiffness",
    "ModelParams", "lambda_crit", "positive_equilibrium", "reaction_G", "reaction_f",
    "Discretization", "SchemeConfig", "State", "imex_step", "run_simulation",
]
