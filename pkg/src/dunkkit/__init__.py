"""Small-Biot transient conduction: the sensitivity functional phi and friends.

Quadratic finite elements on triangles compute the B = 0 eigenfunction
sensitivity, its functionals (phi, chi, Upsilon), Robin eigenvalues, the
transient response, lumped models with error estimates, and bounds for a
non-uniform heat-transfer coefficient.
"""

from .assembly import Forms, MaterialField, assemble
from .geometry import DomainSpec, GeometryError
from .lumped import LumpedCoefficients, lumped_models
from .mesh import Mesh, refine, triangulate
from .sensitivity import SensitivityResult, closed_form, solve_sensitivity
from .spectral import first_eigenpair
from .transient import QoISeries, step_heat

__version__ = "0.1.0"

__all__ = [
    "DomainSpec", "GeometryError", "Mesh", "refine", "triangulate", "MaterialField", "Forms", "assemble",
    "SensitivityResult", "solve_sensitivity", "closed_form", "first_eigenpair", "QoISeries", "step_heat",
    "LumpedCoefficients", "lumped_models",
]
