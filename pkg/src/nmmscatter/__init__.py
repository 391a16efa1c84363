"""Numerical mode matching for 2D Helmholtz scattering by stepped sound-soft surfaces."""
from .eigensolver import PmlParams, cheb_grid, assemble_vertical_operator, solve_modes, sqrt_branch
from .evaluate import FieldGrid, eval_outgoing_v, eval_scattered, eval_total, sample_grid
from .fields import PlaneWave, PointSource, green, hankel1, interface_jump_data, reference_field
from .geometry import Inclusion, Region, SteppedSurface, build_regions, classify_point, trapezoid
from .matching import MatchedSolution, SingularSystemError, assemble_matching_system, solve, solve_coefficients

__version__ = "0.1.0"
