"""Recurrence sets of toral endomorphisms ``x -> Ax mod 1``.

Exact periodic-point enumeration, the ellipsoid geometry of the sets
``{x : T^n x in B(x, psi(n))}``, their Hausdorff dimension formulas, a
finite Cantor-type construction with its mass distribution, and the
conjugacy reduction for rationally diagonalizable matrices.
"""

__version__ = "0.1.0"

from .exact_linalg import IntegerMatrix, RationalMatrix, char_poly, det_exact, eigen_moduli, matrix_power, smith_normal_form
from .spectrum_dim import (
    DimensionResult, LogRate, RateFunction, Spectrum, alpha_threshold, dim_equal_moduli, dim_general,
    dim_rational_diagonal, k_set,
)
from .periodic_lattice import PeriodicSet, count_in_ball, count_in_ellipsoid, count_periodic, enumerate_periodic
from .recurrence_geometry import (
    Ellipsoid, EllipsoidFamily, boshernitzan_statistic, box_count_dimension, covering_count, decompose_Rn,
    ellipsoid_min_distance, membership, recurrence_indices, semi_axes, upper_bound_sum,
)
from .cantor_mass import LevelSequence, MassTree, build_tree, local_dimension_sample, mass_bounds_check, select_levels
from .conjugacy import ConjugacyData, commutation_check, lipschitz_sandwich, rational_diagonalize, transported_dimension
