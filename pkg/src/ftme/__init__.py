"""Finite-time metric entropy, FTLE fields and entropy-based coherent
structures for ODE-generated finite-time dynamical systems."""

__version__ = "0.1.0"

from .dynamics import (BuiltinSystem, FlowResult, LinearSystem,
                       NoClosedFormError, ParabolaSystem, Scalar1D,
                       TrajectoryBlowUpError, VectorField, closed_form_flow,
                       integrate_flow, integrate_flow_batch, linear_saddle,
                       liouville_det)
from .entropy import (EntropyResult, TimeSet, coherent_pair_ratio,
                      empirical_escape_rate, ftme_1d, ftme_2d_exact,
                      ftme_2d_incompressible, ftme_along_trajectory,
                      ftme_monte_carlo, ftme_norm_bounds,
                      gamma_norm_deviation, linearized_ftme_monte_carlo,
                      pesin_gap)
from .fieldio import (Grid2D, ScalarField2D, export_csv, export_pgm,
                      import_csv)
from .lcs import (ConeReport, StretchingRate, cone_check,
                  directional_stretching_rate, extract_extrema, ftle_field,
                  stretching_rate, stretching_rate_field,
                  stretching_rate_near_equilibrium_gap, weighted_ftme_at,
                  weighted_ftme_field)
from .spectra import (DegenerateMatrixError, Ellipsoid, SpectralData,
                      ellipsoid_membership, svd_small, unit_ball_volume)

__all__ = [name for name in dir() if not name.startswith("_")]
