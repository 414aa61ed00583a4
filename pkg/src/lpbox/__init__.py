"""Binary sequence set design with consensus lp-box ADMM."""

from .sequences import (ConfigError, Mode, PairLagIndex, SequenceSet, ShiftSpec,
                        enumerate_index_set, parse_intervals, validate_binary)
from .correlation import (correlate, correlation_profile, in_band_level_db, isl, islr_db,
                          objective_psl_form, objective_smooth_F, psl, pslr_db, residual_f)
from .gradient import finite_difference_check, grad_f_squared, lipschitz_constant
from .projections import project_box, project_lp_sphere
from .admm import AdmmConfig, DivergenceError, RunReport, solve

__version__ = "0.1.0"
