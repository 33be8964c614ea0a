"""Simulation of electron transport through a double quantum dot monitored
by a quantum point contact: non-Markovian decay coefficients, full counting
statistics, the tunnelling current, and closed-loop current stabilization."""

__version__ = "0.1.0"

from .model import (DegenerateHamiltonianError, DqdParams, EigenBasis,
                    EnvParams, diagonalize, eta)
from .coefficients import (AppendixRates, ConstantRates, QuadratureConfig,
                           QuadratureError, RateSet, RateTable,
                           appendix_rates, calibrated_deltas, delta_coeffs,
                           delta_coeffs_2d, delta_coeffs_exact, fermi_lambda,
                           fermi_occupation, gamma_rates, gamma_rates_exact,
                           markovian_deltas, markovian_gammas,
                           markovian_rateset, write_coefficients_csv)
from .dynamics import (VARIANT_AS_WRITTEN, VARIANT_LINDBLAD,
                       DensityTrajectory, IntegratorConfig, NResolvedState,
                       NResolvedTrajectory, PositivityWarning,
                       StepFailureError, TruncationOverflowError, current,
                       density_matrix_checks, lindblad_rhs, propagate,
                       propagate_n_resolved, propagate_populations,
                       stationary_current,
                       write_nresolved_csv, write_trajectory_csv)
from .fcs import (CountingDistribution, CumulantSet, cgf, cumulant_trajectory,
                  cumulants, distribution, write_cumulant_csv)
from .control import (ClosedLoopTrajectory, ControlLaw, ControlSignal,
                      closed_loop, control_signal, sgn, write_closed_loop_csv)
