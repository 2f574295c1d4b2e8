"""Simulation, estimation, and optimization of spin-to-charge-conversion
readout for solid-state defect spins.

The package follows the measurement chain: :mod:`sccread.ctmc` models
the charge-state telegraph process and its photon statistics,
:mod:`sccread.kinetics` provides a general jump-process reference
engine, :mod:`sccread.estimators` recovers model parameters from data,
:mod:`sccread.readout` scores and optimizes charge classification, and
:mod:`sccread.magnetometry` turns readout noise into magnetic
sensitivity.  :mod:`sccread.cli` wraps it all for batch use.
"""

from .ctmc import (ChargeState, PhotonCountDistribution, RateSet,
                   default_n_max, pmf_analytic, pmf_mixture, simulate_window,
                   simulate_windows, steady_state)
from .dataio import (read_fit_result_json, read_histogram_csv,
                     read_histogram_json, read_table_csv,
                     write_fit_result_json, write_histogram_csv,
                     write_histogram_json, write_table_csv)
from .errors import (ConfigError, DataFormatError, DegenerateRatesError,
                     InvalidDomainError, NoContrastError,
                     NonIdentifiableError, QuadratureError,
                     RankDeficiencyError, SccReadError, UnitError,
                     UnknownLevelError, UnknownTransitionError,
                     ZeroSuccessError)
from .estimators import (CountHistogram, FitResult, RatePowerLaws,
                         SaturationModel, emg_profile, fit_charge_mixture,
                         fit_noise_curve, fit_polarization, fit_rates_mle,
                         fit_saturation, fit_spin_echo, pearson_residuals)
from .kinetics import LevelSystem, Trajectory, Transition, simulate_sequence
from .magnetometry import (CONVENTIONAL_SIGMA_R, G_FACTOR, HBAR, MU_B,
                           NoiseCurve, SensitivityBudget, SensitivityOptimum,
                           echo_signal, echo_signal_slope,
                           min_detectable_field, optimize_sensitivity,
                           sensitivity)
from .readout import (InitializationBudget, ReadoutOptimum, ReadoutPolicy,
                      SCCPopulations, assignment_prob, charge_fidelity,
                      classify, conventional_noise, effective_populations,
                      fidelity_envelope, initialization_model,
                      optimize_readout, pareto_front, scc_noise)

__version__ = "0.1.0"
