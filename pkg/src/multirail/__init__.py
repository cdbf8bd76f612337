"""Simulation and analysis of multi-rail state transfer through parallel spin chains."""
from .chain import (ChainSpec, Propagator, SingleExcitationOperator, Spectrum, build_chain,
                    propagator, spectrum, transfer_amplitude)
from .condition import (ConditionReport, ResonanceReport, open_nn_theorem_check,
                        overlap_report, resonance_check)
from .convergence import (ConvergenceCertificate, ReducedOperator, build_T, certify,
                          fit_decay, power_radius, reduce_T, spectral_radius)
from .encoding import (RailCode, decode_bits, encode_bits, index_from_subset, integer_rate,
                       optimal_K, rate, subset_from_index)
from .engine import (DenseJointState, FailureResidual, ProductSumState, evolve,
                     initial_state, project_failure, recursion_gamma, success_amplitude,
                     to_dense)
from .exceptions import (BudgetExceeded, EigensolverError, MultirailError, NormViolation,
                         SuccessCertain)
from .protocol import (Jitter, MonteCarloResult, ProtocolTrace, Schedule, jitter_stream,
                       jittered_run, monte_carlo, reach, run, sample_success_steps,
                       steps_to_reach)
from .scheduler import OptimizerConfig, expected_steps, greedy_optimize, uniform

__version__ = "0.1.0"
