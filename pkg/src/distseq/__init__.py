"""Distributed Bayesian methods in the signal-in-white-noise model."""
from .adaptive import (MmleSettings, distributed_mmle, h_k, log_marginal_likelihood,
                       method_vii, mmle_objective, mmle_trace, underbar_alpha)
from .aggregation import (METHODS, MethodId, average_convolve, barycenter_diag, gpoe, poe,
                          run_method, wasserstein2_diag)
from .errors import BarycenterError, InvalidArgument, TruncationTooShort
from .metrics import (CoverageResult, CredibleBall, RiskDecomposition, contraction_mass,
                      coverage, credible_ball, credible_radius, exact_risk, global_posterior,
                      rate_fit, replicate, replicate_methods, shrinkage_and_spread,
                      summarize)
from .model import (DistributedData, ModelConfig, Signal, aggregate_data, alternating_signal,
                    basis_matrix, boundary_signal, default_trunc, hard_cutoff, hard_signal,
                    membership_radius, simulate, simulate_machine, synthesize_function)
from .posteriors import (DiagonalGaussian, PriorSpec, default_tau, local_posterior,
                         power_likelihood_posterior, rescaled_prior_posterior)

__version__ = "0.1.0"
