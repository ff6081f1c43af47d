"""Saddle-point escape with perturbations drawn from evolved Gaussian wave packets."""
from .analytic import GaussianLaw, evolved_law, mean_offset, sample, variance_sigma2
from .errors import (ConfigError, DimensionMismatch, GridTooLarge, HessianUnavailable,
                     NumericalInstability)
from .landscapes import Landscape, evaluate, gradient, hessian, make_landscape
from .optim import (NoisyGradientModel, Trajectory, agd_hamiltonian, gd_step, is_eps_sosp, nce,
                    noisy_gradient, pagd_qs, pgd_classical, pgd_jordan, pgd_qs)
from .perturb import (PDEOptions, ScheduleParams, apply_perturbation, quantum_simulation_sample,
                      schedule_from, schedule_for)
from .wavesim import (build_grid, discretize, evolve, initial_gaussian, marginal_variance, measure,
                      tv_distance)

__version__ = "0.1.0"
