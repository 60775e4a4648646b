"""Monte Carlo laboratory for the weak error of Euler schemes in the log-Heston model."""
from .engine import (ConvergenceStudy, McEstimate, estimate, estimate_many, fit_rate, reference_for,
                     run_studies, run_study, weak_error)
from .lemmas import (best_negativity_bound, bound_constant, build_sequence, check_lemmas, estimate_negativity,
                     increment_scaling, negativity_bound)
from .model import (CALL, DIGITAL, PRESETS, PUT, SMOOTH_V, SMOOTH_X, GridSpec, HestonParams, Payoff,
                    PayoffKind, cir_mean, eval_payoff, feller, logprice_mean, preset)
from .reference import black_scholes_call, heston_prob, price_call, price_digital, price_put, reference_set
from .rng import SeedSpec, gaussian_pair
from .schemes import SchemeKind, compute_z, simulate_terminal, step_logprice, step_variance

__all__ = [
    "CALL", "DIGITAL", "PRESETS", "PUT", "SMOOTH_V", "SMOOTH_X", "ConvergenceStudy", "GridSpec",
    "HestonParams", "McEstimate", "Payoff", "PayoffKind", "SchemeKind", "SeedSpec", "best_negativity_bound",
    "black_scholes_call", "bound_constant", "build_sequence", "check_lemmas", "cir_mean", "compute_z", "estimate", "estimate_many",
    "estimate_negativity", "eval_payoff", "feller", "fit_rate", "gaussian_pair", "heston_prob",
    "increment_scaling", "logprice_mean", "negativity_bound", "preset", "price_call", "price_digital",
    "price_put", "reference_for", "reference_set", "run_studies", "run_study", "simulate_terminal",
    "step_logprice", "step_variance", "weak_error",
]
