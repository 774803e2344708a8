"""Gaussian-process bandits for tree search."""

from .bounds import (
    infogain_actual,
    infogain_bound_kernel_independent,
    infogain_bound_sumlog,
    infogain_bound_tailsum,
    infogain_greedy,
    regret_bound,
    submodularity_chain,
    t_prime,
    t_star,
)
from .errors import GPTSError
from .gp import BetaSchedule, PosteriorState, beta
from .kernels import ChiSequence, chi_gaussian, chi_linear, chi_mdp, feature_map, kernel_eval
from .planning import TabularMDP, depth_schedule, discounted_reward, plan
from .search import SearchConfig, SearchTree, run
from .spectrum import build_gram, closed_form_spectrum, lambda_hat_bounds, reorder, sample_gp_prior

__version__ = "0.1.0"

__all__ = [
    "BetaSchedule",
    "ChiSequence",
    "GPTSError",
    "PosteriorState",
    "SearchConfig",
    "SearchTree",
    "TabularMDP",
    "beta",
    "build_gram",
    "chi_gaussian",
    "chi_linear",
    "chi_mdp",
    "closed_form_spectrum",
    "depth_schedule",
    "discounted_reward",
    "feature_map",
    "infogain_actual",
    "infogain_bound_kernel_independent",
    "infogain_bound_sumlog",
    "infogain_bound_tailsum",
    "infogain_greedy",
    "kernel_eval",
    "lambda_hat_bounds",
    "plan",
    "regret_bound",
    "reorder",
    "run",
    "sample_gp_prior",
    "submodularity_chain",
    "t_prime",
    "t_star",
]
