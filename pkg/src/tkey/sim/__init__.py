"""Monte Carlo experiments on random functions, inversion attacks and checkpoint plans."""

from .attacks import attack_independent, attack_same_function
from .functions import RandomFunctionFamily, mc_collision_prob, mc_image_size, mc_preimage_stats
from .logins import mc_expected_cost, replay_costs, simulate_logins
from .report import StatReport, trial_rng

__all__ = [
    "RandomFunctionFamily", "StatReport", "attack_independent", "attack_same_function",
    "mc_collision_prob", "mc_expected_cost", "mc_image_size", "mc_preimage_stats", "replay_costs",
    "simulate_logins", "trial_rng",
]
