"""Pessimistic offline reinforcement learning with linear function approximation."""

from .algos_mdp import BonusConfig, PolicyBundle, pevi, spevi, spevi_plus
from .algos_mg import GameBundle, MatrixGameSolution, solve_matrix_game, spmvi, spmvi_plus
from .data import Dataset, collect, coverage_kappa, load_dataset, save_dataset, split_four_way, split_h_fold
from .instances import (
    LowerBoundSpec,
    graded_gap_mdp,
    lower_bound_family,
    mixed_stage_game,
    random_linear_instance,
    tabular_embed,
)
from .kernels import BACKEND
from .model import (
    MDP,
    MG,
    InstanceError,
    LinearInstance,
    apply_bellman,
    best_response,
    conditional_variance,
    duality_gap,
    evaluate_policy,
    load_instance,
    ne_values_mg,
    optimal_values_mdp,
    save_instance,
)
from .regression import RidgeFit, elliptical_norm, weighted_ridge
from .variance import VarianceEstimator, eval_variance_estimator, fit_variance_estimator

__version__ = "0.1.0"
