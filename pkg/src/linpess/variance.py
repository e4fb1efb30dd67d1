"""Conditional-variance estimator fitted on a held-out split.

Two ridge regressions on the same design, one targeting ``V(x')**2`` and
one targeting ``V(x')``, combined as

    max(1, clip(phi @ beta2, 0, H**2) - clip(phi @ beta1, 0, H)**2)

Clipping happens before the subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .model import clip
from .regression import weighted_ridge


@dataclass(frozen=True)
class VarianceEstimator:
    beta2: np.ndarray
    beta1: np.ndarray
    H: int

    def __call__(self, phi) -> np.ndarray:
        return eval_variance_estimator(self, phi)


def fit_variance_estimator(D0prime: Dataset, features, h: int, V_target, lam: float, H: int) -> VarianceEstimator:
    if D0prime.K == 0:
        raise ValueError("empty step slice: the variance split has no trajectories")
    V_target = np.asarray(V_target, dtype=np.float64)
    phi = D0prime.step_features(features, h)
    v = V_target[D0prime.xn[:, h]]
    fit = weighted_ridge(phi, np.stack([v * v, v], axis=1), lam)
    return VarianceEstimator(beta2=fit.w[:, 0], beta1=fit.w[:, 1], H=H)


def eval_variance_estimator(est: VarianceEstimator, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    second = clip(phi @ est.beta2, est.H**2)
    first = clip(phi @ est.beta1, est.H)
    return np.maximum(1.0, second - first * first)
