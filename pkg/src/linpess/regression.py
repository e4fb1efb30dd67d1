"""Variance-weighted ridge regression and elliptical norms.

The closed form is ``w = Lambda^{-1} sum_k phi_k y_k / sigma_k^2`` with
``Lambda = sum_k phi_k phi_k^T / sigma_k^2 + lam I``. ``Lambda`` is
Cholesky-factored once and every solve and norm probe reuses the factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from . import kernels


@dataclass(frozen=True, eq=False)
class RidgeFit:
    w: np.ndarray
    lam: float
    cov: np.ndarray
    chol: np.ndarray
    n_rows: int

    @property
    def d(self) -> int:
        return self.cov.shape[0]

    def predict(self, phi) -> np.ndarray:
        return np.asarray(phi) @ self.w

    def solve(self, rhs) -> np.ndarray:
        return cho_solve((self.chol, True), rhs)


def _as_rows(phi, y, sigma2):
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise ValueError("phi must be a 2-D array of shape (n, d)")
    n = phi.shape[0]
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != n:
        raise ValueError("y must have one entry per row")
    if sigma2 is None:
        sigma2 = np.ones(n)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if sigma2.shape != (n,):
        raise ValueError("sigma2 must have one entry per row")
    for name, arr in (("phi", phi), ("y", y), ("sigma2", sigma2)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
    if n and sigma2.min() < 1.0:
        raise ValueError("variance weights must be >= 1")
    return phi, y, sigma2


def weighted_ridge(phi, y, lam: float, sigma2=None) -> RidgeFit:
    """Fit a (weighted) ridge regression in closed form.

    ``y`` may be ``(n,)`` or ``(n, m)``; in the second case all ``m``
    targets share the covariance and ``w`` has shape ``(d, m)``.
    """
    if not lam > 0:
        raise ValueError(f"ridge parameter must be positive, got {lam}")
    phi, y, sigma2 = _as_rows(phi, y, sigma2)
    d = phi.shape[1]
    multi = y.ndim == 2
    Y = y if multi else y[:, None]
    if phi.shape[0]:
        G, rhs = kernels.gram_rhs(phi, Y, 1.0 / sigma2)
    else:
        G, rhs = np.zeros((d, d)), np.zeros((d, Y.shape[1]))
    cov = G + lam * np.eye(d)
    cov = 0.5 * (cov + cov.T)
    L = cholesky(cov, lower=True)
    w = cho_solve((L, True), rhs)
    return RidgeFit(w if multi else w[:, 0], float(lam), cov, L, phi.shape[0])


def elliptical_norms(fit: RidgeFit, phi) -> np.ndarray:
    """``sqrt(phi^T cov^{-1} phi)`` for every row of ``phi`` (any leading shape)."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape[-1] != fit.d:
        raise ValueError(f"feature dimension {phi.shape[-1]} != {fit.d}")
    flat = phi.reshape(-1, fit.d)
    z = solve_triangular(fit.chol, flat.T, lower=True)
    return np.sqrt(np.sum(z * z, axis=0)).reshape(phi.shape[:-1])


def elliptical_norm(fit: RidgeFit, phi) -> float:
    return float(elliptical_norms(fit, np.asarray(phi, dtype=np.float64)[None, :])[0])
