"""Two-player zero-sum pessimism: stage-game solver, SPMVI and SPMVI+.

The max-player acts on rows and uses lower confidence bounds; the
min-player acts on columns and uses upper confidence bounds. Both players
share the step-``h`` design matrix, so each step needs one factorization
with two right-hand sides.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .algos_mdp import (
    KAPPA_FLOOR,
    BonusConfig,
    _check_quad,
    _echo,
    advantage_bonus,
    bernstein_radius,
    burn_in_threshold,
    hoeffding_radius,
    resolve_kappa,
)
from .data import Dataset, split_h_fold
from .model import MG, LinearInstance, apply_bellman, check_policy, clip
from .regression import elliptical_norms, weighted_ridge
from .variance import fit_variance_estimator


@dataclass(frozen=True)
class MatrixGameSolution:
    x_star: np.ndarray
    y_star: np.ndarray
    value: float
    exploitability: float


def solve_matrix_game(Q, tol: float = 1e-9) -> MatrixGameSolution:
    """Nash equilibrium of the zero-sum game with payoff ``Q`` to the row (max) player.

    The payoff is shifted to be strictly positive and the column player's
    program ``max 1'z s.t. P z <= 1`` is solved by a dense simplex; the row
    strategy is read off the optimal duals.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or min(Q.shape) < 1:
        raise ValueError("payoff must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(Q)):
        raise ValueError("payoff contains non-finite entries")
    shift = Q.min() - 1.0
    z, dual, _ = kernels.simplex_game(Q - shift)
    y = z / z.sum()
    x = np.maximum(dual, 0.0)
    x = x / x.sum()
    value = float(x @ Q @ y)
    exploit = float((Q @ y).max() - (x @ Q).min())
    if exploit > tol * max(1.0, np.abs(Q).max()):
        raise RuntimeError(f"stage game solve left exploitability {exploit:.3g} > {tol}")
    return MatrixGameSolution(x, y, value, max(exploit, 0.0))


@dataclass(eq=False)
class GameBundle:
    """Output of one two-sided pessimistic run.

    ``*_lower`` tables belong to the max-player (LCB) and ``*_upper``
    tables to the min-player (UCB). ``exploitability`` is the worst stage
    certificate over all solves.
    """

    algo: str
    pi: np.ndarray
    nu: np.ndarray
    V_lower: np.ndarray
    V_upper: np.ndarray
    Q_lower: np.ndarray
    Q_upper: np.ndarray
    T_lower: np.ndarray
    T_upper: np.ndarray
    bonus_lower: np.ndarray
    bonus_upper: np.ndarray
    exploitability: float = 0.0
    effective_K: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def H(self) -> int:
        return self.Q_lower.shape[0]

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "pi": self.pi.tolist(),
            "nu": self.nu.tolist(),
            "V_lower": self.V_lower.tolist(),
            "V_upper": self.V_upper.tolist(),
            "exploitability": self.exploitability,
            "effective_K": self.effective_K,
            "config": self.config,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_mg(ds: Dataset):
    if ds.kind != MG:
        raise ValueError("game algorithms need a Markov-game dataset")
    if ds.K < 1:
        raise ValueError("empty dataset")


def _stage_solves(Ql, Qu, tol):
    """Solve both stage games at every state of one step."""
    S, A, B = Ql.shape
    pi, nu = np.zeros((S, A)), np.zeros((S, B))
    Vl, Vu = np.zeros(S), np.zeros(S)
    worst = 0.0
    for x in range(S):
        lo = solve_matrix_game(Ql[x], tol)
        hi = solve_matrix_game(Qu[x], tol)
        pi[x], nu[x] = lo.x_star, hi.y_star
        Vl[x], Vu[x] = lo.value, hi.value
        worst = max(worst, lo.exploitability, hi.exploitability)
    return pi, nu, Vl, Vu, worst


class _Tables:
    def __init__(self, H, S, A, B):
        shape = (H, S, A, B)
        self.Vl, self.Vu = np.zeros((H + 1, S)), np.zeros((H + 1, S))
        self.Ql, self.Qu = np.zeros(shape), np.zeros(shape)
        self.Tl, self.Tu = np.zeros(shape), np.zeros(shape)
        self.bl, self.bu = np.zeros(shape), np.zeros(shape)
        self.pi, self.nu = np.zeros((H, S, A)), np.zeros((H, S, B))
        self.worst = 0.0

    def close_step(self, h, tol):
        H = self.Ql.shape[0]
        self.Ql[h] = clip(self.Tl[h] - self.bl[h], H - h)
        self.Qu[h] = clip(self.Tu[h] + self.bu[h], H - h)
        self.pi[h], self.nu[h], self.Vl[h], self.Vu[h], w = _stage_solves(self.Ql[h], self.Qu[h], tol)
        self.worst = max(self.worst, w)

    def bundle(self, algo, **kw):
        return GameBundle(
            algo, self.pi, self.nu, self.Vl, self.Vu, self.Ql, self.Qu,
            self.Tl, self.Tu, self.bl, self.bu, exploitability=self.worst, **kw,
        )


def spmvi(D: Dataset, features, lam: float, cfg: BonusConfig = BonusConfig(), tol: float = 1e-9) -> GameBundle:
    _check_mg(D)
    features = np.asarray(features, dtype=np.float64)
    S, A, B, d = features.shape
    H = D.H
    if D.K < H:
        raise ValueError(f"SPMVI needs K >= H ({D.K} < {H})")
    folds = split_h_fold(D, H)
    n = folds[0].K
    beta = cfg.c_hoeff * hoeffding_radius(d, H, n, lam, cfg.delta)
    t = _Tables(H, S, A, B)
    for h in range(H - 1, -1, -1):
        ds = folds[h]
        phi = ds.step_features(features, h)
        nxt = ds.xn[:, h]
        y = np.stack([ds.r[:, h] + t.Vl[h + 1][nxt], ds.r[:, h] + t.Vu[h + 1][nxt]], axis=1)
        fit = weighted_ridge(phi, y, lam)
        pred = features @ fit.w
        t.Tl[h], t.Tu[h] = pred[..., 0], pred[..., 1]
        t.bl[h] = t.bu[h] = beta * elliptical_norms(fit, features)
        t.close_step(h, tol)
    return t.bundle(
        "spmvi",
        effective_K={"per_fold": n, "discarded": len(folds[0].discarded)},
        config=_echo(cfg, lam, beta=beta),
    )


def spmvi_plus(
    D_ref: Dataset,
    D0: Dataset,
    D1: Dataset,
    D0prime: Dataset,
    features,
    lam: float,
    cfg: BonusConfig = BonusConfig(),
    instance: LinearInstance | None = None,
    behavior=None,
    tol: float = 1e-9,
) -> GameBundle:
    """Reference-advantage variant with variance-weighted reference fits for both players."""
    parts = (D_ref, D0, D1, D0prime)
    _check_quad(parts, MG)
    features = np.asarray(features, dtype=np.float64)
    S, A, B, d = features.shape
    H = D0.H
    if D1.K < H:
        raise ValueError(f"D1 needs K >= H ({D1.K} < {H})")
    delta = cfg.delta / 3
    ref = spmvi(D_ref, features, lam, replace(cfg, delta=delta), tol)
    kappa = resolve_kappa(cfg, D0, features, instance, behavior)
    warnings = []
    if kappa <= KAPPA_FLOOR:
        warnings.append(f"coverage kappa={kappa:.3g} is not positive; floored at {KAPPA_FLOOR}")
        kappa = KAPPA_FLOOR
    if not lam < kappa:
        warnings.append(f"lambda={lam} is not below kappa={kappa:.4g}")
    K0 = D0.K
    threshold = burn_in_threshold(d, H, kappa, cfg.delta)
    if K0 <= threshold:
        warnings.append(f"K={K0} below burn-in threshold {threshold:.3g}")
    radius = cfg.c_bern * bernstein_radius(d, H, K0, lam, delta, cfg.sigma_bar)
    offset = 4 * lam * H**3 * math.sqrt(d) / (K0 * kappa)
    b1 = cfg.c_adv * advantage_bonus(d, H, K0, kappa, delta)
    folds1 = split_h_fold(D1, H)

    t = _Tables(H, S, A, B)
    estimators = []
    for h in range(H - 1, -1, -1):
        phi0 = D0.step_features(features, h)
        nxt0 = D0.xn[:, h]
        sides = []
        for Vref in (ref.V_lower, ref.V_upper):
            est = fit_variance_estimator(D0prime, features, h, Vref[h + 1], lam, H)
            fit0 = weighted_ridge(phi0, D0.r[:, h] + Vref[h + 1][nxt0], lam, est(phi0))
            sides.append((est, fit0))
        fold = folds1[h]
        phi1 = fold.step_features(features, h)
        nxt1 = fold.xn[:, h]
        y1 = np.stack(
            [(t.Vl[h + 1] - ref.V_lower[h + 1])[nxt1], (t.Vu[h + 1] - ref.V_upper[h + 1])[nxt1]], axis=1
        )
        fit1 = weighted_ridge(phi1, y1, lam)
        adv = features @ fit1.w
        (est_l, fit_l), (est_u, fit_u) = sides
        t.Tl[h] = features @ fit_l.w + adv[..., 0]
        t.Tu[h] = features @ fit_u.w + adv[..., 1]
        t.bl[h] = radius * elliptical_norms(fit_l, features) + offset + b1
        t.bu[h] = radius * elliptical_norms(fit_u, features) + offset + b1
        t.close_step(h, tol)
        estimators.append((est_l, est_u))
    estimators.reverse()
    return t.bundle(
        "spmvi_plus",
        effective_K={"per_part": K0, "advantage_fold": folds1[0].K, "discarded": len(D0.discarded)},
        warnings=warnings,
        config=_echo(cfg, lam, radius=radius, offset=offset, b1=b1, kappa=kappa),
        extras={"reference": ref, "b1": b1, "variance": estimators, "kappa": kappa,
                "burn_in": bool(K0 > threshold)},
    )


def bonus_event(instance: LinearInstance, bundle: GameBundle, tol: float = 1e-9) -> bool:
    """Both regression errors sit inside their bonuses at every ``(h, x, a, b)``."""
    for h in range(bundle.H):
        lo = apply_bellman(instance, bundle.V_lower[h + 1], h)
        hi = apply_bellman(instance, bundle.V_upper[h + 1], h)
        if np.any(np.abs(lo - bundle.T_lower[h]) > bundle.bonus_lower[h] + tol):
            return False
        if np.any(np.abs(hi - bundle.T_upper[h]) > bundle.bonus_upper[h] + tol):
            return False
    return True


def worst_case_sum(instance: LinearInstance, tables, fixed, side: str, start=None) -> float:
    """``sup`` over the free player of ``sum_h E[tables_h]`` with the other side fixed.

    ``side`` names the free player, as in :func:`best_response`: ``"min"``
    means ``fixed`` is the max-player's policy and the column player picks
    the maximizing actions.
    """
    H, S = instance.H, instance.num_states
    n_fixed = instance.num_actions if side == "min" else instance.num_actions_min
    fixed = check_policy(fixed, H, S, n_fixed, "fixed policy")
    tables = np.asarray(tables, dtype=np.float64)
    W = np.zeros(S)
    for h in range(H - 1, -1, -1):
        stage = tables[h] + instance.transition(h) @ W
        if side == "min":
            W = np.einsum("sab,sa->sb", stage, fixed[h]).max(axis=1)
        else:
            W = np.einsum("sab,sb->sa", stage, fixed[h]).max(axis=1)
    rho = instance.initial_dist if start is None else np.eye(S)[start]
    return float(rho @ W)


def decomposition_bound(instance: LinearInstance, bundle: GameBundle, pi_star, nu_star, start=None) -> float:
    """``2 sup_nu sum E_{pi*,nu}[bonus_upper] + 2 sup_pi sum E_{pi,nu*}[bonus_lower]``."""
    return 2.0 * (
        worst_case_sum(instance, bundle.bonus_upper, pi_star, "min", start)
        + worst_case_sum(instance, bundle.bonus_lower, nu_star, "max", start)
    )


__all__ = [
    "MatrixGameSolution",
    "GameBundle",
    "solve_matrix_game",
    "spmvi",
    "spmvi_plus",
    "bonus_event",
    "worst_case_sum",
    "decomposition_bound",
]
