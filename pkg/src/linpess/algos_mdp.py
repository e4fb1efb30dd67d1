"""Pessimistic value iteration for linear MDPs.

* ``pevi``: every step regresses on the full dataset.
* ``spevi``: H-fold split, step ``h`` regresses on fold ``h`` only.
* ``spevi_plus``: reference-advantage decomposition over four independent
  splits with a variance-weighted reference regression.

Bonus radii are explicit (Hoeffding / Bernstein self-normalized bounds)
with user-visible multipliers in :class:`BonusConfig`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import FOUR_WAY_TAGS, Dataset, coverage_empirical, coverage_exact, split_h_fold
from .model import LinearInstance, apply_bellman, clip, expected_sum
from .regression import RidgeFit, elliptical_norms, weighted_ridge
from .variance import fit_variance_estimator

KAPPA_FLOOR = 1e-12


@dataclass(frozen=True)
class BonusConfig:
    delta: float = 0.1
    c_hoeff: float = 1.0
    c_bern: float = 1.0
    c_adv: float = 1.0
    sigma_bar: float = math.sqrt(2.0)
    kappa_source: str = "empirical"  # "exact" | "empirical" | "supplied"
    kappa_value: float | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        for name in ("c_hoeff", "c_bern", "c_adv", "sigma_bar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa_source not in ("exact", "empirical", "supplied"):
            raise ValueError(f"unknown kappa_source {self.kappa_source!r}")
        if self.kappa_source == "supplied" and not (self.kappa_value and self.kappa_value > 0):
            raise ValueError("kappa_source='supplied' needs a positive kappa_value")

    @classmethod
    def from_dict(cls, doc: dict | None) -> "BonusConfig":
        return cls(**(doc or {}))


@dataclass(eq=False)
class PolicyBundle:
    """Output of one pessimistic value-iteration run.

    ``T_hat[h]`` is the unclipped regression estimate of the Bellman backup
    of ``V[h + 1]`` and ``bonus[h]`` the total penalty subtracted from it.
    """

    algo: str
    policy: np.ndarray
    actions: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    T_hat: np.ndarray
    bonus: np.ndarray
    fits: list = field(default_factory=list)
    effective_K: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def H(self) -> int:
        return self.Q.shape[0]

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "policy": self.actions.tolist(),
            "V": self.V.tolist(),
            "bonuses": [_summary(self.bonus[h]) for h in range(self.H)],
            "effective_K": self.effective_K,
            "config": self.config,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _summary(t):
    return {"min": float(t.min()), "mean": float(t.mean()), "max": float(t.max())}


def hoeffding_radius(d: int, H: int, n: int, lam: float, delta: float) -> float:
    """``H sqrt(d log((lam + n) H / (lam delta)))`` with a union bound over H steps."""
    return H * math.sqrt(d * math.log((lam + n) * H / (lam * delta)))


def pevi_radius(d: int, H: int, K: int, delta: float) -> float:
    return d * H * math.sqrt(math.log(2 * d * K / delta))


def bernstein_radius(d: int, H: int, K: int, lam: float, delta: float, sigma_bar: float) -> float:
    L = math.log(4 * K * K * H / delta)
    return 8 * sigma_bar * math.sqrt(d * math.log(1 + K / (lam * d)) * L) + 4 * H * L


def advantage_bonus(d: int, H: int, K: int, kappa: float, delta: float) -> float:
    return d * H**3 * math.log(4 * K * K * H / delta) / (K * kappa)


def burn_in_threshold(d: int, H: int, kappa: float, delta: float) -> float:
    k = max(kappa, KAPPA_FLOOR)
    return max(512 * H * math.log(4 * H * d / (delta * k * k)), d * H**13 / k**4)


def resolve_kappa(cfg: BonusConfig, ds: Dataset, features, instance=None, behavior=None) -> float:
    if cfg.kappa_source == "supplied":
        return float(cfg.kappa_value)
    if cfg.kappa_source == "exact":
        if instance is None or behavior is None:
            raise ValueError("kappa_source='exact' needs the instance and behavior policy")
        return coverage_exact(instance, behavior)[0]
    return coverage_empirical(ds, features)[0]


def _greedy(Q):
    acts = np.argmax(Q, axis=-1)
    n = Q.shape[-1]
    return np.eye(n)[acts], acts, Q.max(axis=-1)


def _check_mdp(ds: Dataset):
    if ds.kind != "mdp":
        raise ValueError("MDP algorithms need an MDP dataset")
    if ds.K < 1:
        raise ValueError("empty dataset")


def _value_iteration(features, H, lam, folds, beta, algo, cfg_echo):
    """Shared backward pass: step ``h`` regresses on ``folds[h]``."""
    S, A, d = features.shape
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    T_hat = np.zeros((H, S, A))
    bonus = np.zeros((H, S, A))
    acts = np.zeros((H, S), dtype=np.int64)
    pol = np.zeros((H, S, A))
    fits = []
    for h in range(H - 1, -1, -1):
        ds = folds[h]
        phi = ds.step_features(features, h)
        fit = weighted_ridge(phi, ds.r[:, h] + V[h + 1][ds.xn[:, h]], lam)
        T_hat[h] = features @ fit.w
        bonus[h] = beta * elliptical_norms(fit, features)
        Q[h] = clip(T_hat[h] - bonus[h], H - h)
        pol[h], acts[h], V[h] = _greedy(Q[h])
        fits.append(fit)
    fits.reverse()
    return PolicyBundle(algo, pol, acts, V, Q, T_hat, bonus, fits=fits, config=cfg_echo)


def pevi(D: Dataset, features, lam: float, cfg: BonusConfig = BonusConfig()) -> PolicyBundle:
    """Baseline: shared dataset at every step with the uniform-concentration radius."""
    _check_mdp(D)
    features = np.asarray(features, dtype=np.float64)
    d, H = features.shape[-1], D.H
    beta = cfg.c_hoeff * pevi_radius(d, H, D.K, cfg.delta)
    out = _value_iteration(features, H, lam, [D] * H, beta, "pevi", _echo(cfg, lam, beta=beta))
    out.effective_K = {"per_step": D.K}
    return out


def spevi(D: Dataset, features, lam: float, cfg: BonusConfig = BonusConfig()) -> PolicyBundle:
    _check_mdp(D)
    features = np.asarray(features, dtype=np.float64)
    d, H = features.shape[-1], D.H
    if D.K < H:
        raise ValueError(f"SPEVI needs K >= H ({D.K} < {H})")
    folds = split_h_fold(D, H)
    n = folds[0].K
    beta = cfg.c_hoeff * hoeffding_radius(d, H, n, lam, cfg.delta)
    out = _value_iteration(features, H, lam, folds, beta, "spevi", _echo(cfg, lam, beta=beta))
    out.effective_K = {"per_fold": n, "discarded": len(folds[0].discarded)}
    return out


def _check_quad(parts, kind):
    for ds, tag in zip(parts, FOUR_WAY_TAGS):
        if ds.split_tag != tag:
            raise ValueError(f"expected a dataset tagged {tag!r}, got {ds.split_tag!r}")
        if ds.kind != kind:
            raise ValueError(f"expected {kind} datasets")
    sizes = {ds.K for ds in parts}
    if len(sizes) != 1:
        raise ValueError(f"split parts must have equal sizes, got {sorted(sizes)}")
    seen: set[int] = set()
    for ds in parts:
        ids = set(ds.ids.tolist())
        if seen & ids:
            raise ValueError("split parts share trajectories")
        seen |= ids


def spevi_plus(
    D_ref: Dataset,
    D0: Dataset,
    D1: Dataset,
    D0prime: Dataset,
    features,
    lam: float,
    cfg: BonusConfig = BonusConfig(),
    instance: LinearInstance | None = None,
    behavior=None,
) -> PolicyBundle:
    """Reference-advantage pessimistic value iteration.

    The failure budget is split evenly over the reference run, the variance
    fits and the main bonuses (``delta / 3`` each).
    """
    parts = (D_ref, D0, D1, D0prime)
    _check_quad(parts, "mdp")
    features = np.asarray(features, dtype=np.float64)
    S, A, d = features.shape
    H = D0.H
    if D1.K < H:
        raise ValueError(f"D1 needs K >= H ({D1.K} < {H})")
    delta = cfg.delta / 3
    sub = replace(cfg, delta=delta)
    ref = spevi(D_ref, features, lam, sub)
    Vref = ref.V
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

    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    T_hat = np.zeros((H, S, A))
    bonus = np.zeros((H, S, A))
    b0_tab = np.zeros((H, S, A))
    acts = np.zeros((H, S), dtype=np.int64)
    pol = np.zeros((H, S, A))
    fits, estimators = [], []
    for h in range(H - 1, -1, -1):
        est = fit_variance_estimator(D0prime, features, h, Vref[h + 1], lam, H)
        phi0 = D0.step_features(features, h)
        fit0 = weighted_ridge(phi0, D0.r[:, h] + Vref[h + 1][D0.xn[:, h]], lam, est(phi0))
        fold = folds1[h]
        phi1 = fold.step_features(features, h)
        fit1 = weighted_ridge(phi1, (V[h + 1] - Vref[h + 1])[fold.xn[:, h]], lam)
        b0_tab[h] = radius * elliptical_norms(fit0, features) + offset
        T_hat[h] = features @ fit0.w + features @ fit1.w
        bonus[h] = b0_tab[h] + b1
        Q[h] = clip(T_hat[h] - bonus[h], H - h)
        pol[h], acts[h], V[h] = _greedy(Q[h])
        fits.append((fit0, fit1))
        estimators.append(est)
    fits.reverse()
    estimators.reverse()
    echo = _echo(cfg, lam, radius=radius, offset=offset, b1=b1, kappa=kappa)
    return PolicyBundle(
        "spevi_plus",
        pol,
        acts,
        V,
        Q,
        T_hat,
        bonus,
        fits=fits,
        effective_K={"per_part": K0, "advantage_fold": folds1[0].K, "discarded": len(D0.discarded)},
        warnings=warnings,
        config=echo,
        extras={"reference": ref, "b0": b0_tab, "b1": b1, "variance": estimators, "kappa": kappa,
                "burn_in": bool(K0 > threshold)},
    )


def _echo(cfg: BonusConfig, lam: float, **extra) -> dict:
    out = asdict(cfg)
    out["lambda"] = lam
    out.update({k: float(v) for k, v in extra.items()})
    return out


def bonus_event(instance: LinearInstance, bundle: PolicyBundle, tol: float = 1e-9) -> bool:
    """Whether ``|T_h V[h+1] - T_hat_h| <= bonus_h`` at every ``(h, x, a)``."""
    for h in range(bundle.H):
        exact = apply_bellman(instance, bundle.V[h + 1], h)
        if np.any(np.abs(exact - bundle.T_hat[h]) > bundle.bonus[h] + tol):
            return False
    return True


def decomposition_bound(instance: LinearInstance, bundle: PolicyBundle, pi_star, start=None) -> float:
    """``2 sum_h E_{pi*}[bonus_h]`` from ``start`` (or the initial law)."""
    return 2.0 * expected_sum(instance, bundle.bonus, pi_star, start=start)


__all__ = [
    "BonusConfig",
    "PolicyBundle",
    "pevi",
    "spevi",
    "spevi_plus",
    "bonus_event",
    "decomposition_bound",
    "burn_in_threshold",
    "hoeffding_radius",
    "bernstein_radius",
]
