"""Instance generators.

* ``tabular_embed``: one-hot features for an arbitrary tabular kernel.
* ``random_linear_instance``: mixture-of-anchors linear MDPs/MGs with a
  behavior policy of guaranteed coverage.
* ``lower_bound_family``: the two-state hard family with Gaussian rewards,
  plus closed-form evaluators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import coverage_exact
from .model import MDP, MG, LinearInstance, check_policy, occupancy

KAPPA_MIN = 0.01
MAX_RESAMPLES = 100
ENUM_MAX_D = 6


def tabular_embed(P, r, H: int | None = None, initial_dist=None, kind: str = MDP, metadata=None) -> LinearInstance:
    """Embed a tabular MDP/MG with one-hot features, ``d = S * |joint actions|``.

    ``P`` has shape ``(S, A[, B], S)`` (homogeneous) or ``(H, S, A[, B], S)``;
    ``r`` likewise without the trailing state axis.
    """
    P = np.asarray(P, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    base = 3 if kind == MDP else 4
    if kind not in (MDP, MG):
        raise ValueError(f"unknown kind {kind!r}")
    if P.ndim == base:
        if H is None:
            raise ValueError("a homogeneous kernel needs an explicit horizon H")
        P = np.broadcast_to(P, (H,) + P.shape)
        r = np.broadcast_to(r, (H,) + r.shape)
    elif P.ndim != base + 1:
        raise ValueError(f"kernel must have {base} or {base + 1} axes for kind {kind!r}")
    H = P.shape[0] if H is None else H
    if P.shape[0] != H or r.shape != P.shape[:-1]:
        raise ValueError("kernel, reward and horizon shapes disagree")
    S = P.shape[1]
    if P.shape[-1] != S:
        raise ValueError("next-state axis must match the number of states")
    if P.min() < 0 or np.abs(P.sum(-1) - 1).max() > 1e-9:
        raise ValueError("tabular kernel rows must be probability vectors")
    if r.min() < 0 or r.max() > 1:
        raise ValueError("tabular rewards must lie in [0, 1]")
    action_shape = P.shape[2:-1]
    d = S * int(np.prod(action_shape))
    features = np.eye(d).reshape((S,) + action_shape + (d,))
    measures = P.reshape(H, d, S).copy()
    thetas = r.reshape(H, d).copy()
    init = np.full(S, 1.0 / S) if initial_dist is None else np.asarray(initial_dist, dtype=np.float64)
    meta = {"generator": "tabular_embed"}
    meta.update(metadata or {})
    return LinearInstance(kind, H, features, measures, thetas, init, metadata=meta)


def _sizes(kind, sizes):
    sizes = tuple(int(s) for s in sizes)
    need = 2 if kind == MDP else 3
    if len(sizes) != need or min(sizes) < 1:
        raise ValueError(f"sizes must be {need} positive integers for kind {kind!r}")
    return sizes


def random_linear_instance(kind: str, d: int, H: int, sizes, seed: int, concentration: float = 0.3):
    """Random linear instance with exact linearity by construction.

    Features are Dirichlet draws on the simplex (so ``||phi|| <= 1``), and
    the step-``h`` kernel is ``P(.|x, a) = sum_i phi_i(x, a) anchor_i`` with
    ``d`` random anchor distributions. Returns ``(instance, behavior)``
    where the behavior is a mixed policy (a ``(pi, nu)`` pair for games)
    whose exact coverage exceeds ``KAPPA_MIN``.
    """
    if kind not in (MDP, MG):
        raise ValueError(f"unknown kind {kind!r}")
    sizes = _sizes(kind, sizes)
    S, A = sizes[0], sizes[1]
    action_shape = sizes[1:]
    n_pairs = S * int(np.prod(action_shape))
    if d > n_pairs:
        raise ValueError(f"d={d} exceeds the number of state-action pairs ({n_pairs}); coverage is impossible")
    rng = np.random.default_rng(seed)
    for attempt in range(MAX_RESAMPLES):
        features = rng.dirichlet(np.full(d, concentration), size=n_pairs).reshape((S,) + action_shape + (d,))
        anchors = rng.dirichlet(np.ones(S), size=(H, d))
        thetas = rng.uniform(0.0, 1.0, size=(H, d))
        inst = LinearInstance(
            kind, H, features, anchors, thetas, np.full(S, 1.0 / S),
            metadata={"generator": "random_linear_instance", "seed": int(seed), "attempt": attempt},
        )
        pi = 0.5 * rng.dirichlet(np.ones(A), size=(H, S)) + 0.5 / A
        if kind == MDP:
            behavior = pi
        else:
            B = sizes[2]
            behavior = (pi, 0.5 * rng.dirichlet(np.ones(B), size=(H, S)) + 0.5 / B)
        if coverage_exact(inst, behavior)[0] > KAPPA_MIN:
            return inst, behavior
    raise ValueError(f"coverage floor {KAPPA_MIN} not reached after {MAX_RESAMPLES} resamples")


@dataclass(frozen=True)
class LowerBoundSpec:
    d: int
    H: int
    zeta: float
    u: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d < 4:
            raise ValueError("the hard family needs d >= 4 for its measures to satisfy the norm bound")
        if self.H < 1:
            raise ValueError("H must be positive")
        if not 0 <= self.zeta <= 1 / math.sqrt(3 * self.d) + 1e-15:
            raise ValueError(f"zeta must lie in [0, 1/sqrt(3d)], got {self.zeta}")
        if self.u is not None:
            u = np.asarray(self.u)
            if u.shape != (self.H, self.d - 2) or not np.all(np.abs(u) == 1):
                raise ValueError("u must be an (H, d - 2) array of signs")

    def signs(self) -> np.ndarray:
        if self.u is not None:
            return np.asarray(self.u, dtype=np.float64)
        rng = np.random.default_rng(self.seed)
        return rng.choice([-1.0, 1.0], size=(self.H, self.d - 2))


STATES = (1.0, -1.0)


def action_set(d: int) -> np.ndarray:
    """All of ``{-1, 0, 1}^(d-2)`` in lexicographic order."""
    return np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=d - 2)))


def action_index(d: int, a) -> int:
    idx = 0
    for v in a:
        idx = 3 * idx + int(v) + 1
    return idx


@dataclass(frozen=True, eq=False)
class LowerBoundAnalytics:
    d: int
    H: int
    zeta: float
    u: np.ndarray
    v_star: np.ndarray
    optimal_actions: np.ndarray
    second_moment: np.ndarray

    @property
    def coefficient(self) -> float:
        return self.zeta / math.sqrt(2 * self.d)

    def gap(self, pi, initial_dist=(0.5, 0.5)) -> float:
        """Suboptimality (equal to the duality gap for games) of a max-player policy.

        Transitions ignore actions, so the state law is known in closed
        form and only the mean action under ``pi`` matters.
        """
        acts = action_set(self.d)
        pi = check_policy(pi, self.H, 2, acts.shape[0], "pi")
        rho = np.tile(np.asarray(initial_dist, dtype=np.float64), (self.H, 1))
        rho[1:] = 0.5
        mean_a = np.einsum("hsa,ai->hsi", pi, acts)
        m = np.einsum("hs,hsi,hi->h", rho, mean_a, self.u)
        return float(self.coefficient * np.sum((self.d - 2) - m))

    def to_dict(self) -> dict:
        return {
            "v_star": self.v_star.tolist(),
            "u": self.u.tolist(),
            "zeta": self.zeta,
            "gap_coefficients": [self.coefficient] * self.H,
        }


def _lb_features(d: int, kind: str) -> np.ndarray:
    acts = action_set(d)
    nA = acts.shape[0]
    feats = np.zeros((2, nA, d))
    for si, s in enumerate(STATES):
        feats[si, :, : d - 2] = acts / math.sqrt(2 * d)
        feats[si, :, d - 2 if s > 0 else d - 1] = 1 / math.sqrt(2)
    if kind == MG:
        feats = np.repeat(feats[:, :, None, :], nA, axis=2)
    return feats


def _lb_behavior(d: int, H: int):
    acts = action_set(d)
    pi = np.zeros((H, 2, acts.shape[0]))
    for j in range(d - 2):
        e = np.zeros(d - 2)
        e[j] = 1.0
        pi[:, :, action_index(d, e)] = 1.0 / d
    zero = action_index(d, np.zeros(d - 2))
    pi[:, :, zero] = 2.0 / d
    nu = np.zeros_like(pi)
    nu[:, :, zero] = 1.0
    return pi, nu


def lower_bound_family(spec: LowerBoundSpec, kind: str = MG, mode: str = "enumerated"):
    """Build the hard instance for sign pattern ``spec.u``.

    Returns ``(instance, behavior, analytics)``. In ``"analytic"`` mode
    (any ``d``) the first two entries are ``None``; ``"enumerated"`` mode
    needs ``d <= 6`` and returns a full instance with unit Gaussian reward
    observations.
    """
    if kind not in (MDP, MG):
        raise ValueError(f"unknown kind {kind!r}")
    if mode not in ("enumerated", "analytic"):
        raise ValueError(f"unknown mode {mode!r}")
    d, H, zeta = spec.d, spec.H, float(spec.zeta)
    u = spec.signs()
    c = zeta / math.sqrt(2 * d)
    steps_left = np.arange(H, -1, -1)[:, None]
    v_star = np.array(STATES)[None, :] / math.sqrt(6) + steps_left * c * (d - 2)
    v_star[H] = 0.0
    opt = np.array([action_index(d, u[h]) for h in range(H)])
    # second moment of phi under the behavior: d atoms per state, states equally likely
    m = np.zeros((d, d))
    for si in range(2):
        for j in range(d - 1):
            a = np.zeros(d - 2)
            w = 2.0 / d if j == d - 2 else 1.0 / d
            if j < d - 2:
                a[j] = 1.0
            phi = np.concatenate([a / math.sqrt(2 * d), [0.0, 0.0]])
            phi[d - 2 + si] = 1 / math.sqrt(2)
            m += 0.5 * w * np.outer(phi, phi)
    analytics = LowerBoundAnalytics(d, H, zeta, u, v_star, opt, m)
    if mode == "analytic":
        return None, None, analytics
    if d > ENUM_MAX_D:
        raise ValueError(f"enumerated mode supports d <= {ENUM_MAX_D}, got {d}")
    measures = np.zeros((H, d, 2))
    # 0.5 / fl(1/sqrt(2)) is the float neighbour of 1/sqrt(2) whose product
    # with the feature entry rounds to exactly 1/2
    measures[:, d - 2:, :] = 0.5 / (1 / math.sqrt(2))
    thetas = np.zeros((H, d))
    thetas[:, : d - 2] = zeta * u
    thetas[:, d - 2] = 1 / math.sqrt(3)
    thetas[:, d - 1] = -1 / math.sqrt(3)
    inst = LinearInstance(
        kind, H, _lb_features(d, kind), measures, thetas, np.array([0.5, 0.5]),
        reward_noise=1.0,
        metadata={"generator": "lower_bound_family", "d": d, "zeta": zeta, "seed": spec.seed},
    )
    pi, nu = _lb_behavior(d, H)
    behavior = pi if kind == MDP else (pi, nu)
    return inst, behavior, analytics


def behavior_second_moment(inst: LinearInstance, behavior, h: int) -> np.ndarray:
    """Exact ``E[phi phi^T]`` at step ``h`` under the behavior's occupancy."""
    pi, nu = (behavior, None) if inst.kind == MDP else behavior
    occ = occupancy(inst, pi, nu)[h].reshape(-1)
    flat = inst.flat_features().reshape(-1, inst.d)
    return flat.T @ (occ[:, None] * flat)


def graded_gap_mdp(S: int = 20, A: int = 2, H: int = 3, gap_range=(0.002, 0.3), optimal_prob: float = 0.25, seed: int = 0):
    """Tabular MDP whose ``S * H`` decision points have log-spaced action gaps.

    Built backward: the optimal action at ``(h, x)`` is drawn at random and
    every other action is worse by that point's gap. The returned behavior
    plays the optimal action with probability ``optimal_prob``, so the
    optimal action is the less covered one when ``optimal_prob < 1 / A``.
    Returns ``(instance, behavior, optimal_actions)``.
    """
    if A < 2:
        raise ValueError("graded gaps need at least two actions")
    lo, hi = gap_range
    if not 0 < lo <= hi:
        raise ValueError("gap range must satisfy 0 < lo <= hi")
    if not 0 < optimal_prob < 1:
        raise ValueError("optimal_prob must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(S, 5.0), size=(H, S, A))
    gaps = rng.permutation(np.geomspace(lo, hi, S * H)).reshape(H, S)
    r = np.zeros((H, S, A))
    best = np.zeros((H, S), dtype=np.int64)
    V = np.zeros(S)
    for h in range(H - 1, -1, -1):
        base = rng.uniform(0.35, 0.65, size=S)
        best[h] = rng.integers(A, size=S)
        PV = P[h] @ V
        top = base + PV[np.arange(S), best[h]]
        target = top[:, None] - gaps[h][:, None] * (np.arange(A)[None, :] != best[h][:, None])
        r[h] = target - PV
        V = target.max(axis=1)
    if r.min() < 0 or r.max() > 1:
        raise ValueError("gap range too wide for rewards in [0, 1]; shrink it")
    behavior = np.full((H, S, A), (1 - optimal_prob) / (A - 1))
    behavior[np.arange(H)[:, None], np.arange(S)[None, :], best] = optimal_prob
    inst = tabular_embed(P, r, H, metadata={"generator": "graded_gap_mdp", "seed": int(seed)})
    return inst, behavior, best


def mixed_stage_game(H: int = 2, S: int = 2, amplitude: float = 0.2, seed: int = 0,
                     row_behavior=(0.3, 0.7), col_behavior=(0.65, 0.35)):
    """2x2 tabular game whose stage games are perturbed matching pennies.

    Rewards stay inside ``0.5 +- (amplitude + 0.05)``, so every stage
    equilibrium is fully mixed and nothing clips. Returns ``(instance, (pi, nu))``
    with a fixed, deliberately uneven product behavior.
    """
    if not 0 < amplitude <= 0.4:
        raise ValueError("amplitude must lie in (0, 0.4]")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(S, 2.0), size=(H, S, 2, 2))
    pennies = np.array([[1.0, -1.0], [-1.0, 1.0]])
    scale = rng.uniform(0.5, 1.0, size=(H, S, 1, 1))
    r = 0.5 + amplitude * scale * pennies + 0.05 * rng.uniform(-1.0, 1.0, size=(H, S, 2, 2))
    inst = tabular_embed(P, r, H, kind=MG, metadata={"generator": "mixed_stage_game", "seed": int(seed)})
    pi = np.tile(np.asarray(row_behavior, dtype=np.float64), (H, S, 1))
    nu = np.tile(np.asarray(col_behavior, dtype=np.float64), (H, S, 1))
    return inst, (pi, nu)


__all__ = [
    "tabular_embed",
    "random_linear_instance",
    "graded_gap_mdp",
    "mixed_stage_game",
    "LowerBoundSpec",
    "LowerBoundAnalytics",
    "lower_bound_family",
    "action_set",
    "action_index",
    "behavior_second_moment",
]
