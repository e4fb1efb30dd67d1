"""Linear MDP / zero-sum linear Markov game instances and exact oracles.

Spaces are finite and enumerable. Features are stored densely as an array
of shape ``(S, A, d)`` for MDPs or ``(S, A, B, d)`` for games; transition
measures as ``(H, d, S)`` and reward vectors as ``(H, d)``. Steps are
0-based internally (``h = 0`` is the first step).

Policies are arrays of shape ``(H, S, A)`` holding per-state action
distributions. Value tables carry ``V`` of shape ``(H + 1, S)`` with a
zero terminal row and ``Q`` of shape ``(H, S, A[, B])``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

MDP = "mdp"
MG = "mg"

PROB_TOL = 1e-9
NEG_TOL = 1e-12
MAX_ENUM = 10**6


class InstanceError(ValueError):
    """Raised when an instance violates the linear-structure invariants."""


def clip(x, upper, lower=0.0):
    """Clip to ``[lower, upper]``: ``max(lower, min(upper, x))``."""
    return np.maximum(lower, np.minimum(upper, x))


@dataclass(frozen=True, eq=False)
class LinearInstance:
    kind: str
    H: int
    features: np.ndarray
    measures: np.ndarray
    thetas: np.ndarray
    initial_dist: np.ndarray
    reward_noise: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)
    validate: bool = True

    def __post_init__(self):
        if self.kind not in (MDP, MG):
            raise InstanceError(f"kind must be 'mdp' or 'mg', got {self.kind!r}")
        feats = np.asarray(self.features, dtype=np.float64)
        want = 3 if self.kind == MDP else 4
        if feats.ndim != want:
            raise InstanceError(f"{self.kind} features need {want} axes, got shape {feats.shape}")
        meas = np.asarray(self.measures, dtype=np.float64)
        th = np.asarray(self.thetas, dtype=np.float64)
        init = np.asarray(self.initial_dist, dtype=np.float64)
        S, d = feats.shape[0], feats.shape[-1]
        if meas.shape != (self.H, d, S):
            raise InstanceError(f"measures must have shape {(self.H, d, S)}, got {meas.shape}")
        if th.shape != (self.H, d):
            raise InstanceError(f"thetas must have shape {(self.H, d)}, got {th.shape}")
        if init.shape != (S,):
            raise InstanceError(f"initial_dist must have shape {(S,)}, got {init.shape}")
        for name, arr in (("features", feats), ("measures", meas), ("thetas", th), ("initial_dist", init)):
            if not np.all(np.isfinite(arr)):
                raise InstanceError(f"{name} contains non-finite values")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "measures", meas)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "initial_dist", init)
        # transition and reward tables, shape (H, S, J, S') / (H, S, J)
        flat = feats.reshape(S, -1, d)
        P = np.einsum("sjd,hdt->hsjt", flat, meas)
        R = np.einsum("sjd,hd->hsj", flat, th)
        if self.validate:
            P = self._check(feats, meas, th, init, P, R)
        object.__setattr__(self, "_P", P)
        object.__setattr__(self, "_R", R)

    def _check(self, feats, meas, th, init, P, R):
        d = feats.shape[-1]
        norms = np.linalg.norm(feats, axis=-1)
        if norms.max() > 1.0 + 1e-12:
            raise InstanceError(f"feature norm {norms.max():.6g} exceeds 1")
        if P.min() < -NEG_TOL:
            raise InstanceError(f"negative transition probability {P.min():.3g}")
        if np.abs(P.sum(-1) - 1.0).max() > PROB_TOL:
            raise InstanceError("transition rows do not sum to 1")
        if self.reward_noise is None and (R.min() < -1e-12 or R.max() > 1 + 1e-12):
            raise InstanceError("mean rewards must lie in [0, 1] for noiseless instances")
        bound = np.sqrt(d) + 1e-9
        if np.linalg.norm(th, axis=1).max() > bound:
            raise InstanceError("reward vector norm exceeds sqrt(d)")
        if np.linalg.norm(meas.sum(axis=2), axis=1).max() > bound:
            raise InstanceError("total measure norm exceeds sqrt(d)")
        if init.min() < 0 or abs(init.sum() - 1.0) > PROB_TOL:
            raise InstanceError("initial_dist is not a probability vector")
        if P.min() < 0:
            P = np.maximum(P, 0.0)
            P = P / P.sum(-1, keepdims=True)
        return P

    # shape helpers -------------------------------------------------------
    @property
    def d(self) -> int:
        return self.features.shape[-1]

    @property
    def num_states(self) -> int:
        return self.features.shape[0]

    @property
    def num_actions(self) -> int:
        return self.features.shape[1]

    @property
    def num_actions_min(self) -> int | None:
        return self.features.shape[2] if self.kind == MG else None

    @property
    def num_joint(self) -> int:
        B = self.num_actions_min or 1
        return self.num_actions * B

    @property
    def action_shape(self) -> tuple[int, ...]:
        return self.features.shape[1:-1]

    def flat_features(self) -> np.ndarray:
        """Features as ``(S, J, d)`` with joint index ``a * B + b``."""
        return self.features.reshape(self.num_states, self.num_joint, self.d)

    def transition(self, h: int) -> np.ndarray:
        """Kernel ``P_h(x' | x, a[, b])`` with shape ``(S, A[, B], S)``."""
        return self._P[h].reshape(self.features.shape[:-1] + (self.num_states,))

    def mean_reward(self, h: int) -> np.ndarray:
        return self._R[h].reshape(self.features.shape[:-1])

    def enumerable(self) -> bool:
        return self.num_states * self.num_joint <= MAX_ENUM

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "d": self.d,
            "H": self.H,
            "num_states": self.num_states,
            "num_actions": self.num_actions,
        }
        if self.kind == MG:
            out["num_actions_min"] = self.num_actions_min
        out.update(
            features=self.features.tolist(),
            measures=self.measures.tolist(),
            thetas=self.thetas.tolist(),
            reward_noise=None if self.reward_noise is None else {"gaussian": float(self.reward_noise)},
            initial_dist=self.initial_dist.tolist(),
            metadata=self.metadata,
        )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearInstance":
        missing = [k for k in ("kind", "H", "features", "measures", "thetas", "initial_dist") if k not in doc]
        if missing:
            raise InstanceError(f"instance document lacks {', '.join(missing)}")
        noise = doc.get("reward_noise")
        if isinstance(noise, dict):
            noise = noise["gaussian"]
        inst = cls(
            kind=doc["kind"],
            H=int(doc["H"]),
            features=np.array(doc["features"], dtype=np.float64),
            measures=np.array(doc["measures"], dtype=np.float64),
            thetas=np.array(doc["thetas"], dtype=np.float64),
            initial_dist=np.array(doc["initial_dist"], dtype=np.float64),
            reward_noise=noise,
            metadata=dict(doc.get("metadata") or {}),
        )
        if inst.d != doc.get("d", inst.d) or inst.num_states != doc.get("num_states", inst.num_states):
            raise InstanceError("declared sizes disagree with the feature array")
        return inst

    @classmethod
    def from_json(cls, text: str) -> "LinearInstance":
        return cls.from_dict(json.loads(text))


def save_instance(inst: LinearInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(inst.to_json())


def load_instance(path) -> LinearInstance:
    with open(path) as fh:
        return LinearInstance.from_json(fh.read())


@dataclass
class ValueTable:
    V: np.ndarray
    Q: np.ndarray


def check_policy(policy, H: int, S: int, n: int, name: str = "policy") -> np.ndarray:
    pol = np.asarray(policy, dtype=np.float64)
    if pol.shape != (H, S, n):
        raise ValueError(f"{name} must have shape {(H, S, n)}, got {pol.shape}")
    if pol.min() < 0 or np.abs(pol.sum(-1) - 1.0).max() > 1e-12 * max(1, n):
        raise ValueError(f"{name} rows must be probability vectors")
    return pol


def deterministic_policy(actions, n: int) -> np.ndarray:
    """One-hot policy from an ``(H, S)`` array of action indices."""
    actions = np.asarray(actions, dtype=np.int64)
    return np.eye(n)[actions]


def uniform_policy(H: int, S: int, n: int) -> np.ndarray:
    return np.full((H, S, n), 1.0 / n)


def _require_enum(inst: LinearInstance):
    if not inst.enumerable():
        raise ValueError(
            f"instance too large for enumeration ({inst.num_states * inst.num_joint} > {MAX_ENUM})"
        )


def apply_bellman(inst: LinearInstance, V_next, h: int) -> np.ndarray:
    """``r_h + P_h V_next`` over all ``(x, a[, b])``."""
    V_next = np.asarray(V_next, dtype=np.float64)
    if V_next.shape != (inst.num_states,):
        raise ValueError(f"V_next must have {inst.num_states} entries, got shape {V_next.shape}")
    if not 0 <= h < inst.H:
        raise ValueError(f"step {h} outside [0, {inst.H})")
    return inst.mean_reward(h) + inst.transition(h) @ V_next


def _expect(inst, Q, pi, nu):
    """Per-state expectation of a stage Q table under the given policies."""
    if inst.kind == MDP:
        return np.einsum("sa,sa->s", Q, pi)
    return np.einsum("sab,sa,sb->s", Q, pi, nu)


def evaluate_policy(inst: LinearInstance, pi, nu=None) -> ValueTable:
    _require_enum(inst)
    H, S = inst.H, inst.num_states
    pi = check_policy(pi, H, S, inst.num_actions, "pi")
    if inst.kind == MG:
        if nu is None:
            raise ValueError("a min-player policy nu is required for Markov games")
        nu = check_policy(nu, H, S, inst.num_actions_min, "nu")
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S) + inst.action_shape)
    for h in range(H - 1, -1, -1):
        Q[h] = apply_bellman(inst, V[h + 1], h)
        V[h] = _expect(inst, Q[h], pi[h], None if nu is None else nu[h])
    return ValueTable(V, Q)


def optimal_values_mdp(inst: LinearInstance) -> tuple[ValueTable, np.ndarray]:
    if inst.kind != MDP:
        raise ValueError("optimal_values_mdp needs an MDP instance")
    _require_enum(inst)
    H, S, A = inst.H, inst.num_states, inst.num_actions
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    greedy = np.zeros((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        Q[h] = apply_bellman(inst, V[h + 1], h)
        greedy[h] = np.argmax(Q[h], axis=1)
        V[h] = Q[h].max(axis=1)
    return ValueTable(V, Q), deterministic_policy(greedy, A)


def ne_values_mg(inst: LinearInstance, tol: float = 1e-9):
    """Backward induction solving the stage matrix game at every state.

    Returns ``(ValueTable, (pi_star, nu_star))``.
    """
    from .algos_mg import solve_matrix_game

    if inst.kind != MG:
        raise ValueError("ne_values_mg needs a Markov-game instance")
    _require_enum(inst)
    H, S, A, B = inst.H, inst.num_states, inst.num_actions, inst.num_actions_min
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A, B))
    pi = np.zeros((H, S, A))
    nu = np.zeros((H, S, B))
    for h in range(H - 1, -1, -1):
        Q[h] = apply_bellman(inst, V[h + 1], h)
        for x in range(S):
            sol = solve_matrix_game(Q[h, x], tol=tol)
            pi[h, x], nu[h, x] = sol.x_star, sol.y_star
        V[h] = _expect(inst, Q[h], pi[h], nu[h])
    return ValueTable(V, Q), (pi, nu)


def best_response(inst: LinearInstance, fixed, side: str) -> tuple[np.ndarray, ValueTable]:
    """Best response of the ``side`` player against a fixed opponent policy.

    ``side="min"``: ``fixed`` is the max-player's policy and the min-player
    minimizes, giving ``V^{pi,*}``. ``side="max"``: ``fixed`` is the
    min-player's policy and the max-player maximizes, giving ``V^{*,nu}``.
    Ties go to the smallest action index.
    """
    if inst.kind != MG:
        raise ValueError("best_response is defined for Markov games only")
    if side not in ("max", "min"):
        raise ValueError(f"side must be 'max' or 'min', got {side!r}")
    _require_enum(inst)
    H, S, A, B = inst.H, inst.num_states, inst.num_actions, inst.num_actions_min
    if side == "min":
        fixed = check_policy(fixed, H, S, A, "fixed max-player policy")
    else:
        fixed = check_policy(fixed, H, S, B, "fixed min-player policy")
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A, B))
    choice = np.zeros((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        Q[h] = apply_bellman(inst, V[h + 1], h)
        if side == "min":
            payoff = np.einsum("sab,sa->sb", Q[h], fixed[h])
            choice[h] = np.argmin(payoff, axis=1)
            V[h] = payoff.min(axis=1)
        else:
            payoff = np.einsum("sab,sb->sa", Q[h], fixed[h])
            choice[h] = np.argmax(payoff, axis=1)
            V[h] = payoff.max(axis=1)
    n = B if side == "min" else A
    return deterministic_policy(choice, n), ValueTable(V, Q)


def duality_gap(inst: LinearInstance, pi, nu, x: int | None = None) -> float:
    """``V_1^{*,nu}(x) - V_1^{pi,*}(x)``; averaged over ``initial_dist`` when ``x`` is None."""
    _, upper = best_response(inst, nu, "max")
    _, lower = best_response(inst, pi, "min")
    gap = upper.V[0] - lower.V[0]
    if x is None:
        return float(inst.initial_dist @ gap)
    return float(gap[x])


def conditional_variance(inst: LinearInstance, V, h: int) -> tuple[np.ndarray, np.ndarray]:
    """``(Var_h V, max(1, Var_h V))`` over all ``(x, a[, b])``."""
    V = np.asarray(V, dtype=np.float64)
    if V.shape != (inst.num_states,):
        raise ValueError(f"V must have {inst.num_states} entries")
    P = inst.transition(h)
    mean = P @ V
    var = P @ (V * V) - mean * mean
    var = np.maximum(var, 0.0)
    return var, np.maximum(1.0, var)


def state_distributions(inst: LinearInstance, pi, nu=None, start=None) -> np.ndarray:
    """Marginal state distribution at every step, shape ``(H, S)``."""
    H, S = inst.H, inst.num_states
    rho = np.zeros((H, S))
    rho[0] = inst.initial_dist if start is None else np.eye(S)[start]
    for h in range(H - 1):
        P = inst.transition(h)
        if inst.kind == MDP:
            rho[h + 1] = np.einsum("s,sa,sat->t", rho[h], pi[h], P)
        else:
            rho[h + 1] = np.einsum("s,sa,sb,sabt->t", rho[h], pi[h], nu[h], P)
    return rho


def occupancy(inst: LinearInstance, pi, nu=None, start=None) -> np.ndarray:
    """Step-wise state-action occupancy ``d_h(x, a[, b])``."""
    rho = state_distributions(inst, pi, nu, start)
    if inst.kind == MDP:
        return np.einsum("hs,hsa->hsa", rho, pi)
    return np.einsum("hs,hsa,hsb->hsab", rho, pi, nu)


def expected_sum(inst: LinearInstance, tables, pi, nu=None, start=None) -> float:
    """``sum_h E_{pi[,nu]}[tables_h(x_h, a_h[, b_h])]`` from ``start`` (or the initial law)."""
    occ = occupancy(inst, pi, nu, start)
    return float(np.sum(occ * np.asarray(tables)))
