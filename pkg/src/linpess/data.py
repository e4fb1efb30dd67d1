"""Offline dataset collection, splitting, coverage and persistence.

Randomness for trajectory ``t`` at step ``h`` comes from a counter-based
hash of ``(seed, t, h, slot)`` (a splitmix64 finalizer chain, see
``_kernels_py.uniforms``). Any prefix of a dataset is therefore
reproducible on its own, and chunked or parallel generation gives the
same bytes as a single pass.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .model import MDP, MG, LinearInstance, check_policy, occupancy

WHOLE = "whole"
FOUR_WAY_TAGS = ("ref", "d0", "d1", "d0prime")


def _digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()[:16]


def instance_id(inst: LinearInstance) -> str:
    return _digest(inst.to_json().encode())


def behavior_id(behavior) -> str:
    parts = behavior if isinstance(behavior, tuple) else (behavior,)
    return _digest(b"".join(np.ascontiguousarray(p, dtype=np.float64).tobytes() for p in parts))


@dataclass(frozen=True)
class Step:
    x: int
    a: int
    b: int | None
    r: float
    xn: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """``K`` trajectories stored column-wise as ``(K, H)`` index arrays."""

    kind: str
    H: int
    ids: np.ndarray
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray | None
    r: np.ndarray
    xn: np.ndarray
    seed: int
    instance_id: str = ""
    behavior_id: str = ""
    split_tag: str = WHOLE
    discarded: tuple[int, ...] = field(default=())

    @property
    def K(self) -> int:
        return int(self.ids.shape[0])

    def trajectory(self, i: int) -> list[Step]:
        return [
            Step(
                int(self.x[i, h]),
                int(self.a[i, h]),
                None if self.b is None else int(self.b[i, h]),
                float(self.r[i, h]),
                int(self.xn[i, h]),
            )
            for h in range(self.H)
        ]

    def subset(self, rows, tag: str, discarded=()) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return replace(
            self,
            ids=self.ids[rows],
            x=self.x[rows],
            a=self.a[rows],
            b=None if self.b is None else self.b[rows],
            r=self.r[rows],
            xn=self.xn[rows],
            split_tag=tag,
            discarded=tuple(int(t) for t in discarded),
        )

    def step_features(self, features, h: int) -> np.ndarray:
        """Feature rows ``phi(x_h, a_h[, b_h])`` for every trajectory."""
        if self.kind == MDP:
            return features[self.x[:, h], self.a[:, h]]
        return features[self.x[:, h], self.a[:, h], self.b[:, h]]

    def metadata(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "behavior_id": self.behavior_id,
            "seed": int(self.seed),
            "K": self.K,
            "H": self.H,
            "kind": self.kind,
            "split_tag": self.split_tag,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.metadata(), sort_keys=True)]
        for i in range(self.K):
            steps = []
            for h in range(self.H):
                b = "" if self.b is None else '"b":%d,' % self.b[i, h]
                steps.append(
                    '{"x":%d,"a":%d,%s"r":%s,"xn":%d}'
                    % (self.x[i, h], self.a[i, h], b, "%.17g" % self.r[i, h], self.xn[i, h])
                )
            lines.append('{"t":%d,"steps":[%s]}' % (self.ids[i], ",".join(steps)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Dataset":
        rows = text.splitlines()
        meta = json.loads(rows[0])
        H, kind = int(meta["H"]), meta["kind"]
        trajs = [json.loads(line) for line in rows[1:] if line.strip()]
        if len(trajs) != int(meta["K"]):
            raise ValueError(f"metadata declares K={meta['K']} but file holds {len(trajs)} trajectories")
        K = len(trajs)
        arr = {k: np.zeros((K, H), dtype=np.int64) for k in ("x", "a", "b", "xn")}
        r = np.zeros((K, H))
        ids = np.zeros(K, dtype=np.int64)
        for i, tr in enumerate(trajs):
            ids[i] = tr["t"]
            if len(tr["steps"]) != H:
                raise ValueError(f"trajectory {tr['t']} has {len(tr['steps'])} steps, expected {H}")
            for h, st in enumerate(tr["steps"]):
                arr["x"][i, h], arr["a"][i, h], arr["xn"][i, h] = st["x"], st["a"], st["xn"]
                arr["b"][i, h] = st.get("b", 0)
                r[i, h] = st["r"]
        return cls(
            kind=kind,
            H=H,
            ids=ids,
            x=arr["x"],
            a=arr["a"],
            b=arr["b"] if kind == MG else None,
            r=r,
            xn=arr["xn"],
            seed=int(meta["seed"]),
            instance_id=meta.get("instance_id", ""),
            behavior_id=meta.get("behavior_id", ""),
            split_tag=meta.get("split_tag", WHOLE),
        )


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(ds.to_jsonl())


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        return Dataset.from_jsonl(fh.read())


def _cdf(p):
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def _behavior_parts(inst: LinearInstance, behavior):
    H, S = inst.H, inst.num_states
    if inst.kind == MDP:
        if isinstance(behavior, tuple):
            raise ValueError("MDP behavior must be a single policy array")
        return check_policy(behavior, H, S, inst.num_actions, "behavior"), None
    if not isinstance(behavior, tuple) or len(behavior) != 2:
        raise ValueError("Markov-game behavior must be a (pi, nu) pair")
    pi = check_policy(behavior[0], H, S, inst.num_actions, "behavior pi")
    nu = check_policy(behavior[1], H, S, inst.num_actions_min, "behavior nu")
    return pi, nu


def collect(inst: LinearInstance, behavior, K: int, seed: int, chunk: int = 1 << 16) -> Dataset:
    """Draw ``K`` independent trajectories under ``behavior``.

    ``behavior`` is an ``(H, S, A)`` policy for MDPs or a ``(pi, nu)`` pair
    of product policies for games.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    pi, nu = _behavior_parts(inst, behavior)
    H, S = inst.H, inst.num_states
    trans = np.stack([inst._P[h] for h in range(H)])  # (H, S, J, S)
    init_c, act_c = _cdf(inst.initial_dist), _cdf(pi)
    opp_c = None if nu is None else _cdf(nu)
    trans_c = _cdf(trans)
    ids = np.arange(K, dtype=np.int64)
    parts = [
        kernels.sample_paths(seed, ids[s:s + chunk], init_c, act_c, opp_c, trans_c)
        for s in range(0, K, chunk)
    ]
    x, a, b, xn = (np.concatenate([p[i] for p in parts]) for i in range(4))
    B = inst.num_actions_min or 1
    R = np.stack([inst._R[h] for h in range(H)])  # (H, S, J)
    r = R[np.arange(H)[None, :], x, a * B + b]
    if inst.reward_noise is not None:
        r = r + inst.reward_noise * _gaussians(seed, ids, H)
    return Dataset(
        kind=inst.kind,
        H=H,
        ids=ids,
        x=x,
        a=a,
        b=b if inst.kind == MG else None,
        r=r,
        xn=xn,
        seed=int(seed),
        instance_id=instance_id(inst),
        behavior_id=behavior_id(behavior),
    )


def _gaussians(seed, ids, H):
    out = np.zeros((ids.shape[0], H))
    for h in range(H):
        u1 = kernels.uniforms(seed, ids, h, kernels.SLOT_NOISE_A)
        u2 = kernels.uniforms(seed, ids, h, kernels.SLOT_NOISE_B)
        out[:, h] = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    return out


def split_h_fold(ds: Dataset, H: int) -> list[Dataset]:
    """Stride split: part ``j`` takes rows ``j, j + H, ...`` of the first ``H * (K // H)`` rows."""
    if ds.K < H:
        raise ValueError(f"cannot split {ds.K} trajectories into {H} folds")
    if "h_fold" in ds.split_tag:
        raise ValueError(f"dataset {ds.split_tag!r} is already an H-fold part")
    n = ds.K // H
    used = n * H
    dropped = ds.ids[used:]
    prefix = "" if ds.split_tag == WHOLE else ds.split_tag + "/"
    return [
        ds.subset(np.arange(j, used, H), f"{prefix}h_fold:{j}/{H}", dropped)
        for j in range(H)
    ]


def split_four_way(ds: Dataset) -> tuple[Dataset, Dataset, Dataset, Dataset]:
    """Equal stride quarters tagged ``ref``, ``d0``, ``d1``, ``d0prime``."""
    if ds.K < 4:
        raise ValueError(f"four-way split needs K >= 4, got {ds.K}")
    if ds.split_tag != WHOLE:
        raise ValueError("four-way split expects an untagged dataset")
    used = (ds.K // 4) * 4
    dropped = ds.ids[used:]
    return tuple(ds.subset(np.arange(p, used, 4), tag, dropped) for p, tag in enumerate(FOUR_WAY_TAGS))


def _gram_min_eig(G):
    if np.abs(G - G.T).max() > 1e-12 * max(1.0, np.abs(G).max()):
        raise AssertionError("second-moment matrix is not symmetric")
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def coverage_exact(inst: LinearInstance, behavior) -> tuple[float, list[float]]:
    """``min_h lambda_min(E_{d_h^b}[phi phi^T])`` via exact occupancy propagation."""
    pi, nu = _behavior_parts(inst, behavior)
    occ = occupancy(inst, pi, nu).reshape(inst.H, -1)
    flat = inst.flat_features().reshape(-1, inst.d)
    eigs = [_gram_min_eig(flat.T @ (occ[h][:, None] * flat)) for h in range(inst.H)]
    return min(eigs), eigs


def coverage_empirical(ds: Dataset, features) -> tuple[float, list[float]]:
    """Same quantity from the empirical average ``(1/K) sum_t phi phi^T``."""
    if ds.K < 1:
        raise ValueError("empty dataset")
    eigs = []
    for h in range(ds.H):
        phi = ds.step_features(features, h)
        eigs.append(_gram_min_eig(phi.T @ phi / ds.K))
    return min(eigs), eigs


def coverage_kappa(source, behavior=None) -> tuple[float, list[float]]:
    """Dispatch on the source: ``(instance, behavior)`` exact or ``(dataset, features)`` empirical."""
    if isinstance(source, LinearInstance):
        return coverage_exact(source, behavior)
    if isinstance(source, Dataset):
        return coverage_empirical(source, behavior)
    raise TypeError("source must be a LinearInstance or a Dataset")


__all__ = [
    "MDP",
    "MG",
    "Dataset",
    "Step",
    "collect",
    "split_h_fold",
    "split_four_way",
    "coverage_kappa",
    "coverage_exact",
    "coverage_empirical",
    "save_dataset",
    "load_dataset",
]
