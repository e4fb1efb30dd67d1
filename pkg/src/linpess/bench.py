"""Seeded sweeps over (algorithm, K, seed) cells and their summaries.

Every cell is collect -> split -> run -> measure against the exact oracle.
Cells share nothing, so a process pool and a serial loop give the same
records; the CSV is sorted before writing and carries no timing unless
``record_wall_time`` is set.
"""

from __future__ import annotations

import csv
import io
import json
import math
import signal
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import algos_mdp, algos_mg, instances
from .algos_mdp import BonusConfig, burn_in_threshold
from .data import collect, coverage_exact, split_four_way
from .model import (
    MDP,
    MG,
    duality_gap,
    evaluate_policy,
    expected_sum,
    load_instance,
    ne_values_mg,
    optimal_values_mdp,
    uniform_policy,
)

CSV_HEADER = ["algo", "K", "seed", "metric", "pessimism_event", "bonus_sum", "burn_in", "wall_time_s", "error"]
MDP_ALGOS = ("pevi", "spevi", "spevi_plus")
MG_ALGOS = ("spmvi", "spmvi_plus")
PLUS_ALGOS = ("spevi_plus", "spmvi_plus")

_GENERATORS = {
    "graded_gap_mdp": lambda p: instances.graded_gap_mdp(**p)[:2],
    "mixed_stage_game": lambda p: instances.mixed_stage_game(**p),
    "random_linear_instance": lambda p: instances.random_linear_instance(**p),
    "lower_bound_family": lambda p: _lower_bound(p),
}


def _lower_bound(p):
    p = dict(p)
    kind = p.pop("kind", MG)
    inst, beh, _ = instances.lower_bound_family(instances.LowerBoundSpec(**p), kind)
    return inst, beh


class ConfigError(ValueError):
    pass


def _guard(name, fn):
    def build(params):
        try:
            return fn(params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for generator {name!r}: {exc}") from None

    return build


GENERATORS = {name: _guard(name, fn) for name, fn in _GENERATORS.items()}


@dataclass
class ExperimentConfig:
    """One sweep.

    ``instance`` is either ``{"path": file, "behavior": "uniform" | nested list}``
    or ``{"generator": name, "params": {...}}``. ``lam_by_algo`` and
    ``bonus_by_algo`` override the shared ridge parameter and bonus
    settings for individual algorithms.
    """

    instance: dict
    algorithms: list
    K_grid: list
    seeds: list
    lam: float = 1.0
    bonus: dict = field(default_factory=dict)
    lam_by_algo: dict = field(default_factory=dict)
    bonus_by_algo: dict = field(default_factory=dict)
    out_dir: str = "results"
    timeout_s: float = 300.0
    record_wall_time: bool = False

    def __post_init__(self):
        known = MDP_ALGOS + MG_ALGOS
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in known:
                raise ConfigError(f"unknown algorithm {a!r}")
        if not self.K_grid or any(int(k) < 1 for k in self.K_grid):
            raise ConfigError("K grid must hold positive integers")
        if any(b <= a for a, b in zip(self.K_grid, self.K_grid[1:])):
            raise ConfigError("K grid must be strictly increasing")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for lam in [self.lam, *self.lam_by_algo.values()]:
            if not lam > 0:
                raise ConfigError("lambda must be positive")
        if "path" not in self.instance and "generator" not in self.instance:
            raise ConfigError("instance needs a 'path' or a 'generator'")
        if "generator" in self.instance and self.instance["generator"] not in GENERATORS:
            raise ConfigError(f"unknown generator {self.instance['generator']!r}")
        try:
            for a in self.algorithms:
                self.bonus_for(a)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad bonus settings: {exc}") from exc

    def lam_for(self, algo: str) -> float:
        return float(self.lam_by_algo.get(algo, self.lam))

    def bonus_for(self, algo: str) -> BonusConfig:
        doc = dict(self.bonus)
        doc.update(self.bonus_by_algo.get(algo, {}))
        return BonusConfig.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ResultRecord:
    algo: str
    K: int
    seed: int
    metric: float = float("nan")
    pessimism_event: bool = False
    bonus_sum: float = float("nan")
    burn_in: bool = False
    wall_time_s: float = 0.0
    error: str = ""
    exploitability: float = 0.0

    @property
    def key(self):
        return (self.algo, self.K, self.seed)

    def row(self) -> list[str]:
        return [
            self.algo,
            str(self.K),
            str(self.seed),
            "" if self.error else "%.17g" % self.metric,
            "" if self.error else str(int(self.pessimism_event)),
            "" if self.error else "%.17g" % self.bonus_sum,
            "" if self.error else str(int(self.burn_in)),
            "%.6f" % self.wall_time_s,
            self.error,
        ]


def load_source(source: dict):
    """``(instance, behavior)`` from a config's instance entry."""
    if "generator" in source:
        return GENERATORS[source["generator"]](source.get("params", {}))
    inst = load_instance(source["path"])
    beh = source.get("behavior", "uniform")
    if beh == "uniform":
        pi = uniform_policy(inst.H, inst.num_states, inst.num_actions)
        if inst.kind == MG:
            return inst, (pi, uniform_policy(inst.H, inst.num_states, inst.num_actions_min))
        return inst, pi
    if inst.kind == MG:
        return inst, (np.asarray(beh[0], dtype=np.float64), np.asarray(beh[1], dtype=np.float64))
    return inst, np.asarray(beh, dtype=np.float64)


_CACHE: dict = {}


def _context(source: dict):
    key = json.dumps(source, sort_keys=True)
    if key not in _CACHE:
        inst, beh = load_source(source)
        if inst.kind == MDP:
            table, star = optimal_values_mdp(inst)
            stars = (star, None)
        else:
            table, stars = ne_values_mg(inst)
        kappa = coverage_exact(inst, beh)[0]
        _CACHE[key] = (inst, beh, table, stars, kappa)
    return _CACHE[key]


class CellTimeout(Exception):
    pass


def _alarm(signum, frame):
    raise CellTimeout()


def _run_algo(algo, inst, beh, K, seed, lam, cfg):
    D = collect(inst, beh, K, seed)
    if algo in PLUS_ALGOS:
        fn = algos_mdp.spevi_plus if algo == "spevi_plus" else algos_mg.spmvi_plus
        return fn(*split_four_way(D), inst.features, lam, cfg, inst, beh), D.K // 4
    fn = {"pevi": algos_mdp.pevi, "spevi": algos_mdp.spevi, "spmvi": algos_mg.spmvi}[algo]
    return fn(D, inst.features, lam, cfg), K


def _measure(rec: ResultRecord, algo, out, inst, table, stars, kappa, K_eff, delta):
    if inst.kind == MDP:
        pi_star = stars[0]
        value = evaluate_policy(inst, out.policy).V[0]
        rec.metric = float(inst.initial_dist @ (table.V[0] - value))
        rec.pessimism_event = algos_mdp.bonus_event(inst, out)
        rec.bonus_sum = expected_sum(inst, out.bonus, pi_star)
    else:
        pi_star, nu_star = stars
        rec.metric = duality_gap(inst, out.pi, out.nu)
        rec.pessimism_event = algos_mg.bonus_event(inst, out)
        rec.bonus_sum = expected_sum(inst, out.bonus_lower + out.bonus_upper, pi_star, nu_star)
        rec.exploitability = out.exploitability
    if "burn_in" in out.extras:
        rec.burn_in = bool(out.extras["burn_in"])
    else:
        rec.burn_in = bool(K_eff > burn_in_threshold(inst.d, inst.H, kappa, delta))


def run_cell(cfg_doc: dict, algo: str, K: int, seed: int) -> ResultRecord:
    """One (algo, K, seed) cell. Failures come back as an error record."""
    cfg = ExperimentConfig.from_dict(cfg_doc)
    rec = ResultRecord(algo, int(K), int(seed))
    use_alarm = threading.current_thread() is threading.main_thread() and cfg.timeout_s > 0
    if use_alarm:
        previous = signal.signal(signal.SIGALRM, _alarm)
        signal.setitimer(signal.ITIMER_REAL, cfg.timeout_s)
    start = time.perf_counter()
    try:
        inst, beh, table, stars, kappa = _context(cfg.instance)
        if (inst.kind == MDP) != (algo in MDP_ALGOS):
            raise ValueError(f"algorithm {algo} does not apply to a {inst.kind} instance")
        bonus = cfg.bonus_for(algo)
        out, K_eff = _run_algo(algo, inst, beh, int(K), int(seed), cfg.lam_for(algo), bonus)
        _measure(rec, algo, out, inst, table, stars, kappa, K_eff, bonus.delta)
        if rec.metric < -1e-9:
            raise AssertionError(f"negative suboptimality {rec.metric}")
    except CellTimeout:
        rec.error = f"timeout after {cfg.timeout_s:g}s"
    except Exception as exc:  # recorded per cell, never aborts the sweep
        rec.error = f"{type(exc).__name__}: {exc}".replace("\n", " ").replace(",", ";")
    finally:
        if use_alarm:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, previous)
    if cfg.record_wall_time:
        rec.wall_time_s = time.perf_counter() - start
    return rec


def _cell_star(args):
    return run_cell(*args)


def sweep(cfg: ExperimentConfig, jobs: int = 1, csv_path=None) -> list[ResultRecord]:
    """Run every cell; write the sorted CSV to ``csv_path`` (default ``out_dir/results.csv``)."""
    doc = cfg.to_dict()
    cells = [(doc, a, int(K), int(s)) for a in cfg.algorithms for K in cfg.K_grid for s in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_cell_star, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        records = [run_cell(*c) for c in cells]
    records.sort(key=lambda r: r.key)
    keys = [r.key for r in records]
    if len(set(keys)) != len(keys):
        raise RuntimeError("duplicate result keys")
    path = Path(csv_path) if csv_path is not None else Path(cfg.out_dir) / "results.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(records_to_csv(records))
    return records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return list(reader)


def loglog_slope(K, y):
    """Least-squares slope of ``log y`` on ``log K`` with its standard error."""
    x = np.log(np.asarray(K, dtype=np.float64))
    z = np.log(np.asarray(y, dtype=np.float64))
    n = x.size
    xc = x - x.mean()
    slope = float(xc @ (z - z.mean()) / (xc @ xc))
    resid = z - z.mean() - slope * xc
    stderr = float(math.sqrt((resid @ resid) / (n - 2) / (xc @ xc))) if n > 2 else float("nan")
    return slope, stderr


def report(csv_path) -> dict:
    rows = read_csv(csv_path)
    out = {"algorithms": {}}
    for algo in sorted({r["algo"] for r in rows}):
        mine = [r for r in rows if r["algo"] == algo]
        ok = [r for r in mine if not r["error"]]
        Ks = sorted({int(r["K"]) for r in ok})
        curve = []
        for K in Ks:
            vals = np.array([float(r["metric"]) for r in ok if int(r["K"]) == K])
            q25, med, q75 = np.percentile(vals, [25, 50, 75])
            curve.append({"K": K, "median": float(med), "q25": float(q25), "q75": float(q75), "n": int(vals.size)})
        entry = {
            "curve": curve,
            "errors": len(mine) - len(ok),
            "pessimism_frequency": float(np.mean([r["pessimism_event"] == "1" for r in ok])) if ok else None,
            "burn_in_coverage": float(np.mean([r["burn_in"] == "1" for r in ok])) if ok else None,
        }
        usable = [c for c in curve if c["median"] > 0]
        if len(Ks) < 3:
            entry["slope_notice"] = "fewer than 3 distinct K values; slope omitted"
        elif len(usable) < 3:
            entry["slope_notice"] = "fewer than 3 positive medians; slope omitted"
        else:
            slope, se = loglog_slope([c["K"] for c in usable], [c["median"] for c in usable])
            entry["slope"], entry["slope_stderr"] = slope, se
            if len(usable) < len(curve):
                entry["slope_notice"] = f"{len(curve) - len(usable)} zero medians excluded from the fit"
        out["algorithms"][algo] = entry
    return out


__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "ExperimentConfig",
    "ResultRecord",
    "sweep",
    "run_cell",
    "report",
    "read_csv",
    "records_to_csv",
    "loglog_slope",
    "load_source",
]
