"""Experiment configuration, single runs, sweeps and scaling-slope fits."""
from __future__ import annotations

import json
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import median

import numpy as np

from .datasets import Environment, collect
from .errors import ConfigError, InsufficientData, NonPositiveValue
from .instances import (HardInstanceSpec, build_covered_instance, build_hard_instance,
                        build_partial_coverage_instance, random_mdp, zero_reward_mdp)
from .mdp import (MixturePolicy, Policy, TabularMDP, concatenated_values, concentrability,
                  dp_optimal, dp_policy_eval, eval_concatenated, visitation)
from .offline import OfflineParams, pevi_adv, vi_lcb
from .online import OnlineParams, hoovi, ucbvi_uplow
from .serialization import ResultRow, parse_mdp_with_reference, read_text, rows_to_csv, write_text

ALGORITHMS = ("vi-lcb", "pevi-adv", "ucbvi-uplow", "hoovi", "uniform-baseline")
FAMILIES = ("covered", "hard", "partial", "random", "zero")
TOL = 1e-9


@dataclass
class ExperimentConfig:
    algorithm: str
    n_values: list
    seeds: list
    instance: str = "covered"
    instance_params: dict = field(default_factory=dict)
    instance_path: str | None = None
    master_seed: int = 0
    bonus_scale: float = 1.0
    delta: float = 0.1
    iota_override: float | None = None
    gamma_scale: float = 1.0
    online_bonus_scale: float = 1.0
    h_star: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.n_values or not self.seeds:
            raise ConfigError("n_values and seeds must be non-empty")
        try:
            self.n_values = [int(n) for n in self.n_values]
            self.seeds = [int(s) for s in self.seeds]
        except (TypeError, ValueError):
            raise ConfigError("n_values and seeds must be integers") from None
        if any(n < 0 for n in self.n_values):
            raise ConfigError("n_values must be non-negative")
        if self.instance_path is None and self.instance not in FAMILIES:
            raise ConfigError(f"unknown instance family {self.instance!r}; expected one of {FAMILIES}")
        if self.algorithm == "hoovi" and any(n < 2 for n in self.n_values):
            raise ConfigError("hoovi needs n >= 2")
        if self.algorithm == "hoovi" and self.h_star is None:
            raise ConfigError("hoovi needs h_star")
        try:
            self.offline_params()
            self.online_params(0)
        except Exception as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON (line {exc.lineno}): {exc.msg}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def offline_params(self) -> OfflineParams:
        return OfflineParams(self.bonus_scale, self.delta, self.iota_override)

    def online_params(self, n_ucb: int) -> OnlineParams:
        return OnlineParams(self.online_bonus_scale, self.gamma_scale, self.delta, n_ucb)


@dataclass
class Problem:
    mdp: TabularMDP
    mu: Policy
    pi_star: Policy
    v_star: float
    cstar: float


def build_problem(cfg: ExperimentConfig) -> Problem:
    """Instance, reference policy and optimal policy described by the config."""
    p = dict(cfg.instance_params)
    try:
        if cfg.instance_path is not None:
            mdp, mu = parse_mdp_with_reference(read_text(cfg.instance_path))
            mu = Policy.uniform(mdp.H, mdp.S, mdp.A) if mu is None else mu
            pi_star = dp_optimal(mdp)[1]
        elif cfg.instance == "covered":
            mdp, mu, pi_star = build_covered_instance(**p)
        elif cfg.instance == "hard":
            S_b, H_b, A = p.pop("S_bandit", 3), p.pop("H_bandit", 4), p.pop("A", 4)
            K = p.pop("K", None)
            if K is None:
                K = HardInstanceSpec.k_from_cstar(p.pop("cstar", A), A)
            tau = p.pop("tau", 0.3)
            rng = np.random.default_rng(p.pop("seed", 0))
            if p:
                raise ConfigError(f"unknown hard-instance parameters {sorted(p)}")
            mdp, mu, pi_star = build_hard_instance(HardInstanceSpec.random(S_b, H_b, A, K, tau, rng))
        elif cfg.instance == "partial":
            mdp, mu, pi_star = build_partial_coverage_instance(**p)
        elif cfg.instance == "random":
            rng = np.random.default_rng(p.pop("seed", 0))
            mdp = random_mdp(p.pop("S", 3), p.pop("A", 2), p.pop("H", 3), rng, **p)
            mu, pi_star = Policy.uniform(mdp.H, mdp.S, mdp.A), dp_optimal(mdp)[1]
        else:
            rng = np.random.default_rng(p.pop("seed", 0))
            mdp = zero_reward_mdp(p.pop("S", 3), p.pop("A", 2), p.pop("H", 3), rng)
            mu, pi_star = Policy.uniform(mdp.H, mdp.S, mdp.A), dp_optimal(mdp)[1]
    except TypeError as exc:
        raise ConfigError(f"bad instance parameters: {exc}") from None
    v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
    return Problem(mdp, mu, pi_star, v_star, concentrability(mdp, mu, pi_star))


def derive_seed(master_seed: int, algorithm: str, n: int, seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed & (2**64 - 1), zlib.crc32(algorithm.encode()), n,
                                   seed & (2**64 - 1)])


def _pessimism(mdp: TabularMDP, pi_star: Policy, V_hat: np.ndarray, V_true: np.ndarray, steps: int) -> bool:
    reach = visitation(mdp, pi_star).d_state[:steps] > 0
    return bool(np.all((V_hat[:steps] <= V_true[:steps] + TOL)[reach]))


@dataclass
class RunOutcome:
    row: ResultRow
    episodes_used: int
    policy: Policy | None = None
    mixture: MixturePolicy | None = None
    diagnostics: dict = field(default_factory=dict)


def run_single(cfg: ExperimentConfig, n: int, seed: int, problem: Problem | None = None) -> RunOutcome:
    """One (algorithm, n, seed) cell; suboptimality is computed by exact DP."""
    problem = build_problem(cfg) if problem is None else problem
    mdp, mu = problem.mdp, problem.mu
    S, A, H = mdp.dims
    rng = np.random.default_rng(derive_seed(cfg.master_seed, cfg.algorithm, n, seed))
    env = Environment(mdp, budget=n)
    algo = cfg.algorithm
    start = time.perf_counter()
    policy = mixture = None
    diag: dict = {}

    if algo in ("vi-lcb", "pevi-adv"):
        data = collect(env, mu, n, rng, behavior_tag="mu", seed=seed)
        solver = vi_lcb if algo == "vi-lcb" else pevi_adv
        res = solver(data, (S, A, H), cfg.offline_params(), rng)
        policy = res.policy
        vt = dp_policy_eval(mdp, policy)
        value = vt.initial_value(mdp.initial_dist)
        held = _pessimism(mdp, problem.pi_star, res.values.V, vt.V, H)
        diag = res.diagnostics
    elif algo == "ucbvi-uplow":
        h_star = cfg.h_star or 0
        out = ucbvi_uplow(env, mu if h_star else None, h_star, cfg.online_params(n), rng)
        prefix = mu
        mixture = out.pi_out
        V = concatenated_values(mdp, prefix, mixture)
        value = float(mdp.initial_dist @ V[0])
        seen = out.visit_counts > 0
        held = bool(np.all((out.V_low_out <= V[h_star] + TOL)[seen]))
        diag = {"V_low_out": out.V_low_out.tolist(), "V_up_out": out.V_up_out.tolist()}
    elif algo == "hoovi":
        h_star = cfg.h_star
        out = hoovi(env, mu, h_star, n, cfg.offline_params(), cfg.online_params(n // 2), rng)
        policy, mixture = out.prefix, out.suffix
        value = eval_concatenated(mdp, out.prefix, out.suffix)
        held = True
        if out.uplow is not None:
            V = out.values(mdp)
            seen = out.uplow.visit_counts > 0
            held = bool(np.all((out.uplow.V_low_out <= V[h_star] + TOL)[seen]))
            if out.offline is not None and h_star > 0:
                held = held and _pessimism(mdp, problem.pi_star, out.offline.values.V, V, h_star)
        elif out.offline is not None:
            vt = dp_policy_eval(mdp, out.offline.policy)
            held = _pessimism(mdp, problem.pi_star, out.offline.values.V, vt.V, H)
        diag = out.diagnostics
    else:
        policy = Policy.uniform(H, S, A)
        value = dp_policy_eval(mdp, policy).initial_value(mdp.initial_dist)
        held = True

    runtime_ms = 1000.0 * (time.perf_counter() - start)
    sub = problem.v_star - value
    if sub < -TOL:
        raise AssertionError(f"negative suboptimality {sub} for {algo}")
    assert env.episodes_used <= n, "episode budget exceeded"
    row = ResultRow(algo, n, seed, max(sub, 0.0), problem.cstar, held, runtime_ms)
    return RunOutcome(row, env.episodes_used, policy, mixture, diag)


def _cell(args):
    cfg_dict, n, seed = args
    out = run_single(ExperimentConfig.from_dict(cfg_dict), n, seed)
    return out.row, out.episodes_used


def worker_count() -> int:
    cap = os.environ.get("POLYFINE_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"POLYFINE_THREADS must be an integer, got {cap!r}") from None
    return n


def sweep(cfg: ExperimentConfig, out_path=None, workers: int | None = None,
          budget_log: list | None = None) -> list[ResultRow]:
    """All (n, seed) cells in (n, seed) order; writes the CSV when a path is given."""
    cells = [(n, s) for n in cfg.n_values for s in cfg.seeds]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(cells) == 1:
        problem = build_problem(cfg)
        outs = [run_single(cfg, n, s, problem) for n, s in cells]
        results = [(o.row, o.episodes_used) for o in outs]
    else:
        d = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as ex:
            results = list(ex.map(_cell, [(d, n, s) for n, s in cells]))
    rows = [r for r, _ in results]
    if budget_log is not None:
        budget_log.extend((r.algo, r.n, r.seed, used) for r, used in results)
    out_path = out_path if out_path is not None else cfg.output
    if out_path is not None:
        write_text(out_path, rows_to_csv(rows))
    return rows


def medians_by_n(rows, algo: str | None = None) -> dict[int, float]:
    groups: dict[int, list] = {}
    for r in rows:
        if algo is None or r.algo == algo:
            groups.setdefault(r.n, []).append(r.suboptimality)
    return {n: median(v) for n, v in sorted(groups.items())}


def fit_loglog_slope(rows, statistic=median, algo: str | None = None) -> float:
    """Least-squares slope of log(statistic of suboptimality) against log(n)."""
    groups: dict[int, list] = {}
    for r in rows:
        if algo is None or r.algo == algo:
            groups.setdefault(r.n, []).append(r.suboptimality)
    if len(groups) < 3:
        raise InsufficientData(f"need at least 3 distinct n values, got {len(groups)}")
    ns = np.array(sorted(groups), dtype=float)
    stats = np.array([statistic(groups[int(n)]) for n in ns], dtype=float)
    if np.any(ns <= 0) or np.any(stats <= 0):
        raise NonPositiveValue("slope fit needs positive n and positive statistics")
    return float(np.polyfit(np.log(ns), np.log(stats), 1)[0])
