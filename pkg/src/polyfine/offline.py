"""Pessimistic offline policy optimization: VI-LCB, PEVI-Adv and its truncated variant."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import (
    CountsModel,
    EpisodeDataset,
    apply_phat,
    empirical_variance,
    estimate_step,
    split_pevi,
    split_vilcb,
)
from .errors import InvalidParams
from .mdp import Policy, ValueTable


@dataclass(frozen=True)
class OfflineParams:
    bonus_scale: float = 1.0
    delta: float = 0.1
    iota_override: float | None = None

    def __post_init__(self):
        if not self.bonus_scale >= 0:
            # c = 0 is allowed: it turns the solvers into plug-in value iteration
            raise InvalidParams(f"bonus_scale must be >= 0, got {self.bonus_scale}")
        if not 0 < self.delta < 1:
            raise InvalidParams(f"delta must lie in (0, 1), got {self.delta}")
        if self.iota_override is not None and not self.iota_override > 0:
            raise InvalidParams("iota_override must be positive")

    def iota(self, S: int, A: int, H: int) -> float:
        if self.iota_override is not None:
            return float(self.iota_override)
        return math.log(H * S * A / self.delta)


@dataclass
class OfflineResult:
    policy: Policy
    values: ValueTable
    diagnostics: dict = field(default_factory=dict)


def _greedy(Q: np.ndarray, H: int):
    # Q stays unclipped; V is kept inside [0, H] (the upper clip only ever lowers it)
    return Q.argmax(axis=1), np.clip(Q.max(axis=1), 0.0, H)


def _finish(S, A, H, V, Q, actions, diag) -> OfflineResult:
    diag["q_above_horizon"] = int(np.sum(Q[:H] > H))
    return OfflineResult(Policy.from_actions(actions, A), ValueTable(V, Q), diag)


def _vilcb_pass(folds: list[EpisodeDataset], S, A, H, h_end, iota, c, V_terminal):
    """Backward Hoeffding-LCB pass over steps h_end-1..0; fold h estimates step h."""
    V = np.zeros((H + 1, S))
    Q = np.zeros((H + 1, S, A))
    V[h_end] = V_terminal
    actions = np.zeros((H, S), dtype=int)
    bonus_max = np.zeros(H)
    unvisited = np.zeros(H, dtype=int)
    for h in range(h_end - 1, -1, -1):
        m = estimate_step(folds[h], h, S, A)
        b = c * np.sqrt(H ** 2 * iota / np.maximum(m.N_sa, 1.0))
        Q[h] = m.r_hat + apply_phat(m, V[h + 1]) - b
        actions[h], V[h] = _greedy(Q[h], H)
        bonus_max[h] = b.max()
        unvisited[h] = int(np.sum(m.N_sa == 0))
    return V, Q, actions, {"bonus_max": bonus_max.tolist(), "unvisited": unvisited.tolist()}


def vi_lcb(data: EpisodeDataset, mdp_dims, params: OfflineParams, rng: np.random.Generator) -> OfflineResult:
    S, A, H = mdp_dims
    data.check_dims(S, A, H)
    folds = split_vilcb(data, H, rng)
    V, Q, actions, diag = _vilcb_pass(folds, S, A, H, H, params.iota(S, A, H), params.bonus_scale, 0.0)
    return _finish(S, A, H, V, Q, actions, diag)


def _bernstein(c: float, var: np.ndarray, N: np.ndarray, H: int, iota: float) -> np.ndarray:
    n = np.maximum(N, 1.0)
    return c * (np.sqrt(var * iota / n) + H * iota / n)


def _pevi_core(data: EpisodeDataset, S, A, H, h_end, V_init, params: OfflineParams, rng) -> OfflineResult:
    c, iota = params.bonus_scale, params.iota(S, A, H)
    d_ref, d0, d1 = split_pevi(data, h_end, rng)

    # reference values from VI-LCB on D_ref, pinned to V_init at the truncation step
    ref_folds = split_vilcb(d_ref, h_end, rng)
    V_ref, _, _, ref_diag = _vilcb_pass(ref_folds, S, A, H, h_end, iota, c, V_init)

    V = np.zeros((H + 1, S))
    Q = np.zeros((H + 1, S, A))
    V[h_end] = V_init
    actions = np.zeros((H, S), dtype=int)
    b0_max, b1_max = np.zeros(H), np.zeros(H)
    unvisited0, unvisited1 = np.zeros(H, dtype=int), np.zeros(H, dtype=int)
    for h in range(h_end - 1, -1, -1):
        m0: CountsModel = estimate_step(d0, h, S, A)
        m1: CountsModel = estimate_step(d1[h], h, S, A)
        b0 = _bernstein(c, empirical_variance(m0, V_ref[h + 1]), m0.N_sa, H, iota)
        adv = V[h + 1] - V_ref[h + 1]
        b1 = _bernstein(c, empirical_variance(m1, adv), m1.N_sa, H, iota)
        Q[h] = m0.r_hat + apply_phat(m0, V_ref[h + 1]) - b0 + apply_phat(m1, adv) - b1
        actions[h], V[h] = _greedy(Q[h], H)
        b0_max[h], b1_max[h] = b0.max(), b1.max()
        unvisited0[h], unvisited1[h] = np.sum(m0.N_sa == 0), np.sum(m1.N_sa == 0)
    diag = {
        "bonus_max": (b0_max + b1_max).tolist(),
        "bonus0_max": b0_max.tolist(),
        "bonus1_max": b1_max.tolist(),
        "unvisited": unvisited0.tolist(),
        "unvisited1": unvisited1.tolist(),
        "reference": ref_diag,
        "V_ref": V_ref,
        "sizes": {"ref": len(d_ref), "d0": len(d0), "d1": [len(f) for f in d1]},
    }
    return _finish(S, A, H, V, Q, actions, diag)


def pevi_adv(data: EpisodeDataset, mdp_dims, params: OfflineParams, rng: np.random.Generator) -> OfflineResult:
    S, A, H = mdp_dims
    data.check_dims(S, A, H)
    return _pevi_core(data, S, A, H, H, np.zeros(S), params, rng)


def truncated_pevi_adv(data: EpisodeDataset, mdp_dims, h_star: int, V_init, params: OfflineParams,
                       rng: np.random.Generator) -> OfflineResult:
    """PEVI-Adv over steps 0..h_star-1 with the value at step h_star pinned to ``V_init``.

    Only the first h_star steps of the returned policy and values are meaningful.
    The lower-order bonus keeps the full horizon H.
    """
    S, A, H = mdp_dims
    data.check_dims(S, A, H)
    if not 1 <= h_star <= H:
        raise InvalidParams(f"h_star must lie in 1..{H}, got {h_star}")
    V_init = np.asarray(V_init, dtype=float)
    if V_init.shape != (S,):
        raise InvalidParams(f"V_init shape {V_init.shape} != ({S},)")
    if np.any(V_init < 0) or np.any(V_init > H):
        raise InvalidParams("V_init entries must lie in [0, H]")
    return _pevi_core(data, S, A, H, h_star, V_init, params, rng)
