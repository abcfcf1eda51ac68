"""Optimistic online exploration with certified lower bounds, and the hybrid HOOVI scheme."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import Environment, as_environment, collect
from .errors import InvalidParams
from .mdp import MixturePolicy, Policy, TabularMDP, concatenated_values
from .offline import OfflineParams, OfflineResult, pevi_adv, truncated_pevi_adv


@dataclass(frozen=True)
class OnlineParams:
    bonus_scale: float = 1.0
    gamma_scale: float = 1.0
    delta: float = 0.1
    n_ucb: int = 1000

    def __post_init__(self):
        if self.bonus_scale < 0 or self.gamma_scale < 0:
            raise InvalidParams("bonus_scale and gamma_scale must be non-negative")
        if not 0 < self.delta < 1:
            raise InvalidParams(f"delta must lie in (0, 1), got {self.delta}")
        if self.n_ucb < 0:
            raise InvalidParams("n_ucb must be non-negative")


@dataclass
class UpLowResult:
    V_up_out: np.ndarray   # (S,) at the anchor step
    V_low_out: np.ndarray  # (S,)
    pi_out: MixturePolicy
    visit_counts: np.ndarray  # (S,) anchor-state visits
    diagnostics: dict = field(default_factory=dict)


def ucbvi_uplow(mdp_or_env, roll_in: Policy | None, h_star: int, params: OnlineParams,
                rng: np.random.Generator, check_sandwich: bool = True) -> UpLowResult:
    """Run ``params.n_ucb`` episodes of optimistic exploration on steps h_star..H-1.

    Steps before ``h_star`` are played with ``roll_in``. Every episode starts
    with a full backward sweep over the suffix using the current counts.
    """
    env: Environment = as_environment(mdp_or_env)
    mdp: TabularMDP = env.mdp
    S, A, H = mdp.S, mdp.A, mdp.H
    if not 0 <= h_star <= H - 1:
        raise InvalidParams(f"h_star must lie in 0..{H - 1}, got {h_star}")
    if h_star > 0 and roll_in is None:
        raise InvalidParams("a roll-in policy is required when h_star > 0")
    L = H - h_star
    n_ucb = params.n_ucb
    c, gc = params.bonus_scale, params.gamma_scale
    iota = math.log(H * S * A * max(n_ucb, 1) / params.delta)
    r = mdp.rewards

    N_sa = np.zeros((H, S, A))
    N_sas = np.zeros((H, S, A, S))
    P_hat = np.zeros((H, S, A, S))
    Q_up = np.full((H, S, A), float(L))
    Q_low = np.zeros((H, S, A))
    V_up = np.zeros((H + 1, S))
    V_low = np.zeros((H + 1, S))
    actions = np.zeros((H, S), dtype=int)

    roll_probs = roll_in.probs if roll_in is not None else Policy.uniform(H, S, A).probs
    up_sum, low_sum = np.zeros(S), np.zeros(S)
    anchor_visits = np.zeros(S)
    # anchor state -> {policy bytes: (count, suffix action table)}
    groups: list[dict] = [dict() for _ in range(S)]
    sandwich_ok = True

    for _ in range(n_ucb):
        for h in range(H - 1, h_star - 1, -1):
            visited = N_sa[h] > 0
            if visited.any():
                t = np.maximum(N_sa[h], 1.0)
                mid = 0.5 * (V_up[h + 1] + V_low[h + 1])
                pv_mid = P_hat[h] @ mid
                var = np.maximum(P_hat[h] @ mid ** 2 - pv_mid ** 2, 0.0)
                beta = c * (np.sqrt(var * iota / t) + L ** 2 * S * iota / t)
                gamma = gc / L * (P_hat[h] @ (V_up[h + 1] - V_low[h + 1]))
                up = np.minimum(r[h] + P_hat[h] @ V_up[h + 1] + gamma + beta, L)
                low = np.maximum(r[h] + P_hat[h] @ V_low[h + 1] - gamma - beta, 0.0)
                Q_up[h] = np.where(visited, up, Q_up[h])
                Q_low[h] = np.where(visited, np.minimum(low, Q_up[h]), Q_low[h])
            actions[h] = Q_up[h].argmax(axis=1)
            idx = np.arange(S)
            V_up[h] = Q_up[h][idx, actions[h]]
            V_low[h] = Q_low[h][idx, actions[h]]
            if check_sandwich and not (np.all(Q_low[h] <= Q_up[h]) and np.all(V_low[h] >= 0)
                                       and np.all(V_up[h] <= L)):
                sandwich_ok = False

        probs = roll_probs.copy()
        probs[h_star:] = np.eye(A)[actions[h_star:]]
        ep = env.sample_episode(Policy(probs), rng)
        s0 = ep.states[h_star]
        anchor_visits[s0] += 1
        up_sum[s0] += V_up[h_star, s0]
        low_sum[s0] += V_low[h_star, s0]
        key = actions[h_star:].tobytes()
        cnt, tab = groups[s0].get(key, (0, None))
        groups[s0][key] = (cnt + 1, actions[h_star:].copy() if tab is None else tab)

        for h in range(h_star, H - 1):
            s, a, s_next = ep.states[h], ep.actions[h], ep.states[h + 1]
            N_sa[h, s, a] += 1
            N_sas[h, s, a, s_next] += 1
            P_hat[h, s, a] = N_sas[h, s, a] / N_sa[h, s, a]
        s, a = ep.states[H - 1], ep.actions[H - 1]
        N_sa[H - 1, s, a] += 1
        # terminal successor: any unit-mass row works since V_{H} = 0
        P_hat[H - 1, s, a, 0] = 1.0

    seen = anchor_visits > 0
    V_up_out = np.where(seen, up_sum / np.maximum(anchor_visits, 1), float(L))
    V_low_out = np.where(seen, low_sum / np.maximum(anchor_visits, 1), 0.0)
    components = []
    for s in range(S):
        comps = []
        total = anchor_visits[s]
        for cnt, tab in groups[s].values():
            full = np.zeros((H, S), dtype=int)
            full[h_star:] = tab
            comps.append((cnt / total, Policy.from_actions(full, A)))
        components.append(comps)
    pi_out = MixturePolicy(h_star, components)
    diag = {"sandwich_held": sandwich_ok, "iota": iota, "final_V_up": V_up[h_star].copy(),
            "final_V_low": V_low[h_star].copy(), "episodes": n_ucb}
    return UpLowResult(V_up_out, V_low_out, pi_out, anchor_visits, diag)


@dataclass
class HooviResult:
    prefix: Policy           # meaningful on steps < h_star
    suffix: MixturePolicy    # anchored at h_star
    uplow: UpLowResult
    offline: OfflineResult | None
    diagnostics: dict = field(default_factory=dict)

    def values(self, mdp: TabularMDP) -> np.ndarray:
        """Exact per-state values of the output policy on steps 0..h_star."""
        return concatenated_values(mdp, self.prefix, self.suffix)


def hoovi(mdp_or_env, mu: Policy, h_star: int, n: int, offline_params: OfflineParams,
          online_params: OnlineParams, rng: np.random.Generator) -> HooviResult:
    """Optimistic exploration on the suffix, then pessimistic offline learning on the prefix.

    Half of the ``n`` episodes go to UCBVI-UpLow (rolled in with ``mu``); the
    rest are collected with ``mu`` and fed to truncated PEVI-Adv, whose value at
    the anchor step is pinned to the suffix lower estimate.
    """
    env = as_environment(mdp_or_env)
    mdp = env.mdp
    S, A, H = mdp.S, mdp.A, mdp.H
    if n < 2:
        raise InvalidParams(f"hoovi needs n >= 2 episodes, got {n}")
    if not 0 <= h_star <= H:
        raise InvalidParams(f"h_star must lie in 0..{H}, got {h_star}")

    if h_star == H:
        data = collect(env, mu, n, rng, behavior_tag="mu")
        res = pevi_adv(data, (S, A, H), offline_params, rng)
        comps = [[(1.0, res.policy)] for _ in range(S)]
        # anchor at the last step so the mixture carries pevi's final-step actions
        mix = MixturePolicy(H - 1, comps)
        return HooviResult(res.policy, mix, None, res, {"mode": "offline"})

    n_ucb = n // 2 if h_star > 0 else n
    uplow = ucbvi_uplow(env, mu if h_star > 0 else None, h_star,
                        OnlineParams(online_params.bonus_scale, online_params.gamma_scale,
                                     online_params.delta, n_ucb), rng)
    diag = {"n_ucb": n_ucb, "V_up_out": uplow.V_up_out.tolist(), "V_low_out": uplow.V_low_out.tolist()}
    if h_star == 0:
        diag["mode"] = "online"
        return HooviResult(Policy.uniform(H, S, A), uplow.pi_out, uplow, None, diag)

    data = collect(env, mu, n - n_ucb, rng, behavior_tag="mu")
    V_init = np.clip(uplow.V_low_out, 0.0, H)
    res = truncated_pevi_adv(data, (S, A, H), h_star, V_init, offline_params, rng)
    diag.update(mode="hybrid", n_offline=n - n_ucb, V_hat_prefix=res.values.V[:h_star + 1].tolist())
    return HooviResult(res.policy, uplow.pi_out, uplow, res, diag)

