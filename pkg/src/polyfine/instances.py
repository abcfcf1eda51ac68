"""Instance generators: the lower-bound hard family, a partial-coverage family and random MDPs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, NotDeterministic
from .mdp import Policy, TabularMDP, dp_optimal, validate_mdp


@dataclass(frozen=True)
class HardInstanceSpec:
    """Bandit-state construction with S_bandit bandit states, a good and a bad state.

    The MDP has S_bandit + 2 states (bandit states first, then good, then bad)
    and horizon 2 * H_bandit + 1. ``a_star[h, i]`` is the best arm of bandit
    state i at step h < H_bandit, always in 0..K-1.
    """
    S_bandit: int
    H_bandit: int
    A: int
    K: int
    tau: float
    a_star: np.ndarray  # (H_bandit, S_bandit)

    def __post_init__(self):
        object.__setattr__(self, "a_star", np.asarray(self.a_star, dtype=int))
        if self.S_bandit < 1 or self.H_bandit < 1:
            raise InvalidParams("S_bandit and H_bandit must be positive")
        if not 2 <= self.K <= self.A:
            raise InvalidParams(f"need 2 <= K <= A, got K={self.K}, A={self.A}")
        if not 0 <= self.tau <= 1 / 3:
            raise InvalidParams(f"tau must lie in [0, 1/3], got {self.tau}")
        if self.a_star.shape != (self.H_bandit, self.S_bandit):
            raise InvalidParams(f"a_star shape {self.a_star.shape} != {(self.H_bandit, self.S_bandit)}")
        if self.a_star.min() < 0 or self.a_star.max() >= self.K:
            raise InvalidParams("a_star entries must lie in 0..K-1")

    @property
    def good(self) -> int:
        return self.S_bandit

    @property
    def bad(self) -> int:
        return self.S_bandit + 1

    @property
    def horizon(self) -> int:
        return 2 * self.H_bandit + 1

    @staticmethod
    def k_from_cstar(cstar: float, A: int) -> int:
        return min(int(math.floor(cstar)), A)

    @classmethod
    def random(cls, S_bandit: int, H_bandit: int, A: int, K: int, tau: float,
               rng: np.random.Generator) -> "HardInstanceSpec":
        """Draw a_star from the uniform prior over [K]^(H*S)."""
        return cls(S_bandit, H_bandit, A, K, tau, rng.integers(0, K, size=(H_bandit, S_bandit)))


def _hard_mdp(spec: HardInstanceSpec, special: bool) -> TabularMDP:
    S, Hb, A = spec.S_bandit, spec.H_bandit, spec.A
    nS, H = S + 2, spec.horizon
    g, b = spec.good, spec.bad
    P = np.zeros((H, nS, A, nS))
    r = np.zeros((H, nS, A))
    for h in range(H):
        P[h, g, :, g] = 1.0
        P[h, b, :, b] = 1.0
        for i in range(S):
            if h < Hb:
                P[h, i, :, i] = 1 - 1 / Hb
                P[h, i, :, g] = P[h, i, :, b] = 1 / (2 * Hb)
                if special:
                    a = spec.a_star[h, i]
                    P[h, i, a, g] = (0.5 + spec.tau) / Hb
                    P[h, i, a, b] = (0.5 - spec.tau) / Hb
            else:
                P[h, i, :, g] = P[h, i, :, b] = 0.5
        if h >= Hb + 1:
            r[h, g, :] = 1.0
    init = np.zeros(nS)
    init[:S] = 1.0 / S
    mdp = TabularMDP(P, r, init)
    validate_mdp(mdp)
    return mdp


def build_hard_instance(spec: HardInstanceSpec) -> tuple[TabularMDP, Policy, Policy]:
    """Hard MDP for ``spec`` with its reference policy mu and optimal policy pi*."""
    mdp = _hard_mdp(spec, special=True)
    S, Hb, A, H = spec.S_bandit, spec.H_bandit, spec.A, spec.horizon
    mu = np.zeros((H, S + 2, A))
    mu[:, :, 0] = 1.0
    mu[:Hb, :S, :] = 0.0
    mu[:Hb, :S, :spec.K] = 1.0 / spec.K
    star = np.zeros((H, S + 2), dtype=int)
    star[:Hb, :S] = spec.a_star
    return mdp, Policy(mu), Policy.from_actions(star, A)


def null_instance(S_bandit: int, H_bandit: int, A: int, K: int = 2, tau: float = 0.0) -> TabularMDP:
    """The same construction without any special arm."""
    spec = HardInstanceSpec(S_bandit, H_bandit, A, K, tau, np.zeros((H_bandit, S_bandit), dtype=int))
    return _hard_mdp(spec, special=False)


def bandit_visitation(spec: HardInstanceSpec) -> np.ndarray:
    """Policy-independent mass (1/S)(1 - 1/H)^h on each bandit state at step h < H_bandit."""
    h = np.arange(spec.H_bandit)
    return (1.0 / spec.S_bandit) * (1 - 1 / spec.H_bandit) ** h


def _bandit_actions(spec: HardInstanceSpec, policy: Policy) -> np.ndarray:
    probs = policy.probs[:spec.H_bandit, :spec.S_bandit]
    if not np.all(np.isclose(probs.max(axis=-1), 1.0, atol=1e-9, rtol=0)):
        raise NotDeterministic("policy must be deterministic on bandit states")
    return probs.argmax(axis=-1)


def subopt_formula(spec: HardInstanceSpec, policy: Policy) -> float:
    miss = _bandit_actions(spec, policy) != spec.a_star
    return float(spec.tau * (bandit_visitation(spec)[:, None] * miss).sum())


def expected_subopt_formula(spec: HardInstanceSpec, policy: Policy) -> float:
    """Same sum with the mismatch indicator replaced by 1 - pi(a*|s); valid for stochastic policies."""
    probs = policy.probs[:spec.H_bandit, :spec.S_bandit]
    hit = np.take_along_axis(probs, spec.a_star[..., None], axis=-1)[..., 0]
    return float(spec.tau * (bandit_visitation(spec)[:, None] * (1 - hit)).sum())


def bandit_loss(spec: HardInstanceSpec, policy: Policy) -> int:
    return int(np.sum(_bandit_actions(spec, policy) != spec.a_star))


def build_partial_coverage_instance(S: int, A: int, H: int, h_star: int,
                                    gap: float) -> tuple[TabularMDP, Policy, Policy]:
    """Corridor MDP where mu tracks pi* before ``h_star`` and leaves its support afterwards.

    State 0 is the corridor. Before step ``h_star`` every action keeps the
    agent there; action 0 earns 0.5 and the others 0.25, and mu is uniform.
    At step ``h_star`` the last action A-1 moves to the good state 1 and any
    other action a to bad state 2 + a % (S - 2). From the next step on the
    good state pays 1 and bad states pay 1 - gap, whatever the action. mu
    plays action 0 at the branching step, so the good branch never appears in
    its data (and smallest-index tie-breaking does not favour it either).
    """
    if S < 3 or A < 2:
        raise InvalidParams("partial-coverage instance needs S >= 3 and A >= 2")
    if not 1 <= h_star <= H - 1:
        raise InvalidParams(f"h_star must lie in 1..{H - 1}, got {h_star}")
    if not 0 < gap <= 1:
        raise InvalidParams(f"gap must lie in (0, 1], got {gap}")
    P = np.zeros((H, S, A, S))
    r = np.zeros((H, S, A))
    for h in range(H):
        for s in range(1, S):
            P[h, s, :, s] = 1.0
        if h < h_star:
            P[h, 0, :, 0] = 1.0
            r[h, 0, 0] = 0.5
            r[h, 0, 1:] = 0.25
        elif h == h_star:
            P[h, 0, A - 1, 1] = 1.0
            for a in range(A - 1):
                P[h, 0, a, 2 + a % (S - 2)] = 1.0
        else:
            P[h, 0, :, 0] = 1.0
            r[h, 1, :] = 1.0
            r[h, 2:, :] = 1.0 - gap
    init = np.zeros(S)
    init[0] = 1.0
    mdp = TabularMDP(P, r, init)
    validate_mdp(mdp)

    mu = np.zeros((H, S, A))
    mu[:, :, 0] = 1.0
    mu[:h_star, 0, :] = 1.0 / A
    star = np.zeros((H, S), dtype=int)
    star[h_star, 0] = A - 1
    return mdp, Policy(mu), Policy.from_actions(star, A)


def random_mdp(S: int, A: int, H: int, rng: np.random.Generator, concentration: float = 1.0,
               reward_sparsity: float = 0.0) -> TabularMDP:
    """Dirichlet transitions, uniform rewards, uniform initial distribution."""
    P = rng.dirichlet(np.full(S, concentration), size=(H, S, A))
    r = rng.random((H, S, A))
    if reward_sparsity > 0:
        r[rng.random((H, S, A)) < reward_sparsity] = 0.0
    mdp = TabularMDP(P, r, np.full(S, 1.0 / S))
    validate_mdp(mdp)
    return mdp


def zero_reward_mdp(S: int, A: int, H: int, rng: np.random.Generator | None = None) -> TabularMDP:
    rng = np.random.default_rng(0) if rng is None else rng
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    return TabularMDP(P, np.zeros((H, S, A)), np.full(S, 1.0 / S))


def build_covered_instance(S: int = 5, A: int = 3, H: int = 4, seed: int = 0, max_gap: float = 0.1,
                           gap_octaves: float = 8.0, n_rich: int = 2,
                           concentration: float = 3.0) -> tuple[TabularMDP, Policy, Policy]:
    """Fully covered instance with action gaps spread over many scales.

    Transitions are action-independent Dirichlet draws and the first ``n_rich``
    states pay about 1 per step while the rest pay about 0, which keeps the
    next-state value spread (and so estimation noise) large. Each (h, s) with
    h < H - 1 has one best action whose advantage is drawn from a geometric
    grid between ``max_gap`` and ``max_gap * 2**-gap_octaves``; the last step
    has no action gap. mu is uniform, so every reachable pair is covered.
    """
    if not 0 < n_rich < S:
        raise InvalidParams("n_rich must lie in 1..S-1")
    if not 0 < max_gap <= 1 or A < 2 or H < 2:
        raise InvalidParams("need 0 < max_gap <= 1, A >= 2 and H >= 2")
    rng = np.random.default_rng(seed)
    rows = rng.dirichlet(np.full(S, concentration), size=(H, S))
    P = np.repeat(rows[:, :, None, :], A, axis=2)
    steps = H - 1
    grid = max_gap * 2.0 ** -np.linspace(0.0, gap_octaves, steps * S)
    rng.shuffle(grid)
    gaps = np.zeros((H, S))
    gaps[:steps] = grid.reshape(steps, S)
    best = rng.integers(0, A, size=(H, S))
    rich = np.arange(S) < n_rich
    # rich states lose the gap off the best arm, poor states gain it on the best arm
    r = np.where(rich[None, :, None], 1.0 - gaps[:, :, None], 0.0) * np.ones((H, S, A))
    hh, ss = np.meshgrid(np.arange(H), np.arange(S), indexing="ij")
    r[hh, ss, best] = np.where(rich[None, :], 1.0, gaps)
    mdp = TabularMDP(P, r, np.full(S, 1.0 / S))
    validate_mdp(mdp)
    return mdp, Policy.uniform(H, S, A), dp_optimal(mdp)[1]
