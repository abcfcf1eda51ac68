"""Finite-horizon tabular MDPs, policies and exact dynamic-programming oracles.

Steps are indexed 0..H-1 internally. Value tables carry an extra terminal row
(index H) that is identically zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModel, NotDeterministic, ShapeMismatch

PROB_TOL = 1e-9


@dataclass(frozen=True)
class TabularMDP:
    transitions: np.ndarray   # (H, S, A, S)
    rewards: np.ndarray       # (H, S, A), deterministic, in [0, 1]
    initial_dist: np.ndarray  # (S,)

    def __post_init__(self):
        object.__setattr__(self, "transitions", np.asarray(self.transitions, dtype=float))
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=float))
        object.__setattr__(self, "initial_dist", np.asarray(self.initial_dist, dtype=float))
        if self.transitions.ndim != 4:
            raise ShapeMismatch(f"transitions must be 4-d (H,S,A,S), got shape {self.transitions.shape}")
        H, S, A, S2 = self.transitions.shape
        if S2 != S:
            raise ShapeMismatch(f"transitions shape {self.transitions.shape} is not (H,S,A,S)")
        if self.rewards.shape != (H, S, A):
            raise ShapeMismatch(f"rewards shape {self.rewards.shape} != {(H, S, A)}")
        if self.initial_dist.shape != (S,):
            raise ShapeMismatch(f"initial_dist shape {self.initial_dist.shape} != {(S,)}")

    @property
    def H(self) -> int:
        return self.transitions.shape[0]

    @property
    def S(self) -> int:
        return self.transitions.shape[1]

    @property
    def A(self) -> int:
        return self.transitions.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.S, self.A, self.H


@dataclass(frozen=True)
class Policy:
    probs: np.ndarray  # (H, S, A)

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if self.probs.ndim != 3:
            raise ShapeMismatch(f"policy probs must be (H,S,A), got {self.probs.shape}")
        if np.any(self.probs < 0) or np.any(np.abs(self.probs.sum(axis=-1) - 1.0) > PROB_TOL):
            raise InvalidModel("policy rows must be probability vectors over actions")

    @classmethod
    def from_actions(cls, actions, A: int) -> "Policy":
        """Deterministic policy from an (H, S) integer action table."""
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(A)[actions])

    @classmethod
    def uniform(cls, H: int, S: int, A: int) -> "Policy":
        return cls(np.full((H, S, A), 1.0 / A))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.probs.shape

    def is_deterministic(self) -> bool:
        return bool(np.all(np.isclose(self.probs.max(axis=-1), 1.0, atol=PROB_TOL, rtol=0)))

    def actions(self) -> np.ndarray:
        """(H, S) action table; raises unless every row is a unit mass."""
        if not self.is_deterministic():
            raise NotDeterministic("policy has a non-degenerate action distribution")
        return self.probs.argmax(axis=-1)


@dataclass
class ValueTable:
    V: np.ndarray  # (H+1, S)
    Q: np.ndarray  # (H+1, S, A); row H is zero

    def initial_value(self, initial_dist: np.ndarray) -> float:
        return float(initial_dist @ self.V[0])


@dataclass
class VisitationTable:
    d_state: np.ndarray         # (H, S)
    d_state_action: np.ndarray  # (H, S, A)


@dataclass(frozen=True)
class MixturePolicy:
    """Per-anchor-state mixture of policies, played from step ``anchor`` on.

    ``components[s]`` is a list of ``(weight, Policy)``; an empty list means
    the anchor state is uncovered and plays the uniform policy.
    Component policies are full (H, S, A) tables; only steps >= anchor matter.
    """
    anchor: int
    components: list = field(default_factory=list)

    def __post_init__(self):
        for s, comps in enumerate(self.components):
            if comps:
                total = sum(w for w, _ in comps)
                if abs(total - 1.0) > PROB_TOL:
                    raise InvalidModel(f"mixture weights at anchor state {s} sum to {total}")


@dataclass
class Episode:
    states: np.ndarray   # (H,)
    actions: np.ndarray  # (H,)
    rewards: np.ndarray  # (H,)


def validate_mdp(mdp: TabularMDP) -> None:
    P, r = mdp.transitions, mdp.rewards
    neg = np.argwhere(P < 0)
    if neg.size:
        h, s, a, s2 = neg[0]
        raise InvalidModel(f"negative transition probability at (h={h}, s={s}, a={a}, s'={s2})")
    bad = np.argwhere(np.abs(P.sum(axis=-1) - 1.0) > PROB_TOL)
    if bad.size:
        h, s, a = bad[0]
        raise InvalidModel(
            f"transition row (h={h}, s={s}, a={a}) sums to {P[h, s, a].sum():.12g}, not 1")
    bad = np.argwhere(~np.isfinite(r) | (r < 0) | (r > 1))
    if bad.size:
        h, s, a = bad[0]
        raise InvalidModel(f"reward {r[h, s, a]} at (h={h}, s={s}, a={a}) outside [0, 1]")
    d0 = mdp.initial_dist
    if np.any(d0 < 0) or abs(d0.sum() - 1.0) > PROB_TOL:
        raise InvalidModel(f"initial distribution is not a probability vector (sum={d0.sum():.12g})")


def _check_policy(mdp: TabularMDP, policy: Policy) -> None:
    if policy.shape != (mdp.H, mdp.S, mdp.A):
        raise ShapeMismatch(f"policy shape {policy.shape} != MDP dims {(mdp.H, mdp.S, mdp.A)}")


def dp_policy_eval(mdp: TabularMDP, policy: Policy) -> ValueTable:
    _check_policy(mdp, policy)
    H, S, A = mdp.H, mdp.S, mdp.A
    V = np.zeros((H + 1, S))
    Q = np.zeros((H + 1, S, A))
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.rewards[h] + mdp.transitions[h] @ V[h + 1]
        V[h] = np.einsum("sa,sa->s", policy.probs[h], Q[h])
    return ValueTable(V, Q)


def dp_optimal(mdp: TabularMDP) -> tuple[ValueTable, Policy]:
    """Backward induction; argmax ties go to the smallest action index."""
    H, S, A = mdp.H, mdp.S, mdp.A
    V = np.zeros((H + 1, S))
    Q = np.zeros((H + 1, S, A))
    actions = np.zeros((H, S), dtype=int)
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.rewards[h] + mdp.transitions[h] @ V[h + 1]
        actions[h] = Q[h].argmax(axis=1)
        V[h] = Q[h].max(axis=1)
    return ValueTable(V, Q), Policy.from_actions(actions, A)


def visitation(mdp: TabularMDP, policy: Policy) -> VisitationTable:
    _check_policy(mdp, policy)
    H, S = mdp.H, mdp.S
    d = np.zeros((H, S))
    d[0] = mdp.initial_dist
    for h in range(H - 1):
        dsa = d[h][:, None] * policy.probs[h]
        d[h + 1] = np.einsum("sa,sat->t", dsa, mdp.transitions[h])
    return VisitationTable(d, d[:, :, None] * policy.probs)


def concentrability(mdp: TabularMDP, mu: Policy, pi_star: Policy, h_max: int | None = None) -> float:
    """max over steps < h_max of d^pi*(s,a) / d^mu(s,a), with 0/0 = 0.

    ``h_max`` counts steps (1..H); ``None`` means the full horizon.
    Returns ``inf`` when pi* reaches a pair that mu never visits.
    """
    if not pi_star.is_deterministic():
        raise NotDeterministic("concentrability is defined against a deterministic pi*")
    h_max = mdp.H if h_max is None else h_max
    if not 1 <= h_max <= mdp.H:
        raise ValueError(f"h_max must lie in 1..{mdp.H}, got {h_max}")
    num = visitation(mdp, pi_star).d_state_action[:h_max]
    den = visitation(mdp, mu).d_state_action[:h_max]
    support = num > 0
    if np.any(support & (den <= 0)):
        return float("inf")
    if not support.any():
        return 0.0
    return float(np.max(num[support] / den[support]))


def _sample_index(cdf: np.ndarray, u: float) -> int:
    i = int(np.searchsorted(cdf, u, side="right"))
    return min(i, len(cdf) - 1)


def sample_episode(mdp: TabularMDP, policy: Policy, rng: np.random.Generator) -> Episode:
    H = mdp.H
    states = np.zeros(H, dtype=int)
    actions = np.zeros(H, dtype=int)
    rewards = np.zeros(H)
    s = _sample_index(np.cumsum(mdp.initial_dist), rng.random())
    for h in range(H):
        a = _sample_index(np.cumsum(policy.probs[h, s]), rng.random())
        states[h], actions[h], rewards[h] = s, a, mdp.rewards[h, s, a]
        if h + 1 < H:
            s = _sample_index(np.cumsum(mdp.transitions[h, s, a]), rng.random())
    return Episode(states, actions, rewards)


def sample_batch(mdp: TabularMDP, policy: Policy, n: int, rng: np.random.Generator):
    """Sample n episodes at once; returns (states, actions, rewards), each (n, H)."""
    H, S = mdp.H, mdp.S
    states = np.zeros((n, H), dtype=int)
    actions = np.zeros((n, H), dtype=int)
    rewards = np.zeros((n, H))
    if n == 0:
        return states, actions, rewards

    def draw(cdf_rows):
        u = rng.random(len(cdf_rows))
        idx = (cdf_rows < u[:, None]).sum(axis=1)
        return np.minimum(idx, cdf_rows.shape[1] - 1)

    pi_cdf = np.cumsum(policy.probs, axis=-1)
    p_cdf = np.cumsum(mdp.transitions, axis=-1)
    s = draw(np.broadcast_to(np.cumsum(mdp.initial_dist), (n, S)))
    for h in range(H):
        a = draw(pi_cdf[h, s])
        states[:, h], actions[:, h] = s, a
        rewards[:, h] = mdp.rewards[h, s, a]
        if h + 1 < H:
            s = draw(p_cdf[h, s, a])
    return states, actions, rewards


def mixture_anchor_values(mdp: TabularMDP, mix: MixturePolicy) -> np.ndarray:
    """V^mix at the anchor step for every state, shape (S,)."""
    H, S, A = mdp.H, mdp.S, mdp.A
    if len(mix.components) != S:
        raise ShapeMismatch(f"mixture covers {len(mix.components)} anchor states, MDP has {S}")
    if not 0 <= mix.anchor < H:
        raise ShapeMismatch(f"anchor step {mix.anchor} outside 0..{H - 1}")
    v = np.zeros(S)
    uniform_v = None
    for s, comps in enumerate(mix.components):
        if not comps:
            if uniform_v is None:
                uniform_v = dp_policy_eval(mdp, Policy.uniform(H, S, A)).V[mix.anchor]
            v[s] = uniform_v[s]
            continue
        for w, pol in comps:
            v[s] += w * dp_policy_eval(mdp, pol).V[mix.anchor, s]
    return v


def eval_mixture(mdp: TabularMDP, prefix: Policy | None, mix: MixturePolicy) -> ValueTable:
    """Value of the mixture restricted to the anchor step.

    Returns a ValueTable whose V has a single row (the anchor step); the
    prefix does not influence values from the anchor on and is accepted for
    interface symmetry with :func:`eval_concatenated`.
    """
    if prefix is not None:
        _check_policy(mdp, prefix)
    v = mixture_anchor_values(mdp, mix)
    return ValueTable(V=v[None, :], Q=np.zeros((1, mdp.S, mdp.A)))


def concatenated_values(mdp: TabularMDP, prefix: Policy, mix: MixturePolicy) -> np.ndarray:
    """Per-state values at steps 0..anchor of prefix-then-mixture, shape (anchor+1, S)."""
    _check_policy(mdp, prefix)
    V = np.zeros((mix.anchor + 1, mdp.S))
    V[mix.anchor] = mixture_anchor_values(mdp, mix)
    for h in range(mix.anchor - 1, -1, -1):
        Q = mdp.rewards[h] + mdp.transitions[h] @ V[h + 1]
        V[h] = np.einsum("sa,sa->s", prefix.probs[h], Q)
    return V


def eval_concatenated(mdp: TabularMDP, prefix: Policy, mix: MixturePolicy) -> float:
    """Expected return of playing ``prefix`` before the anchor step and ``mix`` from it."""
    return float(mdp.initial_dist @ concatenated_values(mdp, prefix, mix)[0])


def splice(prefix: Policy, suffix: Policy, anchor: int) -> Policy:
    """Ordinary policy that plays ``prefix`` on steps < anchor and ``suffix`` afterwards."""
    if prefix.shape != suffix.shape:
        raise ShapeMismatch(f"{prefix.shape} vs {suffix.shape}")
    probs = suffix.probs.copy()
    probs[:anchor] = prefix.probs[:anchor]
    return Policy(probs)


def suboptimality(mdp: TabularMDP, policy: Policy) -> float:
    """E_{s_1}[V*_1 - V^pi_1] under the initial distribution."""
    v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
    return v_star - dp_policy_eval(mdp, policy).initial_value(mdp.initial_dist)
