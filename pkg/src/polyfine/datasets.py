"""Episode datasets, data splitting, empirical models and budgeted environment access."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, ShapeMismatch
from .mdp import Episode, Policy, TabularMDP, sample_batch, sample_episode


@dataclass
class EpisodeDataset:
    states: np.ndarray   # (n, H) int
    actions: np.ndarray  # (n, H) int
    rewards: np.ndarray  # (n, H) float
    behavior_tag: str = ""
    seed: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=int)
        self.actions = np.asarray(self.actions, dtype=int)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if not (self.states.shape == self.actions.shape == self.rewards.shape) or self.states.ndim != 2:
            raise ShapeMismatch(
                f"episode arrays disagree: {self.states.shape}, {self.actions.shape}, {self.rewards.shape}")

    @classmethod
    def empty(cls, H: int, behavior_tag: str = "", seed: int = 0) -> "EpisodeDataset":
        z = np.zeros((0, H), dtype=int)
        return cls(z, z.copy(), np.zeros((0, H)), behavior_tag, seed)

    @classmethod
    def from_episodes(cls, episodes, H: int, behavior_tag: str = "", seed: int = 0) -> "EpisodeDataset":
        episodes = list(episodes)
        if not episodes:
            return cls.empty(H, behavior_tag, seed)
        for i, ep in enumerate(episodes):
            if not (len(ep.states) == len(ep.actions) == len(ep.rewards) == H):
                raise ShapeMismatch(f"episode {i} does not have horizon {H}")
        return cls(
            np.stack([ep.states for ep in episodes]),
            np.stack([ep.actions for ep in episodes]),
            np.stack([ep.rewards for ep in episodes]),
            behavior_tag,
            seed,
        )

    @property
    def H(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, i: int) -> Episode:
        return Episode(self.states[i], self.actions[i], self.rewards[i])

    @property
    def episodes(self) -> list[Episode]:
        return [self[i] for i in range(len(self))]

    def subset(self, idx) -> "EpisodeDataset":
        idx = np.asarray(idx, dtype=int)
        return EpisodeDataset(self.states[idx], self.actions[idx], self.rewards[idx],
                              self.behavior_tag, self.seed)

    def check_dims(self, S: int, A: int, H: int) -> None:
        if self.H != H:
            raise ShapeMismatch(f"dataset horizon {self.H} != {H}")
        if len(self) and (self.states.min() < 0 or self.states.max() >= S
                          or self.actions.min() < 0 or self.actions.max() >= A):
            raise ShapeMismatch(f"dataset indices outside S={S}, A={A}")


@dataclass
class CountsModel:
    h: int
    N_sa: np.ndarray    # (S, A)
    N_sas: np.ndarray   # (S, A, S)
    P_hat: np.ndarray   # (S, A, S); zero rows where unvisited
    r_hat: np.ndarray   # (S, A); zero where unvisited

    @property
    def visited(self) -> np.ndarray:
        return self.N_sa >= 1


class Environment:
    """Budgeted access to an MDP; every sampled episode is counted.

    ``budget=None`` disables the cap but still counts.
    """

    def __init__(self, mdp: TabularMDP, budget: int | None = None):
        self.mdp = mdp
        self.budget = budget
        self.episodes_used = 0

    def _charge(self, n: int) -> None:
        if self.budget is not None and self.episodes_used + n > self.budget:
            raise BudgetExceeded(
                f"requested {n} episodes with {self.episodes_used} of {self.budget} already used")
        self.episodes_used += n

    def sample_episode(self, policy: Policy, rng: np.random.Generator) -> Episode:
        self._charge(1)
        return sample_episode(self.mdp, policy, rng)

    def sample_batch(self, policy: Policy, n: int, rng: np.random.Generator):
        self._charge(n)
        return sample_batch(self.mdp, policy, n, rng)


def as_environment(mdp_or_env) -> Environment:
    return mdp_or_env if isinstance(mdp_or_env, Environment) else Environment(mdp_or_env)


def collect(mdp_or_env, policy: Policy, n: int, rng: np.random.Generator,
            behavior_tag: str = "", seed: int = 0) -> EpisodeDataset:
    if n < 0:
        raise ValueError("n must be non-negative")
    env = as_environment(mdp_or_env)
    s, a, r = env.sample_batch(policy, n, rng)
    return EpisodeDataset(s, a, r, behavior_tag, seed)


def _folds(idx: np.ndarray, k: int) -> list[np.ndarray]:
    # array_split puts the remainder on the earliest folds
    return np.array_split(idx, k)


def split_vilcb(data: EpisodeDataset, H: int, rng: np.random.Generator | None = None) -> list[EpisodeDataset]:
    """Random partition into H folds of size floor(n/H) or ceil(n/H)."""
    rng = np.random.default_rng(data.seed) if rng is None else rng
    perm = rng.permutation(len(data))
    return [data.subset(f) for f in _folds(perm, H)]


def split_pevi(data: EpisodeDataset, H: int, rng: np.random.Generator | None = None):
    """Three-way split (D_ref, D_0, D_1) with D_1 further cut into H folds.

    D_0 and D_1 get floor(n/3) episodes each, D_ref takes the rest.
    """
    rng = np.random.default_rng(data.seed) if rng is None else rng
    n = len(data)
    third = n // 3
    n_ref = n - 2 * third
    perm = rng.permutation(n)
    ref, d0, d1 = perm[:n_ref], perm[n_ref:n_ref + third], perm[n_ref + third:]
    return data.subset(ref), data.subset(d0), [data.subset(f) for f in _folds(d1, H)]


def estimate_step(data: EpisodeDataset, h: int, S: int, A: int) -> CountsModel:
    """Counts and plug-in model at step index h (0-based)."""
    N_sas = np.zeros((S, A, S))
    r_sum = np.zeros((S, A))
    if len(data):
        s, a, r = data.states[:, h], data.actions[:, h], data.rewards[:, h]
        np.add.at(r_sum, (s, a), r)
        if h + 1 < data.H:
            np.add.at(N_sas, (s, a, data.states[:, h + 1]), 1.0)
            N_sa = N_sas.sum(axis=-1)
        else:
            # last step has no successor; the terminal value is zero so P_hat only needs its row mass
            N_sa = np.zeros((S, A))
            np.add.at(N_sa, (s, a), 1.0)
            N_sas[..., 0] = N_sa
    else:
        N_sa = np.zeros((S, A))
    denom = np.maximum(N_sa, 1.0)
    return CountsModel(h, N_sa, N_sas, N_sas / denom[..., None], r_sum / denom)


def estimate_all(data: EpisodeDataset, S: int, A: int, steps) -> dict[int, CountsModel]:
    return {h: estimate_step(data, h, S, A) for h in steps}


def apply_phat(model: CountsModel, V_next: np.ndarray) -> np.ndarray:
    V_next = np.asarray(V_next, dtype=float)
    if V_next.shape != (model.P_hat.shape[-1],):
        raise ShapeMismatch(f"V_next shape {V_next.shape} != ({model.P_hat.shape[-1]},)")
    return model.P_hat @ V_next


def empirical_variance(model: CountsModel, V_next: np.ndarray) -> np.ndarray:
    """P̂V² − (P̂V)², clamped at 0; zero where (s,a) is unvisited."""
    mean = apply_phat(model, V_next)
    second = model.P_hat @ (np.asarray(V_next, dtype=float) ** 2)
    return np.maximum(second - mean ** 2, 0.0)
