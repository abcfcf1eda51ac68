"""Tabular policy finetuning: offline pessimism, online optimism and their hybrid."""
from .datasets import (CountsModel, Environment, EpisodeDataset, apply_phat, collect,
                       empirical_variance, estimate_step, split_pevi, split_vilcb)
from .errors import *  # noqa: F401,F403
from .experiment import (ExperimentConfig, derive_seed, fit_loglog_slope, medians_by_n,
                         run_single, sweep)
from .instances import (HardInstanceSpec, bandit_loss, build_covered_instance, build_hard_instance,
                        build_partial_coverage_instance, expected_subopt_formula, null_instance,
                        random_mdp, subopt_formula, zero_reward_mdp)
from .mdp import (Episode, MixturePolicy, Policy, TabularMDP, ValueTable, VisitationTable,
                  concentrability, dp_optimal, dp_policy_eval, eval_concatenated, eval_mixture,
                  sample_episode, validate_mdp, visitation)
from .offline import OfflineParams, OfflineResult, pevi_adv, truncated_pevi_adv, vi_lcb
from .online import HooviResult, OnlineParams, UpLowResult, hoovi, ucbvi_uplow
from .serialization import (CSV_HEADER, ResultRow, parse_dataset, parse_mdp, parse_policy,
                            rows_from_csv, rows_to_csv, serialize_dataset, serialize_mdp,
                            serialize_policy)

__version__ = "0.1.0"
