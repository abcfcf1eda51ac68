import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyfine import (HardInstanceSpec, InvalidParams, NotDeterministic, OfflineParams, Policy,
                      bandit_loss, build_covered_instance, build_hard_instance,
                      build_partial_coverage_instance, collect, concentrability, dp_optimal,
                      dp_policy_eval, expected_subopt_formula, null_instance, pevi_adv, random_mdp,
                      subopt_formula, validate_mdp, visitation)
from polyfine.mdp import suboptimality


def spec_s1():
    return HardInstanceSpec(1, 2, 2, 2, 0.25, np.zeros((2, 1), dtype=int))


def wrong_policy(spec):
    """Deterministic policy that misses a* at every bandit state."""
    mdp, _, pi_star = build_hard_instance(spec)
    acts = pi_star.actions().copy()
    acts[:spec.H_bandit, :spec.S_bandit] = (spec.a_star + 1) % spec.K
    return Policy.from_actions(acts, spec.A)


def test_spec_validation():
    with pytest.raises(InvalidParams):
        HardInstanceSpec(1, 2, 2, 3, 0.2, np.zeros((2, 1), dtype=int))
    with pytest.raises(InvalidParams):
        HardInstanceSpec(1, 2, 2, 2, 0.4, np.zeros((2, 1), dtype=int))
    with pytest.raises(InvalidParams):
        HardInstanceSpec(1, 2, 3, 2, 0.2, np.full((2, 1), 2))
    with pytest.raises(InvalidParams):
        HardInstanceSpec(2, 2, 3, 2, 0.2, np.zeros((2, 1), dtype=int))
    assert HardInstanceSpec.k_from_cstar(3.7, 5) == 3
    assert HardInstanceSpec.k_from_cstar(9.0, 4) == 4


def test_hard_instance_structure():
    spec = HardInstanceSpec.random(3, 4, 4, 3, 0.3, np.random.default_rng(0))
    mdp, mu, pi_star = build_hard_instance(spec)
    validate_mdp(mdp)
    assert (mdp.S, mdp.A, mdp.H) == (5, 4, 9)
    P = mdp.transitions
    for h in range(4):
        for i in range(3):
            a = spec.a_star[h, i]
            assert P[h, i, a, spec.good] == pytest.approx((0.5 + 0.3) / 4)
            other = (a + 1) % 4
            assert P[h, i, other, spec.good] == pytest.approx(1 / 8)
            assert P[h, i, other, i] == pytest.approx(0.75)
    assert np.allclose(P[4, :3, :, spec.good], 0.5)
    assert np.all(mdp.rewards[5:, spec.good] == 1) and not mdp.rewards[:5].any()
    assert np.allclose(mu.probs[0, 0], [1 / 3, 1 / 3, 1 / 3, 0])
    assert np.all(mu.probs[5, :, 0] == 1)
    assert np.array_equal(pi_star.actions()[:4, :3], spec.a_star)


def test_tau_zero_arms_indistinguishable():
    spec = HardInstanceSpec.random(2, 3, 3, 3, 0.0, np.random.default_rng(1))
    mdp, mu, _ = build_hard_instance(spec)
    assert dp_optimal(mdp)[0].initial_value(mdp.initial_dist) == pytest.approx(
        dp_policy_eval(mdp, mu).initial_value(mdp.initial_dist), abs=1e-12)


def test_small_spec_optimal_value():
    mdp, _, pi_star = build_hard_instance(spec_s1())
    assert dp_optimal(mdp)[0].initial_value(mdp.initial_dist) == pytest.approx(1.375, abs=1e-12)
    assert dp_policy_eval(mdp, pi_star).initial_value(mdp.initial_dist) == pytest.approx(1.375, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(S=st.integers(1, 3), Hb=st.integers(1, 4), A=st.integers(2, 5), data=st.data())
def test_concentrability_equals_k(S, Hb, A, data):
    K = data.draw(st.integers(2, A))
    tau = data.draw(st.floats(0.0, 1 / 3))
    spec = HardInstanceSpec.random(S, Hb, A, K, tau, np.random.default_rng(data.draw(st.integers(0, 999))))
    mdp, mu, pi_star = build_hard_instance(spec)
    assert abs(concentrability(mdp, mu, pi_star) - K) <= 1e-9


def test_null_instance():
    mdp = null_instance(2, 3, 3)
    rng = np.random.default_rng(2)
    vals = [dp_policy_eval(mdp, Policy(rng.dirichlet(np.ones(3), size=(mdp.H, mdp.S)))).initial_value(
        mdp.initial_dist) for _ in range(5)]
    assert max(vals) - min(vals) <= 1e-12
    assert dp_optimal(mdp)[0].initial_value(mdp.initial_dist) == pytest.approx(3 / 2, abs=1e-12)
    tau0, _, _ = build_hard_instance(HardInstanceSpec(2, 3, 3, 2, 0.0, np.zeros((3, 2), dtype=int)))
    assert np.array_equal(tau0.transitions, mdp.transitions)
    assert np.array_equal(tau0.rewards, mdp.rewards)


def test_visitation_law():
    spec = HardInstanceSpec.random(3, 5, 3, 2, 0.2, np.random.default_rng(3))
    mdp, mu, pi_star = build_hard_instance(spec)
    for pol in (mu, pi_star, wrong_policy(spec)):
        d = visitation(mdp, pol).d_state
        for h in range(spec.H_bandit):
            assert np.allclose(d[h, :3], (1 / 3) * (1 - 1 / 5) ** h, atol=1e-12, rtol=0)


def test_subopt_formula_examples():
    spec = spec_s1()
    _, _, pi_star = build_hard_instance(spec)
    assert subopt_formula(spec, pi_star) == 0
    wrong = wrong_policy(spec)
    assert subopt_formula(spec, wrong) == pytest.approx(0.375, abs=1e-12)
    mdp, _, _ = build_hard_instance(spec)
    assert suboptimality(mdp, wrong) == pytest.approx(0.375, abs=1e-12)
    with pytest.raises(NotDeterministic):
        subopt_formula(spec, Policy.uniform(mdp.H, mdp.S, mdp.A))


def test_subopt_formula_random_policies():
    spec = HardInstanceSpec.random(2, 3, 4, 4, 0.3, np.random.default_rng(4))
    mdp, _, _ = build_hard_instance(spec)
    rng = np.random.default_rng(5)
    for _ in range(20):
        pol = Policy.from_actions(rng.integers(0, spec.A, size=(mdp.H, mdp.S)), spec.A)
        assert abs(subopt_formula(spec, pol) - suboptimality(mdp, pol)) <= 1e-9


def test_subopt_formula_exhaustive():
    spec = HardInstanceSpec.random(2, 2, 2, 2, 0.25, np.random.default_rng(6))
    mdp, _, pi_star = build_hard_instance(spec)
    base = pi_star.actions()
    for flat in itertools.product(range(2), repeat=4):
        acts = base.copy()
        acts[:2, :2] = np.array(flat).reshape(2, 2)
        pol = Policy.from_actions(acts, 2)
        assert abs(subopt_formula(spec, pol) - suboptimality(mdp, pol)) <= 1e-9


def test_expected_formula_matches_dp_for_stochastic():
    spec = HardInstanceSpec.random(3, 4, 4, 4, 0.3, np.random.default_rng(7))
    mdp, mu, _ = build_hard_instance(spec)
    uni = Policy.uniform(mdp.H, mdp.S, mdp.A)
    assert expected_subopt_formula(spec, uni) == pytest.approx(suboptimality(mdp, uni), abs=1e-12)
    assert expected_subopt_formula(spec, mu) == pytest.approx(suboptimality(mdp, mu), abs=1e-12)


def test_bandit_loss():
    spec = HardInstanceSpec.random(3, 4, 4, 4, 0.3, np.random.default_rng(8))
    _, _, pi_star = build_hard_instance(spec)
    assert bandit_loss(spec, pi_star) == 0
    assert bandit_loss(spec, wrong_policy(spec)) == 12


def test_bandit_loss_expectation_over_prior():
    rng = np.random.default_rng(9)
    S, Hb, K = 3, 4, 4
    fixed = HardInstanceSpec.random(S, Hb, 4, K, 0.3, rng)
    _, _, pol = build_hard_instance(fixed)
    losses = [bandit_loss(HardInstanceSpec.random(S, Hb, 4, K, 0.3, rng), pol) for _ in range(200)]
    se = np.std(losses, ddof=1) / np.sqrt(200)
    assert abs(np.mean(losses) - Hb * S * (1 - 1 / K)) <= 3 * se


# partial coverage

def test_partial_coverage_concentrability():
    mdp, mu, pi_star = build_partial_coverage_instance(4, 2, 4, 2, 0.5)
    assert np.isfinite(concentrability(mdp, mu, pi_star, h_max=2))
    assert concentrability(mdp, mu, pi_star) == float("inf")


@pytest.mark.parametrize("S,A,H,h_star,gap", [(4, 2, 4, 2, 0.5), (5, 3, 6, 3, 0.3), (3, 2, 3, 1, 1.0)])
def test_partial_coverage_mu_gap(S, A, H, h_star, gap):
    mdp, mu, pi_star = build_partial_coverage_instance(S, A, H, h_star, gap)
    v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
    assert dp_policy_eval(mdp, pi_star).initial_value(mdp.initial_dist) == pytest.approx(v_star)
    assert dp_policy_eval(mdp, mu).initial_value(mdp.initial_dist) <= v_star - gap * (H - h_star) / 2


def test_partial_coverage_offline_reduction_stuck():
    mdp, mu, _ = build_partial_coverage_instance(4, 2, 4, 2, 0.5)
    for n in (2 ** 8, 2 ** 12):
        subs = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            res = pevi_adv(collect(mdp, mu, n, rng), mdp.dims, OfflineParams(), rng)
            subs.append(suboptimality(mdp, res.policy))
        assert np.median(subs) >= 0.5 * (4 - 2) / 4


def test_partial_coverage_invalid():
    with pytest.raises(InvalidParams):
        build_partial_coverage_instance(4, 2, 4, 0, 0.5)
    with pytest.raises(InvalidParams):
        build_partial_coverage_instance(4, 2, 4, 4, 0.5)
    with pytest.raises(InvalidParams):
        build_partial_coverage_instance(2, 2, 4, 2, 0.5)


# other generators

@settings(max_examples=25, deadline=None)
@given(S=st.integers(2, 6), A=st.integers(2, 4), H=st.integers(2, 5), seed=st.integers(0, 9999))
def test_generators_valid(S, A, H, seed):
    validate_mdp(random_mdp(S, A, H, np.random.default_rng(seed), reward_sparsity=0.3))
    mdp, mu, pi_star = build_covered_instance(S=S, A=A, H=H, seed=seed, n_rich=1)
    validate_mdp(mdp)
    assert np.isfinite(concentrability(mdp, mu, pi_star))
    assert concentrability(mdp, mu, pi_star) == pytest.approx(A)


def test_covered_instance_deterministic():
    a = build_covered_instance(seed=3)[0]
    b = build_covered_instance(seed=3)[0]
    assert np.array_equal(a.rewards, b.rewards) and np.array_equal(a.transitions, b.transitions)
