"""Acceptance suite: one test per criterion, each timed against its limit.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary. ``python3 tests/test_acceptance.py``
runs the same checks without pytest.
"""
import time
from statistics import median

import numpy as np

from oracles import enumerate_value
from polyfine import (Environment, ExperimentConfig, HardInstanceSpec, OfflineParams, OnlineParams,
                      Policy, build_covered_instance, build_hard_instance,
                      build_partial_coverage_instance, collect, concentrability, dp_optimal,
                      dp_policy_eval, eval_concatenated, eval_mixture, expected_subopt_formula,
                      fit_loglog_slope, hoovi, pevi_adv, random_mdp, run_single, subopt_formula,
                      ucbvi_uplow, vi_lcb)
from polyfine.experiment import build_problem, medians_by_n
from polyfine.mdp import suboptimality

RESULTS: dict[int, tuple[bool, str]] = {}
BUDGETS: list[tuple[str, "Environment | int", int]] = []  # (label, env or episodes used, budget)


def env_for(mdp, budget, label):
    env = Environment(mdp, budget=budget)
    BUDGETS.append((label, env, budget))
    return env


def record(num, ok, detail, elapsed, limit):
    in_time = elapsed < limit
    RESULTS[num] = (ok and in_time, f"{detail}; {elapsed:.1f}s (limit {limit:.0f}s)")
    assert in_time, f"criterion {num} took {elapsed:.1f}s, limit {limit}s"
    assert ok, f"criterion {num}: {detail}"


def budget_rows(outcomes, label):
    for o in outcomes:
        BUDGETS.append((label, o.episodes_used, o.row.n))


def test_c01_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        S, A, H = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 4))
        mdp = random_mdp(S, A, H, rng, concentration=0.7)
        pol = Policy(rng.dirichlet(np.ones(A), size=(H, S)))
        worst = max(worst, abs(dp_policy_eval(mdp, pol).initial_value(mdp.initial_dist)
                               - enumerate_value(mdp, pol)))
    record(1, worst <= 1e-12, f"max |DP - enumeration| = {worst:.2e} over 50 MDPs",
           time.perf_counter() - t0, 10)


def test_c02_suboptimality_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    # (S_bandit, H_bandit, A, K) with K^(S*H_bandit) <= 64
    shapes = [(1, 1, 3, 3), (1, 2, 2, 2), (1, 3, 4, 4), (2, 1, 5, 5), (2, 3, 2, 2), (3, 2, 3, 2), (1, 2, 8, 8)]
    worst, count = 0.0, 0
    for S, Hb, A, K in shapes:
        spec = HardInstanceSpec.random(S, Hb, A, K, 0.3, rng)
        mdp, _, pi_star = build_hard_instance(spec)
        v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
        base = pi_star.actions()
        for flat in np.ndindex(*([K] * (S * Hb))):
            acts = base.copy()
            acts[:Hb, :S] = np.array(flat).reshape(Hb, S)
            pol = Policy.from_actions(acts, A)
            exact = v_star - dp_policy_eval(mdp, pol).initial_value(mdp.initial_dist)
            worst = max(worst, abs(subopt_formula(spec, pol) - exact))
            count += 1
    record(2, worst <= 1e-9, f"max |formula - DP| = {worst:.2e} over {count} policies",
           time.perf_counter() - t0, 5)


def test_c03_concentrability_equals_k():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(25):
        A = int(rng.integers(2, 7))
        K = int(rng.integers(2, A + 1))
        spec = HardInstanceSpec.random(int(rng.integers(1, 5)), int(rng.integers(1, 6)), A, K,
                                       float(rng.uniform(0, 1 / 3)), rng)
        mdp, mu, pi_star = build_hard_instance(spec)
        worst = max(worst, abs(concentrability(mdp, mu, pi_star) - K))
    record(3, worst <= 1e-9, f"max |C* - K| = {worst:.2e} over 25 specs", time.perf_counter() - t0, 5)


def test_c04_pessimism():
    t0 = time.perf_counter()
    fractions = {}
    for algo in ("vi-lcb", "pevi-adv"):
        cfg = ExperimentConfig(algo, [2 ** 12], list(range(100)), instance="covered",
                               bonus_scale=1.0, delta=0.1)
        problem = build_problem(cfg)
        outs = [run_single(cfg, 2 ** 12, s, problem) for s in cfg.seeds]
        budget_rows(outs, f"c4 {algo}")
        fractions[algo] = np.mean([o.row.pessimism_held for o in outs])
    ok = all(f >= 0.85 for f in fractions.values())
    record(4, ok, ", ".join(f"{a} held in {f:.0%}" for a, f in fractions.items()),
           time.perf_counter() - t0, 120)


def test_c05_consistency_without_bonus():
    t0 = time.perf_counter()
    mdp, mu, _ = build_covered_instance()
    v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
    errs = {}
    for name, solver in (("vi-lcb", vi_lcb), ("pevi-adv", pevi_adv)):
        rng = np.random.default_rng(105)
        data = collect(env_for(mdp, 10 ** 5, f"c5 {name}"), mu, 10 ** 5, rng)
        res = solver(data, mdp.dims, OfflineParams(bonus_scale=0.0), rng)
        errs[name] = abs(res.values.initial_value(mdp.initial_dist) - v_star)
    record(5, all(e <= 0.05 for e in errs.values()),
           ", ".join(f"{a} |V1 - V*| = {e:.4f}" for a, e in errs.items()), time.perf_counter() - t0, 60)


def test_c06_scaling_slope():
    t0 = time.perf_counter()
    ns = [2 ** 10, 2 ** 12, 2 ** 14, 2 ** 16]
    cfg = ExperimentConfig("pevi-adv", ns, list(range(50)), instance="covered")
    problem = build_problem(cfg)
    outs = [run_single(cfg, n, s, problem) for n in ns for s in cfg.seeds]
    budget_rows(outs, "c6")
    rows = [o.row for o in outs]
    slope = fit_loglog_slope(rows)
    meds = medians_by_n(rows)
    detail = f"slope {slope:.3f}; medians " + ", ".join(f"{meds[n]:.4f}" for n in ns)
    record(6, -0.7 <= slope <= -0.3, detail, time.perf_counter() - t0, 600)


def test_c07_uplow_certification():
    t0 = time.perf_counter()
    mdp = random_mdp(3, 2, 4, np.random.default_rng(5))
    h_star, n_ucb = 1, 500
    V_star = dp_optimal(mdp)[0].V[h_star]
    roll_in = Policy.uniform(4, 3, 2)
    below_star = certified = 0
    for seed in range(100):
        env = env_for(mdp, n_ucb, "c7")
        out = ucbvi_uplow(env, roll_in, h_star, OnlineParams(n_ucb=n_ucb, delta=0.1),
                          np.random.default_rng(seed))
        seen = out.visit_counts > 0
        below_star += bool(np.all((out.V_low_out <= V_star + 1e-9)[seen]))
        v_mix = eval_mixture(mdp, roll_in, out.pi_out).V[0]
        certified += bool(np.all((v_mix >= out.V_low_out - 1e-9)[seen]))
    record(7, below_star >= 85 and certified >= 85,
           f"(a) V_low <= V* in {below_star}/100, (b) certified in {certified}/100",
           time.perf_counter() - t0, 180)


def test_c08_hybrid_advantage():
    t0 = time.perf_counter()
    S, A, H, h_star, gap = 4, 2, 4, 2, 0.5
    mdp, mu, _ = build_partial_coverage_instance(S, A, H, h_star, gap)
    v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
    floor = gap * (H - h_star) / 4
    pevi_meds = {}
    for n in (2 ** 10, 2 ** 12, 2 ** 14):
        subs = []
        for seed in range(20):
            rng = np.random.default_rng([108, n, seed])
            data = collect(env_for(mdp, n, "c8 pevi"), mu, n, rng)
            subs.append(suboptimality(mdp, pevi_adv(data, mdp.dims, OfflineParams(), rng).policy))
        pevi_meds[n] = median(subs)
    n = 2 ** 14
    hyb = []
    for seed in range(20):
        rng = np.random.default_rng([208, seed])
        out = hoovi(env_for(mdp, n, "c8 hoovi"), mu, h_star, n, OfflineParams(), OnlineParams(), rng)
        hyb.append(v_star - eval_concatenated(mdp, out.prefix, out.suffix))
    hoovi_med = median(hyb)
    ok = hoovi_med <= 0.5 * pevi_meds[n] and all(m >= floor for m in pevi_meds.values())
    detail = (f"HOOVI median {hoovi_med:.4f} vs PEVI-Adv {pevi_meds[n]:.4f} at n=2^14; PEVI-Adv medians "
              + ", ".join(f"{m:.3f}" for m in pevi_meds.values()) + f" (floor {floor})")
    record(8, ok, detail, time.perf_counter() - t0, 300)


def test_c09_lower_bound_probe():
    t0 = time.perf_counter()
    S, Hb, A, K, tau = 3, 4, 4, 4, 0.3
    rng = np.random.default_rng(109)
    # uniform baseline: exact DP against the formula, and the mismatch fraction over 200 a* draws
    fracs, worst = [], 0.0
    for _ in range(200):
        spec = HardInstanceSpec.random(S, Hb, A, K, tau, rng)
        mdp, _, _ = build_hard_instance(spec)
        uni = Policy.uniform(mdp.H, mdp.S, A)
        exact = suboptimality(mdp, uni)
        worst = max(worst, abs(exact - expected_subopt_formula(spec, uni)))
        weight = tau * S * spec_visitation_sum(spec)
        fracs.append(exact / weight)
    se = np.std(fracs, ddof=1) / np.sqrt(len(fracs))
    frac_ok = abs(np.mean(fracs) - (1 - 1 / K)) <= max(3 * se, 1e-12)

    spec = HardInstanceSpec.random(S, Hb, A, K, tau, np.random.default_rng(123))
    mdp, mu, _ = build_hard_instance(spec)
    baseline = suboptimality(mdp, Policy.uniform(mdp.H, mdp.S, A))
    meds = {}
    for n in (2 ** 8, 2 ** 16):
        subs = []
        for seed in range(20):
            r = np.random.default_rng([209, n, seed])
            data = collect(env_for(mdp, n, "c9"), mu, n, r)
            subs.append(suboptimality(mdp, pevi_adv(data, mdp.dims, OfflineParams(), r).policy))
        meds[n] = median(subs)
    ok = (worst <= 1e-9 and frac_ok and meds[2 ** 8] >= 0.5 * baseline and meds[2 ** 16] < 0.25 * baseline)
    detail = (f"baseline {baseline:.4f} (formula gap {worst:.1e}, mismatch fraction {np.mean(fracs):.4f}); "
              f"PEVI-Adv/baseline {meds[2 ** 8] / baseline:.3f} at 2^8, {meds[2 ** 16] / baseline:.3f} at 2^16")
    record(9, ok, detail, time.perf_counter() - t0, 300)


def spec_visitation_sum(spec):
    h = np.arange(spec.H_bandit)
    return float(((1 / spec.S_bandit) * (1 - 1 / spec.H_bandit) ** h).sum())


def test_c10_budget_accounting():
    used = [(label, e.episodes_used if isinstance(e, Environment) else e, b) for label, e, b in BUDGETS]
    over = [(label, u, b) for label, u, b in used if u > b]
    ok = bool(used) and not over
    record(10, ok, f"{len(used)} budgeted runs, {len(over)} over budget", 0.0, 1)


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    for num in sorted(RESULTS):
        ok, detail = RESULTS[num]
        print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
