import math

import numpy as np
import pytest

from conftest import random_profile
from ldprank.errors import ProtocolError
from ldprank.mechanisms import PrivacyBudget, p_lap, p_rr
from ldprank.protocol import (
    AnswerSet,
    QueryPlan,
    agent_respond_lap,
    agent_respond_rr,
    agent_rng,
    curator_aggregate_lap,
    curator_aggregate_rr,
    dp_epsilon_prime,
    plan_queries,
    rescaled_margin_rr,
    respond_all,
    run_dp_kwiksort,
    run_kwiksort,
    run_ldp_kwiksort,
    true_answer,
)
from ldprank.ranking import Profile, Ranking, exact_cmp, n_pairs


def _single_pair_plan(n, m=2, pair=0):
    return QueryPlan(m, np.full((n, 1), pair))


class TestPlan:
    def test_exhaustive(self, rng):
        plan = plan_queries(20, 5, 10, rng)
        assert all(sorted(row) == list(range(10)) for row in plan.pair_index.tolist())

    def test_marginals(self):
        plan = plan_queries(100_000, 4, 2, np.random.default_rng(0))
        freq = plan.coverage() / 100_000
        assert np.all(np.abs(freq - 1 / 3) <= 0.005)

    def test_single_query(self, rng):
        plan = plan_queries(1, 3, 1, rng)
        assert plan.pairs_for(0)[0] in [(0, 1), (0, 2), (1, 2)]

    @pytest.mark.parametrize("k", [0, 7])
    def test_k_out_of_range(self, rng, k):
        with pytest.raises(ValueError):
            plan_queries(5, 4, k, rng)

    def test_rejects_duplicates(self):
        with pytest.raises(ProtocolError):
            QueryPlan(3, [[0, 0]])


class TestTrueAnswer:
    def test_examples(self):
        assert true_answer(Ranking([0, 1, 2]), (0, 1)) == 1
        assert true_answer(Ranking([2, 1, 0]), (0, 2)) == 0

    @pytest.mark.parametrize("pair", [(1, 0), (0, 3), (1, 1)])
    def test_invalid(self, pair):
        with pytest.raises(ValueError):
            true_answer(Ranking([0, 1, 2]), pair)


class TestAgentResponses:
    def test_rr_high_budget(self):
        r = Ranking([3, 0, 2, 1])
        pairs = [(0, 1), (2, 3)]
        truth = [true_answer(r, q) for q in pairs]
        for seed in range(1000):
            got = agent_respond_rr(r, pairs, PrivacyBudget(40.0, 2), np.random.default_rng(seed))
            assert got.tolist() == truth

    def test_rr_low_budget_flip_rate(self):
        truth = np.ones((100_000, 4), dtype=np.int8)
        answers = respond_all(truth, "rr", PrivacyBudget(0.01, 4), seed=1)
        assert abs(1 - answers.values.mean() - 0.5) <= 0.005

    def test_rr_keep_rate(self):
        truth = np.ones((100_000, 1), dtype=np.int8)
        answers = respond_all(truth, "rr", PrivacyBudget(2.0, 1), seed=2)
        assert abs(answers.values.mean() - p_rr(2.0)) <= 0.005
        assert p_rr(2.0) == pytest.approx(math.e**2 / (math.e**2 + 1))

    def test_lap_high_budget(self):
        r = Ranking([1, 0])
        for seed in range(1000):
            got = agent_respond_lap(r, [(0, 1)], PrivacyBudget(40.0, 1), np.random.default_rng(seed))
            assert abs(got[0] - 0) < 0.4

    def test_lap_zero_mean_noise(self, rng):
        truth = (rng.random((100_000, 1)) < 0.6).astype(np.int8)
        answers = respond_all(truth, "lap", PrivacyBudget(2.0, 1), seed=3)
        assert abs(answers.values.mean() - truth.mean()) <= 0.01

    @pytest.mark.parametrize("mechanism", ["rr", "lap"])
    def test_vectorized_matches_single_agent(self, rng, mechanism):
        profile = random_profile(rng, 30, 5)
        budget = PrivacyBudget(1.5, 3)
        plan = plan_queries(30, 5, 3, rng)
        truth = np.array([[true_answer(r, q) for q in plan.pairs_for(i)]
                          for i, r in enumerate(profile.rankings)])
        batch = respond_all(truth, mechanism, budget, seed=9).values
        single = agent_respond_rr if mechanism == "rr" else agent_respond_lap
        for i, r in enumerate(profile.rankings):
            expected = single(r, plan.pairs_for(i), budget, agent_rng(9, i))
            assert np.array_equal(batch[i], expected)

    def test_budget_mismatch(self):
        with pytest.raises(ProtocolError):
            respond_all(np.ones((3, 2)), "rr", PrivacyBudget(1.0, 1), seed=0)


class TestCuratorRR:
    def test_tally_example(self):
        plan = _single_pair_plan(100)
        values = np.array([[1]] * 70 + [[0]] * 30)
        est = curator_aggregate_rr(plan, AnswerSet(values, "rr"), PrivacyBudget(math.log(3), 1))
        assert est.score(0, 1) == pytest.approx(80.0)
        assert rescaled_margin_rr(70, 30, 0.75) == pytest.approx(80.0)

    def test_mle_difference_equals_rescaled_margin(self, rng):
        plan = plan_queries(400, 6, 4, rng)
        values = (rng.random((400, 4)) < 0.5).astype(np.int8)
        budget = PrivacyBudget(2.0, 4)
        est = curator_aggregate_rr(plan, AnswerSet(values, "rr"), budget)
        yes = np.bincount(plan.pair_index.ravel(), weights=values.ravel(), minlength=15)
        no = plan.coverage() - yes
        assert np.allclose(est.upper(), rescaled_margin_rr(yes, no, p_rr(0.5)), rtol=0, atol=1e-9)

    def test_noise_free_matches_exact_on_asked_agents(self, rng):
        profile = random_profile(rng, 50, 5)
        plan = plan_queries(50, 5, 3, rng)
        truth = profile.pairwise_table().bits[np.arange(50)[:, None], plan.pair_index]
        est = curator_aggregate_rr(plan, AnswerSet(truth, "rr"), PrivacyBudget(1.0, 3), p_keep=1.0)
        expected = np.zeros(10)
        for i in range(50):
            for p, b in zip(plan.pair_index[i], truth[i]):
                expected[p] += 1 if b else -1
        assert np.array_equal(est.upper(), expected)

    def test_shape_mismatch(self):
        with pytest.raises(ProtocolError):
            curator_aggregate_rr(_single_pair_plan(3), AnswerSet(np.ones((2, 1)), "rr"), PrivacyBudget(1.0))

    def test_unasked_pairs_score_zero(self):
        plan = QueryPlan(3, [[0], [0]])
        est = curator_aggregate_rr(plan, AnswerSet([[1], [1]], "rr"), PrivacyBudget(1.0))
        assert est.score(0, 2) == 0 and est.score(1, 2) == 0

    def test_clamped_estimates(self):
        plan = _single_pair_plan(10)
        est = curator_aggregate_rr(plan, AnswerSet(np.ones((10, 1)), "rr"), PrivacyBudget(1.0))
        assert est.estimates[1, 0] < 0
        assert est.clamped_estimates()[1, 0] == 0.0


class TestCuratorLap:
    def test_all_ones(self):
        plan = _single_pair_plan(7)
        est = curator_aggregate_lap(plan, AnswerSet(np.ones((7, 1)), "lap"))
        assert est.score(0, 1) == 7

    def test_threshold_is_inclusive(self):
        plan = _single_pair_plan(1)
        est = curator_aggregate_lap(plan, AnswerSet([[0.5]], "lap"))
        assert est.score(0, 1) == 1

    def test_classification_rate(self):
        truth = np.ones((100_000, 1), dtype=np.int8)
        answers = respond_all(truth, "lap", PrivacyBudget(2.0, 1), seed=4)
        est = curator_aggregate_lap(_single_pair_plan(100_000), answers)
        yes, no = est.estimates[:, 0]
        assert abs(yes / (yes + no) - p_lap(2.0)) <= 0.005

    def test_shape_mismatch(self):
        with pytest.raises(ProtocolError):
            curator_aggregate_lap(_single_pair_plan(3), AnswerSet(np.ones((3, 2)), "lap"))


class TestPipelines:
    @pytest.mark.parametrize("mechanism", ["rr", "lap"])
    def test_deterministic_replay(self, rng, mechanism):
        p = random_profile(rng, 40, 6)
        a, ea = run_ldp_kwiksort(p, mechanism, PrivacyBudget(1.0, 2), seed=11)
        b, eb = run_ldp_kwiksort(p, mechanism, PrivacyBudget(1.0, 2), seed=11)
        assert a == b
        assert np.array_equal(ea.scores, eb.scores)

    @pytest.mark.parametrize("seed", range(5))
    def test_huge_budget_matches_kwiksort(self, rng, seed):
        p = random_profile(rng, 31, 5)
        budget = PrivacyBudget(1e6, n_pairs(5))
        ldp, est = run_ldp_kwiksort(p, "rr", budget, seed)
        ref, exact = run_kwiksort(p, seed)
        assert np.allclose(est.scores, exact.scores)
        assert ldp == ref

    def test_dp_epsilon_prime(self):
        assert dp_epsilon_prime(1.0, 4) == pytest.approx(1 / (3 * math.log(4)))
        assert dp_epsilon_prime(1.0, 4) == pytest.approx(0.2404, abs=1e-4)

    @pytest.mark.parametrize("eps, m", [(0.0, 4), (1.0, 1)])
    def test_dp_epsilon_prime_domain(self, eps, m):
        with pytest.raises(ValueError):
            dp_epsilon_prime(eps, m)

    @pytest.mark.parametrize("seed", range(5))
    def test_dp_huge_budget_matches_kwiksort(self, rng, seed):
        # odd n keeps every exact margin nonzero so noise cannot break a tie
        p = random_profile(rng, 21, 6)
        dp, _ = run_dp_kwiksort(p, 1e9, seed)
        ref, _ = run_kwiksort(p, seed)
        assert dp == ref

    def test_accepts_pairwise_table(self, rng):
        p = random_profile(rng, 10, 4)
        a, _ = run_ldp_kwiksort(p, "rr", PrivacyBudget(2.0), seed=1)
        b, _ = run_ldp_kwiksort(p.pairwise_table(), "rr", PrivacyBudget(2.0), seed=1)
        assert a == b

    def test_rejects_unknown_input(self):
        with pytest.raises(TypeError):
            run_kwiksort([[0, 1]], seed=0)

    def test_more_budget_more_accuracy(self):
        from ldprank.data import MallowsParams, mallows_sample
        from ldprank.ranking import kendall_tau
        params = MallowsParams.identity(0.5, 10)
        gt = params.ground_truth
        wins = 0
        for seed in range(30):
            p = mallows_sample(params, 5000, np.random.default_rng(seed))
            hi, _ = run_ldp_kwiksort(p, "rr", PrivacyBudget(5.0, 1), seed)
            lo, _ = run_ldp_kwiksort(p, "rr", PrivacyBudget(0.1, 1), seed)
            wins += kendall_tau(hi, gt) < kendall_tau(lo, gt)
        assert wins >= 27


def test_exact_cmp_of_profile_used_by_baseline(rng):
    p = random_profile(rng, 9, 4)
    _, c = run_kwiksort(p, 0)
    assert np.array_equal(c.scores, exact_cmp(Profile(p.orders)).scores)
