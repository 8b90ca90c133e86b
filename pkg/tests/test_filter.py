import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import joint_enumeration_marginals, random_filter_instance
from whospeaks.state_filter import (
    FilterConfig,
    FilterPosterior,
    StateConfig,
    bits_table,
    config_likelihood,
    likelihood_vector,
    map_state,
    predict,
    run_filter,
    transition_matrix,
    transition_prob,
    update,
)


class TestTransitionPrior:
    def test_symbolic_values_at_q_08(self):
        q = 0.8
        # visible -> visible: stay q, switch 1-q
        assert transition_prob(1, 1, 1, 1, q) == 0.8
        assert transition_prob(0, 0, 1, 1, q) == 0.8
        assert transition_prob(0, 1, 1, 1, q) == pytest.approx(0.2)
        assert transition_prob(1, 0, 1, 1, q) == pytest.approx(0.2)
        # appearing: uniform
        assert transition_prob(0, 0, 0, 1, q) == 0.5
        assert transition_prob(0, 1, 0, 1, q) == 0.5
        assert transition_prob(1, 1, 0, 1, q) == 0.5
        # not visible now: forced silent, regardless of the past
        for v_prev in (0, 1):
            for s_prev in (0, 1):
                assert transition_prob(s_prev, 0, v_prev, 0, q) == 1.0
                assert transition_prob(s_prev, 1, v_prev, 0, q) == 0.0

    def test_row_stochastic_all_combinations(self):
        for q in (0.0, 0.3, 0.8, 1.0):
            for v_prev in (0, 1):
                for v_cur in (0, 1):
                    for s_prev in (0, 1):
                        total = sum(
                            transition_prob(s_prev, s_cur, v_prev, v_cur, q)
                            for s_cur in (0, 1)
                        )
                        assert total == 1.0


class TestPredict:
    def test_hand_product_single_person(self):
        out = predict(np.array([0.3, 0.7]), [1], [1], FilterConfig(q=0.8))
        np.testing.assert_allclose(out, [0.38, 0.62])

    def test_delta_posterior_returns_transition_row(self):
        cfg = FilterConfig(q=0.8)
        n = 2
        for s_prev in range(4):
            delta = np.zeros(4)
            delta[s_prev] = 1.0
            out = predict(delta, [1, 1], [1, 1], cfg)
            bits = StateConfig.from_bitmask(s_prev, n).bits
            expected = np.empty(4)
            for s_cur in range(4):
                cur = StateConfig.from_bitmask(s_cur, n).bits
                expected[s_cur] = np.prod(
                    [transition_prob(bits[i], cur[i], 1, 1, 0.8) for i in range(n)]
                )
            np.testing.assert_allclose(out, expected)

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 4))
    def test_predictive_normalized(self, seed, n):
        rng = np.random.default_rng(seed)
        post = rng.dirichlet(np.ones(2 ** n))
        v_prev = rng.integers(0, 2, n)
        post = post * likelihood_vector(np.full(n, 0.5), v_prev)  # kill invalid configs
        post = post / post.sum()
        v_cur = rng.integers(0, 2, n)
        out = predict(post, v_prev, v_cur, FilterConfig(q=rng.uniform(0, 1)))
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    def test_person_count_guard(self):
        cfg = FilterConfig(max_persons=3)
        with pytest.raises(ValueError, match="max_persons"):
            predict(np.ones(16) / 16, [1] * 4, [1] * 4, cfg)


class TestConfigLikelihood:
    def test_hand_product(self):
        s = StateConfig(bits=np.array([1, 0]))
        assert config_likelihood(s, np.array([0.9, 0.2]), np.array([1, 1])) == pytest.approx(0.72)

    def test_uninformative_gives_half_power_nvis(self):
        v = np.array([1, 1, 1])
        p = np.full(3, 0.5)
        for s in range(8):
            assert config_likelihood(s, p, v) == pytest.approx(0.5 ** 3)

    def test_invisible_bit_impossible(self):
        s = StateConfig(bits=np.array([1, 1]))
        assert config_likelihood(s, np.array([0.9, 0.9]), np.array([1, 0])) == 0.0

    def test_vector_matches_scalar(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0, 1, 3)
        v = np.array([1, 0, 1])
        vec = likelihood_vector(p, v)
        for s in range(8):
            assert vec[s] == pytest.approx(config_likelihood(s, p, v))


class TestUpdate:
    def test_uniform_stays_uniform(self):
        post = update(np.full(4, 0.25), np.full(4, 0.3))
        np.testing.assert_allclose(post.probs, 0.25)

    def test_hand_normalization(self):
        post = update(np.array([0.38, 0.62]), np.array([0.1, 0.9]))
        # [0.38*0.1, 0.62*0.9] / 0.596
        np.testing.assert_allclose(post.probs, [0.0637583893, 0.9362416107], atol=1e-9)

    def test_zero_evidence_falls_back_to_predictive(self):
        post = update(np.array([0.4, 0.6]), np.zeros(2))
        np.testing.assert_allclose(post.probs, [0.4, 0.6])


class TestMapState:
    def test_unique_maximum(self):
        post = FilterPosterior(probs=np.array([0.1, 0.2, 0.6, 0.1]), t=0)
        assert map_state(post).bitmask == 2

    def test_tie_prefers_smallest_bitmask(self):
        post = FilterPosterior(probs=np.array([0.1, 0.4, 0.4, 0.1]), t=0)
        assert map_state(post).bitmask == 1  # 01 beats 10

    @settings(deadline=None, max_examples=30)
    @given(seed=st.integers(0, 10_000))
    def test_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(8))
        post = FilterPosterior(probs=probs, t=0)
        best = min(range(8), key=lambda s: (-probs[s], s))
        assert map_state(post).bitmask == best


class TestRunFilter:
    def test_matches_joint_enumeration(self):
        rng = np.random.default_rng(123)
        cfg = FilterConfig(q=0.8)
        for n in (1, 2, 3):
            for T in (1, 2, 3, 4, 5):
                for _ in range(4):
                    p, vis = random_filter_instance(rng, n, T)
                    result = run_filter([(p[t], vis[t]) for t in range(T)], cfg)
                    oracle = joint_enumeration_marginals(p, vis, 0.8)
                    np.testing.assert_allclose(
                        result.marginals, oracle, atol=1e-10, rtol=0
                    )

    def test_all_invisible_is_all_silent(self):
        obs = [(np.full(2, 0.9), np.zeros(2, dtype=int)) for _ in range(6)]
        result = run_filter(obs)
        assert np.all(result.map_bitmasks == 0)
        assert np.all(result.marginals == 0)

    def test_confident_speaker_detected_every_frame(self):
        obs = [(np.array([0.99]), np.array([1])) for _ in range(10)]
        result = run_filter(obs)
        assert np.all(result.map_bitmasks == 1)

    def test_posteriors_normalized_and_respect_visibility(self):
        rng = np.random.default_rng(5)
        T, n = 12, 3
        p, vis = random_filter_instance(rng, n, T)
        result = run_filter([(p[t], vis[t]) for t in range(T)])
        bits = bits_table(n)
        for t in range(T):
            assert result.posteriors[t].sum() == pytest.approx(1.0, abs=1e-9)
            invalid = (bits * (1 - vis[t])[None, :]).any(axis=1)
            assert np.all(result.posteriors[t][invalid] == 0)

    def test_uniform_likelihood_keeps_uniform_posterior(self):
        for q in (0.1, 0.5, 0.8, 1.0):
            obs = [(np.full(2, 0.5), np.ones(2, dtype=int)) for _ in range(8)]
            result = run_filter(obs, FilterConfig(q=q))
            np.testing.assert_allclose(result.posteriors, 0.25, atol=1e-12)

    def test_appearing_person_gets_uniform_prior(self):
        # invisible then visible with uninformative obs: marginal lands at 0.5
        obs = [
            (np.array([0.5]), np.array([0])),
            (np.array([0.5]), np.array([1])),
        ]
        result = run_filter(obs)
        assert result.marginals[0, 0] == 0.0
        assert result.marginals[1, 0] == pytest.approx(0.5)

    def test_scale_guard_runtime(self):
        rng = np.random.default_rng(0)
        T, n = 1000, 6
        p, _ = random_filter_instance(rng, n, T)
        vis = np.ones((T, n), dtype=np.uint8)
        obs = [(p[t], vis[t]) for t in range(T)]
        start = time.perf_counter()
        result = run_filter(obs)
        elapsed = time.perf_counter() - start
        assert result.n_frames == T
        assert elapsed < 1.0
