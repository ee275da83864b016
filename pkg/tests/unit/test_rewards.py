"""
Unit tests for reward functions and the telescoping property of the incremental reward
"""

import pytest

from graphdream.env.environment import GraphOptEnv
from graphdream.env.rewards import REWARD_PRESETS, reward_combined, reward_incremental
from graphdream.models.rollouts import uniform_valid_action

pytestmark = pytest.mark.unit

INCREMENTAL_CASES = [
    # rt_prev, rt_curr, valid, penalty, expected
    (10.0, 7.5, True, -100.0, 2.5),
    (5.0, 5.0, True, -100.0, 0.0),
    (3.0, 4.5, True, -100.0, -1.5),
    (0.0, 0.0, True, -100.0, 0.0),
    (1e-3, 4e-4, True, -100.0, 6e-4),
    (10.0, 7.5, False, -100.0, -100.0),
    (2.0, 1.0, False, -100.0, -100.0),
    (100.0, 0.5, True, -100.0, 99.5),
    (7.25, 7.0, True, -100.0, 0.25),
    (1.0, 2.0, False, -5.0, -5.0),
]

COMBINED_CASES = [
    # rt_prev, rt_curr, m_prev, m_curr, alpha, beta, valid, expected
    (10.0, 8.0, 100.0, 90.0, 0.8, 0.2, True, 3.6),
    (10.0, 8.0, 100.0, 90.0, 1.0, 0.0, True, 2.0),
    (10.0, 8.0, 100.0, 90.0, 0.0, 1.0, True, 10.0),
    (5.0, 6.0, 50.0, 40.0, 0.5, 0.5, True, 4.5),
    (5.0, 5.0, 50.0, 50.0, 0.8, 0.2, True, 0.0),
    (5.0, 4.0, 50.0, 60.0, 0.1, 0.9, True, -8.9),
    (3.0, 1.0, 10.0, 10.0, 0.8, 0.2, False, -100.0),
    (1.0, 0.5, 8.0, 4.0, 1.0, 0.0, False, -100.0),
    (2.0, 1.0, 30.0, 20.0, 0.25, 0.75, True, 7.75),
    (4.0, 4.5, 12.0, 16.0, 0.6, 0.4, True, -1.9),
]


class TestRewardTables:
    """Closed-form reward values"""

    @pytest.mark.parametrize("rt_prev,rt_curr,valid,penalty,expected", INCREMENTAL_CASES)
    def test_incremental(self, rt_prev, rt_curr, valid, penalty, expected):
        assert reward_incremental(rt_prev, rt_curr, valid, penalty) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("rt_prev,rt_curr,m_prev,m_curr,alpha,beta,valid,expected", COMBINED_CASES)
    def test_combined(self, rt_prev, rt_curr, m_prev, m_curr, alpha, beta, valid, expected):
        got = reward_combined(rt_prev, rt_curr, m_prev, m_curr, alpha, beta, valid)
        assert got == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("rt_prev,rt_curr", [(10.0, 8.0), (3.0, 3.5), (1.0, 1.0)])
    def test_alpha_one_reduces_to_incremental(self, rt_prev, rt_curr):
        combined = reward_combined(rt_prev, rt_curr, 40.0, 25.0, 1.0, 0.0, True)
        assert combined == reward_incremental(rt_prev, rt_curr, True)

    def test_presets_are_normalized(self):
        for preset in REWARD_PRESETS.values():
            assert preset.alpha + preset.beta == pytest.approx(1.0)
        assert REWARD_PRESETS["combined_tuned"].as_overrides()["env"]["alpha"] == 0.8


class TestTelescopingReturn:
    """Undiscounted incremental return equals the total runtime drop"""

    def test_random_episodes(self, bert_env, rng):
        for _ in range(100):
            bert_env.reset()
            total = 0.0
            terminal = False
            while not terminal:
                result = bert_env.step(uniform_valid_action(bert_env, rng))
                total += result.reward
                terminal = result.terminal
            assert total == pytest.approx(bert_env.rt0 - bert_env.current_cost().runtime_est, abs=1e-9)

    def test_combined_reward_episode(self, tiny_config, rules, add_chain_graph, rng):
        settings = tiny_config.env.model_copy(update={"reward_kind": "combined", "alpha": 0.8, "beta": 0.2})
        env = GraphOptEnv(add_chain_graph, rules, settings, location_cap=4)
        env.reset()
        total = 0.0
        terminal = False
        while not terminal:
            result = env.step(uniform_valid_action(env, rng))
            total += result.reward
            terminal = result.terminal
        final = env.current_cost()
        expected = 0.8 * (env.rt0 - final.runtime_est) + 0.2 * (env.m0 - final.mem_accesses)
        assert total == pytest.approx(expected, abs=1e-9)
