"""
Unit tests for the masked PPO controller and its training loops
"""

import numpy as np
import pytest
import torch

from graphdream.agents.controller_agent import (
    Controller,
    ControllerDims,
    Transition,
    compute_gae,
    evaluate_real,
    masked_argmax,
    ppo_objective,
    ppo_update,
    train_in_dream,
    train_model_free,
)
from graphdream.env.environment import Action
from graphdream.exceptions import NoValidAction
from graphdream.models.world_model import WorldModel
from graphdream.nn.core import DTYPE
from graphdream.utils.seeding import make_torch_generator

pytestmark = pytest.mark.unit

DIMS = ControllerDims(latent_dim=3, wm_hidden=2, n_rules=4, location_cap=5, hidden=6)


def _zeros(*shape) -> torch.Tensor:
    return torch.zeros(shape, dtype=DTYPE)


@pytest.fixture
def controller() -> Controller:
    return Controller(DIMS, make_torch_generator(0, "controller"))


@pytest.fixture
def tiny_wm(tiny_config, rules) -> WorldModel:
    return WorldModel.from_config(tiny_config, len(rules), tiny_config.env.zoo_location_cap,
                                  make_torch_generator(0, "wm"))


class TestMaskedPolicy:
    """Action sampling under masks"""

    def setup_method(self):
        self.obs = np.linspace(-1.0, 1.0, DIMS.obs_dim)
        self.location_masks = np.ones((DIMS.n_rules, DIMS.location_cap), dtype=bool)

    def test_masked_transformations_are_never_sampled(self, controller, rng):
        mask = np.array([False, True, False, True, True])
        self.location_masks[1] = [False, False, True, False, True]
        for _ in range(300):
            action, _, _, _ = controller.act(self.obs, mask, self.location_masks, rng)
            assert mask[action.xfer_id]
            if action.xfer_id == 1:
                assert action.location in (2, 4)

    def test_only_noop_forces_noop(self, controller, rng):
        mask = np.array([False] * DIMS.n_rules + [True])
        action, logprob, _, output = controller.act(self.obs, mask, self.location_masks, rng)
        assert action == Action(DIMS.n_rules, 0)
        assert logprob == pytest.approx(0.0, abs=1e-12)
        assert output.location_logits is None

    def test_logprob_is_sum_of_head_logprobs(self, controller, rng):
        mask = np.array([True, True, False, True, True])
        for _ in range(20):
            action, logprob, value, _ = controller.act(self.obs, mask, self.location_masks, rng)
            joint, _, values = controller.evaluate_actions(
                torch.as_tensor(self.obs[None], dtype=DTYPE),
                torch.as_tensor(mask[None]),
                torch.as_tensor(self.location_masks[[min(action.xfer_id, DIMS.n_rules - 1)]]),
                torch.tensor([action.xfer_id]),
                torch.tensor([action.location]),
            )
            assert float(joint[0]) == pytest.approx(logprob, abs=1e-9)
            assert float(values[0]) == pytest.approx(value, abs=1e-12)

    def test_greedy_picks_best_valid_entries(self, controller, rng):
        mask = np.array([True, False, True, False, True])
        action, _, _, output = controller.act(self.obs, mask, self.location_masks, rng, greedy=True)
        assert action.xfer_id == masked_argmax(output.xfer_logits.numpy(), mask)
        again, _, _, _ = controller.act(self.obs, mask, self.location_masks, np.random.default_rng(99), greedy=True)
        assert again == action

    def test_masked_argmax_ignores_masked_maximum(self):
        assert masked_argmax(np.array([3.0, 1.0, 2.0]), np.array([False, True, True])) == 2

    @pytest.mark.parametrize("scale", [0.01, 1.0, 250.0])
    def test_argmax_invariant_to_positive_scaling(self, scale):
        logits = np.array([0.3, -1.2, 2.5, 0.9, 4.0])
        mask = np.array([True, True, True, True, False])
        assert masked_argmax(logits * scale, mask) == masked_argmax(logits, mask) == 2

    def test_empty_mask_raises(self, controller, rng):
        with pytest.raises(NoValidAction):
            controller.act(self.obs, np.zeros(DIMS.n_rules + 1, dtype=bool), self.location_masks, rng)

    def test_set_transformation_without_location_raises(self, controller, rng):
        mask = np.array([True, False, False, False, False])
        self.location_masks[0] = False
        with pytest.raises(NoValidAction):
            controller.act(self.obs, mask, self.location_masks, rng)

    def test_tau_unknown_without_meta(self, controller):
        assert controller.tau is None

    def test_checkpoint_round_trip(self, tmp_path, controller):
        controller.meta["tau"] = 1.5
        loaded = Controller.load(controller.save(tmp_path / "controller.pt"))
        assert loaded.dims == DIMS
        assert loaded.tau == 1.5
        for name in controller.store:
            assert torch.equal(loaded.store[name], controller.store[name].detach())


class TestPpoMath:
    """Clipped surrogate and advantage estimation"""

    def test_clipped_surrogate_values(self):
        logprob = torch.log(torch.tensor([1.5, 0.5], dtype=DTYPE))
        total, parts = ppo_objective(logprob, _zeros(2), torch.tensor([1.0, -1.0], dtype=DTYPE),
                                     _zeros(2), _zeros(2), _zeros(2), clip=0.2)
        # min(1.5, 1.2) = 1.2 and min(-0.5, -0.8) = -0.8
        assert float(parts["policy_loss"]) == pytest.approx(-(1.2 - 0.8) / 2)
        assert float(total) == pytest.approx(float(parts["policy_loss"]))

    def test_value_and_entropy_terms(self):
        total, parts = ppo_objective(_zeros(2), _zeros(2), _zeros(2), torch.tensor([1.0, 3.0], dtype=DTYPE),
                                     _zeros(2), torch.tensor([0.5, 1.5], dtype=DTYPE), clip=0.2,
                                     value_coef=0.5, entropy_coef=0.1)
        assert float(parts["value_loss"]) == pytest.approx(5.0)
        assert float(total) == pytest.approx(0.5 * 5.0 - 0.1 * 1.0)

    def test_gae_monte_carlo_limit(self):
        adv, returns = compute_gae([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [False, False, True], 1.0, 1.0)
        np.testing.assert_allclose(adv, [6.0, 5.0, 3.0])
        np.testing.assert_allclose(returns, [6.0, 5.0, 3.0])

    def test_gae_td_limit(self):
        adv, _ = compute_gae([1.0, 2.0], [0.5, 1.0], [False, True], 0.9, 0.0)
        np.testing.assert_allclose(adv, [1.0 + 0.9 * 1.0 - 0.5, 2.0 - 1.0])

    def test_gae_stops_at_episode_boundary(self):
        adv, _ = compute_gae([1.0, 1.0], [0.5, 0.5], [True, True], 0.9, 0.95)
        np.testing.assert_allclose(adv, [0.5, 0.5])

    def test_update_changes_policy(self, controller, tiny_config, rng):
        obs = np.linspace(-1.0, 1.0, DIMS.obs_dim)
        mask = np.ones(DIMS.n_rules + 1, dtype=bool)
        rows = np.ones((DIMS.n_rules, DIMS.location_cap), dtype=bool)
        batch = []
        for _ in range(6):
            action, logprob, value, _ = controller.act(obs, mask, rows, rng)
            reward = 1.0 if action.xfer_id == 0 else 0.0
            batch.append(Transition(obs, action, logprob, reward, value, True, mask, np.ones(DIMS.location_cap, bool)))
        before = {n: controller.store[n].detach().clone() for n in controller.store}
        stats = ppo_update(controller, batch, tiny_config.controller)
        assert set(stats) >= {"policy_loss", "value_loss", "entropy", "loss"}
        assert any(not torch.equal(before[n], controller.store[n]) for n in controller.store)

    def test_empty_batch_is_a_noop(self, controller, tiny_config):
        assert ppo_update(controller, [], tiny_config.controller) == {}


class TestTrainingLoops:
    """Dream training, model-free training and real evaluation"""

    def test_dream_training_uses_no_real_steps(self, tiny_wm, tiny_config, bert_env, rng):
        controller = Controller.for_world_model(tiny_wm, tiny_config.controller, make_torch_generator(0, "c"))
        result = train_in_dream(controller, tiny_wm, bert_env, 2, tiny_config.controller, 1.5, rng)
        assert result.real_steps_consumed == 0
        assert bert_env.real_steps == 0
        assert result.dream_steps > 0
        assert result.episodes == 2 * tiny_config.controller.episodes_per_update
        normalized = [row["min_max_normalized"] for row in result.trace]
        assert all(0.0 <= v <= 1.0 for v in normalized)

    def test_model_free_stops_at_target(self, tiny_wm, tiny_config, bert_env, rng):
        controller = Controller.for_world_model(tiny_wm, tiny_config.controller, make_torch_generator(0, "c"))
        result = train_model_free(controller, tiny_wm, bert_env, 5, tiny_config.controller, rng,
                                  target_reduction=-1e9)
        assert len(result.trace) == 1
        assert result.interactions_to_target == result.real_steps_consumed == bert_env.real_steps > 0

    def test_real_evaluation_report(self, tiny_wm, tiny_config, bert_env, rng):
        controller = Controller.for_world_model(tiny_wm, tiny_config.controller, make_torch_generator(0, "c"))
        report = evaluate_real(controller, tiny_wm, bert_env, 2, rng)
        assert report.method == "rl"
        assert report.episodes == 2
        assert report.real_interactions == bert_env.real_steps
        assert report.initial_cost == pytest.approx(bert_env.rt0)
        assert len(report.episode_rows) == 2


CHAIN_LENGTH = 5
CHAIN_HORIZON = 8
CHAIN_DIMS = ControllerDims(latent_dim=CHAIN_LENGTH, wm_hidden=1, n_rules=2, location_cap=1, hidden=16)
CHAIN_MASK = np.array([True, True, False])
CHAIN_ROWS = np.ones((3, 1), dtype=bool)


def _chain_obs(position: int) -> np.ndarray:
    obs = np.zeros(CHAIN_DIMS.obs_dim)
    obs[position] = 1.0
    return obs


def _chain_episode(choose) -> tuple:
    """Walk right (0) or left (1); reward 1 on reaching the last state"""
    position, transitions = 0, []
    for t in range(CHAIN_HORIZON):
        obs = _chain_obs(position)
        action, logprob, value = choose(obs)
        position = min(position + 1, CHAIN_LENGTH - 1) if action.xfer_id == 0 else max(position - 1, 0)
        reward = 1.0 if position == CHAIN_LENGTH - 1 else 0.0
        terminal = reward > 0 or t == CHAIN_HORIZON - 1
        transitions.append(Transition(obs, action, logprob, reward, value, terminal, CHAIN_MASK, CHAIN_ROWS[0]))
        if terminal:
            break
    return transitions, sum(t.reward for t in transitions)


@pytest.mark.slow
class TestPpoChainSanity:
    """PPO on a 5-state chain beats the uniform policy"""

    def test_trained_policy_beats_random(self, tiny_config):
        rng = np.random.default_rng(0)
        controller = Controller(CHAIN_DIMS, make_torch_generator(0, "chain"))
        settings = tiny_config.controller.model_copy(update={"lr": 1e-2, "update_epochs": 4})

        def policy(obs):
            action, logprob, value, _ = controller.act(obs, CHAIN_MASK, CHAIN_ROWS, rng)
            return action, logprob, value

        def uniform(obs):
            return Action(int(rng.integers(2)), 0), 0.0, 0.0

        for _ in range(200):
            batch = []
            for _ in range(8):
                batch.extend(_chain_episode(policy)[0])
            ppo_update(controller, batch, settings)

        trained = np.mean([_chain_episode(policy)[1] for _ in range(200)])
        random_return = np.mean([_chain_episode(uniform)[1] for _ in range(200)])
        assert trained > random_return
        assert trained > 0.8
