"""
Unit tests for the MDN-RNN world model and the dream environment
"""

import math

import numpy as np
import pytest
import torch

from graphdream.agents.controller_agent import Controller
from graphdream.env.environment import Action
from graphdream.exceptions import CheckpointError, EpisodeFinished
from graphdream.models.rollouts import collect_random_rollouts, collect_rollout, pad_rollouts
from graphdream.models.world_model import (
    DreamEnv,
    GmmOutput,
    WorldModel,
    WorldModelDims,
    binarize_masks,
    encode_action,
    evaluate_one_step,
    nll_loss,
    sample_next_z,
    train_wm,
    wm_loss,
)
from graphdream.monitoring.metrics import MetricsCollector
from graphdream.nn.core import DTYPE, ParamStore, adam_update
from graphdream.utils.seeding import make_torch_generator

pytestmark = pytest.mark.unit


def _gmm_of(pi_logits: torch.Tensor, mu: torch.Tensor, sigma: torch.Tensor) -> GmmOutput:
    return GmmOutput(pi_logits, mu, sigma, torch.zeros(()), torch.zeros(()), torch.zeros(1), torch.zeros(1, 1))


def _gmm(pi_logits, mu, sigma) -> GmmOutput:
    return _gmm_of(*(torch.as_tensor(v, dtype=DTYPE) for v in (pi_logits, mu, sigma)))


@pytest.fixture
def tiny_wm(tiny_config, rules) -> WorldModel:
    return WorldModel.from_config(tiny_config, len(rules), tiny_config.env.zoo_location_cap,
                                  make_torch_generator(0, "wm"))


class TestMixtureDensity:
    """Closed-form likelihood and sampling"""

    def test_single_gaussian_nll(self):
        gmm = _gmm([0.0], [[0.0, 1.0]], [[1.0, 2.0]])
        z = torch.tensor([0.5, 0.0], dtype=DTYPE)
        expected = 0.5 * 0.25 + 0.5 * 0.25 + math.log(2.0) + math.log(2 * math.pi)
        assert float(nll_loss(gmm, z)) == pytest.approx(expected, rel=1e-12)

    def test_two_component_nll(self):
        gmm = _gmm([0.0, math.log(3.0)], [[0.0], [2.0]], [[1.0], [1.0]])
        z = torch.tensor([1.0], dtype=DTYPE)
        density = 0.25 * math.exp(-0.5) / math.sqrt(2 * math.pi) + 0.75 * math.exp(-0.5) / math.sqrt(2 * math.pi)
        assert float(nll_loss(gmm, z)) == pytest.approx(-math.log(density), rel=1e-12)

    def test_component_frequencies(self):
        rng = np.random.default_rng(0)
        gmm = _gmm([0.0, math.log(3.0)], [[-100.0], [100.0]], [[1.0], [1.0]])
        n = 100_000
        high = sum(sample_next_z(gmm, 1.0, rng)[0] > 0 for _ in range(n))
        assert abs(high / n - 0.75) < 0.01

    def test_temperature_flattens_mixture(self):
        rng = np.random.default_rng(1)
        gmm = _gmm([0.0, math.log(9.0)], [[-100.0], [100.0]], [[1.0], [1.0]])
        n = 20_000
        high = sum(sample_next_z(gmm, 2.0, rng)[0] > 0 for _ in range(n))
        assert abs(high / n - 0.75) < 0.02

    def test_training_recovers_known_mixture(self):
        rng = np.random.default_rng(3)
        n = 4000
        means = np.where(rng.random(n) < 0.4, -2.0, 3.0)
        z = torch.as_tensor(means + 0.5 * rng.standard_normal(n), dtype=DTYPE).unsqueeze(-1)

        store = ParamStore()
        store.add("pi", (2,), 1)
        store.add("mu", (2, 1), 1)
        store.add("log_sigma", (2, 1), 1)
        with torch.no_grad():
            store["pi"].zero_()
            store["mu"].copy_(torch.tensor([[-1.0], [1.0]], dtype=DTYPE))
            store["log_sigma"].zero_()
        for _ in range(1500):
            store.zero_grad()
            gmm = _gmm_of(store["pi"], store["mu"], torch.exp(store["log_sigma"]))
            nll_loss(gmm, z).mean().backward()
            adam_update(store, 0.05)

        mu = sorted(float(m) for m in store["mu"].detach().flatten())
        assert mu[0] == pytest.approx(-2.0, abs=0.1)
        assert mu[1] == pytest.approx(3.0, abs=0.1)
        pi = torch.softmax(store["pi"].detach(), dim=-1)
        assert float(pi.min()) == pytest.approx(0.4, abs=0.05)

    def test_temperature_widens_sample_spread(self):
        rng = np.random.default_rng(2)
        gmm = _gmm([0.0], [[0.0]], [[1.0]])
        samples = np.array([sample_next_z(gmm, 4.0, rng)[0] for _ in range(20_000)])
        assert samples.std() == pytest.approx(2.0, rel=0.05)


class TestWorldModelNetwork:
    """Shapes, action encoding and persistence"""

    def test_forward_shapes(self, tiny_wm):
        d = tiny_wm.dims
        z = torch.zeros(d.latent_dim, dtype=DTYPE)
        gmm, state = tiny_wm.forward(z, Action(0, 3), tiny_wm.initial_state())
        assert gmm.mu.shape == (d.gaussians, d.latent_dim)
        assert gmm.xfer_mask_logits.shape == (d.n_rules + 1,)
        assert gmm.location_mask_logits.shape == (d.n_rules, d.location_cap)
        assert state.h.shape == (d.hidden,)
        assert float(gmm.sigma.min()) >= d.sigma_floor

    def test_noop_has_no_location_bucket(self, tiny_wm):
        d = tiny_wm.dims
        vec = encode_action(Action(d.n_rules, 5), d)
        assert float(vec.sum()) == 1.0
        assert float(encode_action(Action(0, 5), d).sum()) == 2.0

    def test_location_buckets_wrap(self):
        dims = WorldModelDims(latent_dim=2, hidden=2, gaussians=1, n_rules=3, location_cap=64, location_buckets=32)
        assert torch.equal(encode_action(Action(1, 33), dims), encode_action(Action(1, 1), dims))

    def test_save_load_round_trip(self, tmp_path, tiny_wm):
        tiny_wm.reward_scale = 0.25
        path = tiny_wm.save(tmp_path / "world_model.pt")
        loaded = WorldModel.load(path)
        assert loaded.dims == tiny_wm.dims
        assert loaded.reward_scale == 0.25
        for name in tiny_wm.store:
            assert torch.equal(loaded.store[name], tiny_wm.store[name].detach())

    def test_load_rejects_controller_checkpoint(self, tmp_path, tiny_wm, tiny_config):
        path = Controller.for_world_model(tiny_wm, tiny_config.controller).save(tmp_path / "c.pt")
        with pytest.raises(CheckpointError):
            WorldModel.load(path)


class TestWorldModelTraining:
    """Loss, padding and the online training loop"""

    def test_padding_does_not_leak_into_loss(self, tiny_wm, tiny_config, bert_env, rng):
        rollouts = collect_random_rollouts(bert_env, 2, rng)
        while len(rollouts[0]) == len(rollouts[1]):
            rollouts[1] = collect_rollout(bert_env, rng)
        short, long_ = sorted(rollouts, key=len)

        _, together = wm_loss(tiny_wm, [short, long_], tiny_config.wm)
        _, alone_short = wm_loss(tiny_wm, [short], tiny_config.wm)
        _, alone_long = wm_loss(tiny_wm, [long_], tiny_config.wm)
        n_s, n_l = len(short), len(long_)
        for part, value in together.items():
            expected = (alone_short[part] * n_s + alone_long[part] * n_l) / (n_s + n_l)
            assert value == pytest.approx(expected, rel=1e-9), part

    def test_pad_lengths(self, bert_env, rng):
        rollouts = collect_random_rollouts(bert_env, 4, rng)
        longest = pad_rollouts(rollouts)
        assert all(len(r) + r.pad_length == longest for r in rollouts)
        assert all(len(r.observations) == len(r) + 1 for r in rollouts)

    def test_loss_parts_are_finite(self, tiny_wm, tiny_config, bert_env, rng):
        total, parts = wm_loss(tiny_wm, collect_random_rollouts(bert_env, 2, rng), tiny_config.wm)
        assert torch.isfinite(total)
        assert set(parts) == {"nll", "reward_mse", "terminal_bce", "mask_bce"}

    def test_train_records_trace_and_interactions(self, tiny_wm, tiny_config, bert_env, rng):
        metrics = MetricsCollector()
        result = train_wm(tiny_wm, bert_env, 3, tiny_config.wm, rng, metrics)
        assert [row["epoch"] for row in result.trace] == [0, 1, 2]
        assert result.rollouts == 3 * tiny_config.wm.batch_rollouts
        assert result.real_interactions == bert_env.real_steps > 0
        assert tiny_wm.reward_scale == bert_env.rt0
        assert b"wm_loss" in metrics.get_metrics()

    def test_train_rejects_zero_epochs(self, tiny_wm, tiny_config, bert_env, rng):
        with pytest.raises(ValueError):
            train_wm(tiny_wm, bert_env, 0, tiny_config.wm, rng)

    def test_one_step_evaluation(self, tiny_wm, bert_env, rng):
        report = evaluate_one_step(tiny_wm, collect_random_rollouts(bert_env, 2, rng))
        assert report["steps"] > 0
        assert report["model_error"] >= 0 and report["persistence_error"] >= 0


class TestDream:
    """Mask binarization and the dream environment"""

    def test_binarize_keeps_noop_and_consistency(self):
        xfer = np.array([0.9, 0.9, 0.1, 0.2])
        location = np.array([[0.7, 0.2], [0.1, 0.3], [0.8, 0.9]])
        x, loc = binarize_masks(xfer, location)
        assert x.tolist() == [True, False, False, True]
        assert loc.tolist() == [[True, False], [False, False], [False, False]]

    def test_dream_consumes_no_real_steps(self, tiny_wm, bert_env):
        before = bert_env.real_steps
        dream = DreamEnv.from_real(tiny_wm, bert_env, 1.0, np.random.default_rng(0))
        state = dream.reset()
        terminal = False
        while not terminal:
            rows = np.flatnonzero(state.xfer_mask[:-1])
            action = Action(int(rows[0]), int(np.flatnonzero(state.location_masks[rows[0]])[0])) if rows.size \
                else Action(tiny_wm.dims.n_rules)
            result = dream.step(action)
            state, terminal = result.next_state, result.terminal
        assert bert_env.real_steps == before
        assert tiny_wm.dream_steps > 0

    def test_initial_dream_state_matches_real_masks(self, tiny_wm, bert_env):
        real = bert_env.reset()
        dream = DreamEnv.from_real(tiny_wm, bert_env, 1.0, np.random.default_rng(0))
        state = dream.reset()
        np.testing.assert_array_equal(state.xfer_mask, real.full_xfer_mask)
        np.testing.assert_array_equal(state.location_masks, real.location_masks)
        assert state.h.shape == (tiny_wm.dims.hidden,)

    def test_dream_noop_terminates_with_zero_reward(self, tiny_wm, bert_env):
        dream = DreamEnv.from_real(tiny_wm, bert_env, 1.0, np.random.default_rng(0))
        dream.reset()
        result = dream.step(Action(tiny_wm.dims.n_rules))
        assert (result.reward, result.terminal) == (0.0, True)
        with pytest.raises(EpisodeFinished):
            dream.step(Action(tiny_wm.dims.n_rules))

    def test_dream_masks_always_allow_noop(self, tiny_wm, bert_env):
        dream = DreamEnv.from_real(tiny_wm, bert_env, 1.5, np.random.default_rng(3))
        state = dream.reset()
        rows = np.flatnonzero(state.xfer_mask[:-1])
        result = dream.step(Action(int(rows[0]), int(np.flatnonzero(state.location_masks[rows[0]])[0])))
        assert result.next_state.xfer_mask[-1]
        assert result.next_state.step_index == 1
