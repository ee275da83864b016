"""
Controller Agent - Two-headed masked PPO policy over [z, h], trained in the dream
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from graphdream.agents.base_agent import AgentType, BaseAgent, EpisodeResult, EvalReport, run_env_episode
from graphdream.config.settings import ControllerSettings
from graphdream.env.environment import Action, EnvState, GraphOptEnv
from graphdream.exceptions import DivergenceDetected, NoValidAction
from graphdream.models.world_model import DreamEnv, WorldModel, encode_action
from graphdream.monitoring.metrics import MetricsCollector
from graphdream.nn.checkpoint import load_checkpoint, save_checkpoint
from graphdream.nn.core import DTYPE, ParamStore, adam_update, add_dense, dense, entropy
from graphdream.utils.analytics import min_max_normalize, reduction_pct
from graphdream.utils.logging import get_logger, log_episode, log_training_epoch

logger = get_logger(__name__)

MASK_FILL = -1e9
PPO_GRAD_CLIP = 0.5
REWARD_TRACE_COLUMNS = ["epoch", "mean_reward", "mean_reward_norm", "min_max_normalized"]


@dataclass(frozen=True)
class ControllerDims:
    latent_dim: int
    wm_hidden: int
    n_rules: int
    location_cap: int
    hidden: int = 64

    @property
    def obs_dim(self) -> int:
        return self.latent_dim + self.wm_hidden


@dataclass
class PolicyOutput:
    xfer_logits: torch.Tensor  # (..., N+1), masked entries at MASK_FILL
    location_logits: Optional[torch.Tensor]  # (..., L) for the chosen xfer
    value: torch.Tensor  # (...,)


@dataclass
class Transition:
    obs: np.ndarray  # [z, h]
    action: Action
    logprob: float
    reward: float
    value: float
    terminal: bool
    xfer_mask: np.ndarray  # (N+1,)
    location_mask: np.ndarray  # (L,) row of the chosen xfer; all True for NO-OP


def masked_logits(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    return torch.where(mask, logits, torch.full_like(logits, MASK_FILL))


def masked_argmax(logits: np.ndarray, mask: np.ndarray) -> int:
    return int(np.argmax(np.where(mask, logits, -np.inf)))


class Controller:
    """
    Trunk: two tanh layers over [z, h]. Heads: xfer logits, location logits from
    trunk + one-hot(xfer), and a scalar value.
    """

    def __init__(self, dims: ControllerDims, generator: Optional[torch.Generator] = None,
                 meta: Optional[Dict[str, Any]] = None):
        self.dims = dims
        self.meta: Dict[str, Any] = dict(meta or {})
        self.store = ParamStore()
        d = dims
        add_dense(self.store, "ctrl.fc1", d.obs_dim, d.hidden, generator)
        add_dense(self.store, "ctrl.fc2", d.hidden, d.hidden, generator)
        add_dense(self.store, "ctrl.xfer", d.hidden, d.n_rules + 1, generator)
        add_dense(self.store, "ctrl.location", d.hidden + d.n_rules + 1, d.location_cap, generator)
        add_dense(self.store, "ctrl.value", d.hidden, 1, generator)

    @classmethod
    def for_world_model(cls, wm: WorldModel, settings: ControllerSettings,
                        generator: Optional[torch.Generator] = None) -> "Controller":
        dims = ControllerDims(wm.dims.latent_dim, wm.dims.hidden, wm.dims.n_rules,
                              wm.dims.location_cap, settings.hidden)
        return cls(dims, generator)

    @property
    def noop_id(self) -> int:
        return self.dims.n_rules

    def trunk(self, obs: torch.Tensor) -> torch.Tensor:
        return torch.tanh(dense(torch.tanh(dense(obs, self.store, "ctrl.fc1")), self.store, "ctrl.fc2"))

    def location_head(self, features: torch.Tensor, xfer_ids: torch.Tensor) -> torch.Tensor:
        onehot = F.one_hot(xfer_ids, self.dims.n_rules + 1).to(DTYPE)
        return dense(torch.cat([features, onehot], dim=-1), self.store, "ctrl.location")

    def forward(self, obs: torch.Tensor, xfer_mask: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(trunk features, masked xfer logits, value)"""
        features = self.trunk(obs)
        xfer = masked_logits(dense(features, self.store, "ctrl.xfer"), xfer_mask)
        value = dense(features, self.store, "ctrl.value")[..., 0]
        return features, xfer, value

    def act(self, obs: np.ndarray, xfer_mask: np.ndarray, location_masks: np.ndarray,
            rng: np.random.Generator, greedy: bool = False) -> Tuple[Action, float, float, PolicyOutput]:
        """
        Sample the xfer from the masked categorical, then the location conditioned on
        it; NO-OP skips the location draw and contributes no location logprob.
        """
        xfer_mask = np.asarray(xfer_mask, dtype=bool)
        if not xfer_mask.any():
            raise NoValidAction("every transformation and NO-OP are masked")
        with torch.no_grad():
            obs_t = torch.as_tensor(obs, dtype=DTYPE)
            features, xfer_logits, value = self.forward(obs_t, torch.as_tensor(xfer_mask))
            xfer_logp = torch.log_softmax(xfer_logits, dim=-1).numpy()
            if greedy:
                xfer_id = masked_argmax(xfer_logits.numpy(), xfer_mask)
            else:
                xfer_id = int(rng.choice(len(xfer_logp), p=_normalized(np.exp(xfer_logp))))
            logprob = float(xfer_logp[xfer_id])
            location, location_logits = 0, None
            if xfer_id != self.noop_id:
                row = np.asarray(location_masks[xfer_id], dtype=bool)
                if not row.any():
                    raise NoValidAction(f"transformation {xfer_id} is set but has no valid location")
                location_logits = masked_logits(
                    self.location_head(features, torch.tensor(xfer_id)), torch.as_tensor(row))
                loc_logp = torch.log_softmax(location_logits, dim=-1).numpy()
                if greedy:
                    location = masked_argmax(location_logits.numpy(), row)
                else:
                    location = int(rng.choice(len(loc_logp), p=_normalized(np.exp(loc_logp))))
                logprob += float(loc_logp[location])
        output = PolicyOutput(xfer_logits, location_logits, value)
        return Action(xfer_id, location), logprob, float(value), output

    def evaluate_actions(self, obs: torch.Tensor, xfer_masks: torch.Tensor, location_masks: torch.Tensor,
                         xfer_ids: torch.Tensor, locations: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Joint logprob, joint entropy and value for a batch of stored actions"""
        noop = xfer_ids == self.noop_id
        features, xfer_logits, value = self.forward(obs, xfer_masks)
        xfer_logp_all = torch.log_softmax(xfer_logits, dim=-1)
        xfer_logp = xfer_logp_all.gather(-1, xfer_ids.unsqueeze(-1))[..., 0]
        xfer_ent = entropy(torch.exp(xfer_logp_all))

        row_mask = torch.where(noop.unsqueeze(-1), torch.ones_like(location_masks), location_masks)
        loc_logits = masked_logits(self.location_head(features, xfer_ids), row_mask)
        loc_logp_all = torch.log_softmax(loc_logits, dim=-1)
        loc_logp = loc_logp_all.gather(-1, locations.unsqueeze(-1))[..., 0]
        loc_ent = entropy(torch.exp(loc_logp_all))

        has_location = (~noop).to(DTYPE)
        return xfer_logp + has_location * loc_logp, xfer_ent + has_location * loc_ent, value

    @property
    def tau(self) -> Optional[float]:
        """Dream temperature the controller was trained at, when known"""
        tau = self.meta.get("tau")
        return None if tau is None else float(tau)

    def save(self, path: Path) -> Path:
        return save_checkpoint(path, "controller", {"params": self.store}, dict(asdict(self.dims), **self.meta))

    @classmethod
    def load(cls, path: Path) -> "Controller":
        payload = load_checkpoint(path, "controller")
        fields = ControllerDims.__dataclass_fields__
        meta = payload["meta"]
        dims = ControllerDims(**{k: v for k, v in meta.items() if k in fields})
        controller = cls(dims, meta={k: v for k, v in meta.items() if k not in fields})
        controller.store.load_state_dict(payload["params"]["params"])
        return controller


def _normalized(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


# -- PPO ----------------------------------------------------------------------------


def compute_gae(rewards: Sequence[float], values: Sequence[float], terminals: Sequence[bool],
                gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimates and returns over a flat sequence of episodes; the
    value after a terminal step is zero.
    """
    n = len(rewards)
    advantages = np.zeros(n)
    gae = 0.0
    for t in reversed(range(n)):
        alive = 0.0 if terminals[t] else 1.0
        next_value = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_value * alive - values[t]
        gae = delta + gamma * lam * alive * gae
        advantages[t] = gae
    return advantages, advantages + np.asarray(values, dtype=np.float64)


def ppo_objective(logprob: torch.Tensor, old_logprob: torch.Tensor, advantages: torch.Tensor,
                  values: torch.Tensor, returns: torch.Tensor, entropies: torch.Tensor,
                  clip: float, value_coef: float = 0.5,
                  entropy_coef: float = 0.01) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    """Clipped surrogate + value MSE - entropy bonus (a loss to minimize)"""
    ratio = torch.exp(logprob - old_logprob)
    surrogate = torch.min(ratio * advantages, torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages)
    policy_loss = -surrogate.mean()
    value_loss = ((values - returns) ** 2).mean()
    entropy_mean = entropies.mean()
    total = policy_loss + value_coef * value_loss - entropy_coef * entropy_mean
    return total, {"policy_loss": policy_loss, "value_loss": value_loss, "entropy": entropy_mean}


def ppo_update(controller: Controller, batch: Sequence[Transition], settings: ControllerSettings) -> Dict[str, float]:
    """Full-batch PPO epochs over one batch collected with the current policy"""
    if not batch:
        return {}
    advantages, returns = compute_gae([t.reward for t in batch], [t.value for t in batch],
                                      [t.terminal for t in batch], settings.gamma, settings.gae_lambda)
    if len(advantages) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    obs = torch.as_tensor(np.stack([t.obs for t in batch]), dtype=DTYPE)
    xfer_masks = torch.as_tensor(np.stack([t.xfer_mask for t in batch]), dtype=torch.bool)
    location_masks = torch.as_tensor(np.stack([t.location_mask for t in batch]), dtype=torch.bool)
    xfer_ids = torch.as_tensor([t.action.xfer_id for t in batch], dtype=torch.long)
    locations = torch.as_tensor([t.action.location for t in batch], dtype=torch.long)
    old_logprob = torch.as_tensor([t.logprob for t in batch], dtype=DTYPE)
    adv_t = torch.as_tensor(advantages, dtype=DTYPE)
    ret_t = torch.as_tensor(returns, dtype=DTYPE)

    stats: Dict[str, float] = {}
    for _ in range(settings.update_epochs):
        controller.store.zero_grad()
        logprob, ent, values = controller.evaluate_actions(obs, xfer_masks, location_masks, xfer_ids, locations)
        total, parts = ppo_objective(logprob, old_logprob, adv_t, values, ret_t, ent,
                                     settings.clip, settings.value_coef, settings.entropy_coef)
        if not torch.isfinite(total):
            raise DivergenceDetected(f"PPO loss became {float(total)}")
        total.backward()
        controller.store.clip_grad_norm(PPO_GRAD_CLIP)
        adam_update(controller.store, settings.lr)
        stats = {k: float(v) for k, v in parts.items()}
        stats["loss"] = float(total)
    return stats


def _location_row(location_masks: np.ndarray, action: Action, noop_id: int) -> np.ndarray:
    if action.xfer_id == noop_id:
        return np.ones(location_masks.shape[-1], dtype=bool)
    return np.asarray(location_masks[action.xfer_id], dtype=bool)


# -- observation of the real environment -----------------------------------------------


class RealObserver:
    """
    Builds [z, h] for a real episode: z from the world model's encoder, h from its
    LSTM fed the real latents and actions as they happen.
    """

    def __init__(self, wm: WorldModel):
        self.wm = wm
        self.lstm = wm.initial_state()
        self.z = torch.zeros(wm.dims.latent_dim, dtype=DTYPE)

    def reset(self, state: EnvState) -> np.ndarray:
        with torch.no_grad():
            self.lstm = self.wm.initial_state()
            self.z = self.wm.encode(state.graph_tuple)
        return self.obs()

    def advance(self, action: Action, state: EnvState) -> np.ndarray:
        with torch.no_grad():
            _, self.lstm = self.wm.forward(self.z, encode_action(action, self.wm.dims), self.lstm)
            self.z = self.wm.encode(state.graph_tuple)
        return self.obs()

    def obs(self) -> np.ndarray:
        return torch.cat([self.z, self.lstm.h]).numpy()


# -- training loops ---------------------------------------------------------------------


@dataclass
class ControllerTrainResult:
    trace: List[Dict[str, float]] = field(default_factory=list)
    real_steps_consumed: int = 0
    dream_steps: int = 0
    episodes: int = 0
    interactions_to_target: Optional[int] = None

    def finalize(self):
        """Fill the min-max normalized column of the reward trace"""
        for row, value in zip(self.trace, min_max_normalize([r["mean_reward"] for r in self.trace])):
            row["min_max_normalized"] = value


def _dream_episode(controller: Controller, dream: DreamEnv, rng: np.random.Generator) -> List[Transition]:
    state = dream.reset()
    transitions = []
    terminal = False
    while not terminal:
        obs = np.concatenate([state.z, state.h])
        action, logprob, value, _ = controller.act(obs, state.xfer_mask, state.location_masks, rng)
        result = dream.step(action)
        transitions.append(Transition(obs, action, logprob, result.reward, value, result.terminal,
                                      state.xfer_mask.copy(),
                                      _location_row(state.location_masks, action, controller.noop_id)))
        state, terminal = result.next_state, result.terminal
    return transitions


def train_in_dream(controller: Controller, wm: WorldModel, env: GraphOptEnv, epochs: int,
                   settings: ControllerSettings, tau: float, rng: np.random.Generator,
                   metrics: Optional[MetricsCollector] = None, log_every: int = 50) -> ControllerTrainResult:
    """
    PPO entirely inside the world model. The real env only supplies the initial graph
    and its masks; its step counter does not move.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    dream = DreamEnv.from_real(wm, env, tau, rng, metrics)
    result = ControllerTrainResult()
    real_before, dream_before = env.real_steps, wm.dream_steps

    for epoch in range(epochs):
        batch: List[Transition] = []
        returns = []
        for _ in range(settings.episodes_per_update):
            episode = _dream_episode(controller, dream, rng)
            returns.append(sum(t.reward for t in episode))
            batch.extend(episode)
        result.episodes += len(returns)
        stats = ppo_update(controller, batch, settings)
        mean_reward = float(np.mean(returns))
        result.trace.append({"epoch": epoch, "mean_reward": mean_reward,
                             "mean_reward_norm": env.normalized(mean_reward), "min_max_normalized": 0.0})
        if metrics is not None:
            metrics.set_controller_reward(mean_reward)
        if epoch % log_every == 0 or epoch == epochs - 1:
            log_training_epoch("controller_dream", epoch, {"mean_reward": mean_reward, **stats})

    result.finalize()
    result.real_steps_consumed = env.real_steps - real_before
    result.dream_steps = wm.dream_steps - dream_before
    return result


def _real_episode(controller: Controller, observer: RealObserver, env: GraphOptEnv,
                  rng: np.random.Generator) -> Tuple[List[Transition], float]:
    state = env.reset()
    obs = observer.reset(state)
    transitions = []
    terminal = False
    while not terminal:
        action, logprob, value, _ = controller.act(obs, state.full_xfer_mask, state.location_masks, rng)
        result = env.step(action)
        transitions.append(Transition(obs, action, logprob, result.reward, value, result.terminal,
                                      state.full_xfer_mask,
                                      _location_row(state.location_masks, action, controller.noop_id)))
        state, terminal = result.next_state, result.terminal
        if not terminal:
            obs = observer.advance(action, state)
    return transitions, env.current_cost().runtime_est


def train_model_free(controller: Controller, wm: WorldModel, env: GraphOptEnv, epochs: int,
                     settings: ControllerSettings, rng: np.random.Generator,
                     target_reduction: Optional[float] = None,
                     metrics: Optional[MetricsCollector] = None, log_every: int = 50) -> ControllerTrainResult:
    """
    The same PPO agent trained on real-environment episodes. `wm` is used only as a
    frozen observation encoder. With `target_reduction` (percent) training stops at
    the first update whose episodes reach it on average, and the real interactions
    spent so far are recorded.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    observer = RealObserver(wm)
    result = ControllerTrainResult()
    real_before = env.real_steps

    for epoch in range(epochs):
        batch: List[Transition] = []
        returns, reductions = [], []
        for _ in range(settings.episodes_per_update):
            episode, final_cost = _real_episode(controller, observer, env, rng)
            returns.append(sum(t.reward for t in episode))
            reductions.append(reduction_pct(env.rt0, final_cost))
            batch.extend(episode)
        result.episodes += len(returns)
        stats = ppo_update(controller, batch, settings)
        mean_reward = float(np.mean(returns))
        mean_reduction = float(np.mean(reductions))
        result.trace.append({"epoch": epoch, "mean_reward": mean_reward,
                             "mean_reward_norm": env.normalized(mean_reward), "min_max_normalized": 0.0,
                             "mean_reduction_pct": mean_reduction,
                             "real_interactions": env.real_steps - real_before})
        if metrics is not None:
            metrics.set_controller_reward(mean_reward)
        if epoch % log_every == 0 or epoch == epochs - 1:
            log_training_epoch("controller_real", epoch, {"mean_reward": mean_reward, **stats})
        if target_reduction is not None and mean_reduction >= target_reduction:
            result.interactions_to_target = env.real_steps - real_before
            break

    result.finalize()
    result.real_steps_consumed = env.real_steps - real_before
    return result


# -- agent ------------------------------------------------------------------------------


class ControllerAgent(BaseAgent):
    """Runs a trained controller in the real environment, with h from the world model"""

    def __init__(self, controller: Controller, wm: WorldModel, greedy: bool = True):
        super().__init__(AgentType.RL, {"greedy": greedy})
        self.controller = controller
        self.wm = wm
        self.greedy = greedy

    def run_episode(self, env: GraphOptEnv, rng: np.random.Generator) -> EpisodeResult:
        observer = RealObserver(self.wm)
        last: Dict[str, Any] = {}

        def policy(state: EnvState) -> Action:
            if "action" in last:
                obs = observer.advance(last["action"], state)
            else:
                obs = observer.reset(state)
            action, _, _, _ = self.controller.act(obs, state.full_xfer_mask, state.location_masks,
                                                  rng, greedy=self.greedy)
            last["action"] = action
            return action

        result = run_env_episode(env, policy, self.agent_type.value)
        log_episode("eval", self.run_count, result.steps, result.episode_return, result.final_cost)
        return result


def evaluate_real(controller: Controller, wm: WorldModel, env: GraphOptEnv, episodes: int,
                  rng: np.random.Generator, greedy: bool = True) -> EvalReport:
    return ControllerAgent(controller, wm, greedy).evaluate(env, episodes, rng)
