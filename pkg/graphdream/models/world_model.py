"""
World Model - MDN-RNN over graph latents with reward, terminal and mask heads, and its dream
"""

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from graphdream.config.settings import RunConfig, WorldModelSettings
from graphdream.embed.gnn import GraphTuple, batch, encode, gnn_forward_batch, init_gnn
from graphdream.env.base import Env
from graphdream.env.environment import Action, GraphOptEnv, StepResult
from graphdream.exceptions import DivergenceDetected, EpisodeFinished
from graphdream.models.rollouts import Rollout, collect_random_rollouts, pad_rollouts
from graphdream.monitoring.metrics import MetricsCollector, PerformanceMonitor
from graphdream.nn.checkpoint import load_checkpoint, save_checkpoint
from graphdream.nn.core import (
    DTYPE,
    LstmState,
    ParamStore,
    adam_update,
    add_dense,
    add_lstm,
    dense,
    lstm_step,
    poly_decay_lr,
    softmax_t,
)
from graphdream.rules.masks import compute_masks
from graphdream.utils.logging import get_logger, log_training_epoch

logger = get_logger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
LOSS_COLUMNS = ["epoch", "nll", "reward_mse", "terminal_bce", "mask_bce", "lr"]


@dataclass(frozen=True)
class WorldModelDims:
    latent_dim: int
    hidden: int
    gaussians: int
    n_rules: int
    location_cap: int
    location_buckets: int = 32
    gnn_hidden: int = 64
    gnn_rounds: int = 3
    sigma_floor: float = 1e-4

    @property
    def action_dim(self) -> int:
        return self.n_rules + 1 + self.location_buckets

    @property
    def input_dim(self) -> int:
        return self.latent_dim + self.action_dim


def encode_action(action: Action, dims: WorldModelDims) -> torch.Tensor:
    """one-hot(xfer) over N+1 followed by one-hot(location bucket); NO-OP leaves the bucket empty"""
    vec = torch.zeros(dims.action_dim, dtype=DTYPE)
    vec[action.xfer_id] = 1.0
    if action.xfer_id != dims.n_rules:
        vec[dims.n_rules + 1 + action.location % dims.location_buckets] = 1.0
    return vec


@dataclass
class GmmOutput:
    """Mixture parameters and auxiliary head outputs for one (or a batch of) step(s)"""
    pi_logits: torch.Tensor  # (..., G)
    mu: torch.Tensor  # (..., G, Z)
    sigma: torch.Tensor  # (..., G, Z)
    reward_hat: torch.Tensor  # (...,) normalized by the model's reward scale
    terminal_logit: torch.Tensor  # (...,)
    xfer_mask_logits: torch.Tensor  # (..., N+1)
    location_mask_logits: torch.Tensor  # (..., N, L)

    @property
    def pi(self) -> torch.Tensor:
        return torch.softmax(self.pi_logits, dim=-1)

    @property
    def terminal_hat(self) -> torch.Tensor:
        return torch.sigmoid(self.terminal_logit)

    @property
    def xfer_mask_hat(self) -> torch.Tensor:
        return torch.sigmoid(self.xfer_mask_logits)

    @property
    def location_mask_hat(self) -> torch.Tensor:
        return torch.sigmoid(self.location_mask_logits)

    def mean(self) -> torch.Tensor:
        """Mixture mean E[z_next]"""
        return (self.pi.unsqueeze(-1) * self.mu).sum(dim=-2)


class WorldModel:
    """
    Graph encoder and MDN-RNN sharing one ParamStore, plus interaction counters
    """

    def __init__(self, dims: WorldModelDims, generator: Optional[torch.Generator] = None):
        self.dims = dims
        self.store = ParamStore()
        self.reward_scale = 1.0
        self.dream_steps = 0
        d = dims
        init_gnn(self.store, d.gnn_hidden, d.latent_dim, d.gnn_rounds, generator)
        add_lstm(self.store, "wm.lstm", d.input_dim, d.hidden, generator)
        add_dense(self.store, "wm.pi", d.hidden, d.gaussians, generator)
        add_dense(self.store, "wm.mu", d.hidden, d.gaussians * d.latent_dim, generator)
        add_dense(self.store, "wm.sigma", d.hidden, d.gaussians * d.latent_dim, generator)
        add_dense(self.store, "wm.reward", d.hidden, 1, generator)
        add_dense(self.store, "wm.terminal", d.hidden, 1, generator)
        add_dense(self.store, "wm.xfer_mask", d.hidden, d.n_rules + 1, generator)
        add_dense(self.store, "wm.location_mask", d.hidden, d.n_rules * d.location_cap, generator)

    @classmethod
    def from_config(cls, config: RunConfig, n_rules: int, location_cap: int,
                    generator: Optional[torch.Generator] = None) -> "WorldModel":
        dims = WorldModelDims(
            latent_dim=config.embed.latent_dim,
            hidden=config.wm.hidden,
            gaussians=config.wm.gaussians,
            n_rules=n_rules,
            location_cap=location_cap,
            location_buckets=config.wm.location_buckets,
            gnn_hidden=config.embed.hidden,
            gnn_rounds=config.embed.rounds,
            sigma_floor=config.wm.sigma_floor,
        )
        return cls(dims, generator)

    def encode(self, tuples: Union[GraphTuple, Sequence[GraphTuple]]) -> torch.Tensor:
        """Latent(s) for graph tuple(s); (Z,) for one tuple, (B, Z) for a list"""
        if isinstance(tuples, GraphTuple):
            return gnn_forward_batch(batch([tuples]), self.store, self.dims.gnn_rounds)[0]
        return gnn_forward_batch(batch(list(tuples)), self.store, self.dims.gnn_rounds)

    def initial_state(self, batch_size: Optional[int] = None) -> LstmState:
        return LstmState.zeros(self.dims.hidden, batch_size)

    def forward(self, z: torch.Tensor, action: Union[Action, torch.Tensor],
                state: LstmState) -> Tuple[GmmOutput, LstmState]:
        return wm_forward(z, action, state, self.store, self.dims)

    def save(self, path: Path) -> Path:
        meta = dict(asdict(self.dims), reward_scale=self.reward_scale)
        return save_checkpoint(path, "world_model", {"params": self.store}, meta)

    @classmethod
    def load(cls, path: Path) -> "WorldModel":
        payload = load_checkpoint(path, "world_model")
        meta = dict(payload["meta"])
        reward_scale = float(meta.pop("reward_scale", 1.0))
        model = cls(WorldModelDims(**meta))
        model.store.load_state_dict(payload["params"]["params"])
        model.reward_scale = reward_scale
        return model


def wm_forward(z: torch.Tensor, action: Union[Action, torch.Tensor], state: LstmState,
               store: ParamStore, dims: WorldModelDims) -> Tuple[GmmOutput, LstmState]:
    """One LSTM step over [z, action] followed by the mixture and auxiliary heads"""
    if isinstance(action, tuple):
        action = encode_action(Action(*action), dims)
    new_state = lstm_step(torch.cat([z, action], dim=-1), state, store, "wm.lstm")
    h = new_state.h
    lead = h.shape[:-1]
    G, Z = dims.gaussians, dims.latent_dim
    gmm = GmmOutput(
        pi_logits=dense(h, store, "wm.pi"),
        mu=dense(h, store, "wm.mu").reshape(*lead, G, Z),
        sigma=(F.softplus(dense(h, store, "wm.sigma")) + dims.sigma_floor).reshape(*lead, G, Z),
        reward_hat=dense(h, store, "wm.reward")[..., 0],
        terminal_logit=dense(h, store, "wm.terminal")[..., 0],
        xfer_mask_logits=dense(h, store, "wm.xfer_mask"),
        location_mask_logits=dense(h, store, "wm.location_mask").reshape(*lead, dims.n_rules, dims.location_cap),
    )
    return gmm, new_state


def nll_loss(gmm: GmmOutput, z_next: torch.Tensor) -> torch.Tensor:
    """-log sum_g pi_g prod_d N(z_d; mu_gd, sigma_gd), via log-sum-exp; shape (...)"""
    z = z_next.unsqueeze(-2)
    log_comp = (-0.5 * ((z - gmm.mu) / gmm.sigma) ** 2 - torch.log(gmm.sigma) - 0.5 * LOG_2PI).sum(dim=-1)
    return -torch.logsumexp(torch.log_softmax(gmm.pi_logits, dim=-1) + log_comp, dim=-1)


def sample_next_z(gmm: GmmOutput, tau: float, rng: np.random.Generator) -> np.ndarray:
    """
    Component from softmax(pi_logits / tau), then z ~ N(mu_g, sigma_g * sqrt(tau))
    """
    probs = softmax_t(gmm.pi_logits.detach(), tau).numpy()
    g = int(rng.choice(len(probs), p=probs / probs.sum()))
    mu = gmm.mu[g].detach().numpy()
    sigma = gmm.sigma[g].detach().numpy()
    return mu + sigma * math.sqrt(tau) * rng.standard_normal(mu.shape[-1])


# -- training -------------------------------------------------------------------


def _sequence_tensors(wm: WorldModel, rollouts: Sequence[Rollout]) -> Dict[str, torch.Tensor]:
    dims = wm.dims
    T = pad_rollouts(rollouts)
    B = len(rollouts)
    tuples = [gt for r in rollouts for gt in r.observations]
    z_flat = wm.encode(tuples)

    z_rows = []
    offset = 0
    for r in rollouts:
        zr = z_flat[offset: offset + len(r) + 1]
        offset += len(r) + 1
        if r.pad_length:
            zr = torch.cat([zr, torch.zeros((r.pad_length, dims.latent_dim), dtype=DTYPE)])
        z_rows.append(zr)

    actions = torch.zeros((B, T, dims.action_dim), dtype=DTYPE)
    rewards = torch.zeros((B, T), dtype=DTYPE)
    terminals = torch.zeros((B, T), dtype=DTYPE)
    valid = torch.zeros((B, T), dtype=DTYPE)
    xfer_targets = torch.zeros((B, T, dims.n_rules + 1), dtype=DTYPE)
    location_targets = torch.zeros((B, T, dims.n_rules, dims.location_cap), dtype=DTYPE)
    for b, r in enumerate(rollouts):
        for t, action in enumerate(r.actions):
            actions[b, t] = encode_action(action, dims)
            rewards[b, t] = r.rewards[t] / wm.reward_scale
            terminals[b, t] = float(r.terminals[t])
            valid[b, t] = 1.0
            xfer_targets[b, t] = torch.as_tensor(r.xfer_masks[t + 1], dtype=DTYPE)
            location_targets[b, t] = torch.as_tensor(r.location_masks[t + 1], dtype=DTYPE)
    return {
        "z": torch.stack(z_rows),
        "actions": actions,
        "rewards": rewards,
        "terminals": terminals,
        "valid": valid,
        "xfer_targets": xfer_targets,
        "location_targets": location_targets,
    }


def wm_loss(wm: WorldModel, rollouts: Sequence[Rollout],
            settings: WorldModelSettings) -> Tuple[torch.Tensor, Dict[str, float]]:
    """
    Weighted NLL + reward MSE + terminal BCE + mask BCE over non-padded steps.

    Next-latent targets are detached so the encoder cannot shrink them toward a
    trivially predictable constant.
    """
    seq = _sequence_tensors(wm, rollouts)
    z, valid = seq["z"], seq["valid"]
    B, T = valid.shape
    state = wm.initial_state(B)
    mask_width = wm.dims.n_rules + 1 + wm.dims.n_rules * wm.dims.location_cap

    nll, rew, term, mask = [], [], [], []
    for t in range(T):
        gmm, state = wm.forward(z[:, t], seq["actions"][:, t], state)
        nll.append(nll_loss(gmm, z[:, t + 1].detach()))
        rew.append((gmm.reward_hat - seq["rewards"][:, t]) ** 2)
        term.append(F.binary_cross_entropy_with_logits(gmm.terminal_logit, seq["terminals"][:, t], reduction="none"))
        xb = F.binary_cross_entropy_with_logits(gmm.xfer_mask_logits, seq["xfer_targets"][:, t], reduction="none")
        lb = F.binary_cross_entropy_with_logits(gmm.location_mask_logits, seq["location_targets"][:, t], reduction="none")
        mask.append((xb.sum(dim=-1) + lb.sum(dim=(-1, -2))) / mask_width)

    count = valid.sum()

    def masked_mean(parts: List[torch.Tensor]) -> torch.Tensor:
        return (torch.stack(parts, dim=1) * valid).sum() / count

    parts = {
        "nll": masked_mean(nll),
        "reward_mse": masked_mean(rew),
        "terminal_bce": masked_mean(term),
        "mask_bce": masked_mean(mask),
    }
    total = (
        settings.nll_weight * parts["nll"]
        + settings.reward_weight * parts["reward_mse"]
        + settings.terminal_weight * parts["terminal_bce"]
        + settings.mask_weight * parts["mask_bce"]
    )
    return total, {k: float(v) for k, v in parts.items()}


@dataclass
class WmTrainResult:
    trace: List[Dict[str, float]] = field(default_factory=list)
    real_interactions: int = 0
    rollouts: int = 0


def train_wm(wm: WorldModel, env: GraphOptEnv, epochs: int, settings: WorldModelSettings,
             rng: np.random.Generator, metrics: Optional[MetricsCollector] = None,
             log_every: int = 50) -> WmTrainResult:
    """
    Online training: every epoch draws fresh random-agent rollouts, takes one Adam
    step at the polynomially decayed learning rate, and appends a loss-trace row.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    wm.reward_scale = env.rt0 if env.rt0 > 0 else 1.0
    result = WmTrainResult()
    start_steps = env.real_steps

    for epoch in range(epochs):
        lr = poly_decay_lr(epoch, epochs, settings.lr0, settings.lr_end)
        rollouts = collect_random_rollouts(env, settings.batch_rollouts, rng)
        result.rollouts += len(rollouts)

        wm.store.zero_grad()
        total, parts = wm_loss(wm, rollouts, settings)
        if not torch.isfinite(total):
            raise DivergenceDetected(f"world-model loss became {float(total)} at epoch {epoch}")
        total.backward()
        wm.store.clip_grad_norm(settings.grad_clip)
        adam_update(wm.store, lr)

        row = {"epoch": epoch, **parts, "lr": lr}
        result.trace.append(row)
        if metrics is not None:
            metrics.set_wm_losses(parts)
        if epoch % log_every == 0 or epoch == epochs - 1:
            log_training_epoch("world_model", epoch, {**parts, "lr": lr})

    result.real_interactions = env.real_steps - start_steps
    return result


def evaluate_one_step(wm: WorldModel, rollouts: Sequence[Rollout]) -> Dict[str, float]:
    """
    Mean distance of the mixture-mean prediction to the true next latent, next to the
    persistence baseline that predicts z_next = z
    """
    with torch.no_grad():
        seq = _sequence_tensors(wm, rollouts)
        z, valid = seq["z"], seq["valid"]
        B, T = valid.shape
        state = wm.initial_state(B)
        model_err, persist_err = [], []
        for t in range(T):
            gmm, state = wm.forward(z[:, t], seq["actions"][:, t], state)
            model_err.append(torch.linalg.norm(gmm.mean() - z[:, t + 1], dim=-1))
            persist_err.append(torch.linalg.norm(z[:, t] - z[:, t + 1], dim=-1))
        count = float(valid.sum())
        model = float((torch.stack(model_err, dim=1) * valid).sum()) / count
        persistence = float((torch.stack(persist_err, dim=1) * valid).sum()) / count
    return {"model_error": model, "persistence_error": persistence, "steps": count}


# -- dream ------------------------------------------------------------------------


def binarize_masks(xfer_prob: np.ndarray, location_prob: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Threshold at 0.5, keep NO-OP valid, and make xfer bits agree with their location rows
    """
    n_rules = location_prob.shape[0]
    location = location_prob >= 0.5
    xfer = xfer_prob >= 0.5
    xfer[:n_rules] &= location.any(axis=-1)
    location[~xfer[:n_rules]] = False
    xfer[n_rules] = True
    return xfer, location


@dataclass
class DreamTransition:
    z_next: np.ndarray
    reward: float
    terminal: bool
    xfer_mask: np.ndarray  # (N+1,)
    location_masks: np.ndarray  # (N, L)
    state: LstmState


def dream_step(wm: WorldModel, state: LstmState, z: Union[np.ndarray, torch.Tensor], action: Action,
               tau: float, rng: np.random.Generator) -> DreamTransition:
    """One imagined transition with frozen parameters"""
    with torch.no_grad():
        z_t = torch.as_tensor(z, dtype=DTYPE)
        gmm, new_state = wm.forward(z_t, encode_action(action, wm.dims), state)
        z_next = sample_next_z(gmm, tau, rng)
        terminal = bool(rng.random() < float(gmm.terminal_hat))
        xfer, location = binarize_masks(gmm.xfer_mask_hat.numpy(), gmm.location_mask_hat.numpy())
        reward = float(gmm.reward_hat) * wm.reward_scale
    wm.dream_steps += 1
    return DreamTransition(z_next, reward, terminal, xfer, location, new_state.detach())


@dataclass(eq=False)
class DreamState:
    """Controller observation inside the dream"""
    z: np.ndarray
    h: np.ndarray
    xfer_mask: np.ndarray  # (N+1,)
    location_masks: np.ndarray  # (N, L)
    step_index: int
    lstm: LstmState


class DreamEnv(Env):
    """
    The world model as an environment. Episodes start from the encoded real initial
    graph and its real masks; NO-OP ends an episode with zero reward as in the real
    environment.
    """

    def __init__(self, wm: WorldModel, initial_z: np.ndarray, initial_xfer_mask: np.ndarray,
                 initial_location_masks: np.ndarray, tau: float, rng: np.random.Generator,
                 max_steps: int, metrics: Optional[MetricsCollector] = None):
        self.wm = wm
        self.initial_z = np.asarray(initial_z, dtype=np.float64)
        self.initial_xfer_mask = np.asarray(initial_xfer_mask, dtype=bool)
        self.initial_location_masks = np.asarray(initial_location_masks, dtype=bool)
        self.tau = tau
        self.rng = rng
        self.max_steps = max_steps
        self.monitor = PerformanceMonitor(metrics)
        self.metrics = metrics
        self._state: Optional[DreamState] = None
        self._done = True

    @classmethod
    def from_real(cls, wm: WorldModel, env: GraphOptEnv, tau: float, rng: np.random.Generator,
                  metrics: Optional[MetricsCollector] = None) -> "DreamEnv":
        """Seed the dream with the real initial observation; consumes no real steps"""
        graph = env.initial_graph
        masks = compute_masks(graph, env.rules, env.location_cap)
        with torch.no_grad():
            z0 = wm.encode(encode(graph, 0, env.weights)).numpy()
        return cls(wm, z0, np.append(masks.xfer_mask, True), masks.location_masks,
                   tau, rng, env.settings.max_steps, metrics)

    @property
    def action_space(self) -> Dict[str, Any]:
        return {"xfer": self.wm.dims.n_rules + 1, "location": self.wm.dims.location_cap}

    @property
    def observation_space(self) -> Dict[str, Any]:
        return {"latent": self.wm.dims.latent_dim, "hidden": self.wm.dims.hidden}

    @property
    def horizon(self) -> int:
        return self.max_steps + 1

    def reset(self) -> DreamState:
        lstm = self.wm.initial_state()
        self._state = DreamState(self.initial_z.copy(), lstm.h.numpy().copy(), self.initial_xfer_mask.copy(),
                                 self.initial_location_masks.copy(), 0, lstm)
        self._done = False
        return self._state

    def step(self, action: Action):
        if self._done or self._state is None:
            raise EpisodeFinished("dream step() after the episode terminated")
        action = Action(int(action[0]), int(action[1]))
        s = self._state
        with self.monitor.time_step("dream"):
            if action.xfer_id == self.wm.dims.n_rules:
                self.wm.dream_steps += 1
                self._done = True
                if self.metrics is not None:
                    self.metrics.record_episode("dream")
                return StepResult(s, 0.0, True, {"noop": True})
            tr = dream_step(self.wm, s.lstm, s.z, action, self.tau, self.rng)
        step_index = s.step_index + 1
        terminal = tr.terminal or step_index >= self.max_steps
        self._state = DreamState(tr.z_next, tr.state.h.numpy().copy(), tr.xfer_mask, tr.location_masks,
                                 step_index, tr.state)
        self._done = terminal
        if terminal and self.metrics is not None:
            self.metrics.record_episode("dream")
        return StepResult(self._state, tr.reward, terminal, {"noop": False})
