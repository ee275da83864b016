"""
Rollouts - Random-agent episodes recorded for world-model training
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from graphdream.embed.gnn import GraphTuple
from graphdream.env.environment import Action, EnvState, GraphOptEnv


@dataclass
class Rollout:
    """
    One real episode: T actions with their outcomes, and T+1 observations with the
    masks that were valid in each (observation t+1 follows action t).
    """
    observations: List[GraphTuple] = field(default_factory=list)
    xfer_masks: List[np.ndarray] = field(default_factory=list)  # (N+1,) each, NO-OP included
    location_masks: List[np.ndarray] = field(default_factory=list)  # (N, L) each
    actions: List[Action] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    terminals: List[bool] = field(default_factory=list)
    pad_length: int = 0

    def __len__(self) -> int:
        return len(self.actions)

    def record_state(self, state: EnvState):
        self.observations.append(state.graph_tuple)
        self.xfer_masks.append(state.full_xfer_mask)
        self.location_masks.append(state.location_masks.copy())


def uniform_valid_action(env: GraphOptEnv, rng: np.random.Generator) -> Action:
    """Every mask-valid action, NO-OP included, with equal probability"""
    actions = env.valid_actions()
    return actions[int(rng.integers(len(actions)))]


def collect_rollout(env: GraphOptEnv, rng: np.random.Generator) -> Rollout:
    rollout = Rollout()
    state = env.reset()
    rollout.record_state(state)
    terminal = False
    while not terminal:
        action = uniform_valid_action(env, rng)
        result = env.step(action)
        rollout.actions.append(action)
        rollout.rewards.append(result.reward)
        rollout.terminals.append(result.terminal)
        rollout.record_state(result.next_state)
        terminal = result.terminal
    return rollout


def collect_random_rollouts(env: GraphOptEnv, count: int, rng: np.random.Generator) -> List[Rollout]:
    """`count` fresh episodes from the uniform random agent; no replay buffer"""
    return [collect_rollout(env, rng) for _ in range(count)]


def pad_rollouts(rollouts: Sequence[Rollout]) -> int:
    """Set pad_length on every rollout so all reach the longest length; returns it"""
    longest = max((len(r) for r in rollouts), default=0)
    for r in rollouts:
        r.pad_length = longest - len(r)
    return longest
