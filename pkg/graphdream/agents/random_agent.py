"""
Random Agent - Uniform over mask-valid actions; null baseline and world-model data collector
"""

import numpy as np

from graphdream.agents.base_agent import AgentType, BaseAgent, EpisodeResult, run_env_episode
from graphdream.env.environment import GraphOptEnv
from graphdream.models.rollouts import uniform_valid_action


class RandomAgent(BaseAgent):

    def __init__(self):
        super().__init__(AgentType.RANDOM)

    def run_episode(self, env: GraphOptEnv, rng: np.random.Generator) -> EpisodeResult:
        return run_env_episode(env, lambda state: uniform_valid_action(env, rng), self.agent_type.value)
