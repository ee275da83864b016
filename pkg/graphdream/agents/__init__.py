"""
Agents - Dream-trained PPO controller, random agent, search baselines and the pipeline orchestrator
"""

from graphdream.agents.base_agent import AgentType, BaseAgent, EpisodeResult, EvalReport
from graphdream.agents.controller_agent import (
    Controller,
    ControllerAgent,
    ControllerDims,
    PolicyOutput,
    Transition,
    evaluate_real,
    ppo_update,
    train_in_dream,
    train_model_free,
)
from graphdream.agents.random_agent import RandomAgent
from graphdream.agents.search_agent import (
    SearchAgent,
    SearchConfig,
    SearchResult,
    backtracking_optimize,
    greedy_optimize,
)

__all__ = [
    "AgentType",
    "BaseAgent",
    "Controller",
    "ControllerAgent",
    "ControllerDims",
    "EpisodeResult",
    "EvalReport",
    "PolicyOutput",
    "RandomAgent",
    "SearchAgent",
    "SearchConfig",
    "SearchResult",
    "Transition",
    "backtracking_optimize",
    "evaluate_real",
    "greedy_optimize",
    "ppo_update",
    "train_in_dream",
    "train_model_free",
]
