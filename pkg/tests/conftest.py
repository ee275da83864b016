"""
Pytest configuration and fixtures for graphdream tests
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pytest

from graphdream.config.settings import RunConfig, load_config
from graphdream.env.environment import GraphOptEnv
from graphdream.graph.ir import ComputationGraph, GraphBuilder
from graphdream.rules.library import prepare_rules, read_rules
from graphdream.rules.pattern import RewriteRule
from graphdream.utils.seeding import make_rng
from graphdream.zoo.builders import build_by_name

REPO_ROOT = Path(__file__).resolve().parent.parent
QUICK_CONFIG = REPO_ROOT / "config" / "quick.json"
DESK_CONFIG = REPO_ROOT / "config" / "desk.json"

TINY_OVERRIDES: Dict[str, Any] = {
    "seed": 7,
    "env": {"max_steps": 6},
    "rules": {"trials": 5},
    "embed": {"latent_dim": 4, "rounds": 1, "hidden": 6},
    "wm": {"gaussians": 2, "hidden": 8, "epochs": 3, "batch_rollouts": 2},
    "controller": {"epochs": 2, "episodes_per_update": 2, "update_epochs": 1, "hidden": 8, "eval_episodes": 2,
                   "model_free_epochs": 2},
    "search": {"budget": 50, "queue_cap": 50},
    "sweep": {"taus": [0.5, 1.0], "runs": 1, "bench_steps": 10},
    "logging": {"level": "WARNING", "format": "console"},
}


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    """Keep GRAPHDREAM_* variables from the developer's shell out of every test"""
    for key in list(os.environ):
        if key.startswith("GRAPHDREAM_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def tiny_config() -> RunConfig:
    """Smallest configuration that still exercises every pipeline stage"""
    return load_config(None, TINY_OVERRIDES)


@pytest.fixture
def quick_config() -> RunConfig:
    return load_config(QUICK_CONFIG)


@pytest.fixture
def desk_config() -> RunConfig:
    """Full desk-scale run; only the acceptance tests use it"""
    return load_config(DESK_CONFIG, {"logging": {"level": "WARNING"}})


@pytest.fixture
def tiny_config_file(tmp_path) -> Path:
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_OVERRIDES))
    return path


@pytest.fixture(scope="session")
def library_rules() -> List[RewriteRule]:
    """The shipped library as written, unverified"""
    return read_rules()


@pytest.fixture(scope="session")
def rules() -> List[RewriteRule]:
    """Verified, pruned action vocabulary"""
    return prepare_rules(None, 10, make_rng(0, "rules"))


@pytest.fixture(scope="session")
def rules_by_name(rules) -> Dict[str, RewriteRule]:
    return {rule.name: rule for rule in rules}


@pytest.fixture(scope="session")
def bert_graph() -> ComputationGraph:
    return build_by_name("bert_toy", depth=1, width=4)


@pytest.fixture(scope="session")
def resnet_graph() -> ComputationGraph:
    return build_by_name("resnet_toy", depth=1, width=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def add_chain_graph() -> ComputationGraph:
    """out = ((a + b) + c) + d over (2, 3) inputs"""
    b = GraphBuilder()
    a, x, y, z = (b.input((2, 3)) for _ in range(4))
    b.output(b.add_(b.add_(b.add_(a, x), y), z))
    return b.build()


@pytest.fixture
def matmul_relu_graph() -> ComputationGraph:
    """relu(x @ w) with x (2, 3) and w (3, 4)"""
    b = GraphBuilder()
    x = b.input((2, 3))
    w = b.input((3, 4))
    b.output(b.relu(b.matmul(x, w)))
    return b.build()


@pytest.fixture
def bert_env(tiny_config, rules, bert_graph) -> GraphOptEnv:
    return GraphOptEnv(bert_graph, rules, tiny_config.env, location_cap=tiny_config.env.zoo_location_cap,
                       name="bert_toy")


@pytest.fixture
def add_chain_env(tiny_config, rules, add_chain_graph) -> GraphOptEnv:
    return GraphOptEnv(add_chain_graph, rules, tiny_config.env, location_cap=4, name="add_chain")
