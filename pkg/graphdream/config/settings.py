"""
Configuration Settings - Run configuration for every graphdream command
"""

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from graphdream.exceptions import ConfigError


DEFAULT_TAU_SWEEP: List[float] = [0.1, 0.5, 0.75, 1.0, 1.2, 1.5, 1.75, 2.0, 2.5, 3.0]


class EnvSettings(BaseModel):
    """Environment and reward configuration"""
    reward_kind: Literal["incremental", "combined"] = "incremental"
    alpha: float = Field(0.8, ge=0.0, le=1.0)
    beta: float = Field(0.2, ge=0.0, le=1.0)
    invalid_penalty: float = -100.0
    max_steps: int = Field(50, ge=1)
    location_cap: int = Field(200, ge=1)
    # zoo graphs are small; 32 keeps masks and heads compact
    zoo_location_cap: int = Field(32, ge=1)

    @field_validator("invalid_penalty")
    @classmethod
    def _penalty_negative(cls, value: float) -> float:
        if value >= 0:
            raise ValueError("invalid_penalty must be negative")
        return value

    @model_validator(mode="after")
    def _weights_sum_to_one(self) -> "EnvSettings":
        if self.reward_kind == "combined" and abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError("alpha + beta must equal 1 for the combined reward")
        return self


class RuleSettings(BaseModel):
    """Rule library and equivalence-oracle configuration"""
    library: Optional[str] = None
    trials: int = Field(100, ge=1)
    rel_tol: float = Field(1e-5, gt=0.0)
    abs_tol: float = Field(1e-6, gt=0.0)
    max_dim: int = Field(4, ge=1)


class CostSettings(BaseModel):
    """Analytic cost-model weights, milliseconds per counted unit"""
    w_flops: float = Field(1e-9, ge=0.0)
    w_mem: float = Field(5e-9, ge=0.0)
    w_launch: float = Field(5e-3, ge=0.0)


class EmbedSettings(BaseModel):
    """Graph network encoder dimensions"""
    latent_dim: int = Field(64, ge=1)
    rounds: int = Field(3, ge=1)
    hidden: int = Field(64, ge=1)


class WorldModelSettings(BaseModel):
    """MDN-RNN dimensions and training schedule"""
    gaussians: int = Field(8, ge=1)
    hidden: int = Field(256, ge=1)
    epochs: int = Field(5000, ge=1)
    batch_rollouts: int = Field(10, ge=1)
    lr0: float = Field(1e-3, gt=0.0)
    lr_end: float = Field(1e-5, ge=0.0)
    sigma_floor: float = Field(1e-4, gt=0.0)
    location_buckets: int = Field(32, ge=1)
    nll_weight: float = 1.0
    reward_weight: float = 1.0
    terminal_weight: float = 0.5
    mask_weight: float = 0.5
    grad_clip: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def _lr_order(self) -> "WorldModelSettings":
        if self.lr_end > self.lr0:
            raise ValueError("lr_end must not exceed lr0")
        return self


class ControllerSettings(BaseModel):
    """PPO controller configuration"""
    tau: float = Field(1.5, gt=0.0)
    epochs: int = Field(1000, ge=1)
    episodes_per_update: int = Field(10, ge=1)
    clip: float = Field(0.2, gt=0.0)
    lr: float = Field(3e-4, gt=0.0)
    update_epochs: int = Field(4, ge=1)
    gamma: float = Field(0.99, ge=0.0, le=1.0)
    gae_lambda: float = Field(0.95, ge=0.0, le=1.0)
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    hidden: int = Field(64, ge=1)
    eval_episodes: int = Field(5, ge=1)
    greedy_eval: bool = True
    model_free_epochs: int = Field(2000, ge=1)


class SearchSettings(BaseModel):
    """Cost-directed search baselines"""
    relax: float = Field(1.05, ge=1.0)
    budget: int = Field(10_000, ge=1)
    queue_cap: int = Field(1000, ge=1)
    check_equivalence: bool = True


class SweepSettings(BaseModel):
    """Temperature sweep and benchmark settings"""
    taus: List[float] = Field(default_factory=lambda: list(DEFAULT_TAU_SWEEP))
    runs: int = Field(5, ge=1)
    bench_steps: int = Field(1000, ge=1)

    @field_validator("taus")
    @classmethod
    def _positive_taus(cls, value: List[float]) -> List[float]:
        if not value or any(t <= 0 for t in value):
            raise ValueError("tau list must be non-empty and strictly positive")
        return value


class LoggingSettings(BaseModel):
    """Logging output"""
    level: str = "INFO"
    format: Literal["json", "console"] = "json"


class RunConfig(BaseSettings):
    """
    Resolved configuration of a run.

    Priority (low to high): defaults, JSON config file, GRAPHDREAM_* environment
    variables, explicit overrides passed by the CLI.
    """

    model_config = SettingsConfigDict(
        env_prefix="GRAPHDREAM_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
    )

    seed: int = 0
    env: EnvSettings = Field(default_factory=EnvSettings)
    rules: RuleSettings = Field(default_factory=RuleSettings)
    cost: CostSettings = Field(default_factory=CostSettings)
    embed: EmbedSettings = Field(default_factory=EmbedSettings)
    wm: WorldModelSettings = Field(default_factory=WorldModelSettings)
    controller: ControllerSettings = Field(default_factory=ControllerSettings)
    search: SearchSettings = Field(default_factory=SearchSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # environment beats the config file, which arrives as init kwargs
        return env_settings, init_settings

    def snapshot(self) -> Dict[str, Any]:
        """Serializable view written beside every command's outputs"""
        return self.model_dump(mode="json")

    def write_snapshot(self, out_dir: Path) -> Path:
        """Write config.json into out_dir"""
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "config.json"
        path.write_text(json.dumps(self.snapshot(), indent=2, sort_keys=True) + "\n")
        return path


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from an optional JSON file, the environment, and CLI overrides
    """
    file_values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            file_values = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")

    try:
        config = RunConfig(**file_values)
        if overrides:
            # model_validate skips the settings sources, so overrides win over env
            config = RunConfig.model_validate(_deep_merge(config.model_dump(), overrides))
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return config


@lru_cache()
def get_settings() -> RunConfig:
    """Default configuration (environment only), cached for the process"""
    return load_config()
