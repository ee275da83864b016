from graphdream.config.settings import (
    DEFAULT_TAU_SWEEP,
    ControllerSettings,
    CostSettings,
    EmbedSettings,
    EnvSettings,
    RuleSettings,
    RunConfig,
    SearchSettings,
    WorldModelSettings,
    get_settings,
    load_config,
)

__all__ = [
    "DEFAULT_TAU_SWEEP",
    "ControllerSettings",
    "CostSettings",
    "EmbedSettings",
    "EnvSettings",
    "RuleSettings",
    "RunConfig",
    "SearchSettings",
    "WorldModelSettings",
    "get_settings",
    "load_config",
]
