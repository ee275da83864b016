"""
Rewards - Incremental runtime reward and the combined runtime/memory reward
"""

from dataclasses import dataclass
from typing import Dict

INVALID_PENALTY = -100.0


def reward_incremental(rt_prev: float, rt_curr: float, valid: bool,
                       invalid_penalty: float = INVALID_PENALTY) -> float:
    """RT_prev - RT_curr for a valid action, the penalty otherwise"""
    if not valid:
        return invalid_penalty
    return rt_prev - rt_curr


def reward_combined(rt_prev: float, rt_curr: float, m_prev: float, m_curr: float,
                    alpha: float, beta: float, valid: bool,
                    invalid_penalty: float = INVALID_PENALTY) -> float:
    """alpha * runtime drop + beta * memory-access drop for a valid action"""
    if not valid:
        return invalid_penalty
    return alpha * (rt_prev - rt_curr) + beta * (m_prev - m_curr)


@dataclass(frozen=True)
class RewardPreset:
    reward_kind: str
    alpha: float = 1.0
    beta: float = 0.0

    def as_overrides(self) -> Dict[str, object]:
        return {"env": {"reward_kind": self.reward_kind, "alpha": self.alpha, "beta": self.beta}}


REWARD_PRESETS: Dict[str, RewardPreset] = {
    "combined_tuned": RewardPreset("combined", 0.8, 0.2),
    "combined_mem_heavy": RewardPreset("combined", 0.1, 0.9),
    "combined_even": RewardPreset("combined", 0.5, 0.5),
    "incremental": RewardPreset("incremental", 1.0, 0.0),
}
