"""
Environment Base - Gym-style environment interface
"""

from abc import ABC, abstractmethod
from typing import Any, Dict


class Env(ABC):
    """
    Minimal gym-style contract shared by the real graph environment and the dream
    """

    @abstractmethod
    def step(self, action):
        """
        Run one timestep. Returns a StepResult carrying
        (next_state, reward, terminal, extra_info).
        """

    @abstractmethod
    def reset(self):
        """Restore the initial state and return the first observation"""

    @property
    @abstractmethod
    def action_space(self) -> Dict[str, Any]:
        """Sizes describing the action tuple"""

    @property
    @abstractmethod
    def observation_space(self) -> Dict[str, Any]:
        """Sizes describing an observation"""

    @property
    def horizon(self) -> int:
        raise NotImplementedError

    def close(self):
        pass
