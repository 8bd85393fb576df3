import numpy as np

from uavpower.env import StepOutcome


class ToyBandit:
    """One-step task with reward ``1 - |a|``; the optimal action is 0."""

    observation_size = 1
    action_size = 1

    def reset(self, seed=None):
        return np.ones(1), {}

    def decode_action(self, raw):
        return np.asarray(raw, dtype=float)

    def step(self, action):
        return StepOutcome(np.ones(1), float(1.0 - abs(action[0])), True, {})
