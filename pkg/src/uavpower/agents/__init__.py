from .baselines import ClosestPolicy, FullPowerPolicy, SacPolicy, act_closest, act_full_power
from .replay import Batch, ReplayBuffer
from .sac import NonFiniteLossError, SacAgent, SacParams
from .training import train

__all__ = [
    "ClosestPolicy", "FullPowerPolicy", "SacPolicy", "act_closest", "act_full_power",
    "Batch", "ReplayBuffer", "NonFiniteLossError", "SacAgent", "SacParams", "train",
]
