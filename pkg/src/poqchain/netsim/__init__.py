"""Many-miner chain simulation, statistics and adversaries."""

from .config import DeviceRoster, SimConfig
from .forks import ForkOutcome, fork_trial, tip_history
from .mining import accelerated_mine, accelerated_rate, brute_force_rate
from .run import ChainResult, ChainRun, ChainStats, run_chain
from .stats import delay_quantile, efficiency, prefix_efficiency

__all__ = [
    "ChainResult", "ChainRun", "ChainStats", "DeviceRoster", "ForkOutcome", "SimConfig",
    "accelerated_mine", "accelerated_rate", "brute_force_rate", "delay_quantile", "efficiency",
    "fork_trial", "prefix_efficiency", "run_chain", "tip_history",
]
