"""Multi-agent MEC task offloading with DVFS and battery degradation costs."""
from .core import Config, ConfigError, load_config, save_config
from .env import MecEnv
from .marl import Trainer, TrainConfig

__all__ = ["Config", "ConfigError", "MecEnv", "Trainer", "TrainConfig", "load_config",
           "save_config"]
__version__ = "0.1.0"
