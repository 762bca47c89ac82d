"""Regional lockdown game for a stochastic SEIR model, solved by deep fictitious play."""

from .model_core import ConfigError, ModelParams, make_params
from .config import Scenario, ScenarioError, load_scenario

__version__ = "0.1.0"

__all__ = ["ConfigError", "ModelParams", "make_params", "Scenario",
           "ScenarioError", "load_scenario", "__version__"]
