"""Deep contextual bandits with dropout-based Thompson sampling.

Neural agents learn a reward model over ``(context, action)`` pairs and pick
actions under a sampled dropout mask; the concrete variant learns its own
dropout rate. Simulations run on a casino parity task and the UCI mushroom
task.
"""
from .agents import AgentConfig, make_agent
from .envs import CasinoConfig, CasinoEnv, MushroomEnv, load_mushroom_dataset
from .kernels import BACKEND
from .nn import AdamState, DropoutSpec, Network, NumericalError, adam_update
from .sim import EnvSpec, RunConfig, aggregate_runs, run_many, run_simulation

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "make_agent", "CasinoConfig", "CasinoEnv", "MushroomEnv",
    "load_mushroom_dataset", "BACKEND", "AdamState", "DropoutSpec", "Network",
    "NumericalError", "adam_update", "EnvSpec", "RunConfig", "aggregate_runs",
    "run_many", "run_simulation",
]
