"""Seeded regret simulations and their aggregation across seeds."""
from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import AgentConfig, AgentStreams, make_agent
from .envs import (
    MUSHROOM_FILENAME, CasinoConfig, CasinoEnv, MushroomEnv, default_data_dir,
    load_mushroom_dataset, oracle_expected_reward,
)
from .nn import NumericalError

REGRET_MODES = ("expected", "realized")


@functools.lru_cache(maxsize=4)
def _cached_dataset(path):
    return load_mushroom_dataset(path)


@dataclass
class EnvSpec:
    task: str = "casino"
    n_bandits: int = 32
    p_a: float = 0.7
    p_b: float = 0.3
    decline_reward: float = 0.5
    dataset: str | None = None

    def __post_init__(self):
        if self.task not in ("casino", "mushroom"):
            raise ValueError(f"unknown task {self.task!r}")

    def dataset_path(self):
        if self.dataset:
            return Path(self.dataset).expanduser()
        return default_data_dir() / MUSHROOM_FILENAME

    def build(self, rng):
        if self.task == "casino":
            return CasinoEnv(CasinoConfig(self.n_bandits, self.p_a, self.p_b), rng)
        path = self.dataset_path()
        if not path.is_file():
            raise FileNotFoundError(f"mushroom dataset not found at {path}")
        return MushroomEnv(_cached_dataset(str(path)), rng, self.decline_reward)


@dataclass
class RunConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    agent: AgentConfig = field(default_factory=AgentConfig)
    horizon: int = 20_000
    seed: int = 0
    regret_mode: str = "expected"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.regret_mode not in REGRET_MODES:
            raise ValueError(f"regret_mode must be one of {REGRET_MODES}")


@dataclass
class RegretTrace:
    agent: str
    env: str
    seed: int
    regret: np.ndarray
    retrain_steps: list = field(default_factory=list)
    retrain_events: list = field(default_factory=list)

    @property
    def horizon(self):
        return len(self.regret)

    @property
    def cumulative(self):
        return np.cumsum(self.regret)

    @property
    def fcr(self):
        return float(self.cumulative[-1])


def seed_streams(seed):
    """Split a master seed into an environment stream and agent streams."""
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), AgentStreams.from_seed(agent_ss)


def run_simulation(cfg, agent=None):
    """Drive one agent against one environment for ``cfg.horizon`` steps.

    Per-step regret is the oracle's expected reward minus that of the chosen
    action (``expected`` mode) or the difference of the two realised draws
    (``realized`` mode). ``agent`` overrides the one built from ``cfg.agent``.
    """
    env_rng, streams = seed_streams(cfg.seed)
    env = cfg.env.build(env_rng)
    if agent is None:
        agent = make_agent(cfg.agent, env.n_actions, env.context_dim, streams)
    regret = np.empty(cfg.horizon)
    retrain_steps = []
    realized = cfg.regret_mode == "realized"
    for t in range(cfg.horizon):
        es = env.step()
        action = agent.choose(es)
        reward = es.realize(action)
        if realized:
            regret[t] = es.realize(es.oracle_action) - reward
        else:
            regret[t] = oracle_expected_reward(es) - es.expected[action]
        agent.observe(es.context, action, reward)
        try:
            if agent.maybe_retrain():
                retrain_steps.append(t + 1)
        except NumericalError as exc:
            raise NumericalError(
                f"{agent.label} on {env.name}, seed {cfg.seed}, step {t + 1}: {exc}"
            ) from exc
    return RegretTrace(
        agent=agent.label, env=env.name, seed=cfg.seed, regret=regret,
        retrain_steps=retrain_steps, retrain_events=list(agent.retrain_events),
    )


def run_many(configs, workers=1):
    """Run independent simulations, optionally across processes; order is kept."""
    configs = list(configs)
    if workers <= 1 or len(configs) <= 1:
        return [run_simulation(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_simulation, configs))


@dataclass
class AggregateCurve:
    agent: str
    mean: np.ndarray
    stderr: np.ndarray
    fcrs: list

    @property
    def fcr_mean(self):
        return float(np.mean(self.fcrs))

    @property
    def fcr_min(self):
        return float(np.min(self.fcrs))

    @property
    def fcr_max(self):
        return float(np.max(self.fcrs))

    @property
    def fcr_stderr(self):
        n = len(self.fcrs)
        return float(np.std(self.fcrs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def aggregate_runs(traces, agent=None):
    """Pointwise mean and standard error of cumulative regret over runs."""
    traces = list(traces)
    if not traces:
        raise ValueError("nothing to aggregate")
    horizons = {t.horizon for t in traces}
    if len(horizons) != 1:
        raise ValueError(f"traces have mixed horizons {sorted(horizons)}")
    cum = np.vstack([t.cumulative for t in traces])
    mean = cum.mean(axis=0)
    if len(traces) > 1:
        stderr = cum.std(axis=0, ddof=1) / math.sqrt(len(traces))
    else:
        stderr = np.zeros_like(mean)
    return AggregateCurve(agent or traces[0].agent, mean, stderr, [t.fcr for t in traces])


def aggregate_by_agent(traces):
    groups = {}
    for t in traces:
        groups.setdefault(t.agent, []).append(t)
    return {name: aggregate_runs(ts, name) for name, ts in groups.items()}
