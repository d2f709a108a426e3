"""Experiment specs: a TOML file describing one environment, agents and seeds.

Everything not given falls back to the published setup: 2x256 ReLU nets,
Adam at 1e-3, retraining after 128, 256, 512, ... examples, epsilon 0.05,
casino payouts 0.7 / 0.3 over 32 bandits, mushroom decline reward 0.5.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agents import AgentConfig
from .sim import REGRET_MODES, EnvSpec, RunConfig


class SpecError(ValueError):
    """The experiment spec cannot be used as written."""


@dataclass
class ExperimentSpec:
    name: str
    env: EnvSpec
    agents: list
    horizon: int = 20_000
    seeds: list = field(default_factory=lambda: [0])
    regret_mode: str = "expected"
    output: str = "runs"
    workers: int = 1

    def run_configs(self):
        """One :class:`RunConfig` per (agent, seed), agent-major."""
        return [
            RunConfig(self.env, agent, self.horizon, seed, self.regret_mode)
            for agent in self.agents
            for seed in self.seeds
        ]


_TOP_KEYS = {"name", "horizon", "seeds", "regret_mode", "output", "workers", "env",
             "defaults", "agents"}


def _fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise SpecError(f"{where}: unknown key(s) {', '.join(unknown)}")


def bundled_specs():
    return sorted(p.name[:-5] for p in resources.files("dcbandit").joinpath("data").iterdir()
                  if p.name.endswith(".toml"))


def resolve_spec_path(name):
    """A filesystem path, or the name of a spec shipped with the package."""
    path = Path(name)
    if path.is_file():
        return path
    stem = name[:-5] if name.endswith(".toml") else name
    bundled = resources.files("dcbandit").joinpath("data", f"{stem}.toml")
    if bundled.is_file():
        return Path(str(bundled))
    raise SpecError(f"spec file {name!r} not found (bundled specs: {', '.join(bundled_specs())})")


def parse_spec(text, source="<spec>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{source}: {exc}") from exc
    _check_keys(raw, _TOP_KEYS, source)

    env_raw = raw.get("env", {})
    _check_keys(env_raw, _fields(EnvSpec), f"{source} [env]")
    defaults = raw.get("defaults", {})
    agent_keys = _fields(AgentConfig)
    _check_keys(defaults, agent_keys, f"{source} [defaults]")
    agents_raw = raw.get("agents", [])
    if not isinstance(agents_raw, list) or not agents_raw:
        raise SpecError(f"{source}: agents: at least one [[agents]] entry is required")

    try:
        env = EnvSpec(**env_raw)
        agents = []
        for i, entry in enumerate(agents_raw):
            _check_keys(entry, agent_keys, f"{source} [[agents]] #{i + 1}")
            agents.append(AgentConfig(**{**defaults, **entry}))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{source}: {exc}") from exc

    labels = [a.label for a in agents]
    if len(set(labels)) != len(labels):
        raise SpecError(f"{source}: agents: duplicate agent names {labels}; set 'name' to disambiguate")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise SpecError(f"{source}: seeds: expected a non-empty list of integers")
    horizon = raw.get("horizon", 20_000)
    if not isinstance(horizon, int) or horizon < 1:
        raise SpecError(f"{source}: horizon: expected a positive integer")
    regret_mode = raw.get("regret_mode", "expected")
    if regret_mode not in REGRET_MODES:
        raise SpecError(f"{source}: regret_mode: expected one of {REGRET_MODES}")
    return ExperimentSpec(
        name=raw.get("name", Path(source).stem),
        env=env,
        agents=agents,
        horizon=horizon,
        seeds=seeds,
        regret_mode=regret_mode,
        output=raw.get("output", f"runs/{raw.get('name', Path(source).stem)}"),
        workers=int(raw.get("workers", 1)),
    )


def load_spec(name):
    path = resolve_spec_path(name)
    return parse_spec(path.read_text(), str(path))


def apply_overrides(spec, horizon=None, seeds=None, output=None, regret_mode=None,
                    retrain_mode=None, workers=None, dataset=None):
    if horizon is not None:
        if horizon < 1:
            raise SpecError("--horizon must be a positive integer")
        spec.horizon = horizon
    if seeds is not None:
        if not seeds:
            raise SpecError("--seeds must list at least one seed")
        spec.seeds = list(seeds)
    if output is not None:
        spec.output = output
    if regret_mode is not None:
        spec.regret_mode = regret_mode
    if retrain_mode is not None:
        spec.agents = [dataclasses.replace(a, retrain_mode=retrain_mode) for a in spec.agents]
    if workers is not None:
        spec.workers = workers
    if dataset is not None:
        spec.env = dataclasses.replace(spec.env, dataset=dataset)
    return spec
