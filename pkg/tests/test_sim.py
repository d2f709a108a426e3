import math

import numpy as np
import pytest

from dcbandit.agents import Agent, AgentConfig, OracleAgent
from dcbandit.envs import CasinoConfig, casino_step
from dcbandit.nn import NumericalError
from dcbandit.sim import (
    EnvSpec, RegretTrace, RunConfig, aggregate_by_agent, aggregate_runs, run_many,
    run_simulation, seed_streams,
)


class WorstAgent(Agent):
    def choose(self, env_step):
        return int(np.argmin(env_step.expected))


def worst_agent():
    return WorstAgent(AgentConfig(kind="non-contextual-ts", name="worst"), 2, 5, None)


def small(kind, **kw):
    return AgentConfig(kind=kind, hidden=(16, 16), warmup=32, epochs=4, batch_size=16, **kw)


@pytest.mark.parametrize("horizon", [1, 50, 700])
def test_oracle_has_zero_regret(horizon):
    for mode in ("expected", "realized"):
        trace = run_simulation(RunConfig(horizon=horizon, seed=3, regret_mode=mode), agent=OracleAgent(context_dim=5))
        assert trace.fcr == 0.0
        assert trace.horizon == horizon


def test_worst_agent_matches_brute_force_sum():
    cfg = RunConfig(horizon=1000, seed=8)
    trace = run_simulation(cfg, agent=worst_agent())
    # replay the environment stream independently
    env_rng, _ = seed_streams(8)
    casino = CasinoConfig()
    total = 0.0
    for _ in range(1000):
        s = casino_step(casino, env_rng)
        total += max(s.expected) - min(s.expected)
    assert trace.fcr == pytest.approx(total, abs=1e-9)
    assert set(np.round(trace.regret, 12)) == {0.2}
    assert trace.fcr == pytest.approx(200.0, abs=1e-9)


def test_single_step_trace():
    trace = run_simulation(RunConfig(horizon=1, seed=0, agent=AgentConfig(kind="non-contextual-ts")))
    assert trace.horizon == 1 and trace.fcr == trace.regret[0]


def test_identical_configs_identical_traces():
    cfg = RunConfig(agent=small("concrete-dropout-ts"), horizon=300, seed=4)
    a, b = run_simulation(cfg), run_simulation(cfg)
    assert a.regret.tobytes() == b.regret.tobytes()
    assert a.retrain_steps == b.retrain_steps == [32, 64, 128, 256]
    assert [e.dropout_rates for e in a.retrain_events] == [e.dropout_rates for e in b.retrain_events]


def test_expected_mode_cumulative_is_monotone_and_additive():
    trace = run_simulation(RunConfig(agent=small("epsilon-greedy"), horizon=400, seed=1))
    cum = trace.cumulative
    assert np.all(np.diff(cum) >= 0)
    assert abs(trace.fcr - math.fsum(trace.regret)) < 1e-9


def test_realized_mode_values():
    trace = run_simulation(RunConfig(agent=AgentConfig(kind="non-contextual-ts"), horizon=500,
                                     seed=2, regret_mode="realized"))
    assert set(trace.regret.tolist()) <= {-1.0, 0.0, 1.0}
    assert -1.0 in trace.regret


def test_agents_share_the_context_stream():
    """The environment stream depends on the seed only, not on the agent."""
    seen = {}

    def recorder(base, name):
        class Recorder(base):
            def choose(self, env_step):
                seen.setdefault(name, []).append(env_step.context.tolist())
                return super().choose(env_step)
        return Recorder

    run_simulation(RunConfig(horizon=60, seed=6), agent=recorder(WorstAgent, "worst")(
        AgentConfig(kind="non-contextual-ts"), 2, 5, None))
    run_simulation(RunConfig(horizon=60, seed=6), agent=recorder(OracleAgent, "oracle")(context_dim=5))
    assert seen["worst"] == seen["oracle"]


def test_divergence_carries_run_context():
    class Exploding(WorstAgent):
        def maybe_retrain(self):
            raise NumericalError("boom")

    agent = Exploding(AgentConfig(kind="non-contextual-ts", name="x"), 2, 5, None)
    with pytest.raises(NumericalError, match="seed 11, step 1: boom"):
        run_simulation(RunConfig(horizon=5, seed=11), agent=agent)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(horizon=0)
    with pytest.raises(ValueError):
        RunConfig(regret_mode="both")
    with pytest.raises(ValueError):
        EnvSpec(task="roulette")


def test_missing_dataset_reported(tmp_path):
    with pytest.raises(FileNotFoundError):
        EnvSpec(task="mushroom", dataset=str(tmp_path / "nope.data")).build(np.random.default_rng(0))


def test_mushroom_fixture_run(fixture_path):
    cfg = RunConfig(EnvSpec(task="mushroom", dataset=str(fixture_path)), small("bernoulli-dropout-ts"),
                    horizon=100, seed=0)
    trace = run_simulation(cfg)
    assert trace.env == "mushroom" and trace.retrain_steps == [32, 64]


def test_parallel_matches_serial():
    cfgs = [RunConfig(agent=small("epsilon-greedy"), horizon=120, seed=s) for s in range(3)]
    serial = run_many(cfgs)
    parallel = run_many(cfgs, workers=2)
    for a, b in zip(serial, parallel):
        assert a.seed == b.seed and a.regret.tobytes() == b.regret.tobytes()


# -- aggregation ----------------------------------------------------------------

def trace(values, agent="a", seed=0):
    return RegretTrace(agent, "casino", seed, np.asarray(values, dtype=float))


def test_single_trace_aggregate():
    curve = aggregate_runs([trace([0.1, 0.2, 0.0])])
    np.testing.assert_allclose(curve.mean, [0.1, 0.3, 0.3])
    assert np.all(curve.stderr == 0)
    assert curve.fcr_stderr == 0.0


def test_two_constant_traces():
    curve = aggregate_runs([trace([0.0] * 4), trace([2.0] * 4, seed=1)])
    np.testing.assert_allclose(np.diff(np.concatenate([[0], curve.mean])), [1.0] * 4)
    assert (curve.fcr_min, curve.fcr_mean, curve.fcr_max) == (0.0, 4.0, 8.0)


def test_mixed_horizons_rejected():
    with pytest.raises(ValueError, match="mixed horizons"):
        aggregate_runs([trace([0.0]), trace([0.0, 0.0])])
    with pytest.raises(ValueError):
        aggregate_runs([])


def test_summary_matches_recomputed_fcrs():
    cfgs = [RunConfig(agent=AgentConfig(kind="non-contextual-ts"), horizon=2000, seed=s) for s in range(5)]
    traces = run_many(cfgs)
    curve = aggregate_by_agent(traces)["non-contextual-ts"]
    recomputed = [math.fsum(t.regret) for t in traces]
    np.testing.assert_allclose(curve.fcrs, recomputed, atol=1e-9)
    assert curve.fcr_mean == pytest.approx(np.mean(recomputed))
    assert curve.fcr_stderr == pytest.approx(np.std(recomputed, ddof=1) / math.sqrt(5))
