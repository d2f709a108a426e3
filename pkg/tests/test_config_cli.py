import csv

import pytest

from conftest import GOLDEN_DIR, run_cli
from dcbandit.config import SpecError, apply_overrides, bundled_specs, load_spec, parse_spec
from dcbandit.kernels import BACKEND

MINIMAL = """
name = "tiny"
horizon = 5
seeds = [0, 1]
[[agents]]
kind = "epsilon-greedy"
"""


def test_bare_spec_uses_published_defaults():
    spec = parse_spec(MINIMAL)
    agent = spec.agents[0]
    assert spec.env.task == "casino"
    assert agent.hidden == (256, 256) and agent.lr == 1e-3
    assert agent.warmup == 128 and agent.growth == 2.0 and agent.epsilon == 0.05
    assert len(spec.run_configs()) == 2


def test_bundled_specs_load():
    assert {"casino", "casino-quick", "mushroom"} <= set(bundled_specs())
    quick = load_spec("casino-quick")
    assert quick.horizon == 2000 and quick.seeds == [0, 1]
    assert [a.kind for a in quick.agents] == [
        "non-contextual-ts", "epsilon-greedy", "bernoulli-dropout-ts", "concrete-dropout-ts"]
    assert load_spec("mushroom").env.task == "mushroom"


@pytest.mark.parametrize("text,msg", [
    ('name = "x"\n', "agents: at least one"),
    (MINIMAL + "colour = 1\n", "unknown key"),
    (MINIMAL.replace('kind = "epsilon-greedy"', 'kind = "epsilon-greedy"\nlayers = 3'), "unknown key"),
    (MINIMAL + '[[agents]]\nkind = "epsilon-greedy"\n', "duplicate"),
    (MINIMAL.replace("seeds = [0, 1]", "seeds = []"), "seeds"),
    (MINIMAL.replace("horizon = 5", "horizon = 0"), "horizon"),
    (MINIMAL.replace('"epsilon-greedy"', '"softmax"'), "softmax"),
    ("horizon = [", "<spec>"),
])
def test_bad_specs(text, msg):
    with pytest.raises(SpecError, match=msg):
        parse_spec(text)


def test_defaults_block_and_overrides():
    spec = parse_spec(MINIMAL + "[defaults]\nepsilon = 0.1\n")
    assert spec.agents[0].epsilon == 0.1
    apply_overrides(spec, horizon=9, seeds=[4], retrain_mode="scratch", dataset="x.data")
    assert spec.horizon == 9 and spec.seeds == [4]
    assert spec.agents[0].retrain_mode == "scratch" and spec.env.dataset == "x.data"
    with pytest.raises(SpecError):
        apply_overrides(spec, horizon=0)


# -- command line -------------------------------------------------------------

def test_zero_agents_exit_2(tmp_path):
    spec = tmp_path / "empty.toml"
    spec.write_text('name = "empty"\nhorizon = 10\n')
    proc = run_cli("run", "--spec", spec, "--out", tmp_path / "out")
    assert proc.returncode == 2
    assert "agents" in proc.stderr and len(proc.stderr.strip().splitlines()) == 1


def test_missing_spec_exit_2(tmp_path):
    assert run_cli("run", "--spec", tmp_path / "nope.toml").returncode == 2


def test_missing_dataset_exit_3(tmp_path):
    proc = run_cli("run", "--spec", "mushroom", "--dataset", tmp_path / "absent.data",
                   "--out", tmp_path / "out")
    assert proc.returncode == 3
    assert "absent.data" in proc.stderr


def test_horizon_one_gives_one_row_per_run(tmp_path):
    out = tmp_path / "out"
    proc = run_cli("run", "--spec", "casino-quick", "--horizon", "1", "--seeds", "3,4,5", "--out", out)
    assert proc.returncode == 0, proc.stderr
    rows = list(csv.DictReader((out / "traces.csv").open()))
    assert len(rows) == 4 * 3
    assert {r["step"] for r in rows} == {"1"}
    assert (out / "summary.csv").is_file() and (out / "regret.svg").is_file()


def test_mushroom_fixture_run_and_replay(tmp_path, fixture_path):
    out = tmp_path / "m"
    proc = run_cli("run", "--spec", "mushroom", "--dataset", fixture_path, "--horizon", "40",
                   "--seeds", "0", "--out", out)
    assert proc.returncode == 0, proc.stderr
    target = tmp_path / "again.svg"
    proc = run_cli("replay", out / "traces.csv", "--out", target)
    assert proc.returncode == 0, proc.stderr
    assert target.read_text().count("<polyline") == 4


def test_fetch_data_rejects_wrong_size(tmp_path, fixture_path):
    proc = run_cli("fetch-data", "--from", fixture_path, "--dest", tmp_path)
    assert proc.returncode == 3
    assert "bytes" in proc.stderr
    assert not any(tmp_path.iterdir())


def test_fetch_data_accepts_canonical_file(tmp_path, uci_path):
    proc = run_cli("fetch-data", "--from", uci_path, "--dest", tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "8124 records" in proc.stdout


def test_casino_quick_concrete_is_lowest(casino_quick_runs):
    rows = list(csv.DictReader((casino_quick_runs[0] / "summary.csv").open()))
    fcr = {r["agent"]: float(r["fcr_mean"]) for r in rows}
    assert len(fcr) == 4
    assert min(fcr, key=fcr.get) == "concrete-dropout-ts"


@pytest.mark.skipif(BACKEND != "cython", reason="golden summary recorded with the compiled kernels")
def test_casino_quick_matches_golden_summary(casino_quick_runs):
    golden = (GOLDEN_DIR / "casino-quick-summary.csv").read_text()
    assert (casino_quick_runs[0] / "summary.csv").read_text() == golden
