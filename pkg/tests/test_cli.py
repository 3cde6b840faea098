"""CLI surface: argument parsing, CSV outputs, byte-identical reruns,
error handling."""

import pytest
from click.testing import CliRunner

from green_cran import cli

TINY = """\
name: tiny-l3
num_rrhs: 3
num_users: 3
antennas: 2
groups:
  - [1, 2]
  - [3]
max_tx_power_w: 1.0
fronthaul_power_w: default
drain_inefficiency: 0.25
noise_sigma: 1.0
group_weights: 1.0
target_sinr_db: 0.0
tiers:
  gains: [1.0, 0.7, 0.5]
  sizes: [1, 1, 1]
"""


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "tiny.yaml"
    path.write_text(TINY)
    return str(path)


def _run(args):
    return CliRunner().invoke(cli.main, args, catch_exceptions=False)


def test_convergence_run_and_byte_identical_rerun(tmp_path, scenario):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    args = ["convergence", "--scenario", scenario, "--seeds", "2",
            "--tol", "1e-5", "--max-iters", "20000"]
    r1 = _run(args + ["--out", str(out1)])
    assert r1.exit_code == 0, r1.output
    r2 = _run(args + ["--out", str(out2)])
    assert r2.exit_code == 0
    files1 = sorted(p.name for p in out1.iterdir())
    assert "convergence.csv" in files1
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    header = (out1 / "convergence.csv").read_text().splitlines()[0]
    assert header == "seed,init_label,iteration,objective"


def test_seed_list_and_header_schema(tmp_path, scenario):
    out = tmp_path / "r"
    r = _run(["convergence", "--scenario", scenario, "--seeds", "3,5",
              "--tol", "1e-5", "--out", str(out)])
    assert r.exit_code == 0, r.output
    rows = (out / "convergence.csv").read_text().splitlines()
    seeds = {line.split(",")[0] for line in rows[1:]}
    assert seeds == {"3", "5"}


def test_unknown_experiment_rejected(scenario):
    r = CliRunner().invoke(cli.main, ["warp", "--scenario", scenario])
    assert r.exit_code != 0
    assert "Invalid value" in r.output


def test_missing_scenario_rejected(tmp_path, scenario):
    r = CliRunner().invoke(
        cli.main, ["convergence", "--scenario", str(tmp_path / "nope.yaml")])
    assert r.exit_code != 0


def test_bad_algo_rejected(tmp_path, scenario):
    r = CliRunner().invoke(
        cli.main, ["netpower", "--scenario", scenario, "--algos", "magic",
                   "--out", str(tmp_path / "x")])
    assert r.exit_code != 0


def test_bad_p_rejected(tmp_path, scenario):
    r = CliRunner().invoke(
        cli.main, ["netpower", "--scenario", scenario, "--p", "0.3",
                   "--out", str(tmp_path / "x")])
    assert r.exit_code != 0
