import json
import subprocess
import sys

import pytest

from oscwalk import __version__
from oscwalk.cli import (
    EXIT_NOT_COVERED,
    EXIT_OK,
    EXIT_PRECONDITION,
    EXIT_TOLERANCE,
    EXIT_USAGE,
    main,
)

FINITE = {"mu": {"type": "finite", "atoms": {"2": 0.3, "4": 0.3, "10": 0.4}},
          "mu_prime": {"type": "finite", "atoms": {"-4": 0.5, "-1": 0.5}},
          "window": [-12, 14]}
GEOMETRIC = {"mu": {"type": "geometric", "sign": "positive", "r": 0.5},
             "mu_prime": {"type": "geometric", "sign": "negative", "r": 0.5},
             "window": [-80, 80]}
SRW = {"type": "finite", "atoms": {"-1": 0.5, "1": 0.5}}


def _run(tmp_path, cfg, *args, name="run"):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(dict(cfg, output=str(tmp_path / name))))
    code = main([args[0], "--config", str(cfg_path), *args[1:]])
    report = tmp_path / f"{name}.report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None)


def test_analyze_example(tmp_path):
    code, rep = _run(tmp_path, FINITE, "analyze")
    assert code == EXIT_OK
    assert rep["version"] == __version__
    assert rep["decomposition"]["classes"] == [{"r": 0, "lower": -4, "upper": 9, "excluded": []}]
    (cc,) = rep["crossing_classes"]
    assert cc["plus"]["excluded"] == [4, 5] and cc["noncrossing"] == [4, 5]
    assert rep["oracle_check"]["disagreements"] == []


def test_analyze_not_covered_gives_oracle(tmp_path):
    code, rep = _run(tmp_path, {"mu": SRW, "mu_prime": SRW}, "analyze")
    assert code == EXIT_NOT_COVERED
    assert rep["oracle"]["method"] == "oracle"


@pytest.mark.parametrize("cfg", [FINITE, GEOMETRIC])
def test_invariant_outputs(tmp_path, cfg):
    code, rep = _run(tmp_path, cfg, "invariant")
    assert code == EXIT_OK
    assert all(r["ok"] for r in rep["residuals"].values())
    assert rep["total_mass_identity"]["ok"]
    for name in ("nu", "nu_star", "rho", "crossing_kernel"):
        assert (tmp_path / f"run.{name}.csv").exists()
    side = json.loads((tmp_path / "run.nu.json").read_text())
    assert side["window"] == cfg["window"]


def test_invariant_refuses_two_sided(tmp_path):
    code, rep = _run(tmp_path, {"mu": SRW, "mu_prime": SRW}, "invariant")
    assert code == EXIT_PRECONDITION
    assert "refused" in rep


def test_invariant_refuses_heavy_power(tmp_path):
    cfg = {"mu": {"type": "power", "s": 1.1}, "mu_prime": {"type": "power", "sign": "negative", "s": 1.1}}
    code, _ = _run(tmp_path, cfg, "invariant")
    assert code == EXIT_PRECONDITION


def test_simulate_is_deterministic(tmp_path):
    cfg = dict(GEOMETRIC, seed=7)
    _run(tmp_path, cfg, "simulate", "--n-steps", "20000", "--n-traj", "3", name="a")
    _run(tmp_path, cfg, "simulate", "--n-steps", "20000", "--n-traj", "3",
         "--parallelism", "3", name="b")
    a = (tmp_path / "a.report.json").read_text().replace("/a", "/b")
    assert a == (tmp_path / "b.report.json").read_text()
    assert (tmp_path / "a.occupation.csv").read_bytes() == (tmp_path / "b.occupation.csv").read_bytes()


def test_simulate_dump_and_seed_override(tmp_path):
    dump = tmp_path / "path.csv"
    code, rep = _run(tmp_path, FINITE, "simulate", "--n-steps", "50", "--seed", "3",
                     "--dump-path", str(dump))
    assert code == EXIT_OK
    assert rep["config"]["seed"] == 3
    assert len(dump.read_text().splitlines()) == 52   # header + X_0..X_50
    assert "occupation_tv_to_nu" in rep["stats"]


@pytest.mark.parametrize("p, code", [("0.5", EXIT_OK), ("1.5", EXIT_USAGE), ("0", EXIT_USAGE)])
def test_classify_split(tmp_path, p, code):
    got, rep = _run(tmp_path, GEOMETRIC, "classify", "--p", p)
    assert got == code
    if code == EXIT_OK:
        assert rep["classification"] == "PositiveRecurrent"
        assert rep["rule"] == "onesided-finite-mean"


def test_kemperman_outputs(tmp_path):
    cfg = {"mu": {"type": "finite", "atoms": {"1": 0.5, "3": 0.5}},
           "mu_prime": {"type": "finite", "atoms": {"-1": 0.5, "-3": 0.5}}}
    code, rep = _run(tmp_path, cfg, "kemperman", "--h-max", "4", "--n-sim", "500")
    assert code == EXIT_OK
    assert rep["estimate"]["diagnostic_only"] is True
    rows = (tmp_path / "run.kemperman.csv").read_text().splitlines()
    assert len(rows) == 5


def test_kemperman_precondition(tmp_path):
    cfg = {"mu": {"type": "finite", "atoms": {"-2": 0.7, "1": 0.3}}, "mu_prime": SRW}
    code, _ = _run(tmp_path, cfg, "kemperman", "--n-sim", "10")
    assert code == EXIT_PRECONDITION


@pytest.mark.parametrize("cfg_text", [
    "{not json",
    json.dumps({"mu": {"type": "finite", "atoms": {"1": 0.5}}, "mu_prime": SRW}),
    json.dumps({"mu": SRW}),
    json.dumps({"mu": SRW, "mu_prime": SRW, "alpha": 2}),
])
def test_bad_configs_are_usage_errors(tmp_path, cfg_text):
    path = tmp_path / "bad.json"
    path.write_text(cfg_text)
    assert main(["analyze", "--config", str(path)]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["analyze"],
    ["analyze", "--config", "missing.json"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_window_flag(tmp_path):
    code, rep = _run(tmp_path, FINITE, "invariant", "--window=-6,11")
    assert code == EXIT_OK
    assert rep["config"]["window"] == [-6, 11]
    code, _ = _run(tmp_path, FINITE, "invariant", "--window", "3", name="w")
    assert code == EXIT_USAGE


def test_tolerance_failure_exit(tmp_path, monkeypatch):
    import oscwalk.cli as cli
    monkeypatch.setattr(cli, "TOL_FINITE", -1.0)
    code, rep = _run(tmp_path, FINITE, "invariant")
    assert code == EXIT_TOLERANCE
    assert rep["exit_code"] == EXIT_TOLERANCE


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "oscwalk", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
