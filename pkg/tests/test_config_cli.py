from __future__ import annotations

import csv

import numpy as np
import pytest

from splus.cli import main
from splus.config import (
    ConfigParseError,
    ConfigValidationError,
    build_initial,
    build_tau,
    load_config,
    parse_config,
    preset_names,
)
from splus.diagnostics import Regime
from splus.inequality import WeakParetoLaw
from splus.market_model import InadmissibleTau, smallest_root
from splus.scenario import run_scenario, sweep

BASE = """\
schema_version: 1
name: small
seed: 7
tau: {kind: degenerate, l: 0.9, r: 0.3}
coupling: independent
initial: {kind: pareto, alpha: 1.2, mean_centering: true}
solver: {kind: wild, replicas: 3000}
times: [0.5, 1]
diagnostics: {tail_k: 50}
"""


def small(tmp_path, text=BASE):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    return load_config(p)


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------


def test_presets_all_load():
    names = preset_names()
    for want in ("example1_public_services", "example2_bonds", "example3_consumer_goods",
                 "conservation_e", "inadmissible"):
        assert want in names
    for name in names:
        assert load_config(name).name == name


def test_example_presets_are_admissible():
    for name in ("example1_public_services", "example2_bonds", "example3_consumer_goods"):
        prof = smallest_root(build_tau(load_config(name).tau))
        assert 0 < prof.p_star and prof.lam == pytest.approx((1 - prof.p_star) / 2)


def test_missing_seed_is_named():
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(BASE.replace("seed: 7\n", ""))
    assert any(e.startswith("seed") for e in exc.value.errors)


def test_times_must_be_non_decreasing():
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(BASE.replace("times: [0.5, 1]", "times: [2, 1]"))
    assert "times must be non-decreasing" in exc.value.errors


def test_all_errors_are_collected():
    text = BASE.replace("seed: 7\n", "").replace("times: [0.5, 1]", "times: [2, 1]")
    text = text.replace("coupling: independent", "coupling: telepathic")
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(text)
    assert len(exc.value.errors) >= 3


def test_unknown_key_rejected():
    with pytest.raises(ConfigValidationError):
        parse_config(BASE + "colour: blue\n")


def test_parse_error_reports_line():
    with pytest.raises(ConfigParseError) as exc:
        parse_config(BASE.replace("times: [0.5, 1]", "times: [0.5, 1"))
    assert exc.value.line is not None and exc.value.line >= 8


def test_solver_required():
    with pytest.raises(ConfigValidationError):
        parse_config(BASE.replace("solver: {kind: wild, replicas: 3000}\n", ""))


def test_pareto_initial_with_p_star_alpha():
    cfg = load_config("conservation_e")
    p = smallest_root(build_tau(cfg.tau)).p_star
    law = build_initial(cfg.initial, p)
    assert isinstance(law, WeakParetoLaw)
    assert law.alpha == p and abs(law.mean()) < 1e-9


def test_replace_revalidates(tmp_path):
    cfg = small(tmp_path)
    assert cfg.replace("seed", 11).seed == 11
    with pytest.raises(ConfigValidationError):
        cfg.replace("times", [3, 1])


# ---------------------------------------------------------------------------
# running scenarios
# ---------------------------------------------------------------------------


def test_run_writes_manifest(tmp_path):
    rep = run_scenario(small(tmp_path), out=tmp_path / "out")
    assert all(f.exists() for f in rep.files)
    names = {f.name for f in rep.files}
    assert {"t_0.5.csv", "t_1.csv", "lorenz_1.csv", "report.csv", "meta.txt"} <= names
    assert rep.regime.regime is Regime.INEQUALITY
    meta = dict(line.split("=", 1) for line in (tmp_path / "out" / "meta.txt").read_text().splitlines())
    assert float(meta["p_star"]) == pytest.approx(rep.p_star)
    assert meta["seed"] == "7"
    with open(tmp_path / "out" / "snapshots" / "t_1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["splus"] and len(rows) == 3001


def test_report_reproducible_from_snapshots(tmp_path):
    from splus.inequality import EmpiricalDistribution, gini
    rep = run_scenario(small(tmp_path), out=tmp_path / "out")
    x = np.loadtxt(tmp_path / "out" / "snapshots" / "t_1.csv", skiprows=1)
    assert gini(EmpiricalDistribution(x)) == pytest.approx(rep.snapshots[-1].gini, rel=1e-12)


def test_same_seed_same_bytes(tmp_path):
    cfg = small(tmp_path)
    run_scenario(cfg, out=tmp_path / "a")
    run_scenario(cfg, out=tmp_path / "b", threads=3)
    for f in sorted((tmp_path / "a").rglob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_conservation_preset_verdict(tmp_path):
    cfg = load_config("conservation_e").replace("solver.replicas", 5000)
    cfg = cfg.replace("diagnostics.tail_k", 50)
    rep = run_scenario(cfg, out=tmp_path / "c")
    assert rep.p_star == pytest.approx(1.5647634, abs=1e-6)
    assert rep.regime.regime is Regime.CONSERVATION


def test_inadmissible_preset_aborts(tmp_path):
    with pytest.raises(InadmissibleTau, match="inadmissible"):
        run_scenario(load_config("inadmissible"), out=tmp_path / "bad")
    assert "status=inadmissible" in (tmp_path / "bad" / "meta.txt").read_text()


def test_agents_meta_has_chaos_bound(tmp_path):
    cfg = small(tmp_path).replace("solver", {"kind": "agents", "n_agents": 500})
    run_scenario(cfg, out=tmp_path / "ag")
    meta = dict(line.split("=", 1) for line in (tmp_path / "ag" / "meta.txt").read_text().splitlines())
    assert float(meta["chaos_bound"]) == pytest.approx(6 * (np.e - 1) / 499, rel=1e-14)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def test_sweep_initial_alpha_gives_three_regimes(tmp_path):
    reps = sweep(small(tmp_path), "initial.alpha", [1.2, "p_star", 1.9], out=tmp_path / "sw")
    assert [r.regime.regime for r in reps] == [Regime.INEQUALITY, Regime.CONSERVATION,
                                               Regime.EGALITARIAN]
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["regime"] for r in rows] == ["inequality", "conservation", "egalitarian"]
    assert len({r["seed"] for r in rows}) == 3


def test_sweep_scale_lowers_p_star(tmp_path):
    # shrinking every coefficient lowers S pointwise, so its root moves down
    reps = sweep(small(tmp_path), "tau.scale", [1.0, 0.95, 0.9], out=tmp_path / "sc")
    p = [r.p_star for r in reps]
    assert p[0] > p[1] > p[2]


def test_sweep_argument_errors(tmp_path):
    cfg = small(tmp_path)
    with pytest.raises(ValueError):
        sweep(cfg, "initial.alpha", [], out=tmp_path / "e")
    with pytest.raises(ValueError):
        sweep(cfg, "gravity", [1.0], out=tmp_path / "e")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def test_cli_presets_list(capsys):
    assert main(["presets", "list"]) == 0
    assert "conservation_e" in capsys.readouterr().out.split()


def test_cli_check_tau(capsys):
    assert main(["check-tau", "--config", "conservation_e"]) == 0
    out = capsys.readouterr().out
    assert "p_star=1.56476" in out
    assert main(["check-tau", "--config", "inadmissible"]) == 2


def test_cli_run_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(BASE)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r"), "--seed", "3"]) == 0
    assert "regime=inequality" in capsys.readouterr().out
    assert "seed=3" in (tmp_path / "r" / "meta.txt").read_text()
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"),
                 "--axis", "initial.alpha", "--values", "1.2,p_star"]) == 0
    assert (tmp_path / "s" / "sweep.csv").exists()


def test_cli_error_codes(tmp_path, capsys):
    assert main(["run", "--config", "inadmissible", "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text(BASE.replace("seed: 7\n", ""))
    assert main(["run", "--config", str(bad)]) == 1
    assert "seed" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1
