import csv
import json
import math

import pytest

from polylab.runner import ConfigError, emit_report, load_config, load_schema, run_experiment
from polylab.runner.cli import main, parse_dist, parse_number
from polylab.runner.experiment import fmt
from polylab.runner.report import MissingArtifactError


def minimal(tmp_path, **extra):
    cfg = {"model": "polymer", "distribution": {"kind": "constant", "c": 1}, "sizes": [20],
           "replicates": 1, "estimators": {"shape": {}}, "output_dir": str(tmp_path / "out")}
    cfg.update(extra)
    return cfg


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_schema_is_published_json():
    schema = load_schema()
    assert schema["additionalProperties"] is False
    assert "estimators" in schema["properties"]


def test_minimal_config_one_row(tmp_path):
    res = run_experiment(minimal(tmp_path))
    assert res.exit_code == 0
    rows = read_summary(res.output_dir / "summary.csv")
    assert len(rows) == 1 and rows[0]["estimator"] == "shape"
    for name, digest in res.manifest["files"].items():
        assert len(digest) == 64 and (res.output_dir / name).exists()


def test_unknown_keys_are_errors(tmp_path):
    cfg = minimal(tmp_path, replicatse=3)
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert any("replicatse" in d for d in exc.value.diagnostics)
    bad = minimal(tmp_path)
    bad["estimators"] = {"shape": {"n": 5, "bogus": 1}}
    with pytest.raises(ConfigError):
        load_config(bad)


@pytest.mark.parametrize("patch, needle", [
    ({"sizes": [8, 8]}, "strictly increasing"),
    ({"distribution": {"kind": "exponential", "rate": -1}}, "distribution"),
    ({"estimators": {"relation": {}}}, "requires"),
    ({"estimators": {"chi": {}}}, "replicates"),
    ({"estimators": {"unknown": {}}}, "unknown"),
])
def test_semantic_errors(tmp_path, patch, needle):
    with pytest.raises(ConfigError) as exc:
        load_config(minimal(tmp_path, **patch))
    assert needle in str(exc.value)


def test_overrides_and_provenance(tmp_path):
    cfg = load_config(minimal(tmp_path), {"beta": 2.0, "estimators.shape.n": 10})
    assert cfg.raw["beta"] == 2.0 and cfg.raw["estimators"]["shape"]["n"] == 10
    assert cfg.provenance["beta"] == "flag"
    assert cfg.provenance["model"] == "config"
    assert cfg.provenance["master_seed"] == "default"


def test_same_seed_byte_identical(tmp_path):
    a = run_experiment(minimal(tmp_path, output_dir=str(tmp_path / "a"), replicates=3,
                               distribution={"kind": "uniform", "lo": 0, "hi": 1}))
    b = run_experiment(minimal(tmp_path, output_dir=str(tmp_path / "b"), replicates=3,
                               distribution={"kind": "uniform", "lo": 0, "hi": 1}))
    csvs = [n for n in a.manifest["files"] if n.endswith(".csv")]
    assert csvs
    for name in csvs:
        assert (a.output_dir / name).read_bytes() == (b.output_dir / name).read_bytes()
    assert a.manifest["config_sha256"] == b.manifest["config_sha256"]


def exponent_config(tmp_path, name="run"):
    return {"model": "lpp", "distribution": {"kind": "exponential", "rate": 1},
            "sizes": [8, 16, 32, 64], "replicates": 30, "master_seed": 5, "bootstrap": 200,
            "estimators": {"chi": {}, "xi": {}, "kappa": {"n": 64}, "relation": {}},
            "output_dir": str(tmp_path / name)}


def test_exponent_suite_manifest_and_report(tmp_path):
    res = run_experiment(exponent_config(tmp_path))
    assert res.exit_code == 0
    files = res.manifest["files"]
    for name in ("chi_replicates.csv", "xi_replicates.csv", "kappa_points.csv", "summary.csv"):
        assert name in files
    est = {r["estimator"]: r for r in read_summary(res.output_dir / "summary.csv")}
    assert {"chi", "xi", "kappa", "relation_rhs", "relation_residual"} <= set(est)
    assert len(res.manifest["seeds"]["replicates"]) == 4 * 30
    report = emit_report(res.output_dir).read_text()
    assert "χ̂ vs κ̂ξ̂−(κ̂−1): " in report
    assert ("consistent" in report) or ("inconsistent" in report)
    with open(res.output_dir / "plot_chi.csv") as fh:
        assert fh.readline().strip() == "log_n,log_var,fitted,in_fit"


def test_shape_fan_plot(tmp_path):
    res = run_experiment(minimal(tmp_path, replicates=2))
    emit_report(res.output_dir)
    with open(res.output_dir / "plot_shape_fan.csv") as fh:
        assert fh.readline().strip() == "angle,f_hat,se"


def test_degenerate_exit_code(tmp_path):
    cfg = minimal(tmp_path, sizes=[8, 16, 32], replicates=3, estimators={"chi": {}})
    res = run_experiment(cfg)
    assert res.exit_code == 3
    rows = read_summary(res.output_dir / "summary.csv")
    assert rows[0]["status"] == "degenerate-ensemble"


def test_resource_cap_flags_incomplete(tmp_path):
    cfg = exponent_config(tmp_path)
    cfg["max_cells"] = 1000
    res = run_experiment(cfg)
    assert res.exit_code == 4 and res.manifest["incomplete"] is True
    report = emit_report(res.output_dir).read_text()
    assert "incomplete" in report


def test_report_missing_artifacts(tmp_path):
    res = run_experiment(minimal(tmp_path))
    (res.output_dir / "shape.csv").unlink()
    with pytest.raises(MissingArtifactError):
        emit_report(res.output_dir)
    with pytest.raises(MissingArtifactError):
        emit_report(tmp_path / "nowhere")


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, math.pi * 1e-300, 2.0 ** 0.5):
        assert float(fmt(x)) == x
    assert fmt(3) == "3" and fmt(True) == "1"


# -- CLI -----------------------------------------------------------------------

def test_parse_helpers():
    assert parse_dist("bernoulli:p=0.5,a=0,b=1").params == (0.5, 0.0, 1.0)
    assert parse_number("1/3") * 3 == 1
    assert parse_number("2") == 2 and parse_number("0.5") == 0.5


def test_cli_run_and_config_error(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(minimal(tmp_path)))
    assert main(["run", str(good)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(minimal(tmp_path, typo=1)))
    assert main(["run", str(bad)]) == 2
    assert "typo" in capsys.readouterr().err


def test_cli_low_level_commands(tmp_path, capsys):
    env = tmp_path / "env.csv"
    assert main(["generate", "--dist", "constant:c=1", "--corner", "2", "2", "--out", str(env)]) == 0
    capsys.readouterr()
    assert main(["free-energy", "--env", str(env), "--target", "1", "1"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2 + math.log(2))
    assert main(["lpp", "--env", str(env), "--out", str(tmp_path / "g.csv")]) == 0
    assert float(capsys.readouterr().out) == 4.0
    assert main(["sample-paths", "--env", str(env), "--endpoint", "2", "2", "--count", "3",
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").exists()


def test_cli_check_relation(capsys):
    assert main(["check-relation", "1/3", "2/3", "2"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "residual 0" and "consistent" in out


def test_cli_estimate_with_flags(tmp_path, capsys):
    code = main(["estimate", "chi", "--model", "polymer", "--dist", "constant:c=1", "--sizes", "4",
                 "8", "16", "--replicates", "3", "--out", str(tmp_path / "e"), "--no-report"])
    assert code == 3
    manifest = json.loads((tmp_path / "e" / "manifest.json").read_text())
    assert manifest["parameter_sources"]["sizes"] == "flag"


def test_cli_report_svg(tmp_path):
    res = run_experiment(exponent_config(tmp_path))
    assert main(["report", str(res.output_dir), "--svg"]) == 0
    assert (res.output_dir / "plot_chi.svg").exists()
