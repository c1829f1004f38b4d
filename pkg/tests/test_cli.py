import json
import shutil
from pathlib import Path

import pytest

from crimesim.cli import main


def run_cli(*args):
    return main(list(args))


def test_unknown_flag_exits_1(capsys):
    assert run_cli("simulate", "--bogus") == 1
    err = capsys.readouterr().err
    assert "error" in err.lower()
    assert "usage" in err.lower()


def test_simulate_writes_artifacts(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "out"
    code = run_cli("simulate", "--config", str(fixtures_dir / "run_routine.json"),
                   "--out", str(out))
    assert code == 0
    assert (out / "events.jsonl").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "complete"
    assert summary["total_events"] == sum(summary["per_step_counts"])


def test_simulate_llm_without_gateway_exits_1(fixtures_dir, tmp_path, capsys):
    doc = json.loads((fixtures_dir / "run_routine.json").read_text())
    doc["engine"] = "llm"
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(doc))
    (tmp_path / "mini_city").mkdir()
    for name in ("features.csv", "boundaries.geojson"):
        shutil.copy(fixtures_dir / "mini_city" / name, tmp_path / "mini_city" / name)
    assert run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path / "o")) == 1
    assert "gateway" in capsys.readouterr().err


def test_ingest_builds_bundle_and_distribution(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "city"
    code = run_cli("ingest",
                   "--features", str(fixtures_dir / "mini_city" / "features.csv"),
                   "--boundaries", str(fixtures_dir / "mini_city" / "boundaries.geojson"),
                   "--crimes", str(fixtures_dir / "mini_city" / "crimes.csv"),
                   "--period", "2019-01-01T00:00:00", "2019-12-31T23:59:59",
                   "--out", str(out))
    assert code == 0
    bundle = json.loads((out / "city.json").read_text())
    assert Path(bundle["features"]).exists()
    dist = json.loads((out / "distribution.json").read_text())
    assert dist["total"] == sum(dist["counts"].values()) > 0


def test_evaluate_reports_three_hr_keys(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "sim"
    run_cli("simulate", "--config", str(fixtures_dir / "run_routine.json"),
            "--out", str(out))
    city = tmp_path / "city"
    run_cli("ingest",
            "--features", str(fixtures_dir / "mini_city" / "features.csv"),
            "--boundaries", str(fixtures_dir / "mini_city" / "boundaries.geojson"),
            "--crimes", str(fixtures_dir / "mini_city" / "crimes.csv"),
            "--period", "2019-01-01T00:00:00", "2019-12-31T23:59:59",
            "--out", str(city))
    capsys.readouterr()
    report_path = tmp_path / "report.json"
    code = run_cli("evaluate", "--real", str(city / "distribution.json"),
                   "--sim", str(out / "summary.json"),
                   "--alpha", "0.2", "--k", "1.0,1.5,2.0",
                   "--out", str(report_path),
                   "--csv", str(tmp_path / "cells.csv"))
    assert code == 0
    report = json.loads(report_path.read_text())
    assert set(report["hr"]) == {"1.0", "1.5", "2.0"}
    assert 0 <= report["jsd"] <= 0.6932
    header = (tmp_path / "cells.csv").read_text().splitlines()[0]
    assert header == "cell_id,real_share,sim_share,in_real_hotspot,in_sim_hotspot"


def test_evaluate_rejects_bad_alpha(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "sim"
    run_cli("simulate", "--config", str(fixtures_dir / "run_routine.json"),
            "--out", str(out))
    code = run_cli("evaluate", "--real", str(out / "summary.json"),
                   "--sim", str(out / "summary.json"), "--alpha", "0")
    assert code == 1


def test_align_runs_fixture_loop(fixtures_dir, tmp_path, capsys):
    code = run_cli("align", "--config", str(fixtures_dir / "align" / "align_config.json"),
                   "--out", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "alignment.json").read_text())
    assert doc["converged"] is True
    assert doc["best_train_pearson"] >= 0.79
    assert len(doc["trace"]) == 2
    out = capsys.readouterr().out
    assert "converged=True" in out


def test_heatmap_geojson_shares_sum_to_one(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "sim"
    run_cli("simulate", "--config", str(fixtures_dir / "run_routine.json"),
            "--out", str(out))
    geo_path = tmp_path / "heat.json"
    city = json.dumps({"features": str(fixtures_dir / "mini_city" / "features.csv"),
                       "boundaries": str(fixtures_dir / "mini_city" / "boundaries.geojson")})
    bundle = tmp_path / "city.json"
    bundle.write_text(city)
    code = run_cli("heatmap", "--dist", str(out / "summary.json"),
                   "--city", str(bundle), "--out", str(geo_path))
    assert code == 0
    doc = json.loads(geo_path.read_text())
    assert doc["type"] == "FeatureCollection"
    assert len(doc["features"]) == 16
    total_share = sum(f["properties"]["share"] for f in doc["features"])
    assert total_share == pytest.approx(1.0, abs=1e-9)
    assert doc["features"][0]["geometry"]["type"] == "Polygon"


def test_missing_file_is_input_error(tmp_path):
    assert run_cli("simulate", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path)) == 1
