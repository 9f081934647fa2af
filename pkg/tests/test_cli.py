from __future__ import annotations

import json

import pytest
import yaml

from modechoice.cli import EXIT_CONFIG, EXIT_OK, main


def write_cfg(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def synth(tmp_path, name, spec, *extra, **syn):
    out = tmp_path / name
    cfg = write_cfg(tmp_path / f"{name}.yaml", {"synth": {"spec": spec, **syn}})
    assert main(["synth", "--config", cfg, "--seed", "3", "--out", str(out), *extra]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def m1_data(tmp_path_factory):
    return synth(tmp_path_factory.mktemp("cli"), "m1data", "M1", n_persons=40, n_obs=25)


def estimate_cfg(tmp_path, data, spec, **est):
    return write_cfg(tmp_path / "est.yaml", {
        "data": {"observations": str(data / "observations.csv"), "persons": str(data / "persons.csv")},
        "model": {"spec": spec}, "estimation": est})


def test_estimate_m1_has_21_free_parameters(tmp_path, m1_data):
    out = tmp_path / "est"
    assert main(["estimate", "--config", estimate_cfg(tmp_path, m1_data, "M1"), "--out", str(out)]) == EXIT_OK
    res = json.loads((out / "result.json").read_text())
    assert res["n_params"] == 21
    assert sum(not p["frozen"] for p in res["parameters"]) == 21


def test_estimate_m4_has_scale_and_two_random_parameters(tmp_path):
    data = synth(tmp_path, "m4data", "M4", n_persons=80, n_obs=15, sp_per_person=3)
    out = tmp_path / "est4"
    cfg = estimate_cfg(tmp_path, data, "M4")
    assert main(["estimate", "--config", cfg, "--draws", "40", "--out", str(out)]) == EXIT_OK
    names = {p["name"] for p in json.loads((out / "result.json").read_text())["parameters"]}
    assert {"mu_sp", "sigma_time", "sigma_cost"} <= names
    rep = tmp_path / "rep"
    assert main(["report", str(out / "result.json"), "--out", str(rep)]) == EXIT_OK
    row = next(line for line in (rep / "report.txt").read_text().splitlines() if line.startswith("Random parameters"))
    assert row.split()[-1] == "2"


def test_missing_persons_file_named(tmp_path, m1_data, capsys):
    cfg = write_cfg(tmp_path / "bad.yaml", {
        "data": {"observations": str(m1_data / "observations.csv"), "persons": str(tmp_path / "nope.csv")},
        "model": {"spec": "M1"}})
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error" and any("nope.csv" in p for p in err["problems"])


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert json.loads(capsys.readouterr().err)["error"] == "config"


def test_all_config_problems_reported(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "bad.yaml", {
        "bogus": 1, "data": {"observations": "missing.csv"}, "model": {"spec": "M9"},
        "estimation": {"draws": -5, "gradient": "guess"}, "cv": {"k": 1}})
    assert main(["cv", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    problems = json.loads(capsys.readouterr().err)["problems"]
    for fragment in ("config.bogus", "data.observations", "data.persons", "model.spec", "estimation.draws",
                     "estimation.gradient", "cv.k"):
        assert any(fragment in p for p in problems), fragment


def test_manifest_records_run_and_is_reproducible(tmp_path):
    a = synth(tmp_path, "a", "M1", n_persons=5, n_obs=4)
    b = synth(tmp_path, "b", "M1", n_persons=5, n_obs=4)
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["status"] == "ok" and ma["seed"] == 3 and ma["command"] == "synth"
    assert {"numpy", "scipy", "kernel_backend"} <= set(ma["versions"])
    assert ma["outputs"] == mb["outputs"]
    assert {"observations.csv", "persons.csv", "truth.json"} <= set(ma["outputs"])


def test_empty_report_has_headers(tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "--out", str(out)]) == EXIT_OK
    text = (out / "report.txt").read_text()
    assert "Parameter estimates" in text and text.count("Parameter") >= 2


def test_report_row_format(tmp_path, m1_data):
    out = tmp_path / "est"
    main(["estimate", "--config", estimate_cfg(tmp_path, m1_data, "M1"), "--out", str(out)])
    d = json.loads((out / "result.json").read_text())
    for p in d["parameters"]:
        if p["name"] == "b_cost":
            p["estimate"], p["robust_t"] = -0.766, -15.02
    (out / "edited.json").write_text(json.dumps(d))
    rep = tmp_path / "rep"
    assert main(["report", str(out / "edited.json"), "--out", str(rep)]) == EXIT_OK
    row = next(line for line in (rep / "report.txt").read_text().splitlines() if line.startswith("β_C"))
    assert " ".join(row.split()) == "β_C (Cost) −0.766 (−15.02)"


def test_scenario_report_gain_row(tmp_path):
    out = tmp_path / "sc"
    assert main(["scenario", "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "scenario.json").read_text())
    assert doc["fare"]["gains"] and doc["integration"]["swing"] > 0
    rep = tmp_path / "rep"
    assert main(["report", str(out / "scenario.json"), "--out", str(rep)]) == EXIT_OK
    assert any(line.startswith("Gain (pp)") for line in (rep / "report.txt").read_text().splitlines())
