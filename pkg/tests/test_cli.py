"""End-to-end command-line behavior: artifacts, determinism, exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from cfisac.cli import main, sweep_model_path
from cfisac.model import GnnModel
from conftest import tiny_config


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Tiny dataset + short training shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg_doc = {
        "system": tiny_config().to_dict(),
        "train": {"lr": 1e-3, "batch_size": 8, "max_epochs": 3, "patience": 3},
        "gnn": {"layers": 2, "width": 8, "heads": 2, "init_scale": 1.0, "seed": 0},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg_doc))
    assert main(["gen", "--config", str(cfg_path), "--out", str(root / "data"),
                 "--n", "40", "--seed", "5"]) == 0
    assert main(["train", "--config", str(cfg_path), "--data", str(root / "data"),
                 "--out", str(root / "run"), "--seed", "5"]) == 0
    return root, cfg_path


def test_gen_rerun_byte_identical(workdir, tmp_path):
    root, cfg_path = workdir
    assert main(["gen", "--config", str(cfg_path), "--out", str(tmp_path / "again"),
                 "--n", "40", "--seed", "5"]) == 0
    for name in ("manifest.json", "samples.jsonl"):
        assert (tmp_path / "again" / name).read_bytes() == \
               (root / "data" / name).read_bytes()


def test_gen_rejects_zero_samples(workdir, tmp_path):
    _, cfg_path = workdir
    assert main(["gen", "--config", str(cfg_path), "--out", str(tmp_path / "x"),
                 "--n", "0", "--seed", "1"]) == 2


def test_train_outputs_and_metadata(workdir):
    root, _ = workdir
    model = GnnModel.load(root / "run" / "model.json")
    assert model.train_meta["train_config"]["max_epochs"] == 3
    log = (root / "run" / "train_log.csv").read_text().splitlines()
    header = [l for l in log if l.startswith("epoch,")][0]
    assert header == "epoch,train_loss,train_rate,train_snr,violation_rate,val_loss,seconds"
    assert any(l.startswith("# config_hash=") for l in log)


def test_train_rho_recorded(workdir, tmp_path):
    root, cfg_path = workdir
    assert main(["train", "--config", str(cfg_path), "--data", str(root / "data"),
                 "--out", str(tmp_path / "r0"), "--rho", "0", "--seed", "5",
                 "--epochs", "1"]) == 0
    model = GnnModel.load(tmp_path / "r0" / "model.json")
    assert model.train_meta["train_config"]["rho"] == 0.0


def test_train_identical_invocations_identical_models(workdir, tmp_path):
    root, cfg_path = workdir
    for sub in ("t1", "t2"):
        assert main(["train", "--config", str(cfg_path), "--data", str(root / "data"),
                     "--out", str(tmp_path / sub), "--seed", "9", "--epochs", "2"]) == 0
    assert (tmp_path / "t1" / "model.json").read_bytes() == \
           (tmp_path / "t2" / "model.json").read_bytes()


def test_eval_report_schema_and_footer(workdir, tmp_path):
    root, _ = workdir
    report = tmp_path / "report.csv"
    assert main(["eval", "--model", str(root / "run" / "model.json"),
                 "--data", str(root / "data"), "--split", "test",
                 "--report", str(report)]) == 0
    lines = report.read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "idx,rate,sensing_snr,snr_feasible,p_ap_max"
    rows = [l for l in lines if l and not l.startswith("#") and l != header]
    footer = [l for l in lines if l.startswith("# aggregate")]
    assert footer and rows
    rates = [float(r.split(",")[1]) for r in rows]
    mean_in_footer = float(footer[0].split("mean_rate=")[1].split()[0])
    assert abs(np.mean(rates) - mean_in_footer) < 1e-9


def test_eval_rerun_byte_identical(workdir, tmp_path):
    root, _ = workdir
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["eval", "--model", str(root / "run" / "model.json"),
                     "--data", str(root / "data"), "--report", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_eval_with_baseline_columns(workdir, tmp_path):
    root, _ = workdir
    report = tmp_path / "base.csv"
    assert main(["eval", "--model", str(root / "run" / "model.json"),
                 "--data", str(root / "data"), "--report", str(report),
                 "--baseline", "ns-rzf"]) == 0
    lines = report.read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == ("idx,method,rate,sensing_snr,snr_feasible,p_ap_max,"
                      "kappa,feasible,nullspace_dim")
    methods = {l.split(",")[1] for l in lines if l and not l.startswith("#") and l != header}
    assert methods == {"sacgnn", "ns-rzf"}


def test_eval_hash_mismatch_exits_5(workdir, tmp_path):
    root, cfg_path = workdir
    other_cfg = json.loads(cfg_path.read_text())
    other_cfg["system"]["m_h"] = 4
    other_path = tmp_path / "other.json"
    other_path.write_text(json.dumps(other_cfg))
    assert main(["gen", "--config", str(other_path), "--out", str(tmp_path / "od"),
                 "--n", "10", "--seed", "1"]) == 0
    assert main(["eval", "--model", str(root / "run" / "model.json"),
                 "--data", str(tmp_path / "od"),
                 "--report", str(tmp_path / "r.csv")]) == 5


def test_sweep_missing_model_exits_6(workdir, tmp_path):
    root, cfg_path = workdir
    assert main(["sweep", "--param", "gamma_min", "--values", "1,2",
                 "--config", str(cfg_path), "--data", str(root / "data"),
                 "--models", str(tmp_path / "none"),
                 "--report", str(tmp_path / "s.csv")]) == 6


def test_sweep_empty_values_exits_2(workdir, tmp_path):
    root, cfg_path = workdir
    assert main(["sweep", "--param", "gamma_min", "--values", "",
                 "--config", str(cfg_path), "--data", str(root / "data"),
                 "--models", str(tmp_path), "--report", str(tmp_path / "s.csv")]) == 2


def test_sweep_happy_path(workdir, tmp_path):
    root, cfg_path = workdir
    models = tmp_path / "models"
    for v in (0.5, 1.0):
        target = sweep_model_path(models, "gamma_min", v)
        target.parent.mkdir(parents=True)
        model = GnnModel.load(root / "run" / "model.json")
        model.system = model.system.replace(gamma_min=v)
        model.save(target)
    report = tmp_path / "sweep.csv"
    assert main(["sweep", "--param", "gamma_min", "--values", "0.5,1",
                 "--config", str(cfg_path), "--data", str(root / "data"),
                 "--models", str(models), "--report", str(report)]) == 0
    lines = [l for l in report.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "param_value,method,mean_rate,violation_rate"
    assert len(lines) == 1 + 2 * 2  # two values x two methods


def test_beampattern_grid_and_zero_model(workdir, tmp_path):
    root, cfg_path = workdir
    scene = {"users": [[40.0, 40.0, 30.0]], "target": [115.0, 115.0, 25.0], "seed": 3}
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(scene))

    out = tmp_path / "bp.csv"
    assert main(["beampattern", "--model", str(root / "run" / "model.json"),
                 "--scene", str(scene_path), "--ap", "1", "--grid", "9x5",
                 "--out", str(out)]) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0].startswith("phi,theta,gain_total,gain_s0,gain_u1")
    assert len(lines) == 1 + 9 * 5

    # single-cell grid -> single row
    assert main(["beampattern", "--model", str(root / "run" / "model.json"),
                 "--scene", str(scene_path), "--ap", "1", "--grid", "1x1",
                 "--out", str(tmp_path / "bp1.csv")]) == 0
    rows = [l for l in (tmp_path / "bp1.csv").read_text().splitlines()
            if not l.startswith("#")]
    assert len(rows) == 2

    # zero model -> all-zero gains
    zero_dir = tmp_path / "zmodel"
    cfg_doc = json.loads(cfg_path.read_text())
    cfg_doc["gnn"]["init_scale"] = 0.0
    zcfg = tmp_path / "zero.json"
    zcfg.write_text(json.dumps(cfg_doc))
    assert main(["train", "--config", str(zcfg), "--data", str(root / "data"),
                 "--out", str(zero_dir), "--epochs", "1", "--seed", "0"]) == 0
    assert main(["beampattern", "--model", str(zero_dir / "model.json"),
                 "--scene", str(scene_path), "--ap", "1", "--grid", "5x3",
                 "--out", str(tmp_path / "bz.csv")]) == 0
    for line in (tmp_path / "bz.csv").read_text().splitlines():
        if line.startswith("#") or line.startswith("phi"):
            continue
        assert all(float(v) == 0.0 for v in line.split(",")[2:])


def test_beampattern_bad_ap_and_grid_exit_2(workdir, tmp_path):
    root, _ = workdir
    scene_path = tmp_path / "scene2.json"
    scene_path.write_text(json.dumps({"users": [[40, 40, 30]],
                                      "target": [115, 115, 25], "seed": 1}))
    model = str(root / "run" / "model.json")
    assert main(["beampattern", "--model", model, "--scene", str(scene_path),
                 "--ap", "7", "--grid", "5x3", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["beampattern", "--model", model, "--scene", str(scene_path),
                 "--ap", "1", "--grid", "bogus", "--out", str(tmp_path / "x.csv")]) == 2


def test_io_failure_exits_3(workdir, tmp_path):
    root, _ = workdir
    assert main(["eval", "--model", str(tmp_path / "no_model.json"),
                 "--data", str(root / "data"),
                 "--report", str(tmp_path / "r.csv")]) == 3


def test_env_seed_overrides_flag(workdir, tmp_path, monkeypatch):
    root, cfg_path = workdir
    monkeypatch.setenv("ISAC_SEED", "5")
    assert main(["gen", "--config", str(cfg_path), "--out", str(tmp_path / "env"),
                 "--n", "40", "--seed", "12345"]) == 0
    assert (tmp_path / "env" / "samples.jsonl").read_bytes() == \
           (root / "data" / "samples.jsonl").read_bytes()
