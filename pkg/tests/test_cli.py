import json

from algopt.cli import main
from algopt.scenarios import default_config


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "so3-bang-bang" in out
    assert "classical-tm-lq" in out
    assert "wong-so3-r2" in out


def test_validate_passes_builtin(tmp_path, capsys):
    cfg = write_config(tmp_path, {"scenario": "so3-bang-bang"})
    assert main(["validate", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]


def test_run_writes_artifacts_and_reports(tmp_path, capsys):
    cfg = default_config("classical-tm-lq")
    path = write_config(tmp_path, cfg)
    out_dir = tmp_path / "artifacts"
    assert main(["run", path, "--out", str(out_dir)]) == 0
    stdout = capsys.readouterr().out
    assert "pass" in stdout
    for name in ("trajectory.csv", "costate.csv", "audit.json", "invariants.json"):
        assert (out_dir / name).exists()


def test_run_accepts_overrides(tmp_path):
    cfg = default_config("classical-tm-lq")
    path = write_config(tmp_path, cfg)
    out_dir = tmp_path / "artifacts"
    assert main(["run", path, "--out", str(out_dir), "--step", "2e-3",
                 "--tol", "1e-4"]) == 0
    traj = (out_dir / "trajectory.csv").read_text().splitlines()
    assert len(traj) == 502    # header + 501 nodes at step 2e-3


def test_bad_config_exits_2(tmp_path, capsys):
    path = write_config(tmp_path, {"scenario": "so3-bang-bang",
                                   "z_init": [1.0]})
    assert main(["run", path, "--out", str(tmp_path / "x")]) == 2
    assert "z_init" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_audit_round_trip(tmp_path, capsys):
    cfg = default_config("so3-bang-bang")
    cfg["horizon"] = 3.0   # includes one control switch
    path = write_config(tmp_path, cfg)
    out_dir = tmp_path / "artifacts"
    assert main(["run", path, "--out", str(out_dir)]) == 0
    capsys.readouterr()
    code = main(["audit", path,
                 "--traj", str(out_dir / "trajectory.csv"),
                 "--costate", str(out_dir / "costate.csv"),
                 "--mode", "free-time"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["passed"]


def test_audit_detects_corrupted_costate(tmp_path, capsys):
    cfg = default_config("so3-bang-bang")
    cfg["horizon"] = 2.0
    path = write_config(tmp_path, cfg)
    out_dir = tmp_path / "artifacts"
    main(["run", path, "--out", str(out_dir)])
    costate = out_dir / "costate.csv"
    lines = costate.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    z1 = header.index("z_1")
    for row in rows:
        row[z1] = repr(float(row[z1]) + 0.5)
    costate.write_text("\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n")
    capsys.readouterr()
    code = main(["audit", path,
                 "--traj", str(out_dir / "trajectory.csv"),
                 "--costate", str(costate)])
    assert code == 1
