import csv
import json
import os

import numpy as np
import pytest

from geocorr.bench import synthetic_config
from geocorr.cli import main
from geocorr.core_geometry import PointCloud, RigidTransform, transform_cloud
from geocorr.io import write_scan
from geocorr.synth_harness import SceneSpec, generate_scene


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def synth_ini(tmp_path):
    path = tmp_path / "synthetic.ini"
    with open(path, "w") as fh:
        synthetic_config().to_ini().write(fh)
    return path


@pytest.fixture
def scene_scan(tmp_path):
    scene = generate_scene(SceneSpec(seed=11, ground_point_count=3000))
    path = tmp_path / "a.bin"
    write_scan(path, scene.cloud)
    return scene.cloud, path


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["register"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 1


def test_default_config_prints_ini(capsys):
    code, out, _ = run(capsys, "default-config")
    assert code == 0 and "uot_lambda" in out


# -- ground ----------------------------------------------------------------------

def test_ground_only_scan_is_all_ground(tmp_path, capsys):
    rng = np.random.default_rng(0)
    r, a = 30 * np.sqrt(rng.uniform(size=6000)), rng.uniform(0, 2 * np.pi, 6000)
    pts = np.column_stack([r * np.cos(a), r * np.sin(a), np.full(6000, -1.7)])
    write_scan(tmp_path / "g.bin", PointCloud(pts))
    code, _, _ = run(capsys, "ground", tmp_path / "g.bin", "-o", tmp_path / "g.csv")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "g.csv")))
    assert len(rows) == 6000
    assert all(float(row["ground_prob"]) > 0.5 for row in rows)


def test_ground_empty_scan_writes_header(tmp_path, capsys):
    (tmp_path / "e.bin").write_bytes(b"")
    code, out, _ = run(capsys, "ground", tmp_path / "e.bin")
    assert code == 0
    assert out.strip() == "x_m,y_m,z_m,ground_prob"


def test_ground_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "ground", tmp_path / "missing.bin")
    assert code != 0 and "missing.bin" in err


def test_ground_truncated_file(tmp_path, capsys):
    (tmp_path / "t.bin").write_bytes(b"\0" * 10)
    code, _, err = run(capsys, "ground", tmp_path / "t.bin")
    assert code == 2 and "t.bin" in err


# -- register ----------------------------------------------------------------------

def test_register_identical_scans(scene_scan, synth_ini, capsys):
    _, path = scene_scan
    code, out, _ = run(capsys, "register", path, path, "--config", synth_ini)
    assert code == 0
    rec = json.loads(out)
    assert rec["status"] == "ok"
    np.testing.assert_allclose(rec["matrix"], np.eye(4), atol=1e-6)


def test_register_recovers_known_transform(scene_scan, synth_ini, tmp_path, capsys):
    cloud, path = scene_scan
    T = RigidTransform.from_yaw(0.7, (2.0, -1.0, 0.0))
    write_scan(tmp_path / "b.bin", transform_cloud(cloud, T))
    code, out, _ = run(capsys, "register", path, tmp_path / "b.bin", "--config", synth_ini)
    rec = json.loads(out)
    assert code == 0
    # scans are stored as float32
    np.testing.assert_allclose(rec["matrix"], T.as_matrix(), atol=1e-3)


def test_register_insufficient_matches(tmp_path, capsys):
    pts = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    write_scan(tmp_path / "s.bin", PointCloud(pts))
    code, out, _ = run(capsys, "register", tmp_path / "s.bin", tmp_path / "s.bin")
    rec = json.loads(out)
    assert code != 0
    assert rec["status"] == "error" and rec["error"]


# -- eval-sequence -------------------------------------------------------------------

LIGHT = "[retrieval]\nvocab_size = 8\n"


def light_config(tmp_path):
    path = tmp_path / "light.ini"
    path.write_text(LIGHT)
    return path


def test_eval_sequence_without_loops(tmp_path, capsys):
    seq = tmp_path / "seq"
    assert run(capsys, "synth-sequence", seq, "--num-scans", 12)[0] == 0
    code, out, _ = run(capsys, "eval-sequence", seq, "-o", tmp_path / "out",
                       "--profile", "loop_sequence", "--config", light_config(tmp_path))
    assert code == 0
    rows = {r["metric"]: r for r in csv.DictReader(open(tmp_path / "out" / "metrics.csv"))}
    for name in ("ap_metric_1", "ap_metric_2", "recall_at_1_pct", "success_rate_pct"):
        assert rows[name]["status"] == "undefined" and rows[name]["value"] == ""
    pairs = list(csv.DictReader(open(tmp_path / "out" / "pairs.csv")))
    assert pairs == []


def test_eval_sequence_corrupt_scan(tmp_path, capsys):
    seq = tmp_path / "seq"
    run(capsys, "synth-sequence", seq, "--num-scans", 5)
    with open(seq / "velodyne" / "000003.bin", "ab") as fh:
        fh.write(b"\0\0\0")
    code, _, err = run(capsys, "eval-sequence", seq, "-o", tmp_path / "out")
    assert code == 2
    assert "scan index 3" in err


def test_eval_sequence_missing_poses(tmp_path, capsys):
    seq = tmp_path / "seq"
    run(capsys, "synth-sequence", seq, "--num-scans", 3)
    os.remove(seq / "poses.txt")
    code, _, err = run(capsys, "eval-sequence", seq, "-o", tmp_path / "out")
    assert code == 2 and "poses.txt" in err


def test_eval_sequence_needs_dirs(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval-sequence"])
    assert exc.value.code == 1


# -- synth-bench ---------------------------------------------------------------------

def spec_file(tmp_path, **values):
    path = tmp_path / "scene.ini"
    body = "".join(f"{k} = {v}\n" for k, v in values.items())
    path.write_text("[scene]\n" + body)
    return path


def test_synth_bench_zero_trials(tmp_path, capsys):
    code, out, _ = run(capsys, "synth-bench", spec_file(tmp_path, seed=1), "--trials", 0)
    assert code == 0
    assert len(out.strip().splitlines()) == 1 and out.startswith("variant,")


def test_synth_bench_zero_overlap(tmp_path, capsys):
    spec = spec_file(tmp_path, seed=2, overlap_fraction=0.0, ground_point_count=2000)
    code, _, _ = run(capsys, "synth-bench", spec, "--trials", 1, "-o", tmp_path / "s.csv",
                     "--trials-output", tmp_path / "t.csv")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert len(rows) == 4
    assert all(float(r["success_rate_pct"]) == 0.0 for r in rows)
    assert len(list(csv.DictReader(open(tmp_path / "t.csv")))) == 4


def test_synth_bench_bad_spec(tmp_path, capsys):
    code, _, err = run(capsys, "synth-bench", spec_file(tmp_path, bogus=1), "--trials", 1)
    assert code == 1 and "bogus" in err


def test_synth_scene_writes_labels(tmp_path, capsys):
    spec = spec_file(tmp_path, ground_point_count=100, num_walls=0, num_boxes=0, num_poles=1)
    assert run(capsys, "synth-scene", tmp_path / "s", "--spec-file", spec)[0] == 0
    labels = list(csv.DictReader(open(tmp_path / "s_labels.csv")))
    assert sum(int(r["is_ground"]) for r in labels) == 100
    assert os.path.getsize(tmp_path / "s.bin") == 16 * len(labels)
