import json
import subprocess
import sys

import numpy as np
import pytest

from nmibs.cli import main, read_map_csv, read_pgm, write_map_csv, write_pgm


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    assert main(["fixtures", "--kind", "planted", "--seed", "1", "--csv", "--out", str(out)]) == 0
    return out


def _inputs(d):
    return ["--header", str(d / "cube.hdr"), "--raw", str(d / "cube.raw"), "--gt", str(d / "cube_gt.raw")]


def test_k_zero_is_usage_error(fixture_dir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["select", *_inputs(fixture_dir), "--k", "0"])
    assert exc.value.code == 2
    assert "stage 'args'" in capsys.readouterr().err


def test_k_above_band_count_is_usage_error(fixture_dir, tmp_path, capsys):
    assert main(["select", *_inputs(fixture_dir), "--k", "99", "--out", str(tmp_path)]) == 2
    assert "exceeds the number of bands" in capsys.readouterr().err


def test_select_writes_json(fixture_dir, tmp_path):
    assert main(["select", *_inputs(fixture_dir), "--k", "3", "--bins", "16", "--out", str(tmp_path)]) == 0
    result = json.loads((tmp_path / "selection.json").read_text())
    meta = json.loads((fixture_dir / "fixture.json").read_text())
    assert result["method"] == "nmibs"
    assert sorted(result["selected"]) == meta["signal_bands"]
    assert result["trace"][0]["accepted"] is True


def test_select_all_methods(fixture_dir, tmp_path):
    assert main(["select", *_inputs(fixture_dir), "--k", "3", "--method", "all", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.glob("selection_*.json")) == [
        "selection_mim.json",
        "selection_mrmr.json",
        "selection_nmibs.json",
    ]


def test_select_from_csv_fixture(fixture_dir, tmp_path):
    assert main(["select", "--csv", str(fixture_dir / "cube.csv"), "--k", "3", "--bins", "16", "--out", str(tmp_path)]) == 0
    from_csv = json.loads((tmp_path / "selection.json").read_text())
    main(["select", *_inputs(fixture_dir), "--k", "3", "--bins", "16", "--out", str(tmp_path / "raw")])
    assert from_csv["selected"] == json.loads((tmp_path / "raw" / "selection.json").read_text())["selected"]


def test_env_output_dir(fixture_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("NMIBS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["select", *_inputs(fixture_dir), "--k", "2"]) == 0
    assert (tmp_path / "env" / "selection.json").is_file()


def _pipeline(fixture_dir, out, *extra):
    args = ["pipeline", *_inputs(fixture_dir), "--k", "3", "--bins", "16", "--seed", "4", "--out", str(out), *extra]
    assert main(args) == 0


def test_pipeline_single_run_outputs(fixture_dir, tmp_path):
    _pipeline(fixture_dir, tmp_path, "--train-fraction", "0.25")
    names = {p.name for p in tmp_path.iterdir()}
    assert {"report.json", "report.csv", "map.pgm", "map.csv"} <= names
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["runs"]) == 1 and report["runs"][0]["oa_pct"] > 60  # chance is 25%
    header, row = (tmp_path / "report.csv").read_text().splitlines()
    assert header == "method,k,train_fraction,oa_pct,aa_pct,time_s"
    assert row.startswith("nmibs,3,0.25,")


def test_pipeline_is_deterministic(fixture_dir, tmp_path):
    _pipeline(fixture_dir, tmp_path / "a", "--train-fraction", "0.1")
    _pipeline(fixture_dir, tmp_path / "b", "--train-fraction", "0.1")
    for name in ("report.json", "map.pgm", "map.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_pipeline_sweep_rows(fixture_dir, tmp_path):
    _pipeline(fixture_dir, tmp_path, "--with-all-bands")
    rows = (tmp_path / "report.csv").read_text().splitlines()[1:]
    assert [r.split(",")[:3] for r in rows] == [
        ["nmibs", "3", "0.1"],
        ["nmibs", "3", "0.25"],
        ["nmibs", "3", "0.5"],
        ["all-bands", "15", "0.1"],
        ["all-bands", "15", "0.25"],
        ["all-bands", "15", "0.5"],
    ]
    assert (tmp_path / "map_nmibs_0.25.pgm").is_file()
    assert (tmp_path / "map_all-bands_0.5.csv").is_file()


def test_pgm_round_trips_through_map_csv(fixture_dir, tmp_path):
    _pipeline(fixture_dir, tmp_path, "--train-fraction", "0.5")
    labels = read_map_csv(tmp_path / "map.csv")
    gray = read_pgm(tmp_path / "map.pgm")
    assert gray.shape == labels.shape
    pairs = set(zip(labels.ravel().tolist(), gray.ravel().tolist()))
    # one gray level per class and one class per gray level
    assert len({l for l, _ in pairs}) == len({g for _, g in pairs}) == len(pairs)


def test_pgm_gray_levels(tmp_path):
    class_map = np.array([[1, 2], [3, 4]])
    write_pgm(class_map, 4, tmp_path / "m.pgm")
    assert read_pgm(tmp_path / "m.pgm").tolist() == [[63, 127], [191, 255]]
    write_map_csv(class_map, tmp_path / "m.csv")
    np.testing.assert_array_equal(read_map_csv(tmp_path / "m.csv"), class_map)


def _write_gt_csv(path, labels):
    write_map_csv(np.asarray(labels), path)


def test_eval_identical_and_flipped(tmp_path, capsys):
    _write_gt_csv(tmp_path / "gt.csv", [[1, 2], [1, 2]])
    _write_gt_csv(tmp_path / "same.csv", [[1, 2], [1, 2]])
    _write_gt_csv(tmp_path / "flip.csv", [[1, 2], [2, 2]])
    assert main(["eval", "--pred", str(tmp_path / "same.csv"), "--gt", str(tmp_path / "gt.csv"), "--out", str(tmp_path)]) == 0
    assert "OA 100.00" in capsys.readouterr().out
    assert main(["eval", "--pred", str(tmp_path / "flip.csv"), "--gt", str(tmp_path / "gt.csv"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "OA 75.00" in out and "AA 75.00" in out
    assert json.loads((tmp_path / "eval.json").read_text())["oa"] == 0.75


def test_eval_against_raw_gt(fixture_dir, tmp_path, capsys):
    _pipeline(fixture_dir, tmp_path, "--train-fraction", "0.5")
    capsys.readouterr()
    args = ["eval", "--pred", str(tmp_path / "map.csv"), "--gt", str(fixture_dir / "cube_gt.raw")]
    assert main([*args, "--header", str(fixture_dir / "cube.hdr"), "--out", str(tmp_path / "e")]) == 0
    assert capsys.readouterr().out.startswith("OA ")


def test_eval_shape_mismatch(tmp_path, capsys):
    _write_gt_csv(tmp_path / "gt.csv", [[1, 2], [1, 2]])
    _write_gt_csv(tmp_path / "pred.csv", [[1, 2, 1]])
    assert main(["eval", "--pred", str(tmp_path / "pred.csv"), "--gt", str(tmp_path / "gt.csv"), "--out", str(tmp_path)]) == 2
    assert "stage 'evaluate'" in capsys.readouterr().err


def test_missing_file_names_stage(tmp_path, capsys):
    assert main(["select", "--csv", str(tmp_path / "nope.csv"), "--k", "1", "--out", str(tmp_path)]) == 2
    assert "stage 'load'" in capsys.readouterr().err


def test_corrupt_payload_exits_1_with_stage(fixture_dir, tmp_path, capsys):
    raw = tmp_path / "cube.raw"
    raw.write_bytes((fixture_dir / "cube.raw").read_bytes()[:-4])
    args = ["select", "--header", str(fixture_dir / "cube.hdr"), "--raw", str(raw), "--gt", str(fixture_dir / "cube_gt.raw")]
    assert main([*args, "--k", "2", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "error in stage 'load'" in err and "expected" in err


def test_missing_class_in_test_split_names_stage(tmp_path, capsys):
    # class 2 has a single pixel, so it is used for training and absent from the test set
    (tmp_path / "tiny.csv").write_text("0.0,1\n0.1,1\n0.2,1\n0.9,2\n")
    args = ["pipeline", "--csv", str(tmp_path / "tiny.csv"), "--k", "1", "--train-fraction", "0.5"]
    assert main([*args, "--out", str(tmp_path)]) == 1
    assert "error in stage 'evaluate'" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nmibs", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "nmibs" in proc.stdout
