"""End-to-end CLI: gen-phantom, train, localize, segment, eval, cv."""

import numpy as np
import pytest

from pancseg.cli import main
from pancseg.geometry import read_box_file
from pancseg.volume import load_volume

CONFIG = """
# small dataset for CLI tests
dims = 64
spacing = 1.0
cases = 6
center_jitter = 6
radius_min = 9
radius_max = 13
feat_channels = 8
seed = 300
"""


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "phantom.cfg"
    cfg.write_text(CONFIG)
    out = root / "data"
    assert main(["gen-phantom", "--config", str(cfg), "--out-dir", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    root = tmp_path_factory.mktemp("model")
    model = root / "model.psm"
    atlas = root / "atlas.volf"
    rc = main(
        [
            "train",
            "--cases",
            str(dataset / "manifest.txt"),
            "--out",
            str(model),
            "--atlas-out",
            str(atlas),
            "--seed",
            "1",
        ]
    )
    assert rc == 0
    return model, atlas


def test_gen_phantom_outputs(dataset):
    manifest = (dataset / "manifest.txt").read_text().strip().splitlines()
    assert len(manifest) == 6
    for line in manifest:
        for rel in line.split():
            assert (dataset / rel).exists()
    ct = load_volume(dataset / "case_000" / "ct.volf")
    assert ct.dims == (64, 64, 64)
    feat = load_volume(dataset / "case_000" / "feat.volf")
    assert feat.channels == 8
    boxes = read_box_file(dataset / "case_000" / "box.txt")
    assert len(boxes) == 1


def test_gen_phantom_deterministic(dataset, tmp_path):
    cfg = tmp_path / "phantom.cfg"
    cfg.write_text(CONFIG)
    out = tmp_path / "again"
    assert main(["gen-phantom", "--config", str(cfg), "--out-dir", str(out)]) == 0
    a = (dataset / "case_002" / "ct.volf").read_bytes()
    b = (out / "case_002" / "ct.volf").read_bytes()
    assert a == b


def test_localize_and_eval(dataset, trained, tmp_path, capsys):
    model, _ = trained
    case = dataset / "case_001"
    out_box = tmp_path / "est_box.txt"
    rc = main(
        [
            "localize",
            "--model",
            str(model),
            "--ct",
            str(case / "ct.volf"),
            "--feat",
            str(case / "feat.volf"),
            "--out",
            str(out_box),
        ]
    )
    assert rc == 0
    est = read_box_file(out_box)[0]
    gt = read_box_file(case / "box.txt")[0]
    # trained on this case: training recall should be tight
    assert np.abs(est.as_array() - gt.as_array()).mean() < 4.0


def test_segment_and_eval(dataset, trained, tmp_path, capsys):
    model, atlas = trained
    case = dataset / "case_000"
    out_mask = tmp_path / "seg.volf"
    rc = main(
        [
            "segment",
            "--ct",
            str(case / "ct.volf"),
            "--feat",
            str(case / "feat.volf"),
            "--model",
            str(model),
            "--atlas",
            str(atlas),
            "--out",
            str(out_mask),
        ]
    )
    assert rc == 0
    rc = main(
        [
            "eval",
            "--pred",
            str(out_mask),
            "--gt",
            str(case / "mask.volf"),
        ]
    )
    assert rc == 0
    line = capsys.readouterr().out.strip()
    parts = line.split()
    assert parts[0] == "ji" and parts[2] == "dice"
    assert float(parts[3]) > 0.5  # trained on this case


def test_eval_with_boxes(dataset, tmp_path, capsys):
    case = dataset / "case_000"
    rc = main(
        [
            "eval",
            "--pred",
            str(case / "mask.volf"),
            "--gt",
            str(case / "mask.volf"),
            "--pred-box",
            str(case / "box.txt"),
            "--gt-box",
            str(case / "box.txt"),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "face_mm 0.000000" in out
    assert "ji 1.000000 dice 1.000000" in out


def test_cv_byte_identical_reports(dataset, tmp_path):
    args = [
        "cv",
        "--manifest",
        str(dataset / "manifest.txt"),
        "--k",
        "3",
        "--seed",
        "1",
        "--baseline",
    ]
    a_path = tmp_path / "a.txt"
    b_path = tmp_path / "b.txt"
    assert main(args + ["--out", str(a_path)]) == 0
    assert main(args + ["--out", str(b_path)]) == 0
    a = a_path.read_bytes()
    assert a == b_path.read_bytes()
    text = a.decode()
    assert "AGGREGATE face_mm" in text and "BASELINE_AGGREGATE dice" in text


def test_inputs_not_mutated(dataset, trained, tmp_path):
    case = dataset / "case_000"
    before = (case / "ct.volf").read_bytes()
    model, atlas = trained
    main(
        [
            "segment",
            "--ct",
            str(case / "ct.volf"),
            "--feat",
            str(case / "feat.volf"),
            "--model",
            str(model),
            "--atlas",
            str(atlas),
            "--out",
            str(tmp_path / "m.volf"),
        ]
    )
    assert (case / "ct.volf").read_bytes() == before


def test_missing_required_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["localize", "--ct", "x.volf"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_file_exits_1(capsys, tmp_path):
    rc = main(["localize", "--model", str(tmp_path / "no.psm"), "--ct", "a", "--feat", "b", "--out", "c"])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("pancseg:") and err.count("\n") == 1


def test_bad_config_line_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this is not a key value pair\n")
    rc = main(["gen-phantom", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert rc == 1
    assert "pancseg:" in capsys.readouterr().err
