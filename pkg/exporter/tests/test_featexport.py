"""Exporter behavior, file-format bytes, and the cross-package round trip.

All exports here run with seeded random weights so no download happens and
repeat runs are comparable.
"""

import json
import struct
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from featexport.cli import main
from featexport.export import ExportJob, export, scan_classes


def make_image_tree(root, per_class=3):
    """Two classes x three images, varied sizes.

    Cats are dark, dogs are bright, so the classes stay distinguishable
    even through a randomly initialized backbone.
    """
    rng = np.random.default_rng(0)
    for ci, name in enumerate(("cat", "dog")):
        d = root / name
        d.mkdir(parents=True)
        for i in range(per_class):
            w, h = 40 + 10 * i, 50 + 5 * ci
            lo, hi = (0, 80) if name == "cat" else (176, 256)
            pixels = rng.integers(lo, hi, size=(h, w, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(d / f"img_{i}.png")


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    root = tmp_path_factory.mktemp("images")
    make_image_tree(root)
    out = tmp_path_factory.mktemp("out")
    job = ExportJob(
        backbone="mobilenet_v3_small",
        input_dir=root,
        features_path=out / "f.fmat",
        labels_path=out / "l.lbls",
        batch_size=4,
        pretrained=False,
    )
    result = export(job)
    return job, result


class TestExport:
    def test_labels_follow_sorted_class_order(self, exported):
        job, result = exported
        raw = job.labels_path.read_bytes()
        magic, version, count, classes = struct.unpack("<4sIQQ", raw[:24])
        assert magic == b"LBLS"
        assert version == 1
        assert count == 6
        assert classes == 2
        labels = np.frombuffer(raw[24:], dtype="<u4")
        assert labels.tolist() == [0, 0, 0, 1, 1, 1]
        assert result.class_names == ("cat", "dog")

    def test_feature_file_header_and_payload(self, exported):
        job, result = exported
        raw = job.features_path.read_bytes()
        magic, version, rows, cols, code = struct.unpack("<4sIQQI", raw[:28])
        assert magic == b"FMAT"
        assert version == 1
        assert rows == 576 == result.width
        assert cols == 6
        assert code == 1  # f32 default
        payload = np.frombuffer(raw[28:], dtype="<f4").reshape(rows, cols)
        assert len(raw) == 28 + rows * cols * 4
        assert np.isfinite(payload).all()
        assert payload.std() > 0

    def test_sidecar_provenance(self, exported):
        job, result = exported
        meta = json.loads(
            (job.features_path.parent / "f.fmat.meta.json").read_text()
        )
        assert meta["backbone"] == "mobilenet_v3_small"
        assert meta["width"] == 576
        assert meta["class_names"] == ["cat", "dog"]
        assert meta["pretrained"] is False
        assert "avgpool" in meta["tap"]
        assert meta["skipped"] == []

    def test_repeat_run_is_consistent(self, exported, tmp_path):
        job, _ = exported
        second = ExportJob(
            backbone="mobilenet_v3_small",
            input_dir=job.input_dir,
            features_path=tmp_path / "f2.fmat",
            labels_path=tmp_path / "l2.lbls",
            batch_size=4,
            pretrained=False,
        )
        export(second)
        assert second.labels_path.read_bytes() == job.labels_path.read_bytes()
        a = np.frombuffer(job.features_path.read_bytes()[28:], dtype="<f4")
        b = np.frombuffer(second.features_path.read_bytes()[28:], dtype="<f4")
        rel = np.abs(a - b).max() / max(np.abs(a).max(), 1e-30)
        assert rel <= 1e-5

    def test_undecodable_image_skipped_with_warning(self, tmp_path, capsys):
        make_image_tree(tmp_path / "imgs")
        bad = tmp_path / "imgs" / "cat" / "broken.png"
        bad.write_bytes(b"this is not an image")
        job = ExportJob(
            backbone="mobilenet_v3_small",
            input_dir=tmp_path / "imgs",
            features_path=tmp_path / "f.fmat",
            labels_path=tmp_path / "l.lbls",
            pretrained=False,
        )
        result = export(job)
        assert result.n_images == 6
        assert result.skipped == [str(bad)]
        assert "broken.png" in capsys.readouterr().err
        raw = job.labels_path.read_bytes()
        labels = np.frombuffer(raw[24:], dtype="<u4")
        assert labels.tolist() == [0, 0, 0, 1, 1, 1]
        meta = json.loads((tmp_path / "f.fmat.meta.json").read_text())
        assert meta["skipped"] == [str(bad)]

    def test_f64_dtype_code(self, tmp_path):
        make_image_tree(tmp_path / "imgs", per_class=1)
        job = ExportJob(
            backbone="mobilenet_v3_small",
            input_dir=tmp_path / "imgs",
            features_path=tmp_path / "f.fmat",
            labels_path=tmp_path / "l.lbls",
            dtype="f64",
            pretrained=False,
        )
        export(job)
        raw = job.features_path.read_bytes()
        rows, cols, code = struct.unpack("<QQI", raw[8:28])
        assert code == 2
        assert len(raw) == 28 + rows * cols * 8

    def test_empty_class_dir_rejected(self, tmp_path):
        make_image_tree(tmp_path / "imgs")
        (tmp_path / "imgs" / "empty_class").mkdir()
        with pytest.raises(ValueError, match="empty_class"):
            scan_classes(tmp_path / "imgs")

    def test_scan_orders_classes_and_files(self, tmp_path):
        make_image_tree(tmp_path / "imgs")
        classes = scan_classes(tmp_path / "imgs")
        assert [name for name, _ in classes] == ["cat", "dog"]
        assert [p.name for p in classes[0][1]] == ["img_0.png", "img_1.png", "img_2.png"]


class TestCli:
    def test_unknown_backbone(self, tmp_path, capsys):
        make_image_tree(tmp_path / "imgs", per_class=1)
        code = main(
            [
                "export",
                "--backbone", "alexnet",
                "--input", str(tmp_path / "imgs"),
                "--features", str(tmp_path / "f.fmat"),
                "--labels", str(tmp_path / "l.lbls"),
            ]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "alexnet" in err and "resnet18" in err

    def test_missing_input_dir(self, tmp_path, capsys):
        code = main(
            [
                "export",
                "--backbone", "mobilenet_v3_small",
                "--input", str(tmp_path / "nowhere"),
                "--features", str(tmp_path / "f.fmat"),
                "--labels", str(tmp_path / "l.lbls"),
                "--no-pretrained",
            ]
        )
        assert code == 1
        assert "nowhere" in capsys.readouterr().err

    def test_bad_flag_usage(self):
        assert main(["export", "--backbone", "resnet18"]) == 2

    def test_export_via_cli(self, tmp_path, capsys):
        make_image_tree(tmp_path / "imgs", per_class=1)
        code = main(
            [
                "export",
                "--backbone", "mobilenet_v3_small",
                "--input", str(tmp_path / "imgs"),
                "--features", str(tmp_path / "f.fmat"),
                "--labels", str(tmp_path / "l.lbls"),
                "--batch", "2",
                "--no-pretrained",
            ]
        )
        assert code == 0
        assert "2 classes" in capsys.readouterr().out
        assert (tmp_path / "f.fmat").exists()
        assert (tmp_path / "l.lbls").exists()


class TestTrainingSideRoundTrip:
    """The exported files must be readable by the training package, reached
    here only through its public file formats and command line."""

    def test_inspect_accepts_exported_files(self, exported):
        job, _ = exported
        proc = subprocess.run(
            [sys.executable, "-m", "ridgehead", "inspect", str(job.features_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "rows: 576" in proc.stdout
        assert "cols: 6" in proc.stdout
        assert "dtype: f32" in proc.stdout

        proc = subprocess.run(
            [sys.executable, "-m", "ridgehead", "inspect", str(job.labels_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "classes: 2" in proc.stdout
        assert "histogram: 0:3 1:3" in proc.stdout

    def test_loaders_accept_exported_files(self, exported):
        ridgehead_data = pytest.importorskip("ridgehead.data")
        job, _ = exported
        features = ridgehead_data.load_features(job.features_path)
        labels, n_classes = ridgehead_data.load_labels(job.labels_path)
        assert features.shape == (576, 6)
        assert features.dtype == np.float64
        assert np.isfinite(features).all()
        assert labels.tolist() == [0, 0, 0, 1, 1, 1]
        assert n_classes == 2

    def test_training_runs_on_exported_features(self, exported):
        ridgehead = pytest.importorskip("ridgehead")
        job, _ = exported
        features = ridgehead.load_features(job.features_path)
        labels, n_classes = ridgehead.load_labels(job.labels_path)
        # A randomly initialized backbone emits activations around 1e-7;
        # rescale so the ridge term does not drown the class signal.
        features = features / np.abs(features).max()
        data = ridgehead.Dataset(
            features, ridgehead.one_hot(labels, n_classes), ("cat", "dog")
        )
        plan = ridgehead.TrainPlan(mode="recompute_only", epochs=1, batch_size=6)
        record = ridgehead.run(plan, data, None, ridgehead.HeadSpec())
        assert record.final.train_acc == 1.0
