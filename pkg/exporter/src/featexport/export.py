"""Run an image folder through a backbone and write feature/label files.

The input directory holds one subdirectory per class. Classes are numbered
in sorted directory order and files are processed in sorted order inside
each class, so column i of the feature file always corresponds to label i.
Images that cannot be decoded are skipped with a warning on stderr and left
out of both files, keeping that lockstep intact.
"""

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import get_backbone, load_model, preprocess
from .formats import write_features, write_labels


@dataclass
class ExportJob:
    backbone: str
    input_dir: Path
    features_path: Path
    labels_path: Path
    dtype: str = "f32"
    batch_size: int = 32
    pretrained: bool = True

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.features_path = Path(self.features_path)
        self.labels_path = Path(self.labels_path)
        if self.dtype not in ("f32", "f64"):
            raise ValueError(f"dtype must be f32 or f64, got {self.dtype!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")


@dataclass
class ExportResult:
    class_names: tuple
    n_images: int
    width: int
    skipped: list = field(default_factory=list)


def scan_classes(input_dir: Path):
    """Sorted (class_name, [file paths]) pairs; every class must have files."""
    if not input_dir.is_dir():
        raise NotADirectoryError(f"input directory not found: {input_dir}")
    class_dirs = sorted(p for p in input_dir.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class subdirectories in {input_dir}")
    out = []
    for d in class_dirs:
        files = sorted(p for p in d.iterdir() if p.is_file())
        if not files:
            raise ValueError(f"class directory has no files: {d}")
        out.append((d.name, files))
    return out


def export(job: ExportJob) -> ExportResult:
    spec = get_backbone(job.backbone)
    classes = scan_classes(job.input_dir)
    model = load_model(spec, job.pretrained)

    tensors = []
    labels = []
    skipped = []
    for index, (_, files) in enumerate(classes):
        for path in files:
            try:
                with Image.open(path) as img:
                    tensors.append(preprocess(img.convert("RGB")))
            except Exception as exc:
                print(f"warning: skipping {path}: {exc}", file=sys.stderr)
                skipped.append(str(path))
                continue
            labels.append(index)
    if not tensors:
        raise ValueError(f"no decodable images under {job.input_dir}")

    chunks = []
    with torch.no_grad():
        for start in range(0, len(tensors), job.batch_size):
            batch = torch.stack(tensors[start : start + job.batch_size])
            chunks.append(model(batch).numpy())
    features = np.concatenate(chunks).T  # columns are samples

    write_features(features, job.features_path, job.dtype)
    write_labels(labels, len(classes), job.labels_path)
    result = ExportResult(
        class_names=tuple(name for name, _ in classes),
        n_images=len(labels),
        width=features.shape[0],
        skipped=skipped,
    )
    _write_sidecar(job, spec, result)
    return result


def _write_sidecar(job: ExportJob, spec, result: ExportResult):
    """Provenance alongside the feature file, for whoever finds it later."""
    meta = {
        "backbone": spec.name,
        "tap": spec.tap,
        "width": result.width,
        "pretrained": job.pretrained,
        "preprocessing": "resize 256 short side, center crop 224, "
        "imagenet mean/std normalization",
        "dtype": job.dtype,
        "n_images": result.n_images,
        "class_names": list(result.class_names),
        "skipped": result.skipped,
        "labels_file": job.labels_path.name,
    }
    sidecar = job.features_path.with_name(job.features_path.name + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
