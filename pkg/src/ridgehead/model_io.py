"""Head persistence: one FMAT file per layer plus a JSON manifest.

A saved model is a directory:

    manifest.json   {"format_version": 1, "augment_bias": ..., "widths": [...],
                     "layers": ["layer_00.fmat", ...]}
    layer_NN.fmat   weight matrices, float64

The manifest's widths are redundant with the layer files; load_head checks
they agree so a hand-edited or truncated directory fails loudly.
"""

from __future__ import annotations

import json
import os

from .data import load_features, save_features
from .errors import FormatError
from .fc_head import FcHead, FcLayer

__all__ = ["load_head", "save_head"]

MANIFEST_VERSION = 1


def save_head(head: FcHead, directory):
    """Write the head's layers and manifest under ``directory`` (created)."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, layer in enumerate(head.layers):
        name = f"layer_{i:02d}.fmat"
        save_features(layer.weights, os.path.join(directory, name), dtype="f8")
        names.append(name)
    manifest = {
        "format_version": MANIFEST_VERSION,
        "augment_bias": head.augment_bias,
        "widths": list(head.widths),
        "layers": names,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_head(directory) -> FcHead:
    """Rebuild a head from a saved directory, validating the manifest."""
    path = os.path.join(directory, "manifest.json")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise FormatError(
            f"{path}: unsupported format_version {manifest.get('format_version')!r}"
        )
    for key in ("augment_bias", "widths", "layers"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest missing {key!r}")
    layers = tuple(
        FcLayer(load_features(os.path.join(directory, name)))
        for name in manifest["layers"]
    )
    if not layers:
        raise FormatError(f"{path}: manifest lists no layers")
    head = FcHead(layers, augment_bias=bool(manifest["augment_bias"]))
    if list(head.widths) != list(manifest["widths"]):
        raise FormatError(
            f"{path}: manifest widths {manifest['widths']} do not match "
            f"layer files {list(head.widths)}"
        )
    return head
