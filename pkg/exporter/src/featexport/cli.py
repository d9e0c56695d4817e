import argparse
import sys

from .backbones import CATALOG
from .export import ExportJob, export


def build_parser():
    parser = argparse.ArgumentParser(
        prog="featexport",
        description="Export flatten-layer image features to binary files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("export", help="run a folder of images through a backbone")
    ex.add_argument("--backbone", required=True, help=", ".join(sorted(CATALOG)))
    ex.add_argument("--input", required=True, help="directory with one subdir per class")
    ex.add_argument("--features", required=True, help="output feature file path")
    ex.add_argument("--labels", required=True, help="output label file path")
    ex.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    ex.add_argument("--batch", type=int, default=32, help="inference batch size")
    ex.add_argument(
        "--no-pretrained",
        action="store_true",
        help="use seeded random weights instead of downloading pretrained ones",
    )
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        job = ExportJob(
            backbone=args.backbone,
            input_dir=args.input,
            features_path=args.features,
            labels_path=args.labels,
            dtype=args.dtype,
            batch_size=args.batch,
            pretrained=not args.no_pretrained,
        )
        result = export(job)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"exported {result.n_images} images, {result.width} features, "
        f"{len(result.class_names)} classes -> {args.features}"
    )
    if result.skipped:
        print(f"skipped {len(result.skipped)} undecodable files", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
