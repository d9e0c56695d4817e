"""Command-line surface: train, eval, compare, inspect.

Every command reads an optional JSON config (--config); any config field can
be overridden by the flag of the same name. The effective config is embedded
in output JSON under "config" so runs are self-describing. Exit codes:

    0  success
    2  usage error (bad flags, bad config values)
    3  data error (missing/corrupt files, shape mismatches)
    4  numeric failure (non-finite values during training)
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from .data import (
    Dataset,
    describe_file,
    load_csv,
    load_features,
    load_labels,
    one_hot,
    split,
)
from .errors import DataError, NumericError, ParameterError, ShapeError
from .fc_head import RecomputeConfig
from .harness import HeadSpec, TrainPlan, compare, evaluate, run
from .model_io import load_head, save_head

__all__ = ["ExperimentConfig", "main"]


@dataclass
class ExperimentConfig:
    """One experiment, fully resolved: data, architecture, plan, outputs.

    Data comes either from FMAT/LBLS pairs (train required, test optional)
    or from a single CSV that is split internally; naming both is an error.
    """

    train_features: str | None = None
    train_labels: str | None = None
    test_features: str | None = None
    test_labels: str | None = None
    csv: str | None = None
    label_column: int | str = -1
    train_fraction: float = 0.7
    split_seed: int = 0
    hidden: tuple[int, ...] = ()
    augment_bias: bool = False
    mode: str = "alternating"
    epochs: int = 5
    learning_rates: tuple | None = None
    momentum: float = 0.9
    batch_size: int = 128
    seed: int = 0
    eval_every: int = 1
    C: float = 100.0
    mu: float = 1.0
    dropout: float = 0.0
    out: str | None = None
    model_out: str | None = None

    def __post_init__(self):
        if isinstance(self.hidden, str):
            self.hidden = tuple(
                int(w) for w in self.hidden.replace(" ", "").split(",") if w
            )
        else:
            self.hidden = tuple(int(w) for w in self.hidden)
        if isinstance(self.label_column, str):
            try:
                self.label_column = int(self.label_column)
            except ValueError:
                pass
        if self.learning_rates is not None:
            self.learning_rates = tuple(
                (int(s), int(e), float(lr)) for s, e, lr in self.learning_rates
            )

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "ExperimentConfig":
        """Config file (if any) merged with non-None flag overrides."""
        data = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                try:
                    data = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ParameterError(f"{path}: not valid JSON ({exc})") from exc
            if not isinstance(data, dict):
                raise ParameterError(f"{path}: config must be a JSON object")
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(data) - known)
            if unknown:
                raise ParameterError(f"{path}: unknown config keys {unknown}")
        data.update(overrides)
        return cls(**data)

    def plan(self) -> TrainPlan:
        return TrainPlan(
            mode=self.mode,
            epochs=self.epochs,
            recompute=RecomputeConfig(C=self.C, mu=self.mu, dropout_rate=self.dropout),
            learning_rates=self.learning_rates,
            momentum=self.momentum,
            batch_size=self.batch_size,
            seed=self.seed,
            eval_every=self.eval_every,
        )

    def head_spec(self) -> HeadSpec:
        return HeadSpec(hidden=self.hidden, augment_bias=self.augment_bias)

    def to_json_dict(self) -> dict:
        """Effective config with the learning-rate schedule made explicit."""
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["learning_rates"] = [list(g) for g in self.plan().schedule()]
        return d

    def data_fingerprint(self) -> tuple:
        """The fields that decide which samples a run sees."""
        return (
            self.train_features,
            self.train_labels,
            self.test_features,
            self.test_labels,
            self.csv,
            self.label_column,
            self.train_fraction,
            self.split_seed,
        )


def _load_pair(features_path: str, labels_path: str) -> Dataset:
    features = load_features(features_path)
    labels, n_classes = load_labels(labels_path)
    if labels.size != features.shape[1]:
        raise ShapeError(
            f"{features_path} has {features.shape[1]} samples, "
            f"{labels_path} has {labels.size}"
        )
    return Dataset(features=features, targets=one_hot(labels, n_classes))


def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset | None]:
    """Resolve the config's data definition to (train, test or None)."""
    if cfg.csv is not None and cfg.train_features is not None:
        raise ParameterError("give either csv or train_features/train_labels, not both")
    if cfg.csv is not None:
        full = load_csv(cfg.csv, cfg.label_column)
        train, test = split(full, cfg.train_fraction, cfg.split_seed)
        return train, (test if test.n_samples else None)
    if cfg.train_features is None or cfg.train_labels is None:
        raise ParameterError("no data source: set csv or train_features + train_labels")
    train = _load_pair(cfg.train_features, cfg.train_labels)
    test = None
    if cfg.test_features is not None or cfg.test_labels is not None:
        if cfg.test_features is None or cfg.test_labels is None:
            raise ParameterError("test_features and test_labels must be given together")
        test = _load_pair(cfg.test_features, cfg.test_labels)
    return train, test


def _merged_dataset(cfg: ExperimentConfig) -> Dataset:
    """Every sample the config references, as one dataset for re-splitting."""
    train, test = load_datasets(cfg)
    if test is None:
        return train
    if test.n_classes != train.n_classes:
        raise ShapeError(
            f"train has {train.n_classes} classes, test {test.n_classes}"
        )
    return Dataset(
        features=np.hstack([train.features, test.features]),
        targets=np.hstack([train.targets, test.targets]),
        class_names=train.class_names,
    )


def _overrides(args: argparse.Namespace) -> dict:
    known = {f.name for f in fields(ExperimentConfig)}
    return {
        k: v for k, v in vars(args).items() if k in known and v is not None
    }


def cmd_train(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config, _overrides(args))
    train, test = load_datasets(cfg)
    record = run(cfg.plan(), train, test, cfg.head_spec())
    if cfg.model_out is not None:
        save_head(record.head, cfg.model_out)
    doc = record.to_json_dict()
    doc["config"] = cfg.to_json_dict()
    text = json.dumps(doc, indent=2)
    if cfg.out is not None:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        final = record.final
        test_part = (
            f" test_acc={final.test_acc:.4f}" if final.test_acc is not None else ""
        )
        print(
            f"mode={record.mode} seed={record.seed} epochs={len(record.epochs)} "
            f"train_acc={final.train_acc:.4f}{test_part} -> {cfg.out}"
        )
    else:
        print(text)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    head = load_head(args.model)
    cfg = ExperimentConfig.load(args.config, _overrides(args))
    if cfg.csv is not None:
        dataset = load_csv(cfg.csv, cfg.label_column)
    elif cfg.train_features is not None and cfg.train_labels is not None:
        dataset = _load_pair(cfg.train_features, cfg.train_labels)
    else:
        raise ParameterError("no data source: set csv or train_features + train_labels")
    result = evaluate(head, dataset)
    print(
        json.dumps(
            {
                "accuracy": result.accuracy,
                "mean_loss": result.mean_loss,
                "n_samples": dataset.n_samples,
            },
            indent=2,
        )
    )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    cfg_a = ExperimentConfig.load(args.config_a, {})
    cfg_b = ExperimentConfig.load(args.config_b, {})
    if cfg_a.data_fingerprint() != cfg_b.data_fingerprint():
        raise ParameterError("compare requires both configs to name the same data")
    if (cfg_a.hidden, cfg_a.augment_bias) != (cfg_b.hidden, cfg_b.augment_bias):
        raise ParameterError("compare requires both configs to use the same head")
    seeds = [int(s) for s in args.seeds.replace(" ", "").split(",") if s]
    if not seeds:
        raise ParameterError("no seeds given")
    dataset = _merged_dataset(cfg_a)
    report = compare(
        cfg_a.plan(),
        cfg_b.plan(),
        dataset,
        seeds,
        cfg_a.head_spec(),
        train_fraction=cfg_a.train_fraction,
    )
    report["config_a"] = cfg_a.to_json_dict()
    report["config_b"] = cfg_b.to_json_dict()
    for entry in report["runs"]:
        a = entry["a"]["final"]["test_acc"]
        b = entry["b"]["final"]["test_acc"]
        print(
            f"seed {entry['seed']}: a={a:.4f} b={b:.4f} "
            f"delta={entry['delta_test_acc']:+.4f}"
        )
    s = report["summary"]
    print(
        f"mean a={s['a']['mean_test_acc']:.4f}±{s['a']['std_test_acc']:.4f} "
        f"b={s['b']['mean_test_acc']:.4f}±{s['b']['std_test_acc']:.4f} "
        f"delta={s['mean_delta_test_acc']:+.4f}±{s['std_delta_test_acc']:.4f}"
    )
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    info = describe_file(args.path)
    for key, value in info.items():
        if key == "histogram":
            value = " ".join(f"{k}:{n}" for k, n in enumerate(value))
        print(f"{key}: {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgehead",
        description=(
            "Retrain dense classifier heads by ridge recomputation, train the "
            "momentum-SGD baseline, or alternate the two."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training plan, write RunRecord JSON")
    _add_config_flags(train)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    ev.add_argument("model", help="model directory written by train --model-out")
    ev.add_argument("--config")
    ev.add_argument("--train-features", dest="train_features")
    ev.add_argument("--train-labels", dest="train_labels")
    ev.add_argument("--csv")
    ev.add_argument("--label-column", dest="label_column")
    ev.set_defaults(func=cmd_eval)

    cmp_ = sub.add_parser("compare", help="paired comparison of two configs")
    cmp_.add_argument("config_a")
    cmp_.add_argument("config_b")
    cmp_.add_argument("--seeds", default="0,1,2", help="comma-separated run seeds")
    cmp_.add_argument("--out", help="write the full JSON report here")
    cmp_.set_defaults(func=cmd_compare)

    ins = sub.add_parser("inspect", help="print header metadata of a data file")
    ins.add_argument("path")
    ins.set_defaults(func=cmd_inspect)
    return parser


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config; flags override its fields")
    p.add_argument("--train-features", dest="train_features")
    p.add_argument("--train-labels", dest="train_labels")
    p.add_argument("--test-features", dest="test_features")
    p.add_argument("--test-labels", dest="test_labels")
    p.add_argument("--csv", help="numeric CSV with a label column")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--hidden", help="comma-separated hidden widths, e.g. 128,64")
    p.add_argument(
        "--augment-bias",
        dest="augment_bias",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="append a constant-1 feature row",
    )
    p.add_argument("--mode", choices=("sgdm_only", "recompute_only", "alternating"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument(
        "--learning-rates",
        dest="learning_rates",
        type=json.loads,
        help='JSON epoch groups, e.g. "[[1,3,1e-3],[4,5,1e-4]]"',
    )
    p.add_argument("--C", type=float, help="ridge coefficient")
    p.add_argument("--mu", type=float, help="recompute step size in (0, 1]")
    p.add_argument("--dropout", type=float, help="fraction of rows keeping old weights")
    p.add_argument("--out", help="RunRecord JSON path (default: print to stdout)")
    p.add_argument("--model-out", dest="model_out", help="directory to save the head")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParameterError as exc:
        return _fail(exc, 2)
    except (DataError, ShapeError) as exc:
        return _fail(exc, 3)
    except NumericError as exc:
        return _fail(exc, 4)
    except OSError as exc:
        return _fail(exc, 3)


def _fail(exc: BaseException, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
