"""Training loop, evaluation, and the paired-plan comparison protocol.

A TrainPlan names one of three modes and a budget of L epochs:

    sgdm_only       per epoch: one momentum-SGD epoch
    recompute_only  per epoch: one recomputation pass
    alternating     per epoch: one momentum-SGD epoch, then one pass

Every epoch from 1 to L runs the same phase sequence. Timings are recorded
per phase so the cost of the recomputation pass can be read directly off a
RunRecord.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .data import Dataset, split
from .errors import DataError, NumericError, ParameterError, ShapeError
from .fc_head import FcHead, RecomputeConfig, forward, init_head, recompute_pass
from .sgdm import SgdmState, sgdm_epoch, softmax_cross_entropy

__all__ = [
    "EpochRecord",
    "Evaluation",
    "FinalSummary",
    "HeadSpec",
    "RunRecord",
    "TrainPlan",
    "compare",
    "evaluate",
    "run",
]

MODES = ("sgdm_only", "recompute_only", "alternating")

_DEFAULT_LRS = (1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class HeadSpec:
    """Architecture request: hidden widths only; in/out come from the data."""

    hidden: tuple[int, ...] = ()
    augment_bias: bool = False

    def __post_init__(self):
        hidden = tuple(int(w) for w in self.hidden)
        if any(w < 1 for w in hidden):
            raise ParameterError(f"hidden widths must be >= 1, got {hidden}")
        object.__setattr__(self, "hidden", hidden)

    def dims(self, n_features: int, n_classes: int) -> tuple[int, ...]:
        extra = 1 if self.augment_bias else 0
        return (n_features + extra,) + self.hidden + (n_classes,)


@dataclass(frozen=True)
class TrainPlan:
    """Everything one training run depends on, seeds included.

    ``learning_rates`` is a tuple of (first_epoch, last_epoch, lr) groups,
    1-based and inclusive, that must tile 1..epochs exactly; None selects the
    default step schedule 1e-3 / 1e-4 / 1e-5 over thirds of the budget.
    """

    mode: str
    epochs: int
    recompute: RecomputeConfig = field(default_factory=RecomputeConfig)
    learning_rates: tuple[tuple[int, int, float], ...] | None = None
    momentum: float = 0.9
    batch_size: int = 128
    seed: int = 0
    eval_every: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "epochs", int(self.epochs))
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError(f"momentum must be in [0, 1), got {self.momentum}")
        if int(self.batch_size) < 1:
            raise ParameterError(f"batch size must be >= 1, got {self.batch_size}")
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "eval_every", int(self.eval_every))
        if self.eval_every < 1:
            raise ParameterError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.learning_rates is not None:
            groups = tuple(
                (int(s), int(e), float(lr)) for s, e, lr in self.learning_rates
            )
            object.__setattr__(self, "learning_rates", groups)
            self._check_schedule(groups)

    def _check_schedule(self, groups):
        ordered = sorted(groups)
        expect = 1
        for start, end, lr in ordered:
            if end < start:
                raise ParameterError(f"empty learning-rate range ({start}, {end})")
            if start != expect:
                raise ParameterError(
                    f"learning-rate ranges must tile 1..{self.epochs} without "
                    f"gaps or overlap; epoch {expect} is not covered next"
                )
            if not np.isfinite(lr) or lr < 0.0:
                raise ParameterError(f"learning rate must be >= 0, got {lr}")
            expect = end + 1
        if expect != self.epochs + 1:
            raise ParameterError(
                f"learning-rate ranges stop at epoch {expect - 1}, plan has "
                f"{self.epochs}"
            )

    def schedule(self) -> tuple[tuple[int, int, float], ...]:
        """Effective (first_epoch, last_epoch, lr) groups, defaults resolved."""
        if self.learning_rates is not None:
            return tuple(sorted(self.learning_rates))
        groups: list[tuple[int, int, float]] = []
        for e in range(1, self.epochs + 1):
            lr = _DEFAULT_LRS[min(2, 3 * (e - 1) // self.epochs)]
            if groups and groups[-1][2] == lr:
                groups[-1] = (groups[-1][0], e, lr)
            else:
                groups.append((e, e, lr))
        return tuple(groups)

    def lr_for_epoch(self, epoch: int) -> float:
        if not 1 <= epoch <= self.epochs:
            raise ParameterError(f"epoch {epoch} outside 1..{self.epochs}")
        for start, end, lr in self.schedule():
            if start <= epoch <= end:
                return lr
        raise ParameterError(f"no learning rate covers epoch {epoch}")

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "epochs": self.epochs,
            "seed": self.seed,
            "momentum": self.momentum,
            "batch_size": self.batch_size,
            "eval_every": self.eval_every,
            "learning_rates": [list(g) for g in self.schedule()],
            "recompute": {
                "C": self.recompute.C,
                "mu": self.recompute.mu,
                "dropout_rate": self.recompute.dropout_rate,
                "rng_seed": self.recompute.rng_seed,
            },
        }


@dataclass(frozen=True)
class EpochRecord:
    """Metrics of one epoch; evaluation fields are None on skipped epochs."""

    epoch: int
    sgdm_seconds: float
    recompute_seconds: float
    wall_seconds: float
    train_loss: float | None
    train_acc: float | None
    test_acc: float | None

    def to_json_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "sgdm_seconds": self.sgdm_seconds,
            "recompute_seconds": self.recompute_seconds,
            "wall_seconds": self.wall_seconds,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
        }


@dataclass(frozen=True)
class FinalSummary:
    train_loss: float
    train_acc: float
    test_acc: float | None
    total_sgdm_seconds: float
    total_recompute_seconds: float
    wall_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
            "total_sgdm_seconds": self.total_sgdm_seconds,
            "total_recompute_seconds": self.total_recompute_seconds,
            "wall_seconds": self.wall_seconds,
        }


@dataclass(frozen=True)
class RunRecord:
    """Full record of one training run, JSON-serializable minus the head."""

    mode: str
    seed: int
    epochs: tuple[EpochRecord, ...]
    final: FinalSummary
    head: FcHead | None = field(default=None, repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "epochs": [e.to_json_dict() for e in self.epochs],
            "final": self.final.to_json_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


class Evaluation(NamedTuple):
    accuracy: float
    mean_loss: float
    confusion: np.ndarray


def evaluate(head: FcHead, dataset: Dataset) -> Evaluation:
    """Top-1 accuracy, mean cross-entropy, and a confusion-count matrix.

    Confusion rows index the true class, columns the predicted one. Argmax
    prediction breaks ties toward the lower class index.
    """
    if dataset.n_samples == 0:
        raise DataError("cannot evaluate on an empty dataset")
    if head.n_classes != dataset.n_classes:
        raise ShapeError(
            f"head emits {head.n_classes} classes, dataset has {dataset.n_classes}"
        )
    trace = forward(head, dataset.features)
    loss, _ = softmax_cross_entropy(trace.logits, dataset.targets)
    predicted = np.argmax(trace.logits, axis=0)
    truth = dataset.labels()
    confusion = np.zeros((dataset.n_classes, dataset.n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    return Evaluation(
        accuracy=float(np.mean(predicted == truth)),
        mean_loss=float(loss),
        confusion=confusion,
    )


@contextmanager
def _numeric_guard(epoch: int, phase: str):
    """Re-label numeric blowups with the epoch and phase they occurred in."""
    try:
        yield
    except (DataError, NumericError) as exc:
        raise NumericError(f"epoch {epoch}, {phase} phase: {exc}") from exc


def run(plan: TrainPlan, train: Dataset, test: Dataset | None, head_spec: HeadSpec) -> RunRecord:
    """Execute one plan; deterministic given the plan (timings aside).

    All randomness derives from plan.seed through three spawned streams:
    initialization, batch shuffling, and dropout row selection. The trained
    head rides along on the returned record.
    """
    if test is not None and test.n_samples:
        if test.n_features != train.n_features:
            raise ShapeError(
                f"train has {train.n_features} features, test {test.n_features}"
            )
        if test.n_classes != train.n_classes:
            raise ShapeError(
                f"train has {train.n_classes} classes, test {test.n_classes}"
            )

    init_ss, shuffle_ss, dropout_ss = np.random.SeedSequence(plan.seed).spawn(3)
    dims = head_spec.dims(train.n_features, train.n_classes)
    head = init_head(dims, np.random.default_rng(init_ss), head_spec.augment_bias)
    state = SgdmState.for_head(
        head,
        lr=plan.lr_for_epoch(1),
        momentum=plan.momentum,
        batch_size=plan.batch_size,
        seed=shuffle_ss,
    )
    dropout_rng = np.random.default_rng(dropout_ss)

    do_sgdm = plan.mode in ("sgdm_only", "alternating")
    do_recompute = plan.mode in ("recompute_only", "alternating")
    run_start = time.perf_counter()
    records = []
    last_eval = None
    for epoch in range(1, plan.epochs + 1):
        epoch_start = time.perf_counter()
        sgdm_seconds = 0.0
        recompute_seconds = 0.0

        if do_sgdm:
            state.lr = plan.lr_for_epoch(epoch)
            t0 = time.perf_counter()
            with _numeric_guard(epoch, "sgdm"):
                head, state, online_loss = sgdm_epoch(
                    head, state, train.features, train.targets
                )
            sgdm_seconds = time.perf_counter() - t0
            if not np.isfinite(online_loss):
                raise NumericError(
                    f"epoch {epoch}, sgdm phase: non-finite training loss"
                )

        if do_recompute:
            t0 = time.perf_counter()
            with _numeric_guard(epoch, "recompute"):
                head = recompute_pass(
                    head, train.features, train.targets, plan.recompute, dropout_rng
                )
            recompute_seconds = time.perf_counter() - t0

        train_loss = train_acc = test_acc = None
        if epoch % plan.eval_every == 0 or epoch == plan.epochs:
            with _numeric_guard(epoch, "evaluation"):
                train_eval = evaluate(head, train)
                test_eval = (
                    evaluate(head, test)
                    if test is not None and test.n_samples
                    else None
                )
            if not np.isfinite(train_eval.mean_loss):
                raise NumericError(
                    f"epoch {epoch}, evaluation phase: non-finite training loss"
                )
            train_loss = train_eval.mean_loss
            train_acc = train_eval.accuracy
            test_acc = test_eval.accuracy if test_eval is not None else None
            last_eval = (train_loss, train_acc, test_acc)

        records.append(
            EpochRecord(
                epoch=epoch,
                sgdm_seconds=sgdm_seconds,
                recompute_seconds=recompute_seconds,
                wall_seconds=time.perf_counter() - epoch_start,
                train_loss=train_loss,
                train_acc=train_acc,
                test_acc=test_acc,
            )
        )

    final = FinalSummary(
        train_loss=last_eval[0],
        train_acc=last_eval[1],
        test_acc=last_eval[2],
        total_sgdm_seconds=sum(r.sgdm_seconds for r in records),
        total_recompute_seconds=sum(r.recompute_seconds for r in records),
        wall_seconds=time.perf_counter() - run_start,
    )
    return RunRecord(
        mode=plan.mode,
        seed=plan.seed,
        epochs=tuple(records),
        final=final,
        head=head,
    )


def compare(
    plan_a: TrainPlan,
    plan_b: TrainPlan,
    dataset: Dataset,
    seeds,
    head_spec: HeadSpec,
    train_fraction: float = 0.7,
) -> dict:
    """Run two plans on identical splits per seed; report paired results.

    Each listed seed replaces the plans' own seed field and also seeds the
    stratified split, so both plans see exactly the same data and the same
    initialization stream. Deltas are plan A minus plan B on final test
    accuracy; mean/std are over seeds (population std).
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ParameterError("compare needs at least one seed")
    runs = []
    for s in seeds:
        train, test = split(dataset, train_fraction, s)
        rec_a = run(replace(plan_a, seed=s), train, test, head_spec)
        rec_b = run(replace(plan_b, seed=s), train, test, head_spec)
        runs.append((s, rec_a, rec_b))

    acc_a = np.array([a.final.test_acc for _, a, _ in runs], dtype=float)
    acc_b = np.array([b.final.test_acc for _, _, b in runs], dtype=float)
    deltas = acc_a - acc_b
    report = {
        "train_fraction": train_fraction,
        "seeds": seeds,
        "runs": [
            {
                "seed": s,
                "a": a.to_json_dict(),
                "b": b.to_json_dict(),
                "delta_test_acc": float(d),
            }
            for (s, a, b), d in zip(runs, deltas)
        ],
        "summary": {
            "a": _plan_summary(plan_a, acc_a, [a for _, a, _ in runs]),
            "b": _plan_summary(plan_b, acc_b, [b for _, _, b in runs]),
            "mean_delta_test_acc": float(deltas.mean()),
            "std_delta_test_acc": float(deltas.std()),
        },
    }
    return report


def _plan_summary(plan: TrainPlan, accs: np.ndarray, recs) -> dict:
    return {
        "mode": plan.mode,
        "mean_test_acc": float(accs.mean()),
        "std_test_acc": float(accs.std()),
        "total_sgdm_seconds": float(sum(r.final.total_sgdm_seconds for r in recs)),
        "total_recompute_seconds": float(
            sum(r.final.total_recompute_seconds for r in recs)
        ),
    }
