"""Training loop, evaluation, and paired comparison behavior."""

import json

import numpy as np
import pytest

from ridgehead.data import Dataset, gaussian_blobs, one_hot, split
from ridgehead.errors import DataError, NumericError, ParameterError, ShapeError
from ridgehead.fc_head import FcHead, FcLayer, RecomputeConfig
from ridgehead.harness import HeadSpec, TrainPlan, compare, evaluate, run


def blob_sets(seed=0, n=120, classes=3, d=6):
    ds = gaussian_blobs(classes, d, n, seed=seed)
    return split(ds, 0.75, seed=seed)


class TestTrainPlan:
    def test_mode_validation(self):
        with pytest.raises(ParameterError):
            TrainPlan(mode="adam", epochs=1)

    def test_epochs_validation(self):
        with pytest.raises(ParameterError):
            TrainPlan(mode="sgdm_only", epochs=0)

    def test_default_schedule_thirds(self):
        plan = TrainPlan(mode="sgdm_only", epochs=5)
        assert plan.schedule() == ((1, 2, 1e-3), (3, 4, 1e-4), (5, 5, 1e-5))
        assert plan.lr_for_epoch(1) == 1e-3
        assert plan.lr_for_epoch(4) == 1e-4
        assert plan.lr_for_epoch(5) == 1e-5

    def test_single_epoch_schedule(self):
        plan = TrainPlan(mode="alternating", epochs=1)
        assert plan.schedule() == ((1, 1, 1e-3),)

    def test_explicit_ranges_must_tile(self):
        TrainPlan(
            mode="sgdm_only", epochs=3, learning_rates=((1, 2, 0.1), (3, 3, 0.01))
        )
        with pytest.raises(ParameterError):
            TrainPlan(mode="sgdm_only", epochs=3, learning_rates=((1, 3, 0.1), (2, 3, 0.01)))
        with pytest.raises(ParameterError):
            TrainPlan(mode="sgdm_only", epochs=3, learning_rates=((2, 3, 0.1),))
        with pytest.raises(ParameterError):
            TrainPlan(mode="sgdm_only", epochs=3, learning_rates=((1, 2, 0.1),))

    def test_lr_lookup_honors_ranges(self):
        plan = TrainPlan(
            mode="sgdm_only", epochs=4, learning_rates=((1, 1, 0.5), (2, 4, 0.125))
        )
        assert plan.lr_for_epoch(1) == 0.5
        assert plan.lr_for_epoch(3) == 0.125
        with pytest.raises(ParameterError):
            plan.lr_for_epoch(5)


class TestEvaluate:
    def test_perfect_head(self):
        # identity head on one-hot features classifies every sample
        targets = one_hot([0, 1, 2, 1], 3)
        ds = Dataset(features=targets.copy(), targets=targets)
        head = FcHead((FcLayer(np.eye(3)),))
        result = evaluate(head, ds)
        assert result.accuracy == 1.0
        assert np.trace(result.confusion) == 4

    def test_constant_logits_hit_one_over_c(self):
        # all-zero weights give tied logits; argmax falls to class 0
        ds = gaussian_blobs(4, 5, 80, seed=3)
        head = FcHead((FcLayer(np.zeros((4, 5))),))
        result = evaluate(head, ds)
        assert result.accuracy == pytest.approx(0.25)
        assert result.confusion[:, 0].sum() == 80

    def test_recount_oracle(self):
        ds = gaussian_blobs(3, 4, 50, seed=4)
        rng = np.random.default_rng(5)
        head = FcHead((FcLayer(rng.normal(size=(3, 4))),))
        result = evaluate(head, ds)
        logits = head.layers[0].weights @ ds.features
        correct = [
            int(np.argmax(logits[:, i]) == ds.labels()[i]) for i in range(50)
        ]
        assert result.accuracy == pytest.approx(sum(correct) / 50)
        assert result.confusion.sum() == 50

    def test_empty_dataset_rejected(self):
        ds = Dataset(features=np.zeros((3, 0)), targets=np.zeros((2, 0)))
        head = FcHead((FcLayer(np.zeros((2, 3))),))
        with pytest.raises(DataError, match="empty"):
            evaluate(head, ds)

    def test_class_count_mismatch(self):
        ds = gaussian_blobs(3, 4, 30, seed=6)
        head = FcHead((FcLayer(np.zeros((5, 4))),))
        with pytest.raises(ShapeError):
            evaluate(head, ds)


class TestRun:
    def test_minimal_alternating_record(self):
        train, test = blob_sets()
        plan = TrainPlan(mode="alternating", epochs=1, batch_size=30)
        rec = run(plan, train, test, HeadSpec(hidden=(8,)))
        assert len(rec.epochs) == 1
        e = rec.epochs[0]
        assert e.sgdm_seconds > 0.0
        assert e.recompute_seconds > 0.0
        assert 0.0 <= e.train_acc <= 1.0
        assert 0.0 <= e.test_acc <= 1.0

    def test_mode_skips_other_phase(self):
        train, test = blob_sets()
        spec = HeadSpec(hidden=(8,))
        only_sgdm = run(TrainPlan(mode="sgdm_only", epochs=2, batch_size=30), train, test, spec)
        assert all(e.recompute_seconds == 0.0 for e in only_sgdm.epochs)
        only_rec = run(TrainPlan(mode="recompute_only", epochs=2), train, test, spec)
        assert all(e.sgdm_seconds == 0.0 for e in only_rec.epochs)
        assert all(e.recompute_seconds > 0.0 for e in only_rec.epochs)

    def test_recompute_only_reaches_fixed_point(self):
        # with weak regularization the first pass lands on the ridge optimum,
        # so a second pass barely moves the single layer
        train, _ = blob_sets(n=160, classes=3, d=6)
        cfg = RecomputeConfig(C=1e10, mu=1.0, dropout_rate=0.0)
        spec = HeadSpec()
        one = run(TrainPlan(mode="recompute_only", epochs=1, recompute=cfg), train, None, spec)
        two = run(TrainPlan(mode="recompute_only", epochs=2, recompute=cfg), train, None, spec)
        w1 = one.head.layers[0].weights
        w2 = two.head.layers[0].weights
        assert np.linalg.norm(w2 - w1) <= 1e-8 * np.linalg.norm(w1)

    def test_reproducible_numbers_across_runs(self):
        train, test = blob_sets(seed=9)
        plan = TrainPlan(mode="alternating", epochs=3, batch_size=30, seed=17)
        spec = HeadSpec(hidden=(10,))
        a = run(plan, train, test, spec)
        b = run(plan, train, test, spec)
        for ea, eb in zip(a.epochs, b.epochs):
            assert ea.train_loss == eb.train_loss
            assert ea.train_acc == eb.train_acc
            assert ea.test_acc == eb.test_acc
        for la, lb in zip(a.head.layers, b.head.layers):
            assert la.weights.tobytes() == lb.weights.tobytes()

    def test_different_seed_changes_init(self):
        train, test = blob_sets(seed=9)
        spec = HeadSpec(hidden=(10,))
        a = run(TrainPlan(mode="sgdm_only", epochs=1, batch_size=30, seed=0), train, test, spec)
        b = run(TrainPlan(mode="sgdm_only", epochs=1, batch_size=30, seed=1), train, test, spec)
        assert a.head.layers[0].weights.tobytes() != b.head.layers[0].weights.tobytes()

    def test_phase_accounting(self):
        train, test = blob_sets()
        plan = TrainPlan(mode="alternating", epochs=2, batch_size=30)
        rec = run(plan, train, test, HeadSpec(hidden=(8,)))
        for e in rec.epochs:
            assert e.wall_seconds >= e.sgdm_seconds + e.recompute_seconds - 1e-3
        assert rec.final.wall_seconds >= sum(e.wall_seconds for e in rec.epochs) - 1e-3

    def test_eval_cadence(self):
        train, test = blob_sets()
        plan = TrainPlan(mode="recompute_only", epochs=3, eval_every=2)
        rec = run(plan, train, test, HeadSpec())
        assert rec.epochs[0].train_acc is None
        assert rec.epochs[1].train_acc is not None
        # final epoch always evaluated even off-cadence
        assert rec.epochs[2].train_acc is not None
        assert rec.final.train_acc == rec.epochs[2].train_acc

    def test_no_test_set(self):
        train, _ = blob_sets()
        rec = run(TrainPlan(mode="recompute_only", epochs=1), train, None, HeadSpec())
        assert rec.epochs[0].test_acc is None
        assert rec.final.test_acc is None

    def test_final_head_matches_final_metrics(self):
        train, test = blob_sets(seed=21)
        plan = TrainPlan(mode="alternating", epochs=2, batch_size=30)
        rec = run(plan, train, test, HeadSpec(hidden=(8,)))
        assert evaluate(rec.head, train).accuracy == rec.final.train_acc
        assert evaluate(rec.head, test).accuracy == rec.final.test_acc

    def test_numeric_blowup_names_epoch_and_phase(self):
        # an absurd step overflows the second batch's logits within epoch 1
        train, test = blob_sets()
        plan = TrainPlan(
            mode="sgdm_only",
            epochs=2,
            batch_size=45,
            learning_rates=((1, 2, 1e200),),
        )
        with np.errstate(over="ignore"):
            with pytest.raises(NumericError, match=r"epoch 1, sgdm phase"):
                run(plan, train, test, HeadSpec(hidden=(8,)))

    def test_feature_dim_mismatch_between_sides(self):
        train, _ = blob_sets()
        bad_test = gaussian_blobs(3, 9, 30, seed=2)
        with pytest.raises(ShapeError):
            run(TrainPlan(mode="sgdm_only", epochs=1, batch_size=30), train, bad_test, HeadSpec())

    def test_json_shape(self):
        train, test = blob_sets()
        rec = run(TrainPlan(mode="alternating", epochs=1, batch_size=30), train, test, HeadSpec(hidden=(8,)))
        doc = json.loads(rec.to_json())
        assert set(doc) == {"mode", "seed", "epochs", "final"}
        assert set(doc["epochs"][0]) == {
            "epoch",
            "sgdm_seconds",
            "recompute_seconds",
            "wall_seconds",
            "train_loss",
            "train_acc",
            "test_acc",
        }
        assert set(doc["final"]) == {
            "train_loss",
            "train_acc",
            "test_acc",
            "total_sgdm_seconds",
            "total_recompute_seconds",
            "wall_seconds",
        }


class TestCompare:
    def test_identical_plans_zero_delta(self):
        ds = gaussian_blobs(3, 6, 150, seed=30)
        plan = TrainPlan(mode="alternating", epochs=2, batch_size=30)
        report = compare(plan, plan, ds, seeds=[0, 1, 2], head_spec=HeadSpec(hidden=(8,)))
        assert len(report["runs"]) == 3
        for entry in report["runs"]:
            assert entry["delta_test_acc"] == 0.0
        assert report["summary"]["mean_delta_test_acc"] == 0.0

    def test_alternating_beats_plain_sgdm_here(self):
        ds = gaussian_blobs(3, 6, 200, seed=31)
        alt = TrainPlan(mode="alternating", epochs=2, batch_size=30)
        sgd = TrainPlan(mode="sgdm_only", epochs=2, batch_size=30)
        report = compare(alt, sgd, ds, seeds=[0, 1], head_spec=HeadSpec(hidden=(8,)))
        assert report["summary"]["mean_delta_test_acc"] >= -0.001
        assert report["summary"]["a"]["mode"] == "alternating"
        assert report["summary"]["b"]["total_recompute_seconds"] == 0.0

    def test_seeds_produce_paired_entries(self):
        ds = gaussian_blobs(2, 4, 80, seed=32)
        plan = TrainPlan(mode="recompute_only", epochs=1)
        report = compare(plan, plan, ds, seeds=[5], head_spec=HeadSpec())
        assert report["seeds"] == [5]
        assert report["runs"][0]["a"]["seed"] == 5
        assert report["runs"][0]["b"]["seed"] == 5

    def test_needs_seeds(self):
        ds = gaussian_blobs(2, 4, 40, seed=33)
        plan = TrainPlan(mode="recompute_only", epochs=1)
        with pytest.raises(ParameterError):
            compare(plan, plan, ds, seeds=[], head_spec=HeadSpec())


class TestHeadSpec:
    def test_dims_with_bias(self):
        spec = HeadSpec(hidden=(32,), augment_bias=True)
        assert spec.dims(64, 10) == (65, 32, 10)

    def test_dims_plain(self):
        assert HeadSpec().dims(8, 3) == (8, 3)

    def test_invalid_width(self):
        with pytest.raises(ParameterError):
            HeadSpec(hidden=(0,))
