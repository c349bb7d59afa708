import datetime as dt
import json

import numpy as np
import pytest
import torch

from gridcast import CityGridSpec, build_synthetic_city
from gridcast.datasets import build_dataset, default_anchors
from gridcast.errors import ConfigError, NumericError, ShapeError
from gridcast.models import BackboneConfig, GeoConfig, build_model, mse_loss
from gridcast.training import (OptimizerConfig, ScheduleConfig, TrainConfig,
                               ensemble_mean, evaluate_mse, train)


def mini_datasets(seed=3, offsets=(1, 2)):
    spec = CityGridSpec("mini", height=8, width=8, frames_per_day=48)
    store, calendar = build_synthetic_city(spec, dt.date(2019, 1, 7), 16, seed)
    dates = [dt.date(2019, 1, 7) + dt.timedelta(days=i) for i in range(16)]
    train_anchors = default_anchors(dates[7:10], 48, offsets, per_day=2)
    val_anchors = default_anchors(dates[10:12], 48, offsets, per_day=2)
    train_set = build_dataset(store, calendar, train_anchors, mode="train", seed=seed,
                              offsets=offsets)
    val_set = build_dataset(store, calendar, val_anchors, mode="test", seed=seed,
                            offsets=offsets)
    return train_set, val_set


def mini_model(train_set, offsets=(1, 2), seed=5, geo=2):
    config = BackboneConfig(family="hrnet", width=4, stages=((1, 1),),
                            in_channels=train_set.manifest.total_channels + geo,
                            out_frames=len(offsets), out_channels=9)
    return build_model(config, GeoConfig(channels=geo), 8, 8, seed=seed)


@pytest.fixture(scope="module")
def datasets():
    return mini_datasets()


class TestTrainRun:
    def test_artifacts_and_record(self, datasets, tmp_path):
        train_set, val_set = datasets
        model = mini_model(train_set)
        cfg = TrainConfig(epochs=2, batch_size=4, seed=5)
        record = train(model, train_set, val_set, cfg, OptimizerConfig("adam"),
                       None, tmp_path)
        run_dir = tmp_path / record.config_hash
        assert (run_dir / "config.json").exists()
        assert (run_dir / "record.json").exists()
        lines = (run_dir / "metrics.jsonl").read_text().strip().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["epoch"] == 0
        for e in range(2):
            assert (run_dir / f"checkpoints/epoch_{e}.ckpt").exists()
        assert record.status == "completed"
        assert record.n_train_samples == len(train_set)
        assert len(record.epochs) == 2
        persisted = json.loads((run_dir / "record.json").read_text())
        assert persisted == record.to_dict()

    def test_selection_best_val_is_argmin(self, datasets, tmp_path):
        train_set, val_set = datasets
        model = mini_model(train_set)
        cfg = TrainConfig(epochs=3, batch_size=4, seed=5, selection="best_val_mse")
        record = train(model, train_set, val_set, cfg, OptimizerConfig("adam"),
                       None, tmp_path)
        vals = [e.val_mse for e in record.epochs]
        assert record.selected_epoch == int(np.argmin(vals))
        assert record.selected_checkpoint == f"checkpoints/epoch_{record.selected_epoch}.ckpt"
        assert record.final_val_mse == min(vals)

    def test_include_validation_forces_final_epoch(self, datasets, tmp_path):
        train_set, val_set = datasets
        cfg = TrainConfig(epochs=2, batch_size=4, seed=5, include_validation=True,
                          selection="best_val_mse")
        assert cfg.selection == "final_epoch"
        model = mini_model(train_set)
        record = train(model, train_set, val_set, cfg, OptimizerConfig("adam"),
                       None, tmp_path)
        assert record.n_train_samples == len(train_set) + len(val_set)
        assert record.selected_epoch == 1

    def test_deterministic_runs(self, datasets, tmp_path):
        train_set, val_set = datasets
        records = []
        for out in ("a", "b"):
            model = mini_model(train_set, seed=5)
            cfg = TrainConfig(epochs=2, batch_size=4, seed=11)
            records.append(train(model, train_set, val_set, cfg,
                                 OptimizerConfig("lamb"), None, tmp_path / out))
        a, b = (r.to_dict() for r in records)
        a.pop("wall_clock_seconds"), b.pop("wall_clock_seconds")
        assert a == b
        ckpt_a = (tmp_path / "a" / records[0].config_hash / "checkpoints/epoch_1.ckpt")
        ckpt_b = (tmp_path / "b" / records[1].config_hash / "checkpoints/epoch_1.ckpt")
        assert ckpt_a.read_bytes() == ckpt_b.read_bytes()

    def test_numeric_failure_aborts_and_persists(self, datasets, tmp_path):
        train_set, val_set = datasets
        poisoned = type(train_set)(inputs=train_set.inputs.copy(),
                                   targets=train_set.targets,
                                   anchors=train_set.anchors,
                                   manifest=train_set.manifest,
                                   offsets=train_set.offsets)
        poisoned.inputs[0, 0, 0, 0] = np.inf
        model = mini_model(train_set)
        cfg = TrainConfig(epochs=1, batch_size=4, seed=5)
        with pytest.raises(NumericError) as err:
            train(model, poisoned, val_set, cfg, OptimizerConfig("adam"), None, tmp_path)
        assert err.value.batch_id is not None
        records = list(tmp_path.glob("*/record.json"))
        assert len(records) == 1
        doc = json.loads(records[0].read_text())
        assert doc["status"] == "aborted"
        assert "batch" in doc["error"]

    def test_short_schedule_rejected(self, datasets, tmp_path):
        train_set, val_set = datasets
        model = mini_model(train_set)
        cfg = TrainConfig(epochs=2, batch_size=4, seed=5)
        with pytest.raises(ConfigError):
            train(model, train_set, val_set, cfg, OptimizerConfig("adam"),
                  ScheduleConfig(total_steps=1), tmp_path)

    def test_empty_dataset_rejected(self, datasets, tmp_path):
        train_set, val_set = datasets
        empty = type(train_set)(inputs=train_set.inputs[:0], targets=train_set.targets[:0],
                                anchors=[], manifest=train_set.manifest,
                                offsets=train_set.offsets)
        with pytest.raises(ConfigError):
            train(mini_model(train_set), empty, val_set, TrainConfig(epochs=1, seed=0),
                  OptimizerConfig("adam"), None, tmp_path)


class TestLossAndEval:
    def test_mse_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        p = rng.normal(size=(2, 3, 2, 2))
        t = rng.normal(size=(2, 3, 2, 2))
        total = 0.0
        for idx in np.ndindex(p.shape):
            total += (p[idx] - t[idx]) ** 2
        oracle = total / p.size
        loss = mse_loss(torch.from_numpy(p), torch.from_numpy(t))
        assert abs(float(loss) - oracle) < 1e-12

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(torch.zeros(2, 3), torch.zeros(3, 2))

    def test_evaluate_mse_matches_direct(self, datasets):
        train_set, val_set = datasets
        model = mini_model(train_set)
        got = evaluate_mse(model, val_set, batch_size=3)
        model.eval()
        with torch.no_grad():
            pred = model(torch.from_numpy(val_set.inputs))
        direct = float(((pred - torch.from_numpy(val_set.targets)) ** 2).double().mean())
        assert got == pytest.approx(direct, rel=1e-6)


class TestEnsembleMean:
    def test_single_prediction_identity(self):
        p = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(ensemble_mean([p]), p)

    def test_opposite_predictions_cancel(self):
        p = np.random.default_rng(0).normal(size=(2, 3))
        np.testing.assert_allclose(ensemble_mean([p, -p]), np.zeros_like(p), atol=0)

    def test_mean_of_constants(self):
        a = np.full((2, 2), 0.2)
        b = np.full((2, 2), 0.6)
        np.testing.assert_allclose(ensemble_mean([a, b]), np.full((2, 2), 0.4))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ensemble_mean([np.zeros((2, 2)), np.zeros((3, 2))])

    def test_empty_list(self):
        with pytest.raises(ConfigError):
            ensemble_mean([])
