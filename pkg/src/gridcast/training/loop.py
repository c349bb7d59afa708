"""Training engine: batching, scheduling, checkpoints, and run records.

A run owns its model and optimizer state exclusively and is fully
deterministic given its seed: parameter init, epoch shuffles, and per-sample
feature randomness all derive from it. Run artifacts live under
``<out_dir>/<config_hash>/`` as ``config.json``, ``metrics.jsonl``,
``checkpoints/epoch_<n>.ckpt``, and ``record.json`` (written atomically).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..datasets import Dataset
from ..errors import ConfigError, NumericError, ShapeError
from ..models.checkpoint import save_checkpoint
from ..models.factory import model_gradients, mse_loss
from .optimizers import Optimizer, OptimizerConfig
from .schedules import ScheduleConfig, lr_at

SELECTIONS = ("best_val_mse", "final_epoch")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 12
    seed: int = 0
    include_validation: bool = False
    selection: str = "best_val_mse"

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ConfigError("epochs and batch_size must be positive")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")
        if self.include_validation:
            # no untouched validation set remains, so greedy selection is meaningless
            object.__setattr__(self, "selection", "final_epoch")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size, "seed": self.seed,
                "include_validation": self.include_validation, "selection": self.selection}

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad train config: {exc}") from exc


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_mse: Optional[float]
    checkpoint: str

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss,
                "val_mse": self.val_mse, "checkpoint": self.checkpoint}


@dataclass
class RunRecord:
    config_hash: str
    n_train_samples: int
    selection: str
    epochs: list = field(default_factory=list)
    selected_epoch: Optional[int] = None
    selected_checkpoint: Optional[str] = None
    wall_clock_seconds: float = 0.0
    status: str = "running"
    error: Optional[str] = None
    run_dir: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "status": self.status,
            "error": self.error,
            "n_train_samples": self.n_train_samples,
            "selection": self.selection,
            "selected_epoch": self.selected_epoch,
            "selected_checkpoint": self.selected_checkpoint,
            "wall_clock_seconds": self.wall_clock_seconds,
            "epochs": [e.to_dict() for e in self.epochs],
        }

    @property
    def final_val_mse(self) -> Optional[float]:
        if self.selected_epoch is None:
            return None
        return self.epochs[self.selected_epoch].val_mse


def config_hash(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, "utf-8")
    os.replace(tmp, path)


def schedule_for(train_cfg: TrainConfig, n_samples: int,
                 warmup_fraction: float = 0.05) -> ScheduleConfig:
    batches = -(-n_samples // train_cfg.batch_size)
    return ScheduleConfig(total_steps=train_cfg.epochs * batches,
                          warmup_fraction=warmup_fraction)


def evaluate_mse(model: torch.nn.Module, dataset: Dataset, batch_size: int = 32) -> float:
    """Mean squared error over every element of the dataset, eval mode."""
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for lo in range(0, len(dataset), batch_size):
            x = torch.from_numpy(dataset.inputs[lo:lo + batch_size])
            y = torch.from_numpy(dataset.targets[lo:lo + batch_size])
            err = (model(x) - y).double()
            total += float((err * err).sum())
            count += err.numel()
    model.train()
    return total / count


def _describe_model(model) -> dict:
    doc = {"backbone": model.config.to_dict(), "geo": None}
    if getattr(model, "geo", None) is not None and model.geo.channels > 0:
        doc["geo"] = {"channels": model.geo.channels, "max_norm": model.geo.max_norm,
                      "height": model.geo.height, "width": model.geo.width}
    return doc


def train(model, train_set: Dataset, val_set: Optional[Dataset],
          train_cfg: TrainConfig, opt_cfg: OptimizerConfig,
          sched_cfg: Optional[ScheduleConfig], out_dir,
          run_config: Optional[dict] = None) -> RunRecord:
    """Run the full training loop and persist all run artifacts.

    ``sched_cfg=None`` derives a schedule spanning exactly the planned number
    of optimizer steps with the default warm-up fraction.
    """
    if len(train_set) == 0:
        raise ConfigError("training dataset is empty")
    inputs = train_set.inputs
    targets = train_set.targets
    if train_cfg.include_validation and val_set is not None:
        inputs = np.concatenate([inputs, val_set.inputs])
        targets = np.concatenate([targets, val_set.targets])
    n_samples = len(inputs)

    batches_per_epoch = -(-n_samples // train_cfg.batch_size)
    planned_steps = train_cfg.epochs * batches_per_epoch
    if sched_cfg is None:
        sched_cfg = ScheduleConfig(total_steps=planned_steps)
    if sched_cfg.total_steps < planned_steps:
        raise ConfigError(f"schedule covers {sched_cfg.total_steps} steps but the run "
                          f"needs {planned_steps}")

    config_doc = {
        "train": train_cfg.to_dict(),
        "optimizer": opt_cfg.to_dict(),
        "schedule": sched_cfg.to_dict(),
        "model": _describe_model(model),
        "n_train_samples": n_samples,
    }
    if run_config:
        config_doc["run"] = run_config
    digest = config_hash(config_doc)

    run_dir = Path(out_dir) / digest
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    _write_atomic(run_dir / "config.json", json.dumps(config_doc, indent=2) + "\n")
    metrics_path = run_dir / "metrics.jsonl"
    metrics_path.write_text("", "utf-8")

    record = RunRecord(config_hash=digest, n_train_samples=n_samples,
                       selection=train_cfg.selection, run_dir=str(run_dir))

    def persist() -> None:
        _write_atomic(run_dir / "record.json", json.dumps(record.to_dict(), indent=2) + "\n")

    optimizer = Optimizer(opt_cfg, dict(model.named_parameters()))
    x_all = torch.from_numpy(np.ascontiguousarray(inputs))
    y_all = torch.from_numpy(np.ascontiguousarray(targets))

    started = time.perf_counter()
    model.train()
    global_step = 0
    try:
        for epoch in range(train_cfg.epochs):
            order = np.random.default_rng(
                np.random.SeedSequence([train_cfg.seed, 0xE0, epoch])).permutation(n_samples)
            epoch_sq_sum = 0.0
            epoch_elems = 0
            for lo in range(0, n_samples, train_cfg.batch_size):
                idx = torch.from_numpy(order[lo:lo + train_cfg.batch_size].copy())
                batch_id = f"epoch{epoch}/step{global_step}"
                loss, grads = model_gradients(model, x_all[idx], y_all[idx],
                                              batch_id=batch_id)
                lr = lr_at(sched_cfg, global_step, opt_cfg.lr_peak)
                optimizer.step(grads, lr)
                elems = y_all[idx].numel()
                epoch_sq_sum += float(loss) * elems
                epoch_elems += elems
                global_step += 1

            train_loss = epoch_sq_sum / epoch_elems
            val_mse = evaluate_mse(model, val_set) if val_set is not None else None
            ckpt_rel = f"checkpoints/epoch_{epoch}.ckpt"
            save_checkpoint(model, run_dir / ckpt_rel, config=config_doc["model"],
                            seed=train_cfg.seed, epoch=epoch, metric=val_mse)
            record.epochs.append(EpochRecord(epoch, train_loss, val_mse, ckpt_rel))
            with open(metrics_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"epoch": epoch, "train_loss": train_loss,
                                     "val_mse": val_mse}) + "\n")
            record.wall_clock_seconds = time.perf_counter() - started
            persist()
    except NumericError as exc:
        record.status = "aborted"
        record.error = str(exc)
        record.wall_clock_seconds = time.perf_counter() - started
        persist()
        raise

    if train_cfg.selection == "best_val_mse" and val_set is not None:
        best = min(record.epochs, key=lambda e: (e.val_mse, e.epoch))
        record.selected_epoch = best.epoch
    else:
        record.selected_epoch = record.epochs[-1].epoch
    record.selected_checkpoint = record.epochs[record.selected_epoch].checkpoint
    record.status = "completed"
    record.wall_clock_seconds = time.perf_counter() - started
    persist()
    return record


def ensemble_mean(predictions: list) -> np.ndarray:
    """Elementwise arithmetic mean of same-shaped prediction tensors."""
    if not predictions:
        raise ConfigError("ensemble_mean needs at least one prediction")
    arrays = [np.asarray(p) for p in predictions]
    shape = arrays[0].shape
    for arr in arrays[1:]:
        if arr.shape != shape:
            raise ShapeError(f"prediction shapes differ: {arr.shape} vs {shape}")
    return np.mean(np.stack(arrays), axis=0)
