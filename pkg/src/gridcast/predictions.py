"""Prediction export in the grid container format, and file-level evaluation.

Exports are quantized to 8-bit and written one file per (city, anchor slot)
as ``<city>/<date>_t<frame>.pred.grid`` with the anchor frame and the target
offsets recorded in the header, so a prediction directory can be scored
against a data directory without extra bookkeeping.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
import torch

from .datasets import Dataset, DirectoryDayStore
from .errors import DataError, FormatError
from .grids import quantize_from_unit, scale_to_unit, slice_window
from .scoring import EvalReport, score, split_planes
from .storage import read_container, write_container
from .training.loop import ensemble_mean


def predict(models, inputs: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """Eval-mode forward pass; a list of models is combined by mean."""
    if not isinstance(models, (list, tuple)):
        models = [models]
    per_model = []
    with torch.no_grad():
        for model in models:
            was_training = model.training
            model.eval()
            chunks = []
            for lo in range(0, len(inputs), batch_size):
                x = torch.from_numpy(inputs[lo:lo + batch_size])
                chunks.append(model(x).numpy())
            model.train(was_training)
            per_model.append(np.concatenate(chunks) if chunks
                             else np.zeros((0,) + inputs.shape[1:], dtype=np.float32))
    return ensemble_mean(per_model).astype(np.float32)


def export_predictions(models, dataset: Dataset, city: str, out_dir) -> list:
    """Write quantized predictions for every anchor of the dataset."""
    out_dir = Path(out_dir)
    if len(dataset) == 0:
        return []
    model = models[0] if isinstance(models, (list, tuple)) else models
    out_frames = model.config.out_frames
    out_channels = model.config.out_channels
    planes = predict(models, dataset.inputs)
    stacked = split_planes(planes, out_frames, out_channels)
    paths = []
    for i, anchor in enumerate(dataset.anchors):
        frames = stacked[i].transpose(0, 2, 3, 1)          # (T, H, W, C)
        values = quantize_from_unit(frames)
        header = {
            "dtype": "u8",
            "shape": list(values.shape),
            "order": "C",
            "city": city,
            "date": anchor.date.isoformat(),
            "anchor_frame": anchor.t,
            "offsets": list(dataset.offsets),
        }
        path = out_dir / city / f"{anchor.date.isoformat()}_t{anchor.t:03d}.pred.grid"
        paths.append(write_container(path, header, values.tobytes()))
    return paths


def _load_prediction(path) -> tuple[dict, np.ndarray]:
    header, payload = read_container(path)
    shape = header.get("shape")
    if header.get("dtype") != "u8" or not isinstance(shape, list) or len(shape) != 4:
        raise FormatError(f"{path}: not an 8-bit prediction container")
    expected = int(np.prod(shape))
    if len(payload) != expected:
        raise DataError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    return header, np.frombuffer(payload, dtype=np.uint8).reshape(shape)


def evaluate_prediction_files(pred_root, data_root) -> dict:
    """Score every city subdirectory of a prediction tree against stored days."""
    pred_root = Path(pred_root)
    reports: dict[str, EvalReport] = {}
    cities = sorted(p.name for p in pred_root.iterdir() if p.is_dir())
    if not cities:
        raise DataError(f"no city directories under {pred_root}")
    for city in cities:
        store = DirectoryDayStore(data_root, city)
        preds = []
        targets = []
        for path in sorted((pred_root / city).glob("*.pred.grid")):
            header, values = _load_prediction(path)
            date = dt.date.fromisoformat(header["date"])
            t = int(header["anchor_frame"])
            offsets = tuple(int(o) for o in header["offsets"])
            days = [store.get_day(date)]
            if days[0] is None:
                raise DataError(f"{path}: no stored day for {date}")
            if t + max(offsets) >= store.spec.frames_per_day:
                nxt = store.get_day(date + dt.timedelta(days=1))
                if nxt is None:
                    raise DataError(f"{path}: target window needs the day after {date}")
                days.append(nxt)
            window = slice_window(days, date, t, offsets)
            preds.append(scale_to_unit(values).transpose(0, 3, 1, 2))
            targets.append(window.target_frames.transpose(0, 3, 1, 2))
        if not preds:
            raise DataError(f"no prediction files for city {city}")
        reports[city] = score(np.stack(preds), np.stack(targets))
    return reports
