"""Pixel-wise MSE scoring with per-horizon and per-channel breakdowns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class EvalReport:
    """Unit-scale MSE for one city plus its breakdown cells.

    ``cells[t][c]`` is the MSE restricted to horizon t and channel c; every
    cell averages the same number of elements, so the overall value is the
    weighted (here: plain) mean of the cells.
    """

    mse: float
    per_horizon: list
    per_channel: list
    cells: list
    n_samples: int

    def to_dict(self) -> dict:
        return {"mse": self.mse, "per_horizon": self.per_horizon,
                "per_channel": self.per_channel, "cells": self.cells,
                "n_samples": self.n_samples}


def split_planes(planes: np.ndarray, out_frames: int, out_channels: int) -> np.ndarray:
    """Reshape stacked prediction planes (N, T*C, H, W) to (N, T, C, H, W)."""
    n, tc, height, width = planes.shape
    if tc != out_frames * out_channels:
        raise ShapeError(f"{tc} planes cannot split into {out_frames}x{out_channels}")
    return planes.reshape(n, out_frames, out_channels, height, width)


def score(predictions: np.ndarray, targets: np.ndarray) -> EvalReport:
    """MSE over all elements of (N, T, C, H, W) arrays on the unit scale."""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.shape != targets.shape:
        raise ShapeError(f"predictions {predictions.shape} vs targets {targets.shape}")
    if predictions.ndim != 5:
        raise ShapeError(f"expected (samples, horizons, channels, H, W), "
                         f"got {predictions.shape}")
    sq = (predictions.astype(np.float64) - targets.astype(np.float64)) ** 2
    cells = sq.mean(axis=(0, 3, 4))
    return EvalReport(
        mse=float(sq.mean()),
        per_horizon=[float(v) for v in cells.mean(axis=1)],
        per_channel=[float(v) for v in cells.mean(axis=0)],
        cells=[[float(v) for v in row] for row in cells],
        n_samples=predictions.shape[0],
    )
