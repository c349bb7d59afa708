"""Ablation runner: trains config variants on synthetic cities and tabulates
validation MSE per variant and city (mean and spread over seeds).

Presets ``table1`` through ``table7`` mirror the published comparison axes
(model family, activation, periodic features, holiday features, geo-embedding,
optimizer, warm-up) at desk scale. All variants of a plan share datasets and
seeds; results are bit-reproducible for a fixed seed on one platform.
"""

from __future__ import annotations

import datetime as dt
import json
from collections import OrderedDict
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datasets import (Anchor, FeatureConfig, build_dataset, compute_fill_stats,
                       default_anchors, drop_channel_group)
from .errors import ConfigError, GridcastError
from .grids import CityGridSpec
from .models import ActivationKind, BackboneConfig, GeoConfig, build_model
from .synthetic import SyntheticConfig, build_synthetic_city
from .training import (OptimizerConfig, ScheduleConfig, TrainConfig, train)

PRESETS = ("table1", "table2", "table3", "table4", "table5", "table6", "table7")

AXES = {
    "model_family": ("model.family", "model.width", "model.stages"),
    "activation": ("model.activation",),
    "optimizer": ("optimizer.",),
    "warmup": ("warmup_fraction",),
    "periodic_features": ("features.include_periodic",),
    "holiday_features": ("features.include_holiday",),
    "geo_embedding": ("model.geo_channels", "model.geo_max_norm"),
}


@dataclass(frozen=True)
class DataConfig:
    """Synthetic dataset layout shared by every run of a plan."""

    cities: tuple = ("alpha",)
    start: str = "2019-01-07"
    n_days: int = 21
    height: int = 16
    width: int = 16
    frames_per_day: int = 288
    noise: float = 0.12
    no_road_fraction: float = 0.15
    train_day_range: tuple = (7, 14)
    val_day_range: tuple = (14, 18)
    anchors_per_day: int = 4
    offsets: tuple = (3, 6, 12)

    def to_dict(self) -> dict:
        return {"cities": list(self.cities), "start": self.start, "n_days": self.n_days,
                "height": self.height, "width": self.width,
                "frames_per_day": self.frames_per_day, "noise": self.noise,
                "no_road_fraction": self.no_road_fraction,
                "train_day_range": list(self.train_day_range),
                "val_day_range": list(self.val_day_range),
                "anchors_per_day": self.anchors_per_day, "offsets": list(self.offsets)}

    @classmethod
    def from_dict(cls, doc: dict) -> "DataConfig":
        kwargs = dict(doc)
        for key in ("cities", "train_day_range", "val_day_range", "offsets"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad data config: {exc}") from exc


@dataclass(frozen=True)
class ModelSpec:
    """Backbone shape plus geo-embedding width, input size left open."""

    family: str = "hrnet"
    width: int = 6
    stages: tuple = ((1, 1), (2, 1))
    activation: ActivationKind = ActivationKind("elu")
    geo_channels: int = 8
    geo_max_norm: float = None

    def backbone(self, in_channels: int, out_frames: int, out_channels: int) -> BackboneConfig:
        return BackboneConfig(family=self.family, width=self.width, stages=self.stages,
                              in_channels=in_channels, out_frames=out_frames,
                              out_channels=out_channels, activation=self.activation)

    def geo(self) -> GeoConfig:
        return GeoConfig(channels=self.geo_channels, max_norm=self.geo_max_norm)

    def to_dict(self) -> dict:
        return {"family": self.family, "width": self.width,
                "stages": [list(s) if isinstance(s, tuple) else s for s in self.stages],
                "activation": self.activation.to_dict(),
                "geo_channels": self.geo_channels, "geo_max_norm": self.geo_max_norm}

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        kwargs = dict(doc)
        if "stages" in kwargs:
            kwargs["stages"] = tuple(tuple(s) if isinstance(s, list) else s
                                     for s in kwargs["stages"])
        if "activation" in kwargs:
            kwargs["activation"] = ActivationKind.from_dict(kwargs["activation"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad model spec: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = DataConfig()
    features: FeatureConfig = FeatureConfig()
    model: ModelSpec = ModelSpec()
    optimizer: OptimizerConfig = OptimizerConfig("lamb")
    warmup_fraction: float = 0.05
    epochs: int = 3
    batch_size: int = 6

    def to_dict(self) -> dict:
        return {"data": self.data.to_dict(), "features": self.features.to_dict(),
                "model": self.model.to_dict(), "optimizer": self.optimizer.to_dict(),
                "warmup_fraction": self.warmup_fraction, "epochs": self.epochs,
                "batch_size": self.batch_size}

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        base = cls()
        return cls(
            data=DataConfig.from_dict(doc["data"]) if "data" in doc else base.data,
            features=(FeatureConfig.from_dict(doc["features"]) if "features" in doc
                      else base.features),
            model=ModelSpec.from_dict(doc["model"]) if "model" in doc else base.model,
            optimizer=(OptimizerConfig.from_dict(doc["optimizer"]) if "optimizer" in doc
                       else base.optimizer),
            warmup_fraction=doc.get("warmup_fraction", base.warmup_fraction),
            epochs=doc.get("epochs", base.epochs),
            batch_size=doc.get("batch_size", base.batch_size),
        )


def _flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, path + "."))
        else:
            flat[path] = value
    return flat


def _diff_paths(base: ExperimentConfig, variant: ExperimentConfig) -> set:
    a, b = _flatten(base.to_dict()), _flatten(variant.to_dict())
    return {k for k in set(a) | set(b) if a.get(k) != b.get(k)}


@dataclass(frozen=True)
class AblationPlan:
    name: str
    axis: str
    base: ExperimentConfig
    variants: tuple            # of (label, ExperimentConfig)
    seeds: tuple = (1, 2, 3)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown ablation axis {self.axis!r}, choose from {sorted(AXES)}")
        if not self.variants:
            raise ConfigError("plan needs at least one variant")
        allowed = AXES[self.axis]
        for label, variant in self.variants:
            stray = {p for p in _diff_paths(self.base, variant)
                     if not any(p == a or p.startswith(a) for a in allowed)}
            if stray:
                raise ConfigError(
                    f"variant {label!r} differs from base outside axis {self.axis!r}: "
                    f"{sorted(stray)}")


def _build_city_datasets(data: DataConfig, features: FeatureConfig, city: str, seed: int):
    """Train/val datasets with every feature group on; variants drop groups."""
    spec = CityGridSpec(city_id=city, height=data.height, width=data.width,
                        frames_per_day=data.frames_per_day)
    start = dt.date.fromisoformat(data.start)
    synth = SyntheticConfig(noise=data.noise, no_road_fraction=data.no_road_fraction)
    store, calendar = build_synthetic_city(spec, start, data.n_days, seed, synth)
    dates = [start + dt.timedelta(days=i) for i in range(data.n_days)]
    train_dates = dates[slice(*data.train_day_range)]
    val_dates = dates[slice(*data.val_day_range)]
    if not train_dates or not val_dates:
        raise ConfigError("empty train or validation day range")
    fill = compute_fill_stats(store, train_dates)
    full = replace(features, include_static=True, include_periodic=True,
                   include_time=True, include_weekday=True, include_holiday=True)
    common = dict(offsets=data.offsets, features=full, fill_stats=fill, seed=seed)
    train_anchors = default_anchors(train_dates, spec.frames_per_day, data.offsets,
                                    data.anchors_per_day)
    val_anchors = default_anchors(val_dates, spec.frames_per_day, data.offsets,
                                  data.anchors_per_day)
    train_set = build_dataset(store, calendar, train_anchors, mode="train", **common)
    val_set = build_dataset(store, calendar, val_anchors, mode="test", **common)
    return train_set, val_set


def _variant_view(dataset, features: FeatureConfig):
    out = dataset
    for group, included in (("static", features.include_static),
                            ("periodic", features.include_periodic),
                            ("time", features.include_time),
                            ("weekday", features.include_weekday),
                            ("holiday", features.include_holiday)):
        if not included:
            out = drop_channel_group(out, group)
    return out


def run_experiment(config: ExperimentConfig, city: str, seed: int, out_dir,
                   datasets=None, label: str = "run"):
    """Train one variant on one synthetic city; returns the run record."""
    if datasets is None:
        datasets = _build_city_datasets(config.data, config.features, city, seed)
    train_full, val_full = datasets
    train_set = _variant_view(train_full, config.features)
    val_set = _variant_view(val_full, config.features)

    spec_channels = train_set.manifest.total_channels
    out_frames = len(config.data.offsets)
    out_channels = 9
    backbone = config.model.backbone(spec_channels + config.model.geo_channels,
                                     out_frames, out_channels)
    model = build_model(backbone, config.model.geo(), config.data.height,
                        config.data.width, seed)

    train_cfg = TrainConfig(epochs=config.epochs, batch_size=config.batch_size,
                            seed=seed, selection="best_val_mse")
    batches = -(-len(train_set) // config.batch_size)
    sched = ScheduleConfig(total_steps=config.epochs * batches,
                           warmup_fraction=config.warmup_fraction)
    run_config = {"city": city, "variant": label, "seed": seed,
                  "experiment": config.to_dict()}
    return train(model, train_set, val_set, train_cfg, config.optimizer, sched,
                 out_dir, run_config=run_config)


def run_ablation(plan: AblationPlan, out_dir) -> dict:
    """Train every (variant, city, seed) combination and assemble the table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cities = plan.base.data.cities

    rows = []
    for label, variant in plan.variants:
        cells = {}
        for city in cities:
            runs = []
            for seed in plan.seeds:
                datasets = _dataset_cache(plan, city, seed)
                run_dir = out_dir / "runs" / label / f"seed{seed}"
                try:
                    record = run_experiment(variant, city, seed, run_dir,
                                            datasets=datasets, label=label)
                    runs.append({"seed": seed, "val_mse": record.final_val_mse})
                except GridcastError as exc:
                    runs.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
            values = [r["val_mse"] for r in runs if "val_mse" in r]
            cells[city] = {
                "mean": float(np.mean(values)) if values else None,
                "std": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                "runs": runs,
                "best": False,
            }
        rows.append({"variant": label, "cells": cells})

    for city in cities:
        means = [(i, row["cells"][city]["mean"]) for i, row in enumerate(rows)
                 if row["cells"][city]["mean"] is not None]
        if means:
            best_i = min(means, key=lambda kv: kv[1])[0]
            rows[best_i]["cells"][city]["best"] = True

    result = {"plan": plan.name, "axis": plan.axis, "seeds": list(plan.seeds),
              "cities": list(cities), "rows": rows}
    (out_dir / "ablation.json").write_text(json.dumps(result, indent=2) + "\n", "utf-8")
    (out_dir / "table.txt").write_text(render_table(result), "utf-8")
    return result


_CACHE: OrderedDict = OrderedDict()


def _dataset_cache(plan: AblationPlan, city: str, seed: int):
    """Share full-feature datasets across variants (and repeated plans)."""
    key = (json.dumps(plan.base.data.to_dict(), sort_keys=True),
           json.dumps({**plan.base.features.to_dict(),
                       **{k: True for k in ("include_static", "include_periodic",
                                            "include_time", "include_weekday",
                                            "include_holiday")}}, sort_keys=True),
           city, seed)
    if key not in _CACHE:
        while len(_CACHE) >= 12:
            _CACHE.popitem(last=False)
        _CACHE[key] = _build_city_datasets(plan.base.data, plan.base.features, city, seed)
    return _CACHE[key]


def render_table(result: dict) -> str:
    cities = result["cities"]
    label_w = max(12, max(len(r["variant"]) for r in result["rows"]) + 2)
    header = f"{result['plan']}  (axis: {result['axis']}, seeds: {result['seeds']})"
    head_cells = "".join(f"{c:>24}" for c in cities)
    lines = [header, f"{'variant':<{label_w}}{head_cells}",
             "-" * (label_w + 24 * len(cities))]
    for row in result["rows"]:
        cells = ""
        for city in cities:
            cell = row["cells"][city]
            if cell["mean"] is None:
                text = "failed"
            else:
                mark = "*" if cell["best"] else " "
                text = f"{mark}{cell['mean']:.4e} ±{cell['std']:.1e}"
            cells += f"{text:>24}"
        lines.append(f"{row['variant']:<{label_w}}{cells}")
    return "\n".join(lines) + "\n"


def preset_plan(name: str, seeds: tuple = (1, 2, 3),
                base: ExperimentConfig = None) -> AblationPlan:
    """Desk-scale plan mirroring one published comparison table."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, choose from {PRESETS}")
    base = base if base is not None else ExperimentConfig()

    if name == "table1":
        ms = base.model
        variants = (
            ("unet", replace(base, model=replace(ms, family="unet", width=8, stages=(1, 1)))),
            ("hrnet", replace(base, model=replace(ms, family="hrnet", width=6,
                                                  stages=((1, 1), (2, 1))))),
            ("hrnet-wide", replace(base, model=replace(ms, family="hrnet", width=12,
                                                       stages=((1, 1), (2, 1))))),
        )
        return AblationPlan(name, "model_family", base, variants, seeds)

    if name == "table2":
        variants = tuple(
            (kind, replace(base, model=replace(base.model, activation=ActivationKind(kind))))
            for kind in ("relu", "elu", "relu6", "leaky_relu"))
        return AblationPlan(name, "activation", base, variants, seeds)

    if name == "table3":
        variants = (
            ("without-periodic", replace(base, features=replace(base.features,
                                                                include_periodic=False))),
            ("with-periodic", replace(base, features=replace(base.features,
                                                             include_periodic=True))),
        )
        return AblationPlan(name, "periodic_features", base, variants, seeds)

    if name == "table4":
        variants = (
            ("without-holiday", replace(base, features=replace(base.features,
                                                               include_holiday=False))),
            ("with-holiday", replace(base, features=replace(base.features,
                                                            include_holiday=True))),
        )
        return AblationPlan(name, "holiday_features", base, variants, seeds)

    if name == "table5":
        variants = (
            ("without-embedding", replace(base, model=replace(base.model, geo_channels=0))),
            ("with-embedding", replace(base, model=replace(base.model, geo_channels=8))),
        )
        return AblationPlan(name, "geo_embedding", base, variants, seeds)

    if name == "table6":
        variants = tuple(
            (kind, replace(base, optimizer=OptimizerConfig(kind, lr_peak=base.optimizer.lr_peak)))
            for kind in ("sgd", "adam", "adamw", "lamb"))
        return AblationPlan(name, "optimizer", base, variants, seeds)

    # table7: warm-up off vs on, compared with the adaptive-moment optimizer
    base7 = replace(base, optimizer=OptimizerConfig("adam", lr_peak=base.optimizer.lr_peak))
    variants = (
        ("without-warmup", replace(base7, warmup_fraction=0.0)),
        ("with-warmup", replace(base7, warmup_fraction=0.1)),
    )
    return AblationPlan(name, "warmup", base7, variants, seeds)
