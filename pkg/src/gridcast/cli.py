"""Command line interface.

Verbs: generate-synthetic, calendar validate, features build, train,
evaluate, ablate, export. Exit codes: 0 success, 2 configuration error,
3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

from . import ablation, storage
from .calendars import load_calendar
from .datasets import (Anchor, DirectoryDayStore, FeatureConfig, build_dataset,
                       build_sample, compute_fill_stats, default_anchors)
from .errors import ConfigError, EXIT_DATA, GridcastError
from .grids import CityGridSpec, DEFAULT_OFFSETS
from .models import ActivationKind, BackboneConfig, GeoConfig, build_model, load_model
from .predictions import evaluate_prediction_files, export_predictions
from .synthetic import SyntheticConfig, build_synthetic_city
from .training import OptimizerConfig, ScheduleConfig, TrainConfig, train


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"bad date {text!r} (expected YYYY-MM-DD)") from exc


def cmd_generate_synthetic(args) -> int:
    spec = CityGridSpec(city_id=args.city, height=args.height, width=args.width,
                        frames_per_day=args.frames)
    synth = SyntheticConfig(noise=args.noise, no_road_fraction=args.no_road_fraction)
    store, calendar = build_synthetic_city(spec, _parse_date(args.start), args.days,
                                           args.seed, synth)
    from .datasets import write_city
    city_dir = write_city(args.out_dir, store, calendar)
    print(f"wrote {args.days} days of {args.city} ({args.height}x{args.width}) "
          f"to {city_dir}")
    return 0


def cmd_calendar_validate(args) -> int:
    calendar = load_calendar(args.path)
    print(f"{args.path}: city={calendar.city_id} "
          f"coverage=[{calendar.coverage_start}, {calendar.coverage_end}] "
          f"holidays={len(calendar.holidays)}")
    return 0


def _load_store_and_calendar(data_dir, city, calendar_path=None):
    store = DirectoryDayStore(data_dir, city)
    path = Path(calendar_path) if calendar_path else Path(data_dir) / city / "calendar.json"
    return store, load_calendar(path)


def cmd_features_build(args) -> int:
    store, calendar = _load_store_and_calendar(args.data_dir, args.city, args.calendar)
    date = _parse_date(args.date)
    offsets = tuple(int(x) for x in args.offsets.split(","))
    fill_dates = store.dates()
    fill = compute_fill_stats(store, fill_dates) if fill_dates else None
    bundle, _ = build_sample(store, calendar, Anchor(date=date, t=args.frame),
                             mode=args.mode, seed=args.seed, offsets=offsets,
                             fill_stats=fill)
    out = Path(args.out) if args.out else Path(f"{args.city}_{args.date}_t{args.frame:03d}.bundle.grid")
    storage.store_planes(bundle.input, out, meta={
        "manifest": bundle.manifest.to_json(),
        "city": args.city, "date": args.date, "frame": args.frame, "mode": args.mode,
    })
    print(f"wrote {bundle.manifest.total_channels}-channel bundle to {out}")
    return 0


def _dates_from(doc, what: str) -> list:
    if isinstance(doc, list):
        return [_parse_date(d) for d in doc]
    if isinstance(doc, dict) and "start" in doc and "days" in doc:
        start = _parse_date(doc["start"])
        return [start + dt.timedelta(days=i) for i in range(int(doc["days"]))]
    raise ConfigError(f"{what} must be a date list or {{start, days}}")


def cmd_train(args) -> int:
    doc = _read_json(args.config)
    for key in ("data", "model"):
        if key not in doc:
            raise ConfigError(f"train config missing section {key!r}")
    data = doc["data"]
    store, calendar = _load_store_and_calendar(
        data.get("root", "data"), data.get("city", "alpha"), data.get("calendar"))
    offsets = tuple(data.get("offsets", list(DEFAULT_OFFSETS)))
    per_day = int(data.get("anchors_per_day", 4))
    train_dates = _dates_from(data["train_dates"], "train_dates")
    val_dates = _dates_from(data["val_dates"], "val_dates") if data.get("val_dates") else []

    features = FeatureConfig.from_dict(doc.get("features", {}))
    train_cfg = TrainConfig.from_dict({"seed": args.seed, **doc.get("train", {})})
    opt_cfg = OptimizerConfig.from_dict(doc.get("optimizer", {"kind": "lamb"}))
    sched_doc = doc.get("schedule", {})

    fill = compute_fill_stats(store, train_dates)
    frames = store.spec.frames_per_day
    train_set = build_dataset(store, calendar,
                              default_anchors(train_dates, frames, offsets, per_day),
                              mode="train", seed=train_cfg.seed, offsets=offsets,
                              features=features, fill_stats=fill)
    val_set = None
    if val_dates:
        val_set = build_dataset(store, calendar,
                                default_anchors(val_dates, frames, offsets, per_day),
                                mode="test", seed=train_cfg.seed, offsets=offsets,
                                features=features, fill_stats=fill)

    model_doc = dict(doc["model"])
    geo_doc = model_doc.pop("geo", None)
    geo = GeoConfig.from_dict(geo_doc) if geo_doc else None
    geo_channels = geo.channels if geo else 0
    backbone = BackboneConfig.from_dict({
        "in_channels": train_set.manifest.total_channels + geo_channels,
        "out_frames": len(offsets),
        "out_channels": store.spec.dynamic_channels,
        **model_doc,
    })
    model = build_model(backbone, geo, store.spec.height, store.spec.width, train_cfg.seed)

    sched = None
    if sched_doc.get("total_steps"):
        sched = ScheduleConfig(total_steps=int(sched_doc["total_steps"]),
                               warmup_fraction=sched_doc.get("warmup_fraction", 0.05))
    elif "warmup_fraction" in sched_doc:
        n = len(train_set) + (len(val_set) if val_set and train_cfg.include_validation else 0)
        batches = -(-n // train_cfg.batch_size)
        sched = ScheduleConfig(total_steps=train_cfg.epochs * batches,
                               warmup_fraction=sched_doc["warmup_fraction"])

    record = train(model, train_set, val_set, train_cfg, opt_cfg, sched, args.out_dir,
                   run_config={"cli_config": doc})
    final = record.final_val_mse
    print(f"run {record.config_hash}: status={record.status} "
          f"selected_epoch={record.selected_epoch} "
          f"val_mse={final if final is not None else 'n/a'}")
    print(f"artifacts under {record.run_dir}")
    return 0


def cmd_evaluate(args) -> int:
    reports = evaluate_prediction_files(args.predictions, args.data_dir)
    doc = {city: r.to_dict() for city, r in reports.items()}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", "utf-8")
        print(f"wrote report to {args.out}")
    for city, report in reports.items():
        print(f"{city}: mse={report.mse:.6e} over {report.n_samples} samples")
    return 0


def cmd_ablate(args) -> int:
    base = None
    if args.config:
        base = ablation.ExperimentConfig.from_dict(_read_json(args.config))
    seeds = tuple(args.seed + i for i in range(args.num_seeds))
    plan = ablation.preset_plan(args.preset, seeds=seeds, base=base)
    result = ablation.run_ablation(plan, args.out_dir)
    print(ablation.render_table(result), end="")
    print(f"artifacts under {args.out_dir}")
    return 0


def cmd_export(args) -> int:
    model = load_model(args.checkpoint)
    store, calendar = _load_store_and_calendar(args.data_dir, args.city, args.calendar)
    dates = [_parse_date(d) for d in args.dates.split(",")]
    frames = [int(f) for f in args.frames.split(",")]
    offsets = tuple(int(x) for x in args.offsets.split(","))
    if len(offsets) != model.config.out_frames:
        raise ConfigError(f"model predicts {model.config.out_frames} horizons, "
                          f"got {len(offsets)} offsets")
    fill = compute_fill_stats(store, store.dates())
    anchors = [Anchor(date=d, t=t) for d in dates for t in frames]
    features_channels = model.config.in_channels - (model.geo.channels if model.geo else 0)
    dataset = build_dataset(store, calendar, anchors, mode="test", seed=args.seed,
                            offsets=offsets, fill_stats=fill)
    if dataset.manifest.total_channels != features_channels:
        raise ConfigError(f"model expects {features_channels} feature channels, "
                          f"dataset provides {dataset.manifest.total_channels}")
    paths = export_predictions(model, dataset, args.city, args.out_dir)
    print(f"wrote {len(paths)} prediction files under {Path(args.out_dir) / args.city}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcast",
                                     description="Gridded traffic-movie forecasting toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global random seed")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out-dir", default="out", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-synthetic", parents=[common],
                       help="generate a synthetic city in the grid format")
    p.add_argument("--city", default="alpha")
    p.add_argument("--start", default="2019-01-07")
    p.add_argument("--days", type=int, default=21)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--frames", type=int, default=288)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--no-road-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_generate_synthetic)

    p = sub.add_parser("calendar", parents=[common], help="calendar utilities")
    cal_sub = p.add_subparsers(dest="calendar_command", required=True)
    v = cal_sub.add_parser("validate", help="validate a holiday calendar file")
    v.add_argument("path")
    v.set_defaults(func=cmd_calendar_validate)

    p = sub.add_parser("features", parents=[common], help="feature utilities")
    feat_sub = p.add_subparsers(dest="features_command", required=True)
    b = feat_sub.add_parser("build", parents=[common],
                            help="assemble one input bundle and write it")
    b.add_argument("--data-dir", required=True)
    b.add_argument("--city", required=True)
    b.add_argument("--date", required=True)
    b.add_argument("--frame", type=int, default=11)
    b.add_argument("--mode", choices=("train", "test"), default="test")
    b.add_argument("--offsets", default=",".join(str(o) for o in DEFAULT_OFFSETS))
    b.add_argument("--calendar", default=None)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_features_build)

    p = sub.add_parser("train", parents=[common], help="train a model from a JSON config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score exported predictions against stored days")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", parents=[common], help="run a preset comparison table")
    p.add_argument("--preset", required=True, choices=ablation.PRESETS)
    p.add_argument("--num-seeds", type=int, default=3)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export", parents=[common],
                       help="export quantized predictions for (date, frame) slots")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--city", required=True)
    p.add_argument("--dates", required=True, help="comma-separated ISO dates")
    p.add_argument("--frames", required=True, help="comma-separated frame indices")
    p.add_argument("--offsets", default=",".join(str(o) for o in DEFAULT_OFFSETS))
    p.add_argument("--calendar", default=None)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train" and not args.config:
        parser.error("train requires --config")
    try:
        return args.func(args)
    except GridcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
