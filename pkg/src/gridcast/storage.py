"""Bit-exact container files: one UTF-8 JSON header line plus a raw payload.

Day tensors use ``{"dtype":"u8","shape":[T,H,W,C],"order":"C","city":...,
"date":"YYYY-MM-DD"}``; static tensors drop the date and use shape [C,H,W].
Feature bundles reuse the container with dtype "f32" and the channel manifest
embedded in the header. Payload length must equal the product of the shape
times the element size, row-major.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np

from .errors import CorruptionError, FormatError, ParseError
from .grids import CityGridSpec, DayTensor, StaticTensor

_DTYPES = {"u8": np.dtype(np.uint8), "f32": np.dtype("<f4")}


def write_container(path, header: dict, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)
    return path

def read_container(path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    line, sep, payload = raw.partition(b"\n")
    if not sep:
        raise FormatError(f"{path}: no header line terminator found")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    return header, payload


def _decode_payload(path, header: dict, payload: bytes, expect_dtype: str) -> np.ndarray:
    if header.get("dtype") != expect_dtype:
        raise FormatError(f"{path}: dtype {header.get('dtype')!r}, expected {expect_dtype!r}")
    if header.get("order", "C") != "C":
        raise FormatError(f"{path}: only row-major ('C') payloads are supported")
    shape = header.get("shape")
    if not isinstance(shape, list) or not all(isinstance(n, int) and n > 0 for n in shape):
        raise FormatError(f"{path}: bad shape field {shape!r}")
    dtype = _DTYPES[expect_dtype]
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape)


def day_path(root, city: str, date: dt.date) -> Path:
    return Path(root) / city / f"{date.isoformat()}.grid"


def static_path(root, city: str) -> Path:
    return Path(root) / city / "static.grid"


def store_day(day: DayTensor, path) -> Path:
    header = {
        "dtype": "u8",
        "shape": list(day.spec.day_shape),
        "order": "C",
        "city": day.spec.city_id,
        "date": day.date.isoformat(),
    }
    return write_container(path, header, day.values.tobytes())


def load_day(path, spec: CityGridSpec) -> DayTensor:
    header, payload = read_container(path)
    values = _decode_payload(path, header, payload, "u8")
    if list(spec.day_shape) != header["shape"]:
        raise FormatError(
            f"{path}: header shape {header['shape']} does not match spec {list(spec.day_shape)}")
    if header.get("city") != spec.city_id:
        raise FormatError(f"{path}: file is for city {header.get('city')!r}, not {spec.city_id!r}")
    try:
        date = dt.date.fromisoformat(header["date"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad or missing date field") from exc
    return DayTensor(spec=spec, date=date, values=values)


def store_static(static: StaticTensor, path) -> Path:
    header = {
        "dtype": "u8",
        "shape": list(static.spec.static_shape),
        "order": "C",
        "city": static.spec.city_id,
    }
    return write_container(path, header, static.values.tobytes())


def load_static(path, spec: CityGridSpec) -> StaticTensor:
    header, payload = read_container(path)
    values = _decode_payload(path, header, payload, "u8")
    if list(spec.static_shape) != header["shape"]:
        raise FormatError(
            f"{path}: header shape {header['shape']} does not match spec {list(spec.static_shape)}")
    if header.get("city") != spec.city_id:
        raise FormatError(f"{path}: file is for city {header.get('city')!r}, not {spec.city_id!r}")
    return StaticTensor(spec=spec, values=values)


def store_planes(values: np.ndarray, path, meta: dict) -> Path:
    """Write a float32 plane stack (C, H, W) with extra header metadata."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    header = {"dtype": "f32", "shape": list(arr.shape), "order": "C", **meta}
    return write_container(path, header, arr.tobytes())


def load_planes(path) -> tuple[np.ndarray, dict]:
    header, payload = read_container(path)
    return _decode_payload(path, header, payload, "f32"), header
