"""Flat key-value run configuration.

One ``key = value`` per line, ``#`` comments, no nesting. Unknown or
duplicated keys are rejected; absent keys fall back to the defaults below
(the production-scale pipeline settings plus the stock net and training
hyperparameters).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .nn.train import FitParams
from .nn.unet import UNetSpec
from .pipeline import PipelineConfig
from .volume import Spacing


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig
    unet: UNetSpec
    train: FitParams
    nifti_depth_axis: str = "slowest"


def _parse_floats(value: str, n: int) -> tuple[float, ...]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated values, got {value!r}")
    return tuple(float(p) for p in parts)


def _parse_ints(value: str, n: int) -> tuple[int, ...]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated values, got {value!r}")
    return tuple(int(p) for p in parts)


_PARSERS = {
    "normalized_spacing": lambda v: _parse_floats(v, 3),
    "coarse_dims": lambda v: _parse_ints(v, 2),
    "fine_dims": lambda v: _parse_ints(v, 2),
    "abnormal_dims": lambda v: _parse_ints(v, 2),
    "th_vn": int,
    "prob_threshold": float,
    "connectivity": int,
    "fine_slice_margin": int,
    "unet_depth": int,
    "unet_base_channels": int,
    "lr": float,
    "epochs": int,
    "batch": int,
    "momentum": float,
    "seed": int,
    "nifti_depth_axis": str,
}

_DEFAULTS = {
    "normalized_spacing": (3.0, 0.7816, 0.7816),
    "coarse_dims": (128, 128),
    "fine_dims": (160, 160),
    "abnormal_dims": (64, 256),
    "th_vn": 10000,
    "prob_threshold": 0.5,
    "connectivity": 26,
    "fine_slice_margin": 2,
    "unet_depth": 3,
    "unet_base_channels": 8,
    "lr": 0.1,
    "epochs": 20,
    "batch": 8,
    "momentum": 0.0,
    "seed": 0,
    "nifti_depth_axis": "slowest",
}


def default_config() -> RunConfig:
    return _build(dict(_DEFAULTS))


def _build(values: dict) -> RunConfig:
    pipeline = PipelineConfig(
        normalized_spacing=Spacing(*values["normalized_spacing"]),
        coarse_dims=tuple(values["coarse_dims"]),
        fine_dims=tuple(values["fine_dims"]),
        abnormal_dims=tuple(values["abnormal_dims"]),
        th_vn=values["th_vn"],
        prob_threshold=values["prob_threshold"],
        connectivity=values["connectivity"],
        fine_slice_margin=values["fine_slice_margin"],
    )
    unet = UNetSpec(depth=values["unet_depth"], base_channels=values["unet_base_channels"])
    train = FitParams(
        lr=values["lr"],
        epochs=values["epochs"],
        batch=values["batch"],
        seed=values["seed"],
        momentum=values["momentum"],
    )
    axis = values["nifti_depth_axis"]
    if axis not in ("slowest", "fastest"):
        raise ValueError(f"nifti_depth_axis must be 'slowest' or 'fastest', got {axis!r}")
    return RunConfig(pipeline=pipeline, unet=unet, train=train, nifti_depth_axis=axis)


def parse_config(text: str) -> RunConfig:
    values = dict(_DEFAULTS)
    seen: set[str] = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARSERS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return _build(values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def config_text(values: dict | None = None) -> str:
    """Render a config document (defaults unless overridden); parseable by parse_config."""
    merged = dict(_DEFAULTS)
    if values:
        unknown = set(values) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(values)
    lines = []
    for key in _DEFAULTS:
        v = merged[key]
        if isinstance(v, tuple):
            lines.append(f"{key} = {', '.join(repr(x) if isinstance(x, float) else str(x) for x in v)}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
