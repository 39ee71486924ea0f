"""Spatial transforms of the pipeline, each paired with an exact inverse.

Four transforms: whole-volume spacing resample, slice resize to a canonical
image size (pixel size floats), fixed-pixel-size crop, and the zero-padding
inverses of the latter two.

Sampling conventions, fixed so round-trip tests are stable:

- output sample i reads source coordinate ``i * step_ratio``, edge-clamped
  to the source extent (voxel 0 centres of source and target coincide)
- linear interpolation uses the ``v0 + f * (v1 - v0)`` form, so constant
  inputs come back exactly
- nearest-neighbour picks ``floor(coord + 0.5)``
- output dims under a spacing resample are round-half-up, minimum 1
- crop windows start at ``center - dim // 2``; for odd window dims the
  top/left side holds the smaller half
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import GeometryError
from .volume import AnySlice, AnyVolume, Mask3D, Plane, ProbMap2D, Slice2D, Spacing, Volume3D

InterpMode = Literal["trilinear", "nearest"]
ResizeMode = Literal["bilinear", "nearest"]


@dataclass(frozen=True)
class ResizeRecord:
    """What a resize did, sufficient to map a prediction back."""

    original_dims: tuple[int, int]
    target_dims: tuple[int, int]
    original_pixel_spacing: tuple[float, float]

    def __post_init__(self):
        if min(self.original_dims) < 1 or min(self.target_dims) < 1:
            raise ValueError("resize record dims must be positive")


@dataclass(frozen=True)
class CropRecord:
    """What a crop did: window placement plus any boundary zero-padding.

    ``pad`` is (top, bottom, left, right) pixel counts that fell outside the
    source and were zero-filled in the patch.
    """

    plane: Plane
    center: tuple[int, int]
    patch_dims: tuple[int, int]
    source_dims: tuple[int, int]
    pad: tuple[int, int, int, int]

    def __post_init__(self):
        if min(self.patch_dims) < 1:
            raise ValueError("patch dims must be positive")
        pr, pc = self.patch_dims
        top, bottom, left, right = self.pad
        r0 = self.center[0] - pr // 2
        c0 = self.center[1] - pc // 2
        ok = (
            top == max(0, -r0)
            and left == max(0, -c0)
            and bottom == max(0, r0 + pr - self.source_dims[0])
            and right == max(0, c0 + pc - self.source_dims[1])
        )
        if not ok:
            raise ValueError("pad inconsistent with center/patch_dims/source_dims")


def _axis_samples(n_src: int, n_out: int, step_ratio: float):
    """Clamped source coordinates for each output index along one axis."""
    x = np.arange(n_out, dtype=np.float64) * step_ratio
    np.clip(x, 0.0, float(n_src - 1), out=x)
    return x


def _linear_axis(n_src: int, n_out: int, step_ratio: float):
    x = _axis_samples(n_src, n_out, step_ratio)
    i0 = np.floor(x).astype(np.intp)
    np.minimum(i0, n_src - 1, out=i0)
    i1 = np.minimum(i0 + 1, n_src - 1)
    f = x - i0
    return i0, i1, f


def _nearest_axis(n_src: int, n_out: int, step_ratio: float):
    x = _axis_samples(n_src, n_out, step_ratio)
    idx = np.floor(x + 0.5).astype(np.intp)
    np.clip(idx, 0, n_src - 1, out=idx)
    return idx


def _lerp(v0, v1, f):
    return v0 + f * (v1 - v0)


def _resample_array_3d(data: np.ndarray, out_dims, ratios, linear: bool) -> np.ndarray:
    if linear:
        z0, z1, fz = _linear_axis(data.shape[0], out_dims[0], ratios[0])
        y0, y1, fy = _linear_axis(data.shape[1], out_dims[1], ratios[1])
        x0, x1, fx = _linear_axis(data.shape[2], out_dims[2], ratios[2])
        fz = fz[:, None, None]
        fy = fy[None, :, None]
        fx = fx[None, None, :]
        work = data.astype(np.float64, copy=False)

        def take(zi, yi, xi):
            return work[zi[:, None, None], yi[None, :, None], xi[None, None, :]]

        c00 = _lerp(take(z0, y0, x0), take(z0, y0, x1), fx)
        c01 = _lerp(take(z0, y1, x0), take(z0, y1, x1), fx)
        c10 = _lerp(take(z1, y0, x0), take(z1, y0, x1), fx)
        c11 = _lerp(take(z1, y1, x0), take(z1, y1, x1), fx)
        c0 = _lerp(c00, c01, fy)
        c1 = _lerp(c10, c11, fy)
        return _lerp(c0, c1, fz).astype(np.float32)
    zi = _nearest_axis(data.shape[0], out_dims[0], ratios[0])
    yi = _nearest_axis(data.shape[1], out_dims[1], ratios[1])
    xi = _nearest_axis(data.shape[2], out_dims[2], ratios[2])
    return data[zi[:, None, None], yi[None, :, None], xi[None, None, :]]


def _resample_array_2d(data: np.ndarray, out_dims, ratios, linear: bool) -> np.ndarray:
    if linear:
        r0, r1, fr = _linear_axis(data.shape[0], out_dims[0], ratios[0])
        c0, c1, fc = _linear_axis(data.shape[1], out_dims[1], ratios[1])
        fr = fr[:, None]
        fc = fc[None, :]
        work = data.astype(np.float64, copy=False)

        def take(ri, ci):
            return work[ri[:, None], ci[None, :]]

        top = _lerp(take(r0, c0), take(r0, c1), fc)
        bot = _lerp(take(r1, c0), take(r1, c1), fc)
        return _lerp(top, bot, fr).astype(np.float32)
    ri = _nearest_axis(data.shape[0], out_dims[0], ratios[0])
    ci = _nearest_axis(data.shape[1], out_dims[1], ratios[1])
    return data[ri[:, None], ci[None, :]]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def resample_volume(
    vol: AnyVolume,
    target: Spacing,
    mode: InterpMode | None = None,
    target_dims: tuple[int, int, int] | None = None,
) -> AnyVolume:
    """Resample a volume or mask onto a grid with the given voxel spacing.

    Output dims default to round-half-up(dim * src_spacing / target_spacing)
    per axis (minimum 1); pass ``target_dims`` to force an exact output grid
    (used to map results back onto a native grid). Intensities interpolate
    trilinearly, masks use nearest neighbour and stay binary; ``mode``
    defaults accordingly and trilinear is rejected for masks.
    """
    is_mask = isinstance(vol, Mask3D)
    if mode is None:
        mode = "nearest" if is_mask else "trilinear"
    if mode not in ("trilinear", "nearest"):
        raise ValueError(f"unknown resample mode {mode!r}")
    if is_mask and mode == "trilinear":
        raise ValueError("trilinear resampling would break mask binarity; use nearest")

    src = vol.spacing.as_tuple()
    dst = target.as_tuple()
    if target_dims is None:
        out_dims = tuple(
            max(1, _round_half_up(n * s / t)) for n, s, t in zip(vol.dims, src, dst)
        )
    else:
        out_dims = tuple(int(n) for n in target_dims)
        if min(out_dims) < 1:
            raise GeometryError(f"target dims must be positive, got {target_dims}")

    if out_dims == vol.dims and dst == src:
        return type(vol)(vol.data, target)

    ratios = tuple(t / s for s, t in zip(src, dst))
    out = _resample_array_3d(vol.data, out_dims, ratios, linear=(mode == "trilinear"))
    if is_mask:
        return Mask3D(out, target)
    return Volume3D(out, target)


def resize_slice(
    s: Slice2D, target_dims: tuple[int, int], mode: ResizeMode = "bilinear"
) -> tuple[Slice2D, ResizeRecord]:
    """Resize a slice to a fixed image size; pixel size rescales by the dim ratio.

    Use ``mode="nearest"`` for label slices so they stay binary.
    """
    tr, tc = int(target_dims[0]), int(target_dims[1])
    if tr < 1 or tc < 1:
        raise ValueError(f"target dims must be positive, got {target_dims}")
    rec = ResizeRecord(s.dims, (tr, tc), s.pixel_spacing)
    new_spacing = (
        s.pixel_spacing[0] * s.dims[0] / tr,
        s.pixel_spacing[1] * s.dims[1] / tc,
    )
    if (tr, tc) == s.dims:
        return Slice2D(s.data, s.pixel_spacing, s.plane, s.index), rec
    ratios = (s.dims[0] / tr, s.dims[1] / tc)
    out = _resample_array_2d(s.data, (tr, tc), ratios, linear=(mode == "bilinear"))
    return Slice2D(out, new_spacing, s.plane, s.index), rec


def unresize(p: AnySlice, rec: ResizeRecord, mode: ResizeMode = "bilinear") -> AnySlice:
    """Invert a resize: map a prediction back to the recorded original size."""
    if p.dims != rec.target_dims:
        raise GeometryError(
            f"prediction dims {p.dims} do not match resize record target {rec.target_dims}"
        )
    cls = ProbMap2D if isinstance(p, ProbMap2D) else Slice2D
    if rec.original_dims == rec.target_dims:
        return cls(p.data, rec.original_pixel_spacing, p.plane, p.index)
    ratios = (
        rec.target_dims[0] / rec.original_dims[0],
        rec.target_dims[1] / rec.original_dims[1],
    )
    out = _resample_array_2d(p.data, rec.original_dims, ratios, linear=(mode == "bilinear"))
    if cls is ProbMap2D:
        out = np.clip(out, 0.0, 1.0)
    return cls(out, rec.original_pixel_spacing, p.plane, p.index)


def crop_patch(
    s: Slice2D, center: tuple[int, int], patch_dims: tuple[int, int]
) -> tuple[Slice2D, CropRecord]:
    """Cut a fixed-size window centred on a pixel; out-of-bounds area is zero.

    Pixel spacing is deliberately left unchanged (fixed physical pixel size
    is the point of this transform).
    """
    rows, cols = s.dims
    cr, cc = int(center[0]), int(center[1])
    if not (0 <= cr < rows and 0 <= cc < cols):
        raise GeometryError(f"center {center} outside source dims {s.dims}")
    pr, pc = int(patch_dims[0]), int(patch_dims[1])
    if pr < 1 or pc < 1:
        raise ValueError(f"patch dims must be positive, got {patch_dims}")

    r0 = cr - pr // 2
    c0 = cc - pc // 2
    top = max(0, -r0)
    left = max(0, -c0)
    bottom = max(0, r0 + pr - rows)
    right = max(0, c0 + pc - cols)

    patch = np.zeros((pr, pc), dtype=np.float32)
    sr0, sr1 = r0 + top, r0 + pr - bottom
    sc0, sc1 = c0 + left, c0 + pc - right
    patch[top : pr - bottom, left : pc - right] = s.data[sr0:sr1, sc0:sc1]

    rec = CropRecord(s.plane, (cr, cc), (pr, pc), (rows, cols), (top, bottom, left, right))
    return Slice2D(patch, s.pixel_spacing, s.plane, s.index), rec


def uncrop_patch(p: AnySlice, rec: CropRecord) -> AnySlice:
    """Invert a crop: place patch values back, zero everywhere else.

    Patch pixels that were boundary padding are discarded.
    """
    if p.dims != rec.patch_dims:
        raise GeometryError(
            f"patch dims {p.dims} do not match crop record patch dims {rec.patch_dims}"
        )
    pr, pc = rec.patch_dims
    top, bottom, left, right = rec.pad
    r0 = rec.center[0] - pr // 2
    c0 = rec.center[1] - pc // 2
    out = np.zeros(rec.source_dims, dtype=np.float32)
    out[r0 + top : r0 + pr - bottom, c0 + left : c0 + pc - right] = p.data[
        top : pr - bottom, left : pc - right
    ]
    cls = ProbMap2D if isinstance(p, ProbMap2D) else Slice2D
    return cls(out, p.pixel_spacing, p.plane, p.index)
