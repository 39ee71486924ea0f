"""Synthetic phantoms and the evaluation harness.

Phantoms stand in for real CT cases at desk scale: one or two ellipsoidal
"kidneys" of known extent on a flat background, optionally under Gaussian
noise. The contrast defaults make a plain intensity threshold an exact
oracle in noiseless mode while still leaving the noisy mode learnable.

For reference, the production-scale run of this cascade on real CT data
(42 held-out cases, GPU training) reports fine 94.53 +- 8.33 vs coarse
84.47 +- 14.70 percent DSC. The desk-scale harness mirrors the direction
of that comparison (fine beats coarse), not the absolute numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .pipeline import CaseResult, PipelineConfig, StageModels, run_case
from .volume import Mask3D, Spacing, Volume3D

AxisRange = tuple[float, float]

# Lateral kidney centres as fractions of the width axis.
_SIDE_FRACTIONS = (0.28, 0.72)


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for one synthetic case; fully deterministic given ``seed``."""

    dims: tuple[int, int, int]
    spacing: Spacing
    n_kidneys: int = 2
    semi_axes_mm: tuple[AxisRange, AxisRange, AxisRange] = ((27.0, 30.0), (15.5, 17.0), (11.7, 13.0))
    kidney_intensity: float = 1.0
    background_intensity: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive ints, got {self.dims}")
        if self.n_kidneys not in (1, 2):
            raise ValueError(f"n_kidneys must be 1 or 2, got {self.n_kidneys}")
        for lo, hi in self.semi_axes_mm:
            if not (0 < lo <= hi):
                raise ValueError(f"invalid semi-axis range ({lo}, {hi})")
        if self.kidney_intensity == self.background_intensity:
            raise ValueError("kidney and background intensities must be distinct")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def _ellipsoid_mask(dims, center_vox, radii_vox) -> np.ndarray:
    zz = (np.arange(dims[0], dtype=np.float64)[:, None, None] - center_vox[0]) / radii_vox[0]
    yy = (np.arange(dims[1], dtype=np.float64)[None, :, None] - center_vox[1]) / radii_vox[1]
    xx = (np.arange(dims[2], dtype=np.float64)[None, None, :] - center_vox[2]) / radii_vox[2]
    return (zz * zz + yy * yy + xx * xx) <= 1.0


def _dilate26(m: np.ndarray) -> np.ndarray:
    """One step of 26-neighbourhood dilation."""
    out = m.copy()
    padded = np.pad(m, 1)
    d, h, w = m.shape
    for dz in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                out |= padded[1 + dz : 1 + dz + d, 1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return out


def generate_phantom(spec: PhantomSpec) -> tuple[Volume3D, Mask3D]:
    """Build (volume, ground-truth mask); the mask is the exact ellipsoid interior."""
    rng = np.random.default_rng(spec.seed)
    d, h, w = spec.dims
    sp = spec.spacing.as_tuple()

    if spec.n_kidneys == 2:
        side_fracs = _SIDE_FRACTIONS
    else:
        side_fracs = (_SIDE_FRACTIONS[int(rng.integers(0, 2))],)

    mask = np.zeros(spec.dims, dtype=np.uint8)
    kidneys = []
    for frac in side_fracs:
        radii_vox = tuple(
            rng.uniform(lo, hi) / sp[axis] for axis, (lo, hi) in enumerate(spec.semi_axes_mm)
        )
        jitter = rng.uniform(-1.0, 1.0, size=3)
        center = (
            (d - 1) / 2.0 + jitter[0],
            (h - 1) / 2.0 + jitter[1],
            frac * (w - 1) + jitter[2],
        )
        for axis in range(3):
            if center[axis] - radii_vox[axis] < 0 or center[axis] + radii_vox[axis] > spec.dims[axis] - 1:
                raise ValueError(
                    f"ellipsoid does not fit inside the volume along axis {axis} "
                    f"(center {center[axis]:.1f}, semi-axis {radii_vox[axis]:.1f} voxels)"
                )
        kidneys.append(_ellipsoid_mask(spec.dims, center, radii_vox))

    # Touching kidneys would fuse into one connected component, so reject
    # adjacency (26-neighbourhood), not just intersection.
    if len(kidneys) == 2 and (_dilate26(kidneys[0]) & kidneys[1]).any():
        raise ValueError("ellipsoids overlap or touch; shrink the semi-axis ranges or widen the volume")
    for k in kidneys:
        mask |= k.astype(np.uint8)

    contrast = spec.kidney_intensity - spec.background_intensity
    data = np.full(spec.dims, spec.background_intensity, dtype=np.float32)
    data += contrast * mask
    if spec.noise_sigma > 0:
        data += spec.noise_sigma * rng.standard_normal(spec.dims).astype(np.float32)
    return Volume3D(data, spec.spacing), Mask3D(mask, spec.spacing)


def dsc(a: Mask3D, b: Mask3D) -> float:
    """Volumetric Dice overlap 2|A&B| / (|A|+|B|); 1.0 when both masks are empty."""
    if a.dims != b.dims or a.spacing != b.spacing:
        raise GeometryError(f"mask geometries differ: {a.dims}/{a.spacing} vs {b.dims}/{b.spacing}")
    na = int(a.data.sum(dtype=np.int64))
    nb = int(b.data.sum(dtype=np.int64))
    if na + nb == 0:
        return 1.0
    inter = int((a.data & b.data).sum(dtype=np.int64))
    return 2.0 * inter / (na + nb)


def summarize(scores: list[float]) -> dict[str, float]:
    """Mean, sample standard deviation (n-1; zero when n=1), max, min."""
    if not scores:
        raise ValueError("cannot summarize an empty score list")
    arr = np.asarray(scores, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {
        "mean": float(arr.mean()),
        "std": std,
        "max": float(arr.max()),
        "min": float(arr.min()),
    }


@dataclass(frozen=True)
class CaseScore:
    case_id: str
    coarse_dsc: float
    fine_dsc: float
    verdict: str


@dataclass(frozen=True)
class EvalReport:
    scores: list[CaseScore]
    coarse_summary: dict[str, float]
    fine_summary: dict[str, float]
    failures: list[tuple[str, str]]
    results: dict[str, CaseResult]


def evaluate_split(
    cases: list[tuple[str, Volume3D, Mask3D]],
    models: StageModels,
    cfg: PipelineConfig,
) -> EvalReport:
    """Run the full pipeline on labelled cases and score both stages.

    Per-case failures are recorded and excluded from the summaries instead
    of aborting the batch. Output rows are ordered by case id.
    """
    scores: list[CaseScore] = []
    failures: list[tuple[str, str]] = []
    results: dict[str, CaseResult] = {}
    for case_id, vol, gt in sorted(cases, key=lambda c: c[0]):
        try:
            if gt.dims != vol.dims or gt.spacing != vol.spacing:
                raise GeometryError(
                    f"ground truth geometry {gt.dims} does not match volume {vol.dims}"
                )
            res = run_case(vol, models, cfg)
            scores.append(
                CaseScore(
                    case_id=case_id,
                    coarse_dsc=dsc(res.coarse_mask, gt),
                    fine_dsc=dsc(res.fine_mask, gt),
                    verdict=res.verdict.verdict,
                )
            )
            results[case_id] = res
        except Exception as exc:  # per-case isolation is the contract here
            warnings.warn(f"case {case_id} failed: {exc}")
            failures.append((case_id, str(exc)))
    if scores:
        coarse_summary = summarize([s.coarse_dsc for s in scores])
        fine_summary = summarize([s.fine_dsc for s in scores])
    else:
        coarse_summary = fine_summary = {}
    return EvalReport(scores, coarse_summary, fine_summary, failures, results)
