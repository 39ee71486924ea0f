"""3D connected-component labeling and the normal/abnormal kidney-count criterion.

Labeling is two-pass union-find: a raster scan assigns provisional labels
from already-visited neighbours and records equivalences; a resolution pass
renumbers roots in first-encounter scan order, so ids are contiguous from 1
and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import Mask3D, Spacing, voxel_volume_ml

Connectivity = int  # 6 or 26

# Scan-order-prior neighbour offsets: lexicographically negative (dz, dy, dx).
_PRIOR_6 = ((-1, 0, 0), (0, -1, 0), (0, 0, -1))
_PRIOR_26 = tuple(
    (dz, dy, dx)
    for dz in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dx in (-1, 0, 1)
    if (dz, dy, dx) < (0, 0, 0)
)


@dataclass(frozen=True)
class LabelMap3D:
    """Per-voxel component ids; 0 is background, ids 1..n_components contiguous."""

    data: np.ndarray
    spacing: Spacing
    n_components: int

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.int32)
        if arr.ndim != 3:
            raise ValueError(f"label map must be 3D, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ComponentStats:
    id: int
    voxel_count: int
    volume_ml: float
    centroid: tuple[float, float, float]


@dataclass(frozen=True)
class AbnormalityVerdict:
    """Result of the kidney-count criterion: Normal iff exactly two components pass the size threshold."""

    n_kidney: int
    verdict: str  # "Normal" | "Abnormal"
    kidney_ids: tuple[int, ...]

    @property
    def is_normal(self) -> bool:
        return self.verdict == "Normal"


def _check_connectivity(connectivity: int):
    if connectivity not in (6, 26):
        raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")


def label_components(mask: Mask3D, connectivity: Connectivity = 26) -> LabelMap3D:
    """Label maximal connected foreground regions of a binary mask.

    Two voxels share an id iff a foreground path connects them under the
    given connectivity (6 = faces, 26 = faces+edges+corners). Ids are
    assigned in first-encounter raster-scan order.
    """
    _check_connectivity(connectivity)
    d, h, w = mask.dims
    offsets = _PRIOR_6 if connectivity == 6 else _PRIOR_26

    # Pad by 1 so neighbour reads never need bounds checks.
    padded = np.zeros((d + 2, h + 2, w + 2), dtype=np.int64)
    flat = padded.ravel()
    sz, sy = (h + 2) * (w + 2), (w + 2)
    flat_offsets = [dz * sz + dy * sy + dx for dz, dy, dx in offsets]

    coords = np.argwhere(mask.data)  # row-major order == scan order
    flat_idx = (coords[:, 0] + 1) * sz + (coords[:, 1] + 1) * sy + (coords[:, 2] + 1)

    parent = [0]  # union-find over provisional labels; parent[i] <= i

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    # Pass 1: provisional labels + equivalences.
    for fi in flat_idx.tolist():
        neigh = [flat[fi + off] for off in flat_offsets]
        neigh = [n for n in neigh if n]
        if not neigh:
            lab = len(parent)
            parent.append(lab)
        else:
            roots = {find(n) for n in neigh}
            lab = min(roots)
            for r in roots:
                parent[r] = lab
        flat[fi] = lab

    # Pass 2: resolve to roots, renumber in first-encounter order.
    final = [0] * len(parent)
    n_components = 0
    out = np.zeros((d, h, w), dtype=np.int32)
    out_flat = out.ravel()
    raw_idx = coords[:, 0] * (h * w) + coords[:, 1] * w + coords[:, 2]
    for fi, ri in zip(flat_idx.tolist(), raw_idx.tolist()):
        root = find(flat[fi])
        lab = final[root]
        if lab == 0:
            n_components += 1
            lab = final[root] = n_components
        out_flat[ri] = lab

    return LabelMap3D(out, mask.spacing, n_components)


def component_stats(lm: LabelMap3D) -> list[ComponentStats]:
    """Exact voxel counts, physical volumes, and centroids per component.

    Sorted by voxel count descending, ties by ascending id.
    """
    if lm.n_components == 0:
        return []
    zz, yy, xx = np.nonzero(lm.data)
    ids = lm.data[zz, yy, xx]
    counts = np.bincount(ids, minlength=lm.n_components + 1)
    csz = np.bincount(ids, weights=zz, minlength=lm.n_components + 1)
    csy = np.bincount(ids, weights=yy, minlength=lm.n_components + 1)
    csx = np.bincount(ids, weights=xx, minlength=lm.n_components + 1)
    stats = [
        ComponentStats(
            id=i,
            voxel_count=int(counts[i]),
            volume_ml=voxel_volume_ml(lm.spacing, int(counts[i])),
            centroid=(
                float(csz[i] / counts[i]),
                float(csy[i] / counts[i]),
                float(csx[i] / counts[i]),
            ),
        )
        for i in range(1, lm.n_components + 1)
    ]
    stats.sort(key=lambda c: (-c.voxel_count, c.id))
    return stats


def classify(stats: list[ComponentStats], th_vn: int) -> AbnormalityVerdict:
    """Count components at least th_vn voxels big; exactly two means Normal."""
    if th_vn <= 0:
        raise ValueError(f"th_vn must be positive, got {th_vn}")
    kidney_ids = tuple(sorted(c.id for c in stats if c.voxel_count >= th_vn))
    n = len(kidney_ids)
    return AbnormalityVerdict(
        n_kidney=n,
        verdict="Normal" if n == 2 else "Abnormal",
        kidney_ids=kidney_ids,
    )


def remove_small(lm: LabelMap3D, th_vn: int) -> Mask3D:
    """Keep only components with at least th_vn voxels; returns a binary mask."""
    if th_vn <= 0:
        raise ValueError(f"th_vn must be positive, got {th_vn}")
    counts = np.bincount(lm.data.ravel(), minlength=lm.n_components + 1)
    keep = counts >= th_vn
    keep[0] = False
    return Mask3D(keep[lm.data].astype(np.uint8), lm.spacing)
