"""Radio-opaque marker segmentation.

Pipeline: threshold the volume at a Hounsfield floor, label 3D connected
components, keep components whose physical volume is near the expected marker
volume, and return component centroids as a ``ct``-frame MarkerSet.

Connected-component labels are assigned 1..K in first-encounter scan order,
where the scan runs in x-fastest linear order (``i + nx * (j + ny * k)``), so
identical inputs always produce the identical labeling and marker ordering.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import (
    ConfigError,
    format_float,
    format_kv,
    kv_bool,
    kv_float,
    kv_int,
    parse_kv_text,
    require_keys,
)
from .errors import InsufficientMarkersError
from .markers import MarkerSet
from .volume import Volume

# Neighbor offsets per connectivity, ordered (dk, dj, di) ascending so BFS
# discovery order is deterministic.
def _offsets(connectivity: int) -> tuple[tuple[int, int, int], ...]:
    out = []
    for dk in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for di in (-1, 0, 1):
                if di == dj == dk == 0:
                    continue
                manhattan = abs(di) + abs(dj) + abs(dk)
                if connectivity == 6 and manhattan > 1:
                    continue
                if connectivity == 18 and manhattan > 2:
                    continue
                out.append((di, dj, dk))
    return tuple(out)


CONNECTIVITY_OFFSETS = {c: _offsets(c) for c in (6, 18, 26)}

_SEG_KEYS = ("hu_min", "connectivity", "expected_mm3", "tolerance_fraction", "intensity_weighted")


@dataclass
class SegmentationConfig:
    """Tuning for segment_markers. ``expected_mm3`` has no sensible default
    and must always be supplied (it is the marker's physical volume)."""

    expected_mm3: float
    hu_min: float = 300.0
    connectivity: int = 26
    tolerance_fraction: float = 0.5
    intensity_weighted: bool = False

    def __post_init__(self):
        if not (self.expected_mm3 > 0):
            raise ConfigError(f"expected_mm3 must be positive, got {self.expected_mm3!r}")
        if self.connectivity not in (6, 18, 26):
            raise ConfigError(f"connectivity must be 6, 18 or 26, got {self.connectivity!r}")
        if not (0.0 < self.tolerance_fraction < 1.0):
            raise ConfigError(
                f"tolerance_fraction must be in (0, 1), got {self.tolerance_fraction!r}"
            )

    @classmethod
    def from_text(cls, text: str) -> "SegmentationConfig":
        kv = parse_kv_text(text)
        require_keys(kv, required=("expected_mm3",), known=_SEG_KEYS)
        out = cls(expected_mm3=kv_float(kv, "expected_mm3"))
        if "hu_min" in kv:
            out.hu_min = kv_float(kv, "hu_min")
        if "connectivity" in kv:
            out.connectivity = kv_int(kv, "connectivity")
        if "tolerance_fraction" in kv:
            out.tolerance_fraction = kv_float(kv, "tolerance_fraction")
        if "intensity_weighted" in kv:
            out.intensity_weighted = kv_bool(kv, "intensity_weighted")
        out.__post_init__()
        return out

    def to_text(self) -> str:
        return format_kv(
            {
                "hu_min": format_float(self.hu_min),
                "connectivity": str(self.connectivity),
                "expected_mm3": format_float(self.expected_mm3),
                "tolerance_fraction": format_float(self.tolerance_fraction),
                "intensity_weighted": "true" if self.intensity_weighted else "false",
            }
        )


@dataclass(eq=False)
class BinaryMask:
    """Boolean voxel grid sharing the owning volume's index convention."""

    dims: tuple[int, int, int]
    bits: np.ndarray  # (nx, ny, nz) bool

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != self.dims:
            raise ValueError(f"bits shape {bits.shape} != dims {self.dims}")
        self.bits = bits

    def popcount(self) -> int:
        return int(self.bits.sum())


@dataclass(eq=False)
class Component:
    """One connected component of set voxels."""

    label: int
    voxel_indices: np.ndarray  # (m, 3) int64 (i, j, k), discovery order

    @property
    def voxel_count(self) -> int:
        return len(self.voxel_indices)

    def volume_mm3(self, spacing) -> float:
        sx, sy, sz = spacing
        return float(self.voxel_count) * float(sx) * float(sy) * float(sz)


def threshold_volume(volume: Volume, hu_min: float) -> BinaryMask:
    """Voxels with HU >= hu_min."""
    return BinaryMask(dims=volume.dims, bits=volume.voxels >= hu_min)


def connected_components(mask: BinaryMask, connectivity: int = 26) -> list[Component]:
    """Label connected set-voxel regions.

    Components are maximal and disjoint; labels follow first-encounter scan
    order and voxels within a component follow BFS discovery order.
    """
    if connectivity not in CONNECTIVITY_OFFSETS:
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity!r}")
    nx, ny, nz = mask.dims
    # x-fastest linearization: C-order ravel of the (nz, ny, nx) transpose.
    flat = mask.bits.transpose(2, 1, 0).ravel()
    linear = np.flatnonzero(flat)
    if len(linear) == 0:
        return []
    ii = linear % nx
    jj = (linear // nx) % ny
    kk = linear // (nx * ny)
    slot_of = {int(lin): s for s, lin in enumerate(linear)}
    visited = np.zeros(len(linear), dtype=bool)
    offsets = CONNECTIVITY_OFFSETS[connectivity]

    components: list[Component] = []
    for start in range(len(linear)):
        if visited[start]:
            continue
        visited[start] = True
        queue = deque([start])
        member_slots = []
        while queue:
            slot = queue.popleft()
            member_slots.append(slot)
            ci, cj, ck = int(ii[slot]), int(jj[slot]), int(kk[slot])
            for di, dj, dk in offsets:
                ni, nj, nk = ci + di, cj + dj, ck + dk
                if not (0 <= ni < nx and 0 <= nj < ny and 0 <= nk < nz):
                    continue
                neighbor = slot_of.get(ni + nx * (nj + ny * nk))
                if neighbor is not None and not visited[neighbor]:
                    visited[neighbor] = True
                    queue.append(neighbor)
        idx = np.column_stack((ii[member_slots], jj[member_slots], kk[member_slots]))
        components.append(Component(label=len(components) + 1, voxel_indices=idx.astype(np.int64)))
    return components


def filter_by_size(
    components: list[Component],
    spacing,
    expected_mm3: float,
    tolerance_fraction: float = 0.5,
) -> list[Component]:
    """Keep components whose physical volume lies in the closed interval
    [expected*(1-tol), expected*(1+tol)], preserving order."""
    lo = expected_mm3 * (1.0 - tolerance_fraction)
    hi = expected_mm3 * (1.0 + tolerance_fraction)
    return [c for c in components if lo <= c.volume_mm3(spacing) <= hi]


def component_centroid(
    component: Component, volume: Volume, intensity_weighted: bool = False
) -> np.ndarray:
    """Centroid (mm) of a component's voxel centers.

    Unweighted geometric mean by default; with intensity weighting, voxel HU
    values are the weights (all member voxels must then have positive HU).
    """
    world = volume.world_coords(component.voxel_indices)
    if not intensity_weighted:
        return world.mean(axis=0)
    idx = component.voxel_indices
    weights = volume.voxels[idx[:, 0], idx[:, 1], idx[:, 2]].astype(np.float64)
    if np.any(weights <= 0):
        raise ValueError("intensity-weighted centroid needs positive HU on all member voxels")
    return (world * weights[:, None]).sum(axis=0) / weights.sum()


def segment_components(volume: Volume, config: SegmentationConfig) -> list[Component]:
    """Threshold + label + size-filter; the shared front half of segment_markers."""
    mask = threshold_volume(volume, config.hu_min)
    components = connected_components(mask, config.connectivity)
    return filter_by_size(
        components, volume.spacing, config.expected_mm3, config.tolerance_fraction
    )


def markers_from_components(
    components: list[Component], volume: Volume, config: SegmentationConfig
) -> MarkerSet:
    if len(components) < 3:
        raise InsufficientMarkersError(found=len(components))
    centroids = [
        component_centroid(c, volume, intensity_weighted=config.intensity_weighted)
        for c in components
    ]
    return MarkerSet(frame="ct", points=np.array(centroids, dtype=np.float64))


def segment_markers(volume: Volume, config: SegmentationConfig) -> MarkerSet:
    """Full pipeline: threshold -> components -> size filter -> centroids.

    Raises InsufficientMarkersError when fewer than 3 components survive.
    """
    return markers_from_components(segment_components(volume, config), volume, config)
