"""Point-to-point ICP baseline.

Classic iteration: match every source marker to its nearest target marker
under the current transform, re-solve the closed-form rigid fit from scratch
on those pairs, repeat. Each iteration's rmsd (RMS nearest-neighbour distance
under that iteration's transform) is non-increasing, because the solver
minimizes over the fixed matches and re-matching can only shorten per-point
distances. No initial-guess machinery beyond a caller-supplied transform:
like any local method, a large initial misalignment lands in local minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, format_float, format_kv, kv_float, kv_int, parse_kv_text, require_keys
from .errors import InsufficientMarkersError
from .kdtree import KdTree
from .markers import MarkerSet
from .rigid import (
    PointCorrespondences,
    RigidTransform,
    _check_not_collinear,
    absolute_orientation,
    transform_to_json_dict,
)

# Below this many target points a brute-force scan beats tree overhead; the
# results are identical either way (exact search, lowest-index tie break).
BRUTE_FORCE_LIMIT = 32

_ICP_KEYS = ("max_iterations", "rmsd_delta_tolerance")


@dataclass
class IcpConfig:
    max_iterations: int = 100
    rmsd_delta_tolerance: float = 1e-6  # mm
    initial_transform: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations!r}")
        if self.rmsd_delta_tolerance <= 0:
            raise ConfigError(
                f"rmsd_delta_tolerance must be positive, got {self.rmsd_delta_tolerance!r}"
            )

    @classmethod
    def from_text(cls, text: str) -> "IcpConfig":
        kv = parse_kv_text(text)
        require_keys(kv, required=(), known=_ICP_KEYS)
        out = cls()
        if "max_iterations" in kv:
            out.max_iterations = kv_int(kv, "max_iterations")
        if "rmsd_delta_tolerance" in kv:
            out.rmsd_delta_tolerance = kv_float(kv, "rmsd_delta_tolerance")
        out.__post_init__()
        return out

    def to_text(self) -> str:
        return format_kv(
            {
                "max_iterations": str(self.max_iterations),
                "rmsd_delta_tolerance": format_float(self.rmsd_delta_tolerance),
            }
        )


@dataclass(eq=False)
class IcpResult:
    transform: RigidTransform
    rmsd: float
    iterations_used: int
    converged: bool
    rmsd_history: list[float]  # one entry per iteration, non-increasing

    def to_json_dict(self) -> dict:
        return {
            "transform": transform_to_json_dict(self.transform),
            "rmsd": float(self.rmsd),
            "iterations_used": int(self.iterations_used),
            "converged": bool(self.converged),
        }


def _nearest_indices(query: np.ndarray, target: np.ndarray, tree: KdTree | None) -> tuple[np.ndarray, np.ndarray]:
    if tree is None:
        deltas = query[:, None, :] - target[None, :, :]
        dist_sq = np.sum(deltas * deltas, axis=2)
        idx = np.argmin(dist_sq, axis=1)  # first minimum: lowest index wins ties
        return idx, np.sqrt(dist_sq[np.arange(len(query)), idx])
    idx = np.empty(len(query), dtype=np.int64)
    dist = np.empty(len(query), dtype=np.float64)
    for row, point in enumerate(query):
        ((payload, d),) = tree.nearest(point, 1)
        idx[row] = payload
        dist[row] = d
    return idx, dist


def icp_register(
    source: MarkerSet, target: MarkerSet, config: IcpConfig | None = None
) -> IcpResult:
    """Iteratively align source markers onto target markers.

    Stops when the per-iteration rmsd changes by less than
    ``rmsd_delta_tolerance`` (converged) or at the iteration cap (not
    converged). Raises InsufficientMarkersError when either side has fewer
    than 3 points and DegenerateGeometryError for collinear sources.
    """
    if config is None:
        config = IcpConfig()
    src = source.points
    tgt = target.points
    if len(src) < 3:
        raise InsufficientMarkersError(len(src))
    if len(tgt) < 3:
        raise InsufficientMarkersError(len(tgt))
    _check_not_collinear(src)

    tree = None
    if len(tgt) >= BRUTE_FORCE_LIMIT:
        tree = KdTree(dim=3)
        for index, point in enumerate(tgt):
            tree.insert(point, index)

    transform = config.initial_transform
    history: list[float] = []
    converged = False
    for iteration in range(config.max_iterations):
        mapped = transform.apply(src)
        match_idx, match_dist = _nearest_indices(mapped, tgt, tree)
        rmsd = float(np.sqrt(np.mean(match_dist * match_dist)))
        history.append(rmsd)
        if len(history) >= 2 and abs(history[-2] - rmsd) < config.rmsd_delta_tolerance:
            converged = True
            break
        if iteration == config.max_iterations - 1:
            break  # cap reached; keep the transform the last rmsd describes
        transform, _ = absolute_orientation(PointCorrespondences(src, tgt[match_idx]))

    return IcpResult(
        transform=transform,
        rmsd=history[-1],
        iterations_used=len(history),
        converged=converged,
        rmsd_history=history,
    )
