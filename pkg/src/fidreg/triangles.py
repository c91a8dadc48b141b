"""Triangle-shape registration of sparse marker sets.

Every 3-subset of detected device markers is stored as a scale-normalized
shape key in a k-d tree. To register, each CT-side triangle looks up its
nearest shape keys, verifies absolute scale, aligns the vertex-corresponded
triangles with the closed-form solver (trying the normal-flip variant), and
the candidate whose transform best explains *all* CT markers wins.

Shape keys: with edge lengths e1 >= e3 >= e2 (e1 longest, e2 shortest), the
key is (r2, r3) = (e2/e1, e3/e1), which is invariant to rigid motion and
uniform scale; e1 itself is kept so absolute size can be verified separately.
Canonical vertex order is (opposite e1, opposite e2, opposite e3).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import (
    ConfigError,
    format_float,
    format_kv,
    kv_float,
    kv_int,
    parse_kv_text,
    require_keys,
)
from .errors import DegenerateTriangleError, InsufficientMarkersError, NoMatchError
from .kdtree import KdTree
from .markers import MarkerSet
from .rigid import PointCorrespondences, RigidTransform, absolute_orientation

# A triangle with area below this fraction of e1^2 has no stable shape key.
DEGENERACY_RATIO = 1e-6

_REG_KEYS = ("k", "scale_tolerance_mm", "tie_epsilon_mm", "degeneracy_ratio")


@dataclass
class RegistrationConfig:
    """Candidate search and verification knobs for register()."""

    k: int = 4
    scale_tolerance_mm: float = 5.0
    tie_epsilon_mm: float = 0.5
    degeneracy_ratio: float = DEGENERACY_RATIO

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k!r}")
        if self.scale_tolerance_mm < 0 or self.tie_epsilon_mm < 0:
            raise ConfigError("tolerances must be non-negative")
        if not (0 < self.degeneracy_ratio < 1):
            raise ConfigError(f"degeneracy_ratio must be in (0, 1), got {self.degeneracy_ratio!r}")

    @classmethod
    def from_text(cls, text: str) -> "RegistrationConfig":
        kv = parse_kv_text(text)
        require_keys(kv, required=(), known=_REG_KEYS)
        out = cls()
        if "k" in kv:
            out.k = kv_int(kv, "k")
        if "scale_tolerance_mm" in kv:
            out.scale_tolerance_mm = kv_float(kv, "scale_tolerance_mm")
        if "tie_epsilon_mm" in kv:
            out.tie_epsilon_mm = kv_float(kv, "tie_epsilon_mm")
        if "degeneracy_ratio" in kv:
            out.degeneracy_ratio = kv_float(kv, "degeneracy_ratio")
        out.__post_init__()
        return out

    def to_text(self) -> str:
        return format_kv(
            {
                "k": str(self.k),
                "scale_tolerance_mm": format_float(self.scale_tolerance_mm),
                "tie_epsilon_mm": format_float(self.tie_epsilon_mm),
                "degeneracy_ratio": format_float(self.degeneracy_ratio),
            }
        )


@dataclass(frozen=True)
class TriangleKey:
    """Scale-invariant shape descriptor plus the absolute longest edge."""

    r2: float  # shortest / longest edge
    r3: float  # middle / longest edge
    e1: float  # longest edge, mm

    def __post_init__(self):
        if not (self.e1 > 0):
            raise ValueError(f"e1 must be positive, got {self.e1!r}")
        if not (0 < self.r2 <= self.r3 <= 1):
            raise ValueError(f"need 0 < r2 <= r3 <= 1, got r2={self.r2!r} r3={self.r3!r}")
        if not (self.r2 + self.r3 > 1):
            raise ValueError(f"triangle inequality violated: r2 + r3 = {self.r2 + self.r3!r}")


@dataclass(frozen=True)
class IndexedTriangle:
    """Shape key plus the marker indices it came from, in canonical order."""

    marker_indices: tuple[int, int, int]
    key: TriangleKey


def _edge_lengths(points: np.ndarray) -> np.ndarray:
    """Edge lengths where edge i is opposite vertex i."""
    return np.array(
        [
            float(np.linalg.norm(points[1] - points[2])),
            float(np.linalg.norm(points[2] - points[0])),
            float(np.linalg.norm(points[0] - points[1])),
        ]
    )


def _canonical_perm(edges: np.ndarray) -> tuple[int, int, int]:
    """Vertex order (opp-longest, opp-shortest, opp-middle); ties by index."""
    desc = sorted(range(3), key=lambda i: (-edges[i], i))
    return (desc[0], desc[2], desc[1])


def triangle_key(
    p1: np.ndarray,
    p2: np.ndarray,
    p3: np.ndarray,
    degeneracy_ratio: float = DEGENERACY_RATIO,
) -> TriangleKey:
    """Shape key of the triangle (p1, p2, p3).

    Raises DegenerateTriangleError when the triangle's area is below
    ``degeneracy_ratio * e1**2`` (collinear points included).
    """
    points = np.array([p1, p2, p3], dtype=np.float64)
    edges = _edge_lengths(points)
    e1 = float(edges.max())
    if e1 <= 0.0:
        raise DegenerateTriangleError("coincident points have no triangle shape")
    area = 0.5 * float(np.linalg.norm(np.cross(points[1] - points[0], points[2] - points[0])))
    if area < degeneracy_ratio * e1 * e1:
        raise DegenerateTriangleError(
            f"triangle too thin: area {area:.6g} < {degeneracy_ratio:g} * e1^2"
        )
    perm = _canonical_perm(edges)
    return TriangleKey(r2=float(edges[perm[1]] / e1), r3=float(edges[perm[2]] / e1), e1=e1)


class TriangleTable:
    """All triangles over the device markers seen so far, searchable by shape.

    Keys live in a k-d tree over (r2, r3); shape distance is Euclidean there.
    """

    def __init__(self, degeneracy_ratio: float = DEGENERACY_RATIO):
        self.markers: list[np.ndarray] = []
        self.degeneracy_ratio = float(degeneracy_ratio)
        self.degenerate_skipped = 0
        self._tree = KdTree(dim=2)

    @property
    def n_triangles(self) -> int:
        return len(self._tree)

    def marker_array(self) -> np.ndarray:
        if not self.markers:
            return np.zeros((0, 3), dtype=np.float64)
        return np.array(self.markers, dtype=np.float64)

    def triangle_points(self, triangle: IndexedTriangle) -> np.ndarray:
        return np.array([self.markers[i] for i in triangle.marker_indices], dtype=np.float64)

    def insert_marker(self, point: np.ndarray) -> int:
        """Add a detected marker; index all new triangles it completes.

        Returns the number of triangles inserted (degenerate triples are
        skipped and tallied in ``degenerate_skipped``).
        """
        pt = np.asarray(point, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(pt)):
            raise ValueError("marker must be finite")
        new_index = len(self.markers)
        self.markers.append(pt.copy())
        inserted = 0
        for a, b in itertools.combinations(range(new_index), 2):
            triple = (a, b, new_index)
            points = np.array([self.markers[i] for i in triple])
            try:
                key = triangle_key(*points, degeneracy_ratio=self.degeneracy_ratio)
            except DegenerateTriangleError:
                self.degenerate_skipped += 1
                continue
            perm = _canonical_perm(_edge_lengths(points))
            canonical = (triple[perm[0]], triple[perm[1]], triple[perm[2]])
            self._tree.insert(
                np.array([key.r2, key.r3]), IndexedTriangle(marker_indices=canonical, key=key)
            )
            inserted += 1
        return inserted

    def query_nearest(self, key: TriangleKey, k: int) -> list[tuple[IndexedTriangle, float]]:
        """k shape-nearest stored triangles as (triangle, shape distance)."""
        return self._tree.nearest(np.array([key.r2, key.r3]), k)  # type: ignore[return-value]


def _tie_partition(edges_by_position: np.ndarray, epsilon: float) -> list[list[int]]:
    """Group canonical positions whose edge lengths tie within epsilon.

    Positions are (0, 1, 2) = (opp-longest, opp-shortest, opp-middle); the
    chaining runs over lengths sorted descending (e1, e3, e2)."""
    order = [0, 2, 1]  # positions sorted by their edge length, descending
    groups: list[list[int]] = [[order[0]]]
    for prev, cur in zip(order, order[1:]):
        if abs(edges_by_position[prev] - edges_by_position[cur]) <= epsilon:
            groups[-1].append(cur)
        else:
            groups.append([cur])
    return groups


def _merge_partitions(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    parent = list(range(3))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for group in itertools.chain(a, b):
        for other in group[1:]:
            parent[find(other)] = find(group[0])
    merged: dict[int, list[int]] = {}
    for pos in range(3):
        merged.setdefault(find(pos), []).append(pos)
    return [merged[root] for root in sorted(merged, key=lambda r: min(merged[r]))]


def _tie_permutations(
    ct_points: np.ndarray, dev_points: np.ndarray, tie_epsilon: float | None
) -> list[tuple[int, int, int]]:
    """Device-side position permutations consistent with edge-length ties.

    Both triangles are already in canonical order. With no ties this is just
    the identity; an equilateral pair yields all 6 permutations.
    """
    ct_edges = _edge_lengths(ct_points)
    dev_edges = _edge_lengths(dev_points)
    eps_ct = 1e-6 * ct_edges.max() if tie_epsilon is None else tie_epsilon
    eps_dev = 1e-6 * dev_edges.max() if tie_epsilon is None else tie_epsilon
    groups = _merge_partitions(
        _tie_partition(ct_edges, eps_ct), _tie_partition(dev_edges, eps_dev)
    )
    perms: list[tuple[int, int, int]] = []
    for group_perms in itertools.product(
        *(itertools.permutations(group) for group in groups)
    ):
        mapping = {}
        for group, permuted in zip(groups, group_perms):
            mapping.update(zip(group, permuted))
        perms.append((mapping[0], mapping[1], mapping[2]))
    return perms


def canonical_correspondence(
    ct_triangle: np.ndarray,
    dev_triangle: np.ndarray,
    tie_epsilon: float | None = None,
) -> PointCorrespondences:
    """Pair triangle vertices by edge role (opp-longest <-> opp-longest, ...).

    When edge lengths tie within ``tie_epsilon`` (default 1e-6 * e1, i.e.
    exact-arithmetic ties only), every permutation consistent with the tie is
    tried and the one with the lowest alignment rmsd wins.
    """
    ct = np.asarray(ct_triangle, dtype=np.float64).reshape(3, 3)
    dev = np.asarray(dev_triangle, dtype=np.float64).reshape(3, 3)
    ct_canonical = ct[list(_canonical_perm(_edge_lengths(ct)))]
    dev_canonical = dev[list(_canonical_perm(_edge_lengths(dev)))]

    best: tuple[float, tuple[int, int, int]] | None = None
    for perm in _tie_permutations(ct_canonical, dev_canonical, tie_epsilon):
        candidate = dev_canonical[list(perm)]
        try:
            _, rmsd = absolute_orientation(PointCorrespondences(ct_canonical, candidate))
        except Exception:
            continue
        if best is None or rmsd < best[0]:
            best = (rmsd, perm)
    if best is None:
        raise DegenerateTriangleError("no alignable vertex pairing (degenerate triangle)")
    return PointCorrespondences(ct_canonical, dev_canonical[list(best[1])])


def align_with_flip(corr: PointCorrespondences) -> tuple[RigidTransform, float, bool]:
    """Align a 3-point correspondence, correcting a mirrored pairing.

    Solves the correspondence as given and with the two vertices adjacent to
    the source triangle's longest edge exchanged (the pairing a reflection
    through the triangle's own plane induces), and returns whichever variant
    has the lower rmsd: (transform, rmsd, flipped). ``flipped`` is True when
    the exchanged variant won; the returned rotation is proper either way.
    """
    if len(corr) != 3:
        raise ValueError(f"align_with_flip needs exactly 3 correspondences, got {len(corr)}")
    # Validate both triangles carry a shape (raises DegenerateTriangleError).
    triangle_key(*corr.source)
    triangle_key(*corr.target)

    plain_transform, plain_rmsd = absolute_orientation(corr)

    # Vertices adjacent to the longest source edge = the two not opposite it.
    opposite = _canonical_perm(_edge_lengths(corr.source))[0]
    swap = [i for i in range(3) if i != opposite]
    exchanged = corr.target.copy()
    exchanged[[swap[0], swap[1]]] = exchanged[[swap[1], swap[0]]]
    flip_transform, flip_rmsd = absolute_orientation(
        PointCorrespondences(corr.source, exchanged)
    )

    if flip_rmsd < plain_rmsd:
        return flip_transform, flip_rmsd, True
    return plain_transform, plain_rmsd, False


@dataclass(eq=False)
class RegistrationResult:
    """Winning alignment of register()."""

    transform: RigidTransform
    matched_triangle: IndexedTriangle
    shape_distance: float
    rmsd: float  # RMS nearest-device-marker distance over all CT markers, mm
    flipped: bool

    def to_json_dict(self) -> dict:
        from .rigid import transform_to_json_dict

        return {
            "transform": transform_to_json_dict(self.transform),
            "matched_marker_indices": list(self.matched_triangle.marker_indices),
            "shape_distance": float(self.shape_distance),
            "rmsd": float(self.rmsd),
            "flipped": bool(self.flipped),
        }


def _all_marker_rmsd(transform: RigidTransform, ct_points: np.ndarray, dev_points: np.ndarray) -> float:
    mapped = transform.apply(ct_points)
    deltas = mapped[:, None, :] - dev_points[None, :, :]
    nearest_sq = np.min(np.sum(deltas * deltas, axis=2), axis=1)
    return float(np.sqrt(np.mean(nearest_sq)))


def register(
    ct_markers: MarkerSet,
    table: TriangleTable,
    config: RegistrationConfig | None = None,
) -> RegistrationResult:
    """Register CT markers against the device triangle table.

    Every CT-side triangle queries its k shape-nearest device triangles;
    candidates failing the absolute-scale check |e1_ct - e1_dev| <=
    scale_tolerance_mm are rejected. Each survivor is vertex-corresponded and
    aligned (with flip correction), and candidates are ranked by the RMS
    nearest-device-marker distance over *all* CT markers, tie-broken by
    (rmsd, shape_distance, marker indices).

    Raises InsufficientMarkersError (< 3 CT markers), DegenerateTriangleError
    (no CT triple carries a shape), or NoMatchError (no candidate survives).
    """
    if config is None:
        config = RegistrationConfig()
    ct_points = ct_markers.points
    if len(ct_points) < 3:
        raise InsufficientMarkersError(found=len(ct_points))
    if table.n_triangles == 0:
        raise NoMatchError("no device triangles stored (need at least 3 device markers)")

    dev_points = table.marker_array()
    best: tuple[float, float, tuple[int, int, int], RegistrationResult] | None = None
    best_rejected: tuple[float, float] | None = None  # (shape_distance, scale gap)
    degenerate_ct = 0
    n_triples = 0

    for triple in itertools.combinations(range(len(ct_points)), 3):
        n_triples += 1
        ct_triangle = ct_points[list(triple)]
        try:
            ct_key = triangle_key(*ct_triangle, degeneracy_ratio=config.degeneracy_ratio)
        except DegenerateTriangleError:
            degenerate_ct += 1
            continue
        for candidate, shape_distance in table.query_nearest(ct_key, config.k):
            scale_gap = abs(ct_key.e1 - candidate.key.e1)
            if scale_gap > config.scale_tolerance_mm:
                if best_rejected is None or shape_distance < best_rejected[0]:
                    best_rejected = (shape_distance, scale_gap)
                continue
            corr = canonical_correspondence(
                ct_triangle, table.triangle_points(candidate), config.tie_epsilon_mm
            )
            transform, _, flipped = align_with_flip(corr)
            rmsd = _all_marker_rmsd(transform, ct_points, dev_points)
            rank = (rmsd, shape_distance, candidate.marker_indices)
            if best is None or rank < (best[0], best[1], best[2]):
                best = (
                    rmsd,
                    shape_distance,
                    candidate.marker_indices,
                    RegistrationResult(
                        transform=transform,
                        matched_triangle=candidate,
                        shape_distance=shape_distance,
                        rmsd=rmsd,
                        flipped=flipped,
                    ),
                )

    if degenerate_ct == n_triples:
        raise DegenerateTriangleError("every CT marker triple is degenerate")
    if best is None:
        detail = ""
        if best_rejected is not None:
            detail = (
                f"; best rejected candidate: shape distance {best_rejected[0]:.6g}, "
                f"longest-edge gap {best_rejected[1]:.6g} mm exceeds tolerance "
                f"{config.scale_tolerance_mm:g} mm"
            )
        raise NoMatchError("no device triangle passed scale verification" + detail)
    return best[3]
