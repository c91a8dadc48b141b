"""Rigid transforms and closed-form point-set alignment.

``absolute_orientation`` solves the least-squares rigid fit with Horn's
quaternion method: build the 3x3 cross-covariance of the centered point sets,
lift it to the symmetric 4x4 profile matrix, and take the eigenvector of the
largest eigenvalue as the rotation quaternion. Because quaternions
parameterize SO(3) only, the result is always a proper rotation
(det = +1) — reflections cannot leak in, even when the unconstrained optimum
would be one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .rng import rotation_from_quaternion

# Entrywise tolerance for |R^T R - I| and |det R - 1| on construction.
ORTHONORMALITY_TOL = 1e-9
# Composition re-orthonormalizes when drift exceeds this.
COMPOSE_DRIFT_TOL = 1e-12
# Cross-line extent below this fraction of the largest extent means collinear.
COLLINEARITY_RATIO = 1e-9


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion: ``p -> rotation @ p + translation`` (mm)."""

    rotation: np.ndarray  # (3, 3) float64, read-only
    translation: np.ndarray  # (3,) float64, read-only

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if trans.shape != (3,):
            raise ValueError(f"translation must be length 3, got {trans.shape}")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(trans))):
            raise ValueError("transform entries must be finite")
        drift = np.abs(rot.T @ rot - np.eye(3)).max()
        if drift > ORTHONORMALITY_TOL:
            raise ValueError(f"rotation is not orthonormal (drift {drift:.3e})")
        det = float(np.linalg.det(rot))
        if abs(det - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError(f"rotation must be proper (det {det!r})")
        for arr, name in ((rot, "rotation"), (trans, "translation")):
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack (..., 3)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def __eq__(self, other) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )


def compose(after: RigidTransform, before: RigidTransform) -> RigidTransform:
    """Transform applying ``before`` first, then ``after``.

    The rotation product is re-orthonormalized (nearest-rotation SVD
    projection) when accumulated float drift exceeds COMPOSE_DRIFT_TOL.
    """
    rot = after.rotation @ before.rotation
    if np.abs(rot.T @ rot - np.eye(3)).max() > COMPOSE_DRIFT_TOL:
        u, _, vt = np.linalg.svd(rot)
        if np.linalg.det(u @ vt) < 0:
            u[:, -1] = -u[:, -1]
        rot = u @ vt
    return RigidTransform(rotation=rot, translation=after.rotation @ before.translation + after.translation)


def inverse(transform: RigidTransform) -> RigidTransform:
    rot_inv = transform.rotation.T
    return RigidTransform(rotation=rot_inv, translation=-(rot_inv @ transform.translation))


def rotation_angle(rotation: np.ndarray) -> float:
    """Rotation angle (rad) of a proper rotation matrix."""
    cos = (float(np.trace(rotation)) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def axis_angle_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix about ``axis`` by ``angle`` rad (Rodrigues)."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


@dataclass(eq=False)
class PointCorrespondences:
    """Paired source/target points (row i of one corresponds to row i of the other)."""

    source: np.ndarray  # (n, 3) float64
    target: np.ndarray  # (n, 3) float64

    def __post_init__(self):
        src = np.asarray(self.source, dtype=np.float64)
        dst = np.asarray(self.target, dtype=np.float64)
        if src.ndim != 2 or src.shape[1] != 3 or dst.shape != src.shape:
            raise ValueError(f"need matching (n, 3) arrays, got {src.shape} and {dst.shape}")
        if len(src) < 3:
            raise ValueError(f"need at least 3 correspondences, got {len(src)}")
        if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
            raise ValueError("correspondences must be finite")
        self.source = src
        self.target = dst

    def __len__(self) -> int:
        return len(self.source)


def _check_not_collinear(points: np.ndarray) -> None:
    centered = points - points.mean(axis=0)
    extents = np.linalg.svd(centered, compute_uv=False)
    if extents[0] == 0.0 or extents[1] < COLLINEARITY_RATIO * extents[0]:
        raise DegenerateGeometryError(
            "source points are collinear; rotation is not determined"
        )


def absolute_orientation(corr: PointCorrespondences) -> tuple[RigidTransform, float]:
    """Least-squares rigid fit of corr.source onto corr.target.

    Returns the optimal proper transform and the rmsd of the fitted residuals.
    Raises DegenerateGeometryError when the source points are collinear.
    """
    src = corr.source
    dst = corr.target
    _check_not_collinear(src)

    src_centroid = src.mean(axis=0)
    dst_centroid = dst.mean(axis=0)
    m = (src - src_centroid).T @ (dst - dst_centroid)

    sxx, sxy, sxz = m[0]
    syx, syy, syz = m[1]
    szx, szy, szz = m[2]
    profile = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, syy - sxx - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, szz - sxx - syy],
        ],
        dtype=np.float64,
    )
    eigvals, eigvecs = np.linalg.eigh(profile)
    quaternion = eigvecs[:, np.argmax(eigvals)]
    rotation = rotation_from_quaternion(quaternion / np.linalg.norm(quaternion))

    translation = dst_centroid - rotation @ src_centroid
    transform = RigidTransform(rotation=rotation, translation=translation)
    residuals = transform.apply(src) - dst
    rmsd = float(np.sqrt(np.mean(np.sum(residuals * residuals, axis=1))))
    return transform, rmsd


def transform_to_json_dict(transform: RigidTransform, rmsd: float | None = None) -> dict:
    """JSON-ready dict: 9 row-major rotation entries + 3 translation entries."""
    out = {
        "rotation": [float(v) for v in transform.rotation.reshape(-1)],
        "translation": [float(v) for v in transform.translation],
    }
    if rmsd is not None:
        out["rmsd"] = float(rmsd)
    return out


def transform_from_json_dict(data: dict) -> RigidTransform:
    rotation = np.array(data["rotation"], dtype=np.float64).reshape(3, 3)
    translation = np.array(data["translation"], dtype=np.float64)
    return RigidTransform(rotation=rotation, translation=translation)
