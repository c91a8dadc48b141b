"""Independent reference implementations used only as test oracles.

Deliberately written with different algorithms and traversal orders than the
package so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np


def kabsch_svd(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rigid fit via SVD of the cross-covariance (Kabsch).

    Returns (rotation, translation) mapping src onto dst, with the usual
    sign fix so the rotation is always proper.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    H = (src - src_mean).T @ (dst - dst_mean)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = dst_mean - R @ src_mean
    return R, t


def brute_force_knn(
    points: list[np.ndarray], query: np.ndarray, k: int
) -> list[tuple[float, int]]:
    """Exact kNN over insertion order: (distance, insertion index) ascending."""
    query = np.asarray(query, dtype=np.float64)
    scored = [
        (float(np.linalg.norm(np.asarray(p, dtype=np.float64) - query)), i)
        for i, p in enumerate(points)
    ]
    scored.sort()
    return scored[:k]


_NEIGHBOR_CACHE: dict[int, list[tuple[int, int, int]]] = {}


def _neighbor_offsets(connectivity: int) -> list[tuple[int, int, int]]:
    if connectivity not in _NEIGHBOR_CACHE:
        budget = {6: 1, 18: 2, 26: 3}[connectivity]
        offs = [
            (di, dj, dk)
            for di in (-1, 0, 1)
            for dj in (-1, 0, 1)
            for dk in (-1, 0, 1)
            if (di, dj, dk) != (0, 0, 0)
            and abs(di) + abs(dj) + abs(dk) <= budget
        ]
        _NEIGHBOR_CACHE[connectivity] = offs
    return _NEIGHBOR_CACHE[connectivity]


def flood_fill_partition(
    bits: np.ndarray, connectivity: int
) -> set[frozenset[tuple[int, int, int]]]:
    """Connected components of a boolean mask as a set of voxel-coordinate sets.

    Depth-first with an explicit stack, scanning z-fastest — a different
    traversal than the implementation under test, but the same partition.
    """
    bits = np.asarray(bits, dtype=bool)
    nx, ny, nz = bits.shape
    seen = np.zeros_like(bits)
    offsets = _neighbor_offsets(connectivity)
    partition: set[frozenset[tuple[int, int, int]]] = set()
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if not bits[i, j, k] or seen[i, j, k]:
                    continue
                stack = [(i, j, k)]
                seen[i, j, k] = True
                members = []
                while stack:
                    ci, cj, ck = stack.pop()
                    members.append((ci, cj, ck))
                    for di, dj, dk in offsets:
                        ni, nj, nk = ci + di, cj + dj, ck + dk
                        if (
                            0 <= ni < nx
                            and 0 <= nj < ny
                            and 0 <= nk < nz
                            and bits[ni, nj, nk]
                            and not seen[ni, nj, nk]
                        ):
                            seen[ni, nj, nk] = True
                            stack.append((ni, nj, nk))
                partition.add(frozenset(members))
    return partition


def splitmix64_reference(seed: int, count: int) -> list[int]:
    """Pure-integer splitmix64 output stream, straight off the published form."""
    mask = (1 << 64) - 1
    out = []
    state = seed & mask
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out
