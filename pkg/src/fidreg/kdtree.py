"""Exact k-d tree with incremental insertion.

Queries are exact — results always match a brute-force linear scan, with
distance ties broken by insertion order. Insertion never rebalances; instead
the tree is rebuilt from scratch (balanced median split) whenever its size has
doubled since the last build, which keeps lookups logarithmic without paying
for rotation bookkeeping on every insert.
"""

from __future__ import annotations

import heapq

import numpy as np


class _Node:
    __slots__ = ("point", "payload", "seq", "axis", "left", "right")

    def __init__(self, point, payload, seq, axis):
        self.point = point
        self.payload = payload
        self.seq = seq
        self.axis = axis
        self.left: _Node | None = None
        self.right: _Node | None = None


class KdTree:
    """k-d tree over ``dim``-dimensional float points carrying opaque payloads."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self._root: _Node | None = None
        self._size = 0
        self._last_build_size = 1

    def __len__(self) -> int:
        return self._size

    def insert(self, point, payload) -> None:
        pt = np.asarray(point, dtype=np.float64)
        if pt.shape != (self.dim,):
            raise ValueError(f"point must have shape ({self.dim},), got {pt.shape}")
        if not np.all(np.isfinite(pt)):
            raise ValueError("point must be finite")
        node = _Node(pt, payload, self._size, 0)
        self._size += 1
        if self._root is None:
            self._root = node
        else:
            parent = self._root
            while True:
                axis = parent.axis
                side = "left" if pt[axis] < parent.point[axis] else "right"
                child = getattr(parent, side)
                if child is None:
                    node.axis = (axis + 1) % self.dim
                    setattr(parent, side, node)
                    break
                parent = child
        if self._size >= 2 * self._last_build_size:
            self._rebuild()

    def _collect(self) -> list[_Node]:
        out: list[_Node] = []
        stack = [self._root] if self._root is not None else []
        while stack:
            node = stack.pop()
            out.append(node)
            if node.left is not None:
                stack.append(node.left)
            if node.right is not None:
                stack.append(node.right)
        return out

    def _rebuild(self) -> None:
        nodes = self._collect()
        for node in nodes:
            node.left = node.right = None

        def build(items: list[_Node], axis: int) -> _Node | None:
            if not items:
                return None
            items.sort(key=lambda n: (n.point[axis], n.seq))
            mid = len(items) // 2
            root = items[mid]
            root.axis = axis
            nxt = (axis + 1) % self.dim
            root.left = build(items[:mid], nxt)
            root.right = build(items[mid + 1 :], nxt)
            return root

        self._root = build(nodes, 0)
        self._last_build_size = self._size

    def nearest(self, point, k: int = 1) -> list[tuple[object, float]]:
        """``k`` nearest payloads as (payload, distance), ascending.

        Ordered by (distance, insertion order); returns fewer than ``k`` when
        the tree is smaller. An empty tree yields an empty list.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(point, dtype=np.float64)
        if query.shape != (self.dim,):
            raise ValueError(f"query must have shape ({self.dim},), got {query.shape}")
        if self._root is None:
            return []

        # Max-heap of the k best seen so far, keyed by (dist_sq, seq) negated.
        best: list[tuple[float, int, _Node]] = []

        def visit(node: _Node | None) -> None:
            if node is None:
                return
            delta = query - node.point
            dist_sq = float(delta @ delta)
            key = (-dist_sq, -node.seq)
            if len(best) < k:
                heapq.heappush(best, (key[0], key[1], node))
            elif key > best[0][:2]:
                heapq.heapreplace(best, (key[0], key[1], node))

            axis_delta = float(query[node.axis] - node.point.item(node.axis))
            near, far = (node.left, node.right) if axis_delta < 0 else (node.right, node.left)
            visit(near)
            # The far side can only matter if the splitting plane is not
            # strictly farther than the current worst candidate.
            if len(best) < k or axis_delta * axis_delta <= -best[0][0]:
                visit(far)

        visit(self._root)
        ordered = sorted(best, key=lambda item: (-item[0], -item[1]))
        return [(node.payload, float(np.sqrt(-neg_d))) for neg_d, _, node in ordered]
