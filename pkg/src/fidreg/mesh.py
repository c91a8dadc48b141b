"""Isosurface extraction and mesh export.

``marching_cubes`` runs the standard 256-case lookup over every 2x2x2 voxel
cell, interpolating one surface vertex along each crossing edge.  Conventions
are pinned so output is reproducible down to vertex order:

* cells are visited x-fastest (index ``i + (nx-1)*(j + (ny-1)*k)`` ascending);
* a corner contributes its case bit when its value lies strictly below the
  iso level, so the mesh encloses the above-iso region;
* face winding is counter-clockwise seen from outside the above-iso region
  (normals point from above-iso toward below-iso);
* each crossing edge of the voxel grid is interpolated exactly once, from its
  lower corner, and shared between the (up to four) cells that touch it, which
  keeps closed surfaces watertight;
* vertices closer than 1e-9 mm collapse into one, and faces degenerate after
  that collapse (repeated vertex index) are dropped.  This only happens when
  the iso level exactly equals a grid value.

Cell corners follow the usual numbering: v0..v7 at offsets (0,0,0) (1,0,0)
(1,1,0) (0,1,0) (0,0,1) (1,0,1) (1,1,1) (0,1,1) in voxel index space.

Ambiguous saddle cells are resolved by the plain table entry (no asymptotic
decider), which can leave pin-hole cracks on rare configurations; fine for
display surfaces, not for CFD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._mc_tables import EDGE_CORNERS, EDGE_TABLE, TRI_TABLE
from .config import format_float
from .errors import DegenerateGeometryError
from .volume import Volume

# Written into STL headers / OBJ comments so a consumer knows which way is out.
ORIENTATION_NOTE = "outward normals, counter-clockwise winding viewed from outside"

# Corner offsets (di, dj, dk) for v0..v7, same order as the case-table bits.
CORNER_OFFSETS = (
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
)

WELD_TOLERANCE_MM = 1e-9


@dataclass(eq=False)
class TriangleMesh:
    """Indexed triangle soup: ``vertices`` (V,3) float64 mm, ``faces`` (F,3) int."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self) -> None:
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.isfinite(vertices).all():
            raise ValueError("mesh vertices must be finite")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise ValueError("face index out of range")
            if (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            ).any():
                raise ValueError("degenerate face (repeated vertex index)")
        vertices.setflags(write=False)
        faces.setflags(write=False)
        self.vertices = vertices
        self.faces = faces

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_normals(self) -> np.ndarray:
        """Unit normals per face; zero vector where a face has zero area."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        n = np.cross(b - a, c - a)
        norms = np.linalg.norm(n, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        return n / safe[:, None]

    def surface_area(self) -> float:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return float(np.linalg.norm(np.cross(b - a, c - a), axis=1).sum() / 2.0)


def empty_mesh() -> TriangleMesh:
    return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))


def marching_cubes(volume: Volume, iso_hu: float) -> TriangleMesh:
    """Extract the iso-surface of ``volume`` at ``iso_hu`` in world millimetres.

    Returns an empty mesh when no voxel cell crosses the level.  See the
    module docstring for the exact conventions this function pins down.
    """
    nx, ny, nz = volume.dims
    if min(nx, ny, nz) < 2:
        raise DegenerateGeometryError(
            "volume must span at least 2 voxels per axis to form cells"
        )
    iso = float(iso_hu)

    below = volume.voxels < iso
    # Case index per cell, vectorised: bit c set when corner c is below iso.
    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.uint16)
    for bit, (di, dj, dk) in enumerate(CORNER_OFFSETS):
        corner = below[di : di + nx - 1, dj : dj + ny - 1, dk : dk + nz - 1]
        case |= corner.astype(np.uint16) << bit

    active = (case != 0) & (case != 255)
    # Linearise x-fastest so cells come out in scan order.
    lin = np.flatnonzero(active.transpose(2, 1, 0).ravel())
    if lin.size == 0:
        return empty_mesh()
    ci = lin % (nx - 1)
    cj = (lin // (nx - 1)) % (ny - 1)
    ck = lin // ((nx - 1) * (ny - 1))

    values = volume.voxels
    spacing = volume.spacing
    origin = volume.origin

    vertex_rows: list[tuple[float, float, float]] = []
    index_of_edge: dict[tuple[int, int, int, int], int] = {}
    face_rows: list[tuple[int, int, int]] = []

    def edge_vertex(i: int, j: int, k: int, edge: int) -> int:
        ca, cb = EDGE_CORNERS[edge]
        oa, ob = CORNER_OFFSETS[ca], CORNER_OFFSETS[cb]
        pa = (i + oa[0], j + oa[1], k + oa[2])
        pb = (i + ob[0], j + ob[1], k + ob[2])
        if pb < pa:
            pa, pb = pb, pa
        axis = 0 if pa[0] != pb[0] else (1 if pa[1] != pb[1] else 2)
        key = (axis, pa[0], pa[1], pa[2])
        slot = index_of_edge.get(key)
        if slot is not None:
            return slot
        va = float(values[pa])
        vb = float(values[pb])
        t = (iso - va) / (vb - va)
        coord = [float(pa[0]), float(pa[1]), float(pa[2])]
        coord[axis] += t
        slot = len(vertex_rows)
        vertex_rows.append(
            (
                origin[0] + coord[0] * spacing[0],
                origin[1] + coord[1] * spacing[1],
                origin[2] + coord[2] * spacing[2],
            )
        )
        index_of_edge[key] = slot
        return slot

    for i, j, k, cell_case in zip(ci, cj, ck, case[ci, cj, ck]):
        i, j, k = int(i), int(j), int(k)
        row = TRI_TABLE[cell_case]
        for t0 in range(0, len(row), 3):
            face_rows.append(
                (
                    edge_vertex(i, j, k, row[t0]),
                    edge_vertex(i, j, k, row[t0 + 1]),
                    edge_vertex(i, j, k, row[t0 + 2]),
                )
            )

    vertices = np.array(vertex_rows, dtype=np.float64)
    faces = np.array(face_rows, dtype=np.int64)

    # Weld coincident vertices (iso hitting a grid value makes edge vertices
    # land on the shared corner) and drop faces that collapse.
    quantised = np.round(vertices / WELD_TOLERANCE_MM) * WELD_TOLERANCE_MM
    _, first, inverse = np.unique(
        quantised, axis=0, return_index=True, return_inverse=True
    )
    if len(first) < len(vertices):
        # Keep first-occurrence order so output stays scan-ordered.
        order = np.argsort(first, kind="stable")
        rank = np.empty(len(first), dtype=np.int64)
        rank[order] = np.arange(len(first))
        vertices = vertices[np.sort(first)]
        faces = rank[inverse][faces]
        keep = (
            (faces[:, 0] != faces[:, 1])
            & (faces[:, 1] != faces[:, 2])
            & (faces[:, 0] != faces[:, 2])
        )
        faces = faces[keep]
    if faces.size == 0:
        return empty_mesh()
    # Drop vertices orphaned by face removal.
    used = np.zeros(len(vertices), dtype=bool)
    used[faces] = True
    if not used.all():
        remap = np.cumsum(used) - 1
        vertices = vertices[used]
        faces = remap[faces]
    return TriangleMesh(vertices, faces)


STL_HEADER = ("fidreg mesh; " + ORIENTATION_NOTE).encode("ascii")[:80]


def write_stl(mesh: TriangleMesh, path) -> None:
    """Binary little-endian STL: 80-byte header, uint32 count, 50-byte facets."""
    record = np.zeros(
        mesh.n_faces,
        dtype=np.dtype(
            [("normal", "<f4", 3), ("corners", "<f4", (3, 3)), ("attr", "<u2")]
        ),
    )
    record["normal"] = mesh.face_normals()
    record["corners"] = mesh.vertices[mesh.faces]
    with open(path, "wb") as fh:
        fh.write(STL_HEADER.ljust(80, b"\x00"))
        fh.write(np.array([mesh.n_faces], dtype="<u4").tobytes())
        fh.write(record.tobytes())


def write_obj(mesh: TriangleMesh, path) -> None:
    """ASCII OBJ with 1-based face indices and full-precision vertices."""
    lines = [
        f"# fidreg surface mesh; {ORIENTATION_NOTE}",
        f"# {mesh.n_vertices} vertices, {mesh.n_faces} faces",
    ]
    for x, y, z in mesh.vertices:
        lines.append(f"v {format_float(x)} {format_float(y)} {format_float(z)}")
    for a, b, c in mesh.faces:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
