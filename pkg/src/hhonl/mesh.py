"""Polytopal meshes on the unit square: generators, file ingestion, geometry.

A mesh is stored as vertex coordinates plus counterclockwise cell vertex
loops.  Faces (straight edges) are always derived from the cell loops,
never read from a file, so generated and ingested meshes go through the
same conformity validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MeshError",
    "MeshFormatError",
    "MeshInvalidError",
    "CellGeometry",
    "FaceGeometry",
    "PolytopalMesh",
    "polygon_area",
    "polygon_centroid",
    "polygon_diameter",
    "generate_cartesian",
    "generate_triangular",
    "read_mesh",
    "write_mesh",
    "compute_geometry",
    "mesh_size",
    "quasi_uniformity",
    "mesh_regularity",
]


class MeshError(Exception):
    """Base class for mesh construction and validation failures."""


class MeshFormatError(MeshError):
    """A mesh file could not be parsed in its declared format."""


class MeshInvalidError(MeshError):
    """A constructed mesh violates a structural invariant."""


def polygon_area(vertices):
    """Signed shoelace area of the polygon with rows of ``vertices`` as corners."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def polygon_centroid(vertices):
    """Area centroid of a simple polygon (signed-area weighted, orientation safe)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])


def polygon_diameter(vertices):
    """Largest pairwise vertex distance."""
    v = np.asarray(vertices, dtype=float)
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def _segments_intersect(p, q, r, s):
    """Proper or touching intersection of open segments pq and rs."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p, q, r)
    d2 = orient(p, q, s)
    d3 = orient(r, s, p)
    d4 = orient(r, s, q)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def _is_simple_polygon(v):
    """Check that the closed polygon given by rows of ``v`` has no edge crossings."""
    m = len(v)
    edges = [(v[i], v[(i + 1) % m]) for i in range(m)]
    # Convex polygons (all left turns, possibly with straight vertices) are simple.
    turns = []
    for i in range(m):
        a, b, c = v[i - 1], v[i], v[(i + 1) % m]
        turns.append((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]))
    scale = polygon_diameter(v) ** 2
    if all(t >= -1e-12 * scale for t in turns):
        return True
    for i in range(m):
        for j in range(i + 1, m):
            if j == i + 1 or (i == 0 and j == m - 1):
                continue  # adjacent edges share a vertex
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True)
class CellGeometry:
    """Derived per-cell quantities: area centroid, area, diameter h_T."""

    centroid: np.ndarray
    area: float
    diameter: float


@dataclass(frozen=True)
class FaceGeometry:
    """Derived per-face quantities, with one outward unit normal per incident cell."""

    midpoint: np.ndarray
    length: float
    normals: dict


class PolytopalMesh:
    """Conforming polygonal mesh with derived faces and geometry.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
        Vertex coordinates.
    cells : sequence of int sequences
        Vertex indices of each cell, traversed along the boundary.  Clockwise
        cells are silently reversed; the number of repairs is recorded in
        ``orientation_repairs``.

    Raises
    ------
    MeshInvalidError
        If a structural invariant fails (degenerate or self-intersecting
        cell, an edge shared by more than two cells, inconsistent edge
        orientation between neighbors, or cell areas that do not add up to
        the area enclosed by the boundary faces).
    """

    def __init__(self, vertices, cells):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshInvalidError("vertices must be an (nv, 2) array")
        self.vertices = vertices
        self.cells = [np.asarray(c, dtype=np.int64) for c in cells]
        if not self.cells:
            raise MeshInvalidError("mesh has no cells")
        for ci, cell in enumerate(self.cells):
            if cell.ndim != 1 or len(cell) < 3:
                raise MeshInvalidError(f"cell {ci} has fewer than 3 vertices")
            if cell.min() < 0 or cell.max() >= len(vertices):
                raise MeshInvalidError(f"cell {ci} references a missing vertex")
            if len(np.unique(cell)) != len(cell):
                raise MeshInvalidError(f"cell simplicity: cell {ci} repeats a vertex")

        self.orientation_repairs = self._repair_orientation()
        self._check_simplicity()
        self._build_faces()
        self._compute_geometry()
        self._check_partition()
        for arr in (self.vertices, self.faces, self.face_owner, self.face_neighbor,
                    self.cell_centroids, self.cell_areas, self.cell_diameters,
                    self.face_midpoints, self.face_lengths, self.face_normals):
            arr.setflags(write=False)

    # -- construction steps -------------------------------------------------

    def _repair_orientation(self):
        repairs = 0
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        scale = max(float(np.hypot(span[0], span[1])), 1.0)
        for ci, cell in enumerate(self.cells):
            area = polygon_area(self.vertices[cell])
            if abs(area) <= 1e-14 * scale**2:
                raise MeshInvalidError(f"cell orientation/area: cell {ci} is degenerate")
            if area < 0:
                self.cells[ci] = cell[::-1].copy()
                repairs += 1
        return repairs

    def _check_simplicity(self):
        for ci, cell in enumerate(self.cells):
            if not _is_simple_polygon(self.vertices[cell]):
                raise MeshInvalidError(f"cell simplicity: cell {ci} self-intersects")

    def _build_faces(self):
        faces = []
        owner = []
        neighbor = []
        seen = {}
        cell_faces = []
        cell_face_signs = []
        for ci, cell in enumerate(self.cells):
            fids = []
            signs = []
            for a, b in zip(cell, np.roll(cell, -1)):
                key = (min(a, b), max(a, b))
                if key not in seen:
                    seen[key] = len(faces)
                    faces.append((a, b))
                    owner.append(ci)
                    neighbor.append(-1)
                    fids.append(seen[key])
                    signs.append(1)
                else:
                    fi = seen[key]
                    if neighbor[fi] != -1:
                        raise MeshInvalidError(
                            f"face incidence: edge {key} belongs to more than two cells")
                    if faces[fi] != (b, a):
                        raise MeshInvalidError(
                            f"face conformity: edge {key} traversed twice in the same direction")
                    neighbor[fi] = ci
                    fids.append(fi)
                    signs.append(-1)
            cell_faces.append(np.asarray(fids, dtype=np.int64))
            cell_face_signs.append(np.asarray(signs, dtype=np.int64))
        self.faces = np.asarray(faces, dtype=np.int64)
        self.face_owner = np.asarray(owner, dtype=np.int64)
        self.face_neighbor = np.asarray(neighbor, dtype=np.int64)
        self.cell_faces = cell_faces
        self.cell_face_signs = cell_face_signs

    def _compute_geometry(self):
        nc = len(self.cells)
        self.cell_centroids = np.empty((nc, 2))
        self.cell_areas = np.empty(nc)
        self.cell_diameters = np.empty(nc)
        for ci, cell in enumerate(self.cells):
            v = self.vertices[cell]
            self.cell_areas[ci] = polygon_area(v)
            self.cell_centroids[ci] = polygon_centroid(v)
            self.cell_diameters[ci] = polygon_diameter(v)
        p0 = self.vertices[self.faces[:, 0]]
        p1 = self.vertices[self.faces[:, 1]]
        self.face_midpoints = 0.5 * (p0 + p1)
        tang = p1 - p0
        self.face_lengths = np.sqrt((tang**2).sum(axis=1))
        if np.any(self.face_lengths <= 0):
            raise MeshInvalidError("face conformity: zero-length face")
        # Outward normal of the owner cell: the owner traverses the face from
        # faces[:, 0] to faces[:, 1] counterclockwise, so (dy, -dx) points out.
        self.face_normals = np.column_stack(
            (tang[:, 1], -tang[:, 0])) / self.face_lengths[:, None]

    def _check_partition(self):
        # By the divergence theorem the area enclosed by the boundary faces
        # must match the sum of cell areas.  This is a consistency check on
        # the face orientation bookkeeping; a tiling that consistently covers
        # a smaller region than intended still passes, so callers who expect
        # a specific domain should also compare cell_areas.sum() against it.
        bmask = self.face_neighbor == -1
        boundary_area = float(np.sum(
            self.face_midpoints[bmask, 0] * self.face_normals[bmask, 0]
            * self.face_lengths[bmask]))
        total = float(self.cell_areas.sum())
        if abs(total - boundary_area) > 1e-12 * max(total, 1.0):
            raise MeshInvalidError(
                "area partition: cell areas sum to "
                f"{total:.15g} but the boundary encloses {boundary_area:.15g}")

    # -- accessors ----------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_faces(self):
        return len(self.faces)

    @property
    def boundary_faces(self):
        """Indices of faces with a single incident cell."""
        return np.flatnonzero(self.face_neighbor == -1)

    @property
    def interior_faces(self):
        return np.flatnonzero(self.face_neighbor != -1)

    def cell_vertices(self, ci):
        """Coordinates of cell ``ci``'s corners, counterclockwise."""
        return self.vertices[self.cells[ci]]

    def outward_normal(self, ci, fi):
        """Unit normal of face ``fi`` pointing out of cell ``ci``."""
        if self.face_owner[fi] == ci:
            return self.face_normals[fi]
        if self.face_neighbor[fi] == ci:
            return -self.face_normals[fi]
        raise ValueError(f"face {fi} is not incident to cell {ci}")


def compute_geometry(mesh):
    """Per-cell and per-face geometry of ``mesh``.

    Returns
    -------
    (list of CellGeometry, list of FaceGeometry)
    """
    cells = [CellGeometry(mesh.cell_centroids[i].copy(), float(mesh.cell_areas[i]),
                          float(mesh.cell_diameters[i]))
             for i in range(mesh.num_cells)]
    faces = []
    for fi in range(mesh.num_faces):
        normals = {int(mesh.face_owner[fi]): mesh.face_normals[fi].copy()}
        if mesh.face_neighbor[fi] != -1:
            normals[int(mesh.face_neighbor[fi])] = -mesh.face_normals[fi]
        faces.append(FaceGeometry(mesh.face_midpoints[fi].copy(),
                                  float(mesh.face_lengths[fi]), normals))
    return cells, faces


def mesh_size(mesh):
    """Largest cell diameter h = max_T h_T."""
    return float(mesh.cell_diameters.max())


def quasi_uniformity(mesh):
    """Ratio max h_T / min h_T (1 on uniform meshes)."""
    return float(mesh.cell_diameters.max() / mesh.cell_diameters.min())


def mesh_regularity(mesh):
    """Largest rho with rho^2 h_T <= h_F for every cell T and incident face F."""
    ratios = []
    for ci in range(mesh.num_cells):
        hT = mesh.cell_diameters[ci]
        ratios.append((mesh.face_lengths[mesh.cell_faces[ci]] / hT).min())
    return float(np.sqrt(min(ratios)))


# -- generators -------------------------------------------------------------


def _grid_vertices(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    return np.column_stack((X.ravel(), Y.ravel()))


def generate_cartesian(n):
    """Uniform n-by-n square mesh of the unit square."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    verts = _grid_vertices(n)
    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            cells.append([v00, v00 + 1, v00 + n + 2, v00 + n + 1])
    return PolytopalMesh(verts, cells)


def generate_triangular(n):
    """The n-by-n grid with each square split along its lower-left to upper-right diagonal."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    verts = _grid_vertices(n)
    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            cells.append([v00, v10, v11])
            cells.append([v00, v11, v01])
    return PolytopalMesh(verts, cells)


# -- file formats -----------------------------------------------------------


def write_mesh(mesh, path):
    """Write ``mesh`` in the native JSON format (vertices and cell loops only)."""
    payload = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "cells": [[int(i) for i in cell] for cell in mesh.cells],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def _read_native_json(path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MeshFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(payload, dict):
        raise MeshFormatError(f"{path}: top level must be an object")
    for key in ("vertices", "cells"):
        if key not in payload:
            raise MeshFormatError(f"{path}: missing '{key}' array")
    try:
        vertices = np.array(payload["vertices"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MeshFormatError(f"{path}: 'vertices' is not a numeric (nv, 2) array") from exc
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshFormatError(f"{path}: 'vertices' is not a numeric (nv, 2) array")
    cells = []
    for ci, rec in enumerate(payload["cells"]):
        try:
            cells.append([int(i) for i in rec])
        except (TypeError, ValueError) as exc:
            raise MeshFormatError(f"{path}: cell record {ci} is not an index list") from exc
    return vertices, cells


class _TokenCursor:
    """Whitespace token stream over a text file, tracking line numbers."""

    def __init__(self, path):
        self.path = path
        self.tokens = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            for tok in line.split():
                self.tokens.append((tok, lineno))
        self.pos = 0

    def next_number(self, what):
        while self.pos < len(self.tokens):
            tok, lineno = self.tokens[self.pos]
            self.pos += 1
            try:
                return float(tok), lineno
            except ValueError:
                continue  # keyword or header line, skip
        raise MeshFormatError(f"{self.path}: unexpected end of file while reading {what}")

    def next_int(self, what):
        val, lineno = self.next_number(what)
        if val != int(val):
            raise MeshFormatError(f"{self.path}:{lineno}: expected an integer for {what}")
        return int(val), lineno


def _read_fvca_typ2(path):
    cur = _TokenCursor(path)
    nv, _ = cur.next_int("the vertex count")
    if nv <= 0:
        raise MeshFormatError(f"{path}: nonpositive vertex count")
    vertices = np.empty((nv, 2))
    for i in range(nv):
        vertices[i, 0], _ = cur.next_number(f"x of vertex {i + 1}")
        vertices[i, 1], _ = cur.next_number(f"y of vertex {i + 1}")
    ncell, _ = cur.next_int("the cell count")
    if ncell <= 0:
        raise MeshFormatError(f"{path}: nonpositive cell count")
    cells = []
    for ci in range(ncell):
        m, lineno = cur.next_int(f"the size of cell {ci + 1}")
        if m < 3:
            raise MeshFormatError(f"{path}:{lineno}: cell {ci + 1} has fewer than 3 vertices")
        idx = []
        for j in range(m):
            v, lineno = cur.next_int(f"vertex {j + 1} of cell {ci + 1}")
            if not 1 <= v <= nv:
                raise MeshFormatError(
                    f"{path}:{lineno}: cell {ci + 1} references vertex {v} of {nv}")
            idx.append(v - 1)  # 1-based on file
        cells.append(idx)
    return vertices, cells


_FORMATS = {"native-json": _read_native_json, "fvca-typ2": _read_fvca_typ2}


def read_mesh(path, format=None):
    """Read and validate a mesh file.

    ``format`` is ``"native-json"`` or ``"fvca-typ2"``; when omitted it is
    inferred from the file suffix (``.json`` or ``.typ2``).
    """
    path = Path(path)
    if format is None:
        format = {"json": "native-json", "typ2": "fvca-typ2"}.get(
            path.suffix.lstrip(".").lower())
        if format is None:
            raise MeshFormatError(
                f"{path}: cannot infer format from suffix; pass format=...")
    if format not in _FORMATS:
        raise MeshFormatError(f"unknown mesh format {format!r}")
    if not path.exists():
        raise MeshFormatError(f"{path}: no such file")
    vertices, cells = _FORMATS[format](path)
    return PolytopalMesh(vertices, cells)
