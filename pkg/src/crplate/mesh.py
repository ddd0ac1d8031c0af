"""Conforming triangulations: construction, refinement, neighbor sets, I/O.

The mesh is stored as flat numpy arrays.  Edges are identified by their
unordered vertex pair; within a triangle, local edge ``i`` is the edge
opposite local vertex ``i``.  An edge is a boundary edge iff it has exactly
one adjacent triangle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh", "VertexSets", "MeshFormatError", "MeshTopologyError",
    "unit_square_mesh", "refine_uniform", "neighbor_sets",
    "load_mesh", "save_mesh", "mesh_from_arrays",
]

FILE_HEADER = "plate-mesh 1"


class MeshFormatError(ValueError):
    """Unparseable mesh file; message carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshTopologyError(ValueError):
    """Invalid connectivity: inverted, duplicate, or nonmanifold elements."""


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation.

    vertices:          (nv, 2) float coordinates
    triangles:         (nt, 3) int vertex indices, counterclockwise
    edges:             (ne, 2) int vertex pairs, each sorted ascending
    edge_tris:         (ne, 2) int adjacent triangle indices, -1 = none
    tri_edges:         (nt, 3) int global edge index opposite local vertex i
    edge_is_boundary:  (ne,) bool
    mesh_size_h:       max over triangles of the longest edge length
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tris: np.ndarray
    tri_edges: np.ndarray
    edge_is_boundary: np.ndarray
    mesh_size_h: float

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def boundary_vertices(self):
        """Sorted array of vertex indices lying on a boundary edge."""
        return np.unique(self.edges[self.edge_is_boundary])

    def triangle_coords(self):
        """Vertex coordinates per triangle, shape (nt, 3, 2)."""
        return self.vertices[self.triangles]

    def triangle_areas(self):
        c = self.triangle_coords()
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def has_all_boundary_triangle(self):
        """True if some triangle has all three vertices on the boundary."""
        on_bdry = np.zeros(self.num_vertices, dtype=bool)
        on_bdry[self.boundary_vertices] = True
        return bool(np.any(np.all(on_bdry[self.triangles], axis=1)))


@dataclass(frozen=True)
class VertexSets:
    """Vertex neighbor sets used by the clamped multiplier modification.

    interior / boundary partition the vertex indices; ``stencil[i]`` is the
    set of vertices sharing an edge with i; ``interior_neighbors[i]`` the
    interior members of that set; ``collar`` the interior vertices having a
    boundary neighbor.
    """

    interior: frozenset
    boundary: frozenset
    stencil: dict
    interior_neighbors: dict
    collar: frozenset


def _signed_areas(vertices, triangles):
    c = vertices[triangles]
    e1 = c[:, 1] - c[:, 0]
    e2 = c[:, 2] - c[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def mesh_from_arrays(vertices, triangles, reorient=False):
    """Build a Mesh from raw arrays, extracting edges and validating topology.

    With reorient=True, clockwise triangles are flipped instead of rejected.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshTopologyError("vertices must have shape (nv, 2)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshTopologyError("triangles must have shape (nt, 3)")
    nv = vertices.shape[0]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        bad = int(np.argmax((triangles < 0) | (triangles >= nv)))
        raise MeshTopologyError(
            f"triangle {bad // 3} references a nonexistent vertex index")
    for t, tri in enumerate(triangles):
        if len(set(tri)) != 3:
            raise MeshTopologyError(f"triangle {t} has repeated vertices")

    areas = _signed_areas(vertices, triangles)
    flipped = areas <= 0.0
    if np.any(flipped):
        if not reorient:
            t = int(np.argmax(flipped))
            raise MeshTopologyError(
                f"triangle {t} has non-positive signed area")
        triangles = triangles.copy()
        triangles[flipped] = triangles[flipped][:, [0, 2, 1]]
        areas = _signed_areas(vertices, triangles)
        if np.any(areas <= 0.0):
            t = int(np.argmax(areas <= 0.0))
            raise MeshTopologyError(f"triangle {t} is degenerate")

    seen = set()
    for t, tri in enumerate(triangles):
        key = tuple(sorted(tri))
        if key in seen:
            raise MeshTopologyError(f"duplicate triangle {t}")
        seen.add(key)

    edge_index = {}
    edge_pairs = []
    edge_adj = []
    nt = triangles.shape[0]
    tri_edges = np.empty((nt, 3), dtype=np.int64)
    for t, tri in enumerate(triangles):
        for i in range(3):
            a, b = tri[(i + 1) % 3], tri[(i + 2) % 3]
            key = (min(a, b), max(a, b))
            e = edge_index.get(key)
            if e is None:
                e = len(edge_pairs)
                edge_index[key] = e
                edge_pairs.append(key)
                edge_adj.append([t])
            else:
                edge_adj[e].append(t)
                if len(edge_adj[e]) > 2:
                    raise MeshTopologyError(
                        f"edge {key} is nonmanifold (adjacent to "
                        f"{len(edge_adj[e])} triangles)")
            tri_edges[t, i] = e

    ne = len(edge_pairs)
    edges = np.array(edge_pairs, dtype=np.int64).reshape(ne, 2)
    edge_tris = np.full((ne, 2), -1, dtype=np.int64)
    for e, adj in enumerate(edge_adj):
        edge_tris[e, :len(adj)] = adj
    edge_is_boundary = edge_tris[:, 1] == -1

    coords = vertices[triangles]
    sides = np.stack([
        np.linalg.norm(coords[:, 1] - coords[:, 2], axis=1),
        np.linalg.norm(coords[:, 2] - coords[:, 0], axis=1),
        np.linalg.norm(coords[:, 0] - coords[:, 1], axis=1),
    ], axis=1)
    h = float(sides.max()) if nt else 0.0

    return Mesh(vertices, triangles, edges, edge_tris, tri_edges,
                edge_is_boundary, h)


def unit_square_mesh(n):
    """Uniform n x n grid of [0,1]^2, each square split by its SW-NE diagonal."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            a = vid(ix, iy)
            b = vid(ix + 1, iy)
            c = vid(ix + 1, iy + 1)
            d = vid(ix, iy + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return mesh_from_arrays(vertices, np.array(tris, dtype=np.int64))


def refine_uniform(mesh):
    """Split every triangle into 4 congruent children via edge midpoints."""
    nv = mesh.num_vertices
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]]
                       + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    tris = []
    for t in range(mesh.num_triangles):
        v0, v1, v2 = mesh.triangles[t]
        # m_i = midpoint of the edge opposite local vertex i
        m0, m1, m2 = nv + mesh.tri_edges[t]
        tris.extend([(v0, m2, m1), (v1, m0, m2), (v2, m1, m0), (m0, m1, m2)])
    return mesh_from_arrays(vertices, np.array(tris, dtype=np.int64))


def neighbor_sets(mesh):
    """Edge-adjacency vertex sets: stencils, interior neighbors, collar."""
    nv = mesh.num_vertices
    boundary = frozenset(int(v) for v in mesh.boundary_vertices)
    interior = frozenset(range(nv)) - boundary

    stencil = {i: set() for i in range(nv)}
    for a, b in mesh.edges:
        stencil[int(a)].add(int(b))
        stencil[int(b)].add(int(a))
    stencil = {i: frozenset(s) for i, s in stencil.items()}

    interior_neighbors = {i: frozenset(j for j in stencil[i] if j in interior)
                          for i in range(nv)}
    collar = frozenset().union(*(interior_neighbors[j] for j in boundary)) \
        if boundary else frozenset()
    return VertexSets(interior, boundary, stencil, interior_neighbors, collar)


def save_mesh(mesh):
    """Serialize vertices and triangles to the plate-mesh text format."""
    lines = [FILE_HEADER, f"vertices {mesh.num_vertices}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.append(f"triangles {mesh.num_triangles}")
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    return "\n".join(lines) + "\n"


def load_mesh(text):
    """Parse the plate-mesh text format; edges are rebuilt, not stored.

    Clockwise triangles are accepted and reoriented counterclockwise.
    """
    tokens = []  # (line_number, token) with comments stripped
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens.extend((lineno, tok) for tok in body.split())

    pos = 0

    def take(count, what):
        nonlocal pos
        if pos + count > len(tokens):
            line = tokens[-1][0] if tokens else 1
            raise MeshFormatError(f"unexpected end of file, expected {what}",
                                  line=line)
        out = tokens[pos:pos + count]
        pos += count
        return out

    header = take(2, "header")
    if " ".join(tok for _, tok in header) != FILE_HEADER:
        raise MeshFormatError(f"expected header '{FILE_HEADER}'",
                              line=header[0][0])

    kw, cnt = take(2, "vertex count")
    if kw[1] != "vertices":
        raise MeshFormatError("expected 'vertices <count>'", line=kw[0])
    try:
        nv = int(cnt[1])
    except ValueError:
        raise MeshFormatError("vertex count is not an integer", line=cnt[0])
    vertices = np.empty((nv, 2))
    for i in range(nv):
        (lx, sx), (_, sy) = take(2, "vertex coordinates")
        try:
            vertices[i] = (float(sx), float(sy))
        except ValueError:
            raise MeshFormatError("bad vertex coordinate", line=lx)

    kw, cnt = take(2, "triangle count")
    if kw[1] != "triangles":
        raise MeshFormatError("expected 'triangles <count>'", line=kw[0])
    try:
        nt = int(cnt[1])
    except ValueError:
        raise MeshFormatError("triangle count is not an integer", line=cnt[0])
    triangles = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        toks = take(3, "triangle indices")
        try:
            triangles[i] = [int(s) for _, s in toks]
        except ValueError:
            raise MeshFormatError("bad triangle index", line=toks[0][0])

    if pos != len(tokens):
        raise MeshFormatError("trailing content after triangle list",
                              line=tokens[pos][0])
    return mesh_from_arrays(vertices, triangles, reorient=True)
