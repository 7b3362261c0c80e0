"""Triangulated surfaces with boundary and their intrinsic geometry.

A mesh is purely combinatorial (triangles over vertex indices) plus an
intrinsic metric given by one positive length per edge.  Vertex positions
are only used when loading a file: edge lengths are computed from them
once and kept; every geometric quantity afterwards (angles, areas,
curvatures, conformal rescaling) is derived from edge lengths alone.
Positions are retained on the mesh solely so that user-supplied analytic
expressions can be evaluated at vertices.

Curvature is measured by angle defects: ``2*pi`` minus the incident angle
sum at interior vertices, ``pi`` minus the incident angle sum at boundary
vertices.  Their total equals ``2*pi*chi`` identically, which is the
discrete Gauss-Bonnet theorem used throughout verification.
"""

from __future__ import annotations

import logging
import os

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import MeshError, TriangleInequalityError

logger = logging.getLogger(__name__)

# relative slack for the strict triangle inequality
_TRI_INEQ_REL = 1e-12


class SurfaceMesh:
    """Connected, consistently oriented triangle mesh with boundary.

    Parameters
    ----------
    triangles : array_like
        (F, 3) integer array of vertex indices.  All triangles must be
        oriented consistently (counter-clockwise seen from the same side).
    vertex_count : int, optional
        Number of vertices.  Defaults to ``max(triangles) + 1``.
    vertex_positions : array_like, optional
        (V, 3) float coordinates.  Kept only for evaluating analytic
        expressions at vertices; never used by metric operations.

    Attributes
    ----------
    triangles : ndarray
        (F, 3) int array.
    edges : ndarray
        (E, 2) int array, each row sorted, rows in lexicographic order.
    tri_edges : ndarray
        (F, 3) int array; ``tri_edges[t, k]`` is the index of the edge
        opposite corner ``k`` of triangle ``t``.
    boundary_loops : list of ndarray
        Cyclic vertex sequences, one per boundary component, oriented
        with the surface on the left.
    is_boundary_vertex : ndarray
        (V,) bool mask.

    Raises
    ------
    MeshError
        Non-manifold edge, inconsistent orientation, disconnected mesh,
        closed surface (no boundary), or malformed boundary.
    """

    def __init__(self, triangles, vertex_count=None, vertex_positions=None):
        tris = np.asarray(triangles, dtype=np.int64)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must be an (F, 3) index array")
        if tris.shape[0] == 0:
            raise MeshError("mesh has no triangles")
        if tris.min() < 0:
            raise MeshError("negative vertex index")
        if np.any(tris[:, 0] == tris[:, 1]) or np.any(tris[:, 1] == tris[:, 2]) \
                or np.any(tris[:, 0] == tris[:, 2]):
            raise MeshError("triangle with a repeated vertex")

        nv = int(tris.max()) + 1
        if vertex_count is not None:
            if vertex_count < nv:
                raise MeshError("vertex_count smaller than max triangle index")
            nv = int(vertex_count)

        self.triangles = tris
        self.vertex_count = nv
        if vertex_positions is not None:
            pos = np.asarray(vertex_positions, dtype=float)
            if pos.shape != (nv, 3):
                raise MeshError("vertex_positions must be (V, 3)")
            if not np.all(np.isfinite(pos)):
                raise MeshError("non-finite vertex position")
            self.vertex_positions = pos
        else:
            self.vertex_positions = None

        self._build_edges()
        self._build_boundary()
        self._check_connected()

    # ------------------------------------------------------------------
    def _build_edges(self):
        tris = self.triangles
        nv = self.vertex_count
        # directed halfedges in triangle orientation
        half = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        keys_directed = half[:, 0] * nv + half[:, 1]
        uniq_dir, counts_dir = np.unique(keys_directed, return_counts=True)
        und = np.sort(half, axis=1)
        keys_und = und[:, 0] * nv + und[:, 1]
        uniq, inverse, counts = np.unique(keys_und, return_inverse=True,
                                          return_counts=True)
        if counts.max() > 2:
            bad = uniq[np.argmax(counts)]
            raise MeshError(
                "non-manifold edge (%d, %d) shared by %d triangles"
                % (bad // nv, bad % nv, counts.max()))
        if counts_dir.max() > 1:
            bad = uniq_dir[np.argmax(counts_dir)]
            raise MeshError(
                "inconsistent orientation: directed edge (%d, %d) appears "
                "twice (non-orientable or flipped triangle)"
                % (bad // nv, bad % nv))

        self.edges = np.column_stack([uniq // nv, uniq % nv])
        self.edge_face_count = counts
        # edge index opposite corner k: (k+1, k+2) mod 3
        f = tris.shape[0]
        te = np.empty((f, 3), dtype=np.int64)
        for k in range(3):
            i = tris[:, (k + 1) % 3]
            j = tris[:, (k + 2) % 3]
            key = np.minimum(i, j) * nv + np.maximum(i, j)
            te[:, k] = np.searchsorted(uniq, key)
        self.tri_edges = te
        self._half = half

    def _build_boundary(self):
        nv = self.vertex_count
        boundary_edge = self.edge_face_count == 1
        self.boundary_edge_indices = np.nonzero(boundary_edge)[0]
        if self.boundary_edge_indices.size == 0:
            raise MeshError("closed surface: the solver requires a mesh "
                            "with non-empty boundary")
        # boundary halfedges keep their triangle direction; with consistent
        # counter-clockwise orientation they chain into loops with the
        # surface on the left
        und = np.sort(self._half, axis=1)
        keys_und = und[:, 0] * nv + und[:, 1]
        ekeys = self.edges[:, 0] * nv + self.edges[:, 1]
        half_edge_idx = np.searchsorted(ekeys, keys_und)
        on_bd = self.edge_face_count[half_edge_idx] == 1
        bd_half = self._half[on_bd]

        nxt = np.full(nv, -1, dtype=np.int64)
        for i, j in bd_half:
            if nxt[i] != -1:
                raise MeshError(
                    "boundary vertex %d has more than one outgoing boundary "
                    "edge (pinched / hourglass vertex)" % i)
            nxt[i] = j
        indeg = np.zeros(nv, dtype=np.int64)
        np.add.at(indeg, bd_half[:, 1], 1)
        if np.any(indeg > 1):
            raise MeshError("boundary vertex %d has more than one incoming "
                            "boundary edge" % int(np.argmax(indeg)))

        is_bd = np.zeros(nv, dtype=bool)
        is_bd[bd_half[:, 0]] = True
        is_bd[bd_half[:, 1]] = True
        self.is_boundary_vertex = is_bd

        loops = []
        seen = np.zeros(nv, dtype=bool)
        for start in bd_half[:, 0]:
            if seen[start]:
                continue
            loop = [start]
            seen[start] = True
            cur = nxt[start]
            while cur != start:
                if cur < 0 or seen[cur]:
                    raise MeshError("boundary does not close into loops")
                loop.append(cur)
                seen[cur] = True
                cur = nxt[cur]
            loops.append(np.asarray(loop, dtype=np.int64))
        self.boundary_loops = loops
        self._boundary_next = nxt
        del self._half

    def _check_connected(self):
        e = self.edges
        ones = np.ones(len(e))
        adj = coo_matrix((ones, (e[:, 0], e[:, 1])),
                         shape=(self.vertex_count, self.vertex_count))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise MeshError("mesh is disconnected (%d components; isolated "
                            "vertices count as components)" % ncomp)

    # ------------------------------------------------------------------
    @property
    def face_count(self):
        return self.triangles.shape[0]

    @property
    def edge_count(self):
        return self.edges.shape[0]

    @property
    def boundary_vertices(self):
        return np.nonzero(self.is_boundary_vertex)[0]

    @property
    def interior_vertices(self):
        return np.nonzero(~self.is_boundary_vertex)[0]

    def euler_characteristic(self):
        """V - E + F."""
        return self.vertex_count - self.edge_count + self.face_count


def euler_characteristic(mesh):
    """Euler characteristic V - E + F of a :class:`SurfaceMesh`."""
    return mesh.euler_characteristic()


class IntrinsicMetric:
    """Edge lengths of a mesh, the only geometric state after loading.

    Use :meth:`from_lengths` or :meth:`from_positions`; both validate the
    strict triangle inequality in every triangle.
    """

    def __init__(self, edge_lengths):
        lengths = np.asarray(edge_lengths, dtype=float)
        if lengths.ndim != 1:
            raise MeshError("edge_lengths must be a 1-D array")
        if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0):
            raise MeshError("edge lengths must be finite and positive")
        self.edge_lengths = lengths

    @classmethod
    def from_lengths(cls, mesh, edge_lengths):
        metric = cls(edge_lengths)
        if len(metric.edge_lengths) != mesh.edge_count:
            raise MeshError("edge_lengths has %d entries, mesh has %d edges"
                            % (len(metric.edge_lengths), mesh.edge_count))
        _check_triangle_inequality(mesh, metric.edge_lengths)
        return metric

    @classmethod
    def from_positions(cls, mesh, positions):
        pos = np.asarray(positions, dtype=float)
        d = pos[mesh.edges[:, 0]] - pos[mesh.edges[:, 1]]
        return cls.from_lengths(mesh, np.linalg.norm(d, axis=1))


def _check_triangle_inequality(mesh, lengths):
    lt = lengths[mesh.tri_edges]
    s = lt.sum(axis=1)
    margin = (s[:, None] - 2.0 * lt) / s[:, None]  # (b+c-a)/perimeter
    worst = margin.min(axis=1)
    t = int(np.argmin(worst))
    if worst[t] <= _TRI_INEQ_REL:
        raise TriangleInequalityError(
            "triangle %d (vertices %s) violates the strict triangle "
            "inequality: relative margin %.3e (degenerate or broken by a "
            "conformal factor too rough for this resolution)"
            % (t, mesh.triangles[t].tolist(), worst[t]))


def corner_angles(mesh, metric):
    """Interior angles and areas of every triangle from edge lengths.

    Returns
    -------
    angles : ndarray
        (F, 3) angle at each corner (law of cosines), radians.
    areas : ndarray
        (F,) triangle areas (numerically stable Heron formula).
    """
    lt = metric.edge_lengths[mesh.tri_edges]
    _check_triangle_inequality(mesh, metric.edge_lengths)
    a, b, c = lt[:, 0], lt[:, 1], lt[:, 2]
    angles = np.empty_like(lt)
    angles[:, 0] = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1, 1))
    angles[:, 1] = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1, 1))
    angles[:, 2] = np.arccos(np.clip((a * a + b * b - c * c) / (2 * a * b), -1, 1))

    srt = np.sort(lt, axis=1)  # z <= y <= x
    z, y, x = srt[:, 0], srt[:, 1], srt[:, 2]
    areas = 0.25 * np.sqrt((x + (y + z)) * (z - (x - y))
                           * (z + (x - y)) * (x + (y - z)))
    return angles, areas


class DiscreteCurvature:
    """Angle defects, turning angles and dual measures of a metric.

    All arrays have one entry per vertex; defect entries are zero at
    boundary vertices and turning entries are zero at interior vertices.
    ``dual_area`` is barycentric (one third of incident triangle areas),
    ``boundary_dual_length`` is half the incident boundary edge lengths.
    """

    def __init__(self, mesh, interior_defect, boundary_turning, dual_area,
                 boundary_dual_length):
        self.mesh = mesh
        self.interior_defect = interior_defect
        self.boundary_turning = boundary_turning
        self.dual_area = dual_area
        self.boundary_dual_length = boundary_dual_length

    @property
    def total_defect(self):
        return float(self.interior_defect.sum())

    @property
    def total_turning(self):
        return float(self.boundary_turning.sum())

    def gaussian_density(self):
        """Pointwise curvature density: defect per dual area (0 on boundary)."""
        out = np.zeros(self.mesh.vertex_count)
        inner = ~self.mesh.is_boundary_vertex
        out[inner] = self.interior_defect[inner] / self.dual_area[inner]
        return out

    def geodesic_density(self):
        """Boundary curvature density: turning per dual length (0 inside)."""
        out = np.zeros(self.mesh.vertex_count)
        bd = self.mesh.is_boundary_vertex
        out[bd] = self.boundary_turning[bd] / self.boundary_dual_length[bd]
        return out


def discrete_curvatures(mesh, metric):
    """Angle-defect curvature data for ``(mesh, metric)``.

    Interior defect is ``2*pi`` minus the incident angle sum, boundary
    turning is ``pi`` minus the incident angle sum.  Their grand total is
    ``2*pi*(V - E + F)`` up to roundoff for any valid metric.
    """
    angles, areas = corner_angles(mesh, metric)
    nv = mesh.vertex_count
    angle_sum = np.zeros(nv)
    np.add.at(angle_sum, mesh.triangles, angles)
    dual_area = np.zeros(nv)
    np.add.at(dual_area, mesh.triangles, np.repeat(areas[:, None] / 3.0, 3, axis=1))

    bd = mesh.is_boundary_vertex
    defect = np.where(bd, 0.0, 2.0 * np.pi - angle_sum)
    turning = np.where(bd, np.pi - angle_sum, 0.0)

    bdl = np.zeros(nv)
    be = mesh.edges[mesh.boundary_edge_indices]
    bl = metric.edge_lengths[mesh.boundary_edge_indices]
    np.add.at(bdl, be[:, 0], 0.5 * bl)
    np.add.at(bdl, be[:, 1], 0.5 * bl)

    return DiscreteCurvature(mesh, defect, turning, dual_area, bdl)


def conformal_rescale(mesh, metric, u):
    """Rescale edge lengths by ``exp((u_i + u_j) / 2)``.

    The discrete analogue of multiplying the metric by ``exp(2u)``;
    a constant ``u = log(s)`` scales all lengths by ``s``.  Raises
    :class:`TriangleInequalityError` if the factor is too rough for the
    mesh resolution.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.vertex_count,):
        raise MeshError("conformal factor must have one value per vertex")
    if not np.all(np.isfinite(u)):
        raise MeshError("conformal factor has non-finite entries")
    scale = np.exp(0.5 * (u[mesh.edges[:, 0]] + u[mesh.edges[:, 1]]))
    return IntrinsicMetric.from_lengths(mesh, scale * metric.edge_lengths)


# ----------------------------------------------------------------------
# file readers


def load_mesh(path, fmt=None):
    """Read an ASCII OFF or OBJ file.

    Parameters
    ----------
    path : str
        File to read.
    fmt : str, optional
        ``"off"`` or ``"obj"``; inferred from the extension by default.

    Returns
    -------
    (SurfaceMesh, IntrinsicMetric)
        Mesh with positions retained, metric from Euclidean edge lengths.
    """
    if fmt is None:
        fmt = os.path.splitext(path)[1].lower().lstrip(".")
    if fmt == "off":
        pos, tris = _read_off(path)
    elif fmt == "obj":
        pos, tris = _read_obj(path)
    else:
        raise MeshError("unsupported mesh format %r (use off or obj)" % fmt)
    if len(pos) == 0:
        raise MeshError("%s: no vertices" % path)
    mesh = SurfaceMesh(tris, vertex_count=len(pos), vertex_positions=pos)
    metric = IntrinsicMetric.from_positions(mesh, pos)
    return mesh, metric


def _content_lines(path):
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line


def _read_off(path):
    lines = _content_lines(path)
    try:
        header = next(lines)
    except StopIteration:
        raise MeshError("%s: empty OFF file" % path)
    if header.upper() != "OFF":
        raise MeshError("%s: missing OFF header" % path)
    try:
        nv, nf, _ = (int(x) for x in next(lines).split()[:3])
        pos = np.array([[float(x) for x in next(lines).split()[:3]]
                        for _ in range(nv)])
        tris = []
        for _ in range(nf):
            parts = next(lines).split()
            if int(parts[0]) != 3:
                raise MeshError("%s: non-triangular face" % path)
            tris.append([int(parts[1]), int(parts[2]), int(parts[3])])
    except (StopIteration, ValueError, IndexError) as exc:
        raise MeshError("%s: malformed OFF file (%s)" % (path, exc))
    return pos, np.asarray(tris, dtype=np.int64)


def _read_obj(path):
    pos, tris = [], []
    for line in _content_lines(path):
        parts = line.split()
        if parts[0] == "v":
            try:
                pos.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshError("%s: malformed vertex line (%s)" % (path, exc))
        elif parts[0] == "f":
            idx = [p.split("/")[0] for p in parts[1:]]
            if len(idx) != 3:
                raise MeshError("%s: non-triangular face" % path)
            try:
                tris.append([int(i) - 1 for i in idx])
            except ValueError as exc:
                raise MeshError("%s: malformed face line (%s)" % (path, exc))
    return np.asarray(pos, dtype=float), np.asarray(tris, dtype=np.int64)
