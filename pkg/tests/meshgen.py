"""Fixture mesh generators for the test suite.

The library deliberately ships no mesh generation; these helpers build
the structured fixtures the tests need (disk, annulus, grid with holes,
spherical cap, perturbed annulus) at any resolution, so refinement
studies just regenerate with doubled counts.
"""

import numpy as np

from curvforge import IntrinsicMetric, SurfaceMesh


def build(positions, triangles):
    positions = np.asarray(positions, dtype=float)
    mesh = SurfaceMesh(np.asarray(triangles, dtype=np.int64),
                       vertex_count=len(positions),
                       vertex_positions=positions)
    return mesh, IntrinsicMetric.from_positions(mesh, positions)


def hex_disk(n_rings, radius=1.0):
    """Flat disk from concentric hexagonal rings (near-equilateral)."""
    pos = [(0.0, 0.0, 0.0)]
    ring_start = [0, 1]
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        for k in range(6 * i):
            a = 2.0 * np.pi * k / (6 * i)
            pos.append((r * np.cos(a), r * np.sin(a), 0.0))
        ring_start.append(len(pos))
    tris = []
    for k in range(6):
        tris.append((0, 1 + k, 1 + (k + 1) % 6))
    for i in range(2, n_rings + 1):
        no, ni = 6 * i, 6 * (i - 1)
        outer = ring_start[i]
        inner = ring_start[i - 1]
        for s in range(6):
            for t in range(i):
                o1 = outer + (s * i + t) % no
                o2 = outer + (s * i + t + 1) % no
                v = inner + (s * (i - 1) + t) % ni
                tris.append((o1, o2, v))
                if t < i - 1:
                    w = inner + (s * (i - 1) + t + 1) % ni
                    tris.append((o2, w, v))
    return build(pos, tris)


def spherical_cap(n_rings, colatitude=np.pi / 2, radius=1.0):
    """Cap of a round sphere; colatitude pi/2 gives the hemisphere."""
    pos = [(0.0, 0.0, radius)]
    ring_start = [0, 1]
    for i in range(1, n_rings + 1):
        th = colatitude * i / n_rings
        for k in range(6 * i):
            a = 2.0 * np.pi * k / (6 * i)
            pos.append((radius * np.sin(th) * np.cos(a),
                        radius * np.sin(th) * np.sin(a),
                        radius * np.cos(th)))
        ring_start.append(len(pos))
    tris = []
    for k in range(6):
        tris.append((0, 1 + k, 1 + (k + 1) % 6))
    for i in range(2, n_rings + 1):
        no, ni = 6 * i, 6 * (i - 1)
        outer, inner = ring_start[i], ring_start[i - 1]
        for s in range(6):
            for t in range(i):
                o1 = outer + (s * i + t) % no
                o2 = outer + (s * i + t + 1) % no
                v = inner + (s * (i - 1) + t) % ni
                tris.append((o1, o2, v))
                if t < i - 1:
                    w = inner + (s * (i - 1) + t + 1) % ni
                    tris.append((o2, w, v))
    return build(pos, tris)


def annulus(n_radial=4, n_angular=24, r0=1.0, r1=2.0, z_fn=None):
    """Structured annulus; ``z_fn(r, theta)`` curves it out of the plane."""
    pos = []
    for i in range(n_radial + 1):
        r = r0 + (r1 - r0) * i / n_radial
        for j in range(n_angular):
            a = 2.0 * np.pi * j / n_angular
            z = z_fn(r, a) if z_fn is not None else 0.0
            pos.append((r * np.cos(a), r * np.sin(a), z))

    def idx(i, j):
        return i * n_angular + (j % n_angular)

    tris = []
    for i in range(n_radial):
        for j in range(n_angular):
            a, b = idx(i, j), idx(i + 1, j)
            c, d = idx(i + 1, j + 1), idx(i, j + 1)
            if (i + j) % 2 == 0:
                tris.extend([(a, b, c), (a, c, d)])
            else:
                tris.extend([(a, b, d), (b, c, d)])
    return build(pos, tris)


def perturbed_annulus(n_radial=4, n_angular=24, amplitude=0.3):
    r0, r1 = 1.0, 2.0

    def bump(r, a):
        return amplitude * np.sin(2.0 * a) * np.sin(np.pi * (r - r0) / (r1 - r0))

    return annulus(n_radial, n_angular, r0, r1, z_fn=bump)


def grid_with_holes(nx=9, ny=5, holes=((2, 4, 2, 4), (5, 7, 2, 4)),
                    width=None, height=None, diagonal="alternate"):
    """Rectangle grid minus hole cell blocks; two holes give chi = -1.

    ``holes`` are half-open cell ranges (i0, i1, j0, j1).  Unreferenced
    vertices inside holes are dropped.  ``diagonal="uniform"`` splits all
    cells the same way (five-point-stencil Laplacian, quadratic-exact).
    """
    width = float(nx) if width is None else width
    height = float(ny) if height is None else height
    pos = [(width * i / nx, height * j / ny, 0.0)
           for i in range(nx + 1) for j in range(ny + 1)]

    def in_hole(i, j):
        return any(i0 <= i < i1 and j0 <= j < j1 for i0, i1, j0, j1 in holes)

    def idx(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            if in_hole(i, j):
                continue
            a, b = idx(i, j), idx(i + 1, j)
            c, d = idx(i + 1, j + 1), idx(i, j + 1)
            if diagonal == "uniform" or (i + j) % 2 == 0:
                tris.extend([(a, b, c), (a, c, d)])
            else:
                tris.extend([(a, b, d), (b, c, d)])
    tris = np.asarray(tris, dtype=np.int64)
    used = np.zeros(len(pos), dtype=bool)
    used[tris] = True
    remap = -np.ones(len(pos), dtype=np.int64)
    remap[used] = np.arange(used.sum())
    return build(np.asarray(pos)[used], remap[tris])


def pants(refine=1):
    """chi = -1 fixture: 3-boundary-loop planar domain."""
    r = refine
    return grid_with_holes(nx=9 * r, ny=5 * r,
                           holes=((2 * r, 4 * r, 2 * r, 4 * r),
                                  (5 * r, 7 * r, 2 * r, 4 * r)),
                           width=9.0, height=5.0)


def icosahedron_cap():
    """Five faces of the regular icosahedron around the top vertex."""
    c, s = 2.0 / np.sqrt(5.0), 1.0 / np.sqrt(5.0)
    pos = [(0.0, 0.0, 1.0)]
    for k in range(5):
        a = 2.0 * np.pi * k / 5.0
        pos.append((c * np.cos(a), c * np.sin(a), s))
    tris = [(0, 1 + k, 1 + (k + 1) % 5) for k in range(5)]
    return build(pos, tris)


def write_off(path, mesh):
    pos = mesh.vertex_positions
    with open(path, "w") as fh:
        fh.write("OFF\n%d %d 0\n" % (mesh.vertex_count, mesh.face_count))
        for p in pos:
            fh.write("%.17g %.17g %.17g\n" % tuple(p))
        for t in mesh.triangles:
            fh.write("3 %d %d %d\n" % tuple(t))
    return path
