"""Cotangent Laplacian assembly and linear boundary-value solves.

The stiffness matrix discretizes the positive-definite Laplace-Beltrami
operator with piecewise-linear elements built from edge lengths only;
masses are lumped (barycentric dual areas in the interior, half incident
edge lengths on the boundary), so reaction terms act componentwise.

Solves are direct sparse LU with a round of iterative refinement to push
the relative algebraic residual to 1e-12; factorizations are cached by
the callers that reuse a fixed operator (the monotone iteration).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.io import mmwrite
from scipy.sparse.linalg import splu

from .errors import CompatibilityError, SolverError
from .mesh import corner_angles, discrete_curvatures

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TOL = 1e-12
DEFAULT_COMPAT_TOL = 1e-8


class EllipticOperators:
    """Stiffness and mass operators assembled for one (mesh, metric).

    Attributes
    ----------
    stiffness : csr_matrix
        Symmetric positive-semidefinite cotangent matrix with zero row
        sums (constants in the kernel).
    mass : ndarray
        Barycentric dual areas, strictly positive, one per vertex.
    boundary_mass : ndarray
        Boundary dual lengths, zero at interior vertices.
    all_weights_nonnegative : bool
        True when every off-diagonal stiffness entry is <= 0, the
        precondition for the discrete maximum principle probes.
    """

    def __init__(self, mesh, metric, stiffness, mass, boundary_mass,
                 tri_grad_weights):
        self.mesh = mesh
        self.metric = metric
        self.stiffness = stiffness
        self.mass = mass
        self.boundary_mass = boundary_mass
        self._tri_grad_weights = tri_grad_weights
        self.volume = float(mass.sum())
        self.boundary_length = float(boundary_mass.sum())
        off = stiffness.copy()
        off.setdiag(0.0)
        self.min_edge_weight = float(-off.max()) if off.nnz else 0.0
        self.all_weights_nonnegative = self.min_edge_weight >= -1e-13
        self.h_max = float(metric.edge_lengths.max())
        self.h_mean = float(metric.edge_lengths.mean())

    @property
    def interior_mass_matrix(self):
        return sparse.diags(self.mass)

    @property
    def boundary_mass_matrix(self):
        return sparse.diags(self.boundary_mass)

    def gradient_squared(self, u):
        """Barycentric vertex average of the per-triangle |grad u|^2.

        The squared gradient of the linear interpolant on a triangle is
        its Dirichlet energy divided by its area; the energy is the
        half-cotangent combination of squared corner differences.
        """
        u = np.asarray(u, dtype=float)
        tris = self.mesh.triangles
        w, areas = self._tri_grad_weights
        d0 = u[tris[:, 1]] - u[tris[:, 2]]
        d1 = u[tris[:, 2]] - u[tris[:, 0]]
        d2 = u[tris[:, 0]] - u[tris[:, 1]]
        energy = w[:, 0] * d0 * d0 + w[:, 1] * d1 * d1 + w[:, 2] * d2 * d2
        gsq_tri = energy / areas
        out = np.zeros(self.mesh.vertex_count)
        np.add.at(out, tris, np.repeat((areas * gsq_tri / 3.0)[:, None], 3, axis=1))
        return out / self.mass

    def boundary_tangential_gradient(self, g):
        """Max |dg/ds| along boundary loops (forward differences)."""
        g = np.asarray(g, dtype=float)
        lengths = self.metric.edge_lengths
        nv = self.mesh.vertex_count
        worst = 0.0
        ekeys = self.mesh.edges[:, 0] * nv + self.mesh.edges[:, 1]
        for loop in self.mesh.boundary_loops:
            nxt = np.roll(loop, -1)
            key = np.minimum(loop, nxt) * nv + np.maximum(loop, nxt)
            ls = lengths[np.searchsorted(ekeys, key)]
            worst = max(worst, float(np.max(np.abs(g[nxt] - g[loop]) / ls)))
        return worst

    def export_matrixmarket(self, directory, prefix="curvforge"):
        """Write stiffness and mass matrices as MatrixMarket files."""
        os.makedirs(directory, exist_ok=True)
        paths = {}
        for name, mat in (("stiffness", self.stiffness),
                          ("interior_mass", self.interior_mass_matrix),
                          ("boundary_mass", self.boundary_mass_matrix)):
            path = os.path.join(directory, "%s_%s.mtx" % (prefix, name))
            mmwrite(path, sparse.coo_matrix(mat))
            paths[name] = path
        return paths


def assemble(mesh, metric):
    """Assemble cotangent stiffness and lumped masses.

    Cotangents come from the closed form ``cot = (b^2 + c^2 - a^2) / (4A)``
    so no trigonometric roundtrip is involved.  A warning is logged when
    obtuse triangles produce negative edge weights (the discrete maximum
    principle is then not guaranteed).
    """
    _, areas = corner_angles(mesh, metric)
    lt = metric.edge_lengths[mesh.tri_edges]
    a2 = lt ** 2
    # cot at corner k, opposite edge k
    cot = np.empty_like(lt)
    cot[:, 0] = (a2[:, 1] + a2[:, 2] - a2[:, 0]) / (4.0 * areas)
    cot[:, 1] = (a2[:, 0] + a2[:, 2] - a2[:, 1]) / (4.0 * areas)
    cot[:, 2] = (a2[:, 0] + a2[:, 1] - a2[:, 2]) / (4.0 * areas)

    tris = mesh.triangles
    nv = mesh.vertex_count
    rows, cols, vals = [], [], []
    for k in range(3):
        i = tris[:, (k + 1) % 3]
        j = tris[:, (k + 2) % 3]
        w = 0.5 * cot[:, k]
        rows.extend([i, j, i, j])
        cols.extend([j, i, i, j])
        vals.extend([-w, -w, w, w])
    stiffness = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv, nv)).tocsr()
    stiffness.sum_duplicates()

    curv = discrete_curvatures(mesh, metric)
    ops = EllipticOperators(mesh, metric, stiffness, curv.dual_area,
                            curv.boundary_dual_length,
                            (0.5 * cot, areas))
    if not ops.all_weights_nonnegative:
        logger.warning(
            "mesh has obtuse triangles: min cotangent edge weight %.3e < 0; "
            "discrete maximum principle not guaranteed", ops.min_edge_weight)
    return ops


@dataclass
class SolveStats:
    """Algebraic residual and reuse bookkeeping for one linear solve."""
    residual_norm: float
    iterations: int
    factorization_reused: bool = False


class CachedFactorization:
    """Sparse LU of a fixed operator, reusable across many right sides."""

    def __init__(self, matrix):
        self.matrix = matrix.tocsc()
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as exc:
            raise SolverError("sparse factorization failed: %s" % exc)
        self._used = False

    def solve(self, rhs, tol=DEFAULT_RESIDUAL_TOL, max_refine=3):
        """Solve with iterative refinement to relative residual ``tol``."""
        reused = self._used
        self._used = True
        x = self._lu.solve(rhs)
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return np.zeros_like(rhs), SolveStats(0.0, 0, reused)
        it = 0
        res = np.linalg.norm(rhs - self.matrix @ x) / scale
        while res > tol and it < max_refine:
            x = x + self._lu.solve(rhs - self.matrix @ x)
            res = np.linalg.norm(rhs - self.matrix @ x) / scale
            it += 1
        if not np.all(np.isfinite(x)):
            raise SolverError("linear solve produced non-finite values "
                              "(singular or badly scaled system)")
        if res > 1e-6:
            raise SolverError("linear solver did not converge: relative "
                              "residual %.3e" % res)
        return x, SolveStats(float(res), it, reused)


@dataclass
class RobinProblem:
    """Linear problem  (-Lap + q) u = f  with  du/dnu + c u = g  weakly.

    ``robin_coefficient`` is the boundary coefficient c (scalar or
    per-vertex, >= 0, not identically zero unless ``interior_coefficient``
    is positive); ``interior_coefficient`` is the optional zeroth-order
    interior term q >= 0.
    """
    operators: EllipticOperators
    robin_coefficient: object
    interior_rhs: object = None
    boundary_rhs: object = None
    interior_coefficient: object = 0.0
    factorization: CachedFactorization = field(default=None, repr=False)

    def system_matrix(self):
        ops = self.operators
        nv = ops.mesh.vertex_count
        robin = np.broadcast_to(np.asarray(self.robin_coefficient, dtype=float),
                                (nv,))
        q = np.broadcast_to(np.asarray(self.interior_coefficient, dtype=float),
                            (nv,))
        if np.any(robin < 0) or np.any(q < 0):
            raise SolverError("robin and interior coefficients must be >= 0")
        shift = ops.boundary_mass * robin + ops.mass * q
        if shift.max() <= 0.0:
            raise SolverError(
                "system is singular: robin coefficient vanishes and no "
                "interior coefficient is present (use the compatible "
                "Neumann solver instead)")
        return ops.stiffness + sparse.diags(shift)


def solve_robin(problem, tol=DEFAULT_RESIDUAL_TOL):
    """Solve a Robin problem; returns (u, SolveStats).

    The discrete system is ``(S + B c + M q) u = M f + B g`` with lumped
    masses M, B.  The factorization is cached on the problem for reuse.
    """
    ops = problem.operators
    mesh = ops.mesh
    from .fields import as_field_values

    f = as_field_values(problem.interior_rhs, mesh, "interior_rhs")
    g = as_field_values(problem.boundary_rhs, mesh, "boundary_rhs")
    if problem.factorization is None:
        problem.factorization = CachedFactorization(problem.system_matrix())
    rhs = ops.mass * f + ops.boundary_mass * g
    return problem.factorization.solve(rhs, tol=tol)


def solve_neumann_compatible(operators, interior_rhs, boundary_rhs,
                             compat_tol=DEFAULT_COMPAT_TOL, project=False,
                             tol=DEFAULT_RESIDUAL_TOL):
    """Solve the pure-Neumann problem; returns the mean-zero solution.

    Data must satisfy the compatibility identity
    ``sum(M f) + sum(B g) = 0`` to relative tolerance ``compat_tol``;
    with ``project=True`` the offending constant is subtracted from the
    interior right side instead of raising.  Uniqueness is fixed by the
    mass-weighted zero-mean constraint via a bordered system.
    """
    from .fields import as_field_values

    mesh = operators.mesh
    f = as_field_values(interior_rhs, mesh, "interior_rhs")
    g = as_field_values(boundary_rhs, mesh, "boundary_rhs")
    b = operators.mass * f + operators.boundary_mass * g
    defect = float(b.sum())
    scale = float(np.abs(b).sum()) + 1e-300
    if abs(defect) > compat_tol * scale:
        if not project:
            raise CompatibilityError(
                "Neumann data incompatible: integral defect %.6e relative "
                "to %.6e (pass project=True to subtract the constant)"
                % (defect, scale))
        logger.info("projecting Neumann data: removing defect %.3e", defect)
    # always remove the (possibly tiny) defect so the bordered system is
    # consistent to roundoff
    b = b - operators.mass * (defect / operators.volume)

    m = operators.mass
    bordered = sparse.bmat(
        [[operators.stiffness, m[:, None]], [m[None, :], None]],
        format="csc")
    fact = CachedFactorization(bordered)
    x, stats = fact.solve(np.concatenate([b, [0.0]]), tol=tol)
    u = x[:-1]
    return u, stats
