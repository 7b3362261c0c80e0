"""Independent verification of solver output.

Everything here deliberately measures with a different stick than the
solver: curvature agreement is judged by angle defects of explicitly
rescaled edge lengths (never by the finite-element residual that was
driven to zero), maximum-principle probes draw random one-signed data
and inspect the solution sign vertexwise, and the ``w = exp(-2u)``
substitution identity is tested on interpolated fields.  Agreement with
angle defects is only O(h^2) (interior) / O(h) (boundary), so every
check carries an explicit, mesh-dependent tolerance that is reported
rather than hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import RobinProblem, solve_robin
from .errors import FieldError
from .fields import as_field_values
from .mesh import conformal_rescale, discrete_curvatures

GAUSS_BONNET_TOL = 1e-10


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "value": float(self.value), "tolerance": float(self.tolerance)}


@dataclass
class VerificationReport:
    """Named checks plus the headline residuals they were drawn from."""
    gauss_bonnet_residual: float = 0.0
    pde_residual_sup: float = 0.0
    boundary_residual_sup: float = 0.0
    maxprin_applicable: bool = None
    checks: list = field(default_factory=list)

    def add(self, name, value, tolerance):
        self.checks.append(Check(name, bool(abs(value) <= tolerance),
                                 float(value), float(tolerance)))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "gauss_bonnet_residual": float(self.gauss_bonnet_residual),
            "pde_residual_sup": float(self.pde_residual_sup),
            "boundary_residual_sup": float(self.boundary_residual_sup),
            "maxprin_applicable": self.maxprin_applicable,
            "passed": bool(self.passed),
            "checks": [c.to_dict() for c in self.checks],
        }


def gauss_bonnet_residual(mesh, metric):
    """(total defect + total turning) - 2 pi chi; zero up to roundoff."""
    curv = discrete_curvatures(mesh, metric)
    return (curv.total_defect + curv.total_turning
            - 2.0 * np.pi * mesh.euler_characteristic())


def pde_residual(problem, u):
    """Recompute the mass-normalized sup residuals of a candidate solution."""
    return problem.residual_norms(np.asarray(u, dtype=float))


def maximum_principle_probe(operators, kappa=1.0, trials=100, seed=42,
                            interior_coefficient=1.0):
    """Randomized sign probes of the discrete maximum principle.

    Three variants per trial: nonpositive Robin data must give u <= 0,
    nonnegative Robin data u >= 0, and nonpositive Neumann data with a
    positive interior coefficient u <= 0.  Requires nonnegative cotangent
    weights; otherwise the report says "not applicable" and carries no
    probe checks.
    """
    report = VerificationReport(maxprin_applicable=bool(
        operators.all_weights_nonnegative))
    if not operators.all_weights_nonnegative:
        report.add("maximum_principle_not_applicable",
                   operators.min_edge_weight, np.inf)
        return report
    if kappa <= 0 or interior_coefficient <= 0:
        raise ValueError("probe coefficients must be positive")

    rng = np.random.default_rng(seed)
    nv = operators.mesh.vertex_count
    variants = (
        ("nonpositive_robin",
         RobinProblem(operators, robin_coefficient=kappa), -1.0),
        ("nonnegative_robin",
         RobinProblem(operators, robin_coefficient=kappa), +1.0),
        ("nonpositive_interior_neumann",
         RobinProblem(operators, robin_coefficient=0.0,
                      interior_coefficient=interior_coefficient), -1.0),
    )
    for name, problem, sign in variants:
        worst = 0.0
        umax = 0.0
        for _ in range(trials):
            f = sign * np.abs(rng.standard_normal(nv))
            g = sign * np.abs(rng.standard_normal(nv))
            problem.interior_rhs = f
            problem.boundary_rhs = g
            u, _ = solve_robin(problem)
            # violation of the sign conclusion, positive when broken
            worst = max(worst, float(np.max(-sign * u)))
            umax = max(umax, float(np.max(np.abs(u))))
        report.add(name, max(worst, 0.0), 1e-11 * (1.0 + umax))
    return report


def w_substitution_check(operators, u, gaussian_background, geodesic_background,
                         K, sigma, sign_threshold_factor=10.0):
    """Discrete check of the reciprocal-square substitution w = exp(-2u).

    With w = exp(-2u), the interior expression
    ``-Lap w - 2 w K_bg + |grad w|^2 / w + 2K`` equals
    ``-2 exp(-2u) (-Lap u + K_bg - K exp(2u))`` pointwise, and the
    boundary expressions relate the same way.  Both sides are evaluated
    row-wise with the assembled operators; their normalized discrepancy
    shrinks like O(h) under refinement (the gradient-squared term
    converges slowest).  The report also counts how often the two
    residual rows carry opposite signs where they stand clear of the
    discrepancy level, which exercises the direction-reversal property
    the substitution is used for.
    """
    ops = operators
    mesh = ops.mesh
    u = as_field_values(u, mesh, "u")
    if float(np.max(np.abs(u))) > 5.0:
        raise FieldError("substitution check requires |u| <= 5 to keep "
                         "the exponentials well scaled")
    kbg = as_field_values(gaussian_background, mesh, "K_bg")
    sbg = as_field_values(geodesic_background, mesh, "sigma_bg")
    K = as_field_values(K, mesh, "K")
    sigma = as_field_values(sigma, mesh, "sigma")

    w = np.exp(-2.0 * u)
    gsq = ops.gradient_squared(w)
    r_u = (ops.stiffness @ u + ops.mass * (kbg - K * np.exp(2.0 * u))
           + ops.boundary_mass * (sbg - sigma * np.exp(u)))
    r_w = (ops.stiffness @ w
           + ops.mass * (-2.0 * w * kbg + gsq / w + 2.0 * K)
           + ops.boundary_mass * (-2.0 * w * sbg + 2.0 * sigma * np.sqrt(w)))

    d = r_w - (-2.0 * np.exp(-2.0 * u)) * r_u
    bd = mesh.is_boundary_vertex
    den_i = ops.mass[~bd]
    den_b = ops.boundary_mass[bd]
    result = {
        "interior_sup": float(np.max(np.abs(d[~bd]) / den_i)),
        "interior_l2": float(np.sqrt(np.sum(den_i * (d[~bd] / den_i) ** 2)
                                     / den_i.sum())),
        "boundary_sup": float(np.max(np.abs(d[bd]) / den_b)),
        "boundary_l2": float(np.sqrt(np.sum(den_b * (d[bd] / den_b) ** 2)
                                     / den_b.sum())),
        "h_max": ops.h_max,
    }
    # direction reversal: where |r_u| is well above the discrepancy,
    # the w-side residual must carry the opposite sign
    den = ops.mass + ops.boundary_mass
    clear = np.abs(r_u) / den > sign_threshold_factor * np.abs(d) / den
    n_clear = int(np.count_nonzero(clear))
    flipped = int(np.count_nonzero(np.sign(r_w[clear]) ==
                                   -np.sign(r_u[clear])))
    result["sign_reversal_fraction"] = (flipped / n_clear) if n_clear else 1.0
    result["sign_reversal_samples"] = n_clear
    return result


def conformal_rescale_verify(mesh, metric, u, scale, gaussian_target,
                             geodesic_target, tol_interior_l2=None,
                             tol_interior_sup=None, tol_boundary_l2=None,
                             tol_boundary_sup=None):
    """Rescale, re-measure angle-defect curvatures, compare with targets.

    Edge lengths are multiplied by ``sqrt(scale) * exp((u_i + u_j)/2)``;
    the realized interior and boundary curvature densities are compared
    with the target fields in the mass-weighted L2 and sup norms.  The
    mesh size of the base metric is reported for convergence tracking;
    default tolerances scale with it.
    """
    u = as_field_values(u, mesh, "u")
    if scale <= 0:
        raise ValueError("metric scale must be positive")
    kt = as_field_values(gaussian_target, mesh, "gaussian_target")
    st = as_field_values(geodesic_target, mesh, "geodesic_target")

    new_metric = conformal_rescale(mesh, metric, u + 0.5 * np.log(scale))
    curv = discrete_curvatures(mesh, new_metric)
    k_real = curv.gaussian_density()
    s_real = curv.geodesic_density()

    bd = mesh.is_boundary_vertex
    h = float(metric.edge_lengths.max())
    if tol_interior_l2 is None:
        tol_interior_l2 = 5.0 * h * h
    if tol_interior_sup is None:
        tol_interior_sup = 5.0 * h
    if tol_boundary_l2 is None:
        tol_boundary_l2 = 5.0 * h
    if tol_boundary_sup is None:
        tol_boundary_sup = 10.0 * h

    ek = (k_real - kt)[~bd]
    es = (s_real - st)[bd]
    wk = curv.dual_area[~bd]
    ws = curv.boundary_dual_length[bd]
    report = VerificationReport(
        gauss_bonnet_residual=float(curv.total_defect + curv.total_turning
                                    - 2.0 * np.pi * mesh.euler_characteristic()))
    report.add("gauss_bonnet_rescaled", report.gauss_bonnet_residual,
               GAUSS_BONNET_TOL)
    interior_l2 = float(np.sqrt(np.sum(wk * ek * ek) / wk.sum())) \
        if ek.size else 0.0
    interior_sup = float(np.max(np.abs(ek))) if ek.size else 0.0
    boundary_l2 = float(np.sqrt(np.sum(ws * es * es) / ws.sum()))
    boundary_sup = float(np.max(np.abs(es)))
    report.add("gaussian_l2", interior_l2, tol_interior_l2)
    report.add("gaussian_sup", interior_sup, tol_interior_sup)
    report.add("geodesic_l2", boundary_l2, tol_boundary_l2)
    report.add("geodesic_sup", boundary_sup, tol_boundary_sup)
    report.checks.append(Check("mesh_size_h", True, h, np.inf))
    return report
