"""High-level curvature prescription pipelines.

Every pipeline takes a mesh whose metric is (declared or computed to be)
one of the constant-curvature model forms, solves the matching
semilinear problem with the monotone engine, converts the solution into
a conformal factor plus a global metric scale, and verifies the realized
curvatures of the rescaled metric independently via angle defects.

Model forms: flat with geodesic boundary (chi = 0), flat with unit-sign
geodesic boundary (chi != 0), constant Gaussian curvature with minimal
boundary (chi != 0).  For chi = 0 the model metric is computed here by a
single compatible Neumann solve; for chi != 0 it must be declared (an
optional certification measures how closely the mesh matches it).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh

from .elliptic import RobinProblem, assemble, solve_neumann_compatible, \
    solve_robin
from .errors import FieldError, ModelError
from .fields import as_field_values
from .mesh import conformal_rescale, discrete_curvatures
from .monotone import (IterationConfig, bracket_for_curvature_pair,
                       bracket_for_neumann_problem,
                       bracket_for_robin_problem, monotone_iterate)
from .verify import VerificationReport, conformal_rescale_verify, \
    gauss_bonnet_residual

logger = logging.getLogger(__name__)

FLAT_GEODESIC = "flat_geodesic_boundary"
FLAT_UNIT = "flat_unit_boundary"
CONSTANT_K = "constant_K_minimal_boundary"
MODEL_KINDS = (FLAT_GEODESIC, FLAT_UNIT, CONSTANT_K)


@dataclass
class ModelForm:
    """A constant-curvature representative of the conformal class."""
    kind: str
    gaussian_constant: float
    geodesic_constant: float
    certified: bool = False
    certification: dict = None

    @classmethod
    def declare(cls, kind, mesh):
        """Declare the model for a mesh, signs forced by Gauss-Bonnet."""
        chi = mesh.euler_characteristic()
        if kind == FLAT_GEODESIC:
            if chi != 0:
                raise ModelError("flat model with geodesic boundary needs "
                                 "chi = 0, mesh has chi = %d" % chi)
            return cls(kind, 0.0, 0.0)
        if kind == FLAT_UNIT:
            if chi == 0:
                raise ModelError("flat model with unit boundary curvature "
                                 "needs chi != 0")
            return cls(kind, 0.0, math.copysign(1.0, chi))
        if kind == CONSTANT_K:
            if chi == 0:
                raise ModelError("constant-curvature model with minimal "
                                 "boundary needs chi != 0")
            return cls(kind, math.copysign(1.0, chi), 0.0)
        raise ModelError("unknown model kind %r (one of %s)"
                         % (kind, ", ".join(MODEL_KINDS)))


def certify_model(mesh, metric, model, tol=None):
    """Measure how closely the metric realizes the declared model.

    Compares angle-defect curvature densities against the model
    constants in the mass-weighted L2 norm (sup also recorded); the
    default tolerance is ``max(1e-2, 0.5 h_max)``.  Returns a new
    ModelForm with the certified flag and the measurements attached.
    """
    curv = discrete_curvatures(mesh, metric)
    h = float(metric.edge_lengths.max())
    if tol is None:
        tol = max(1e-2, 0.5 * h)
    bd = mesh.is_boundary_vertex
    ek = curv.gaussian_density()[~bd] - model.gaussian_constant
    es = curv.geodesic_density()[bd] - model.geodesic_constant
    wk = curv.dual_area[~bd]
    ws = curv.boundary_dual_length[bd]
    k_l2 = float(np.sqrt(np.sum(wk * ek * ek) / wk.sum())) if ek.size else 0.0
    s_l2 = float(np.sqrt(np.sum(ws * es * es) / ws.sum()))
    cert = {
        "gaussian_l2_error": k_l2,
        "gaussian_sup_error": float(np.max(np.abs(ek))) if ek.size else 0.0,
        "geodesic_l2_error": s_l2,
        "geodesic_sup_error": float(np.max(np.abs(es))),
        "tolerance": float(tol),
        "h_max": h,
    }
    certified = k_l2 <= tol and s_l2 <= tol
    if not certified:
        logger.warning("model %s not certified: L2 errors K %.3e, sigma %.3e "
                       "(tol %.3e)", model.kind, k_l2, s_l2, tol)
    return ModelForm(model.kind, model.gaussian_constant,
                     model.geodesic_constant, certified, cert)


def uniformize_chi0(mesh, metric, tol=1e-12, max_steps=12):
    """Conformal factor flattening a chi = 0 metric to the model form.

    Each sweep solves the compatible Neumann problem whose data are the
    measured curvature densities of the current rescaled metric with
    flipped sign; the discrete Gauss-Bonnet identity makes that data
    exactly compatible at every sweep, and since the cotangent matrix of
    the current metric is the derivative of the angle defects with
    respect to the log scale factors, the sweep is a (damped) Newton
    step on the discrete flattening problem and drives the defects to
    the solver floor.  Returns ``(u_model, model, info)`` with the
    mass-mean-zero factor and the model certified against the rescaled
    metric.
    """
    chi = mesh.euler_characteristic()
    if chi != 0:
        raise ModelError("uniformization implemented for chi = 0 only "
                         "(mesh has chi = %d); declare a model form for "
                         "other topologies" % chi)
    curv0 = discrete_curvatures(mesh, metric)
    before_defect = float(np.abs(curv0.interior_defect).sum())
    before_turning = float(np.abs(curv0.boundary_turning).sum())

    def total_residual(curv):
        return (float(np.abs(curv.interior_defect).sum())
                + float(np.abs(curv.boundary_turning).sum()))

    u = np.zeros(mesh.vertex_count)
    current, curv = metric, curv0
    residual = total_residual(curv0)
    steps = 0
    while residual > tol * 4.0 * np.pi and steps < max_steps:
        ops = assemble(mesh, current)
        # data are compatible to roundoff by discrete Gauss-Bonnet; project
        # so the vanishing-data regime near the fixed point stays solvable
        du, _ = solve_neumann_compatible(ops, -curv.gaussian_density(),
                                         -curv.geodesic_density(),
                                         project=True)
        damping = 1.0
        improved = False
        while damping > 1e-3:
            try:
                trial_u = u + damping * du
                trial_metric = conformal_rescale(mesh, metric, trial_u)
            except Exception:
                damping *= 0.5
                continue
            trial_curv = discrete_curvatures(mesh, trial_metric)
            trial_res = total_residual(trial_curv)
            if trial_res < residual:
                improved = True
                break
            damping *= 0.5
        if not improved:
            break
        u, current, curv, residual = trial_u, trial_metric, trial_curv, \
            trial_res
        steps += 1

    # gauge: mass-weighted zero mean with respect to the input metric
    ops0 = assemble(mesh, metric)
    u = u - float((ops0.mass * u).sum()) / ops0.volume
    rescaled = conformal_rescale(mesh, metric, u)
    new_curv = discrete_curvatures(mesh, rescaled)
    model = certify_model(mesh, rescaled, ModelForm.declare(FLAT_GEODESIC, mesh))
    info = {
        "total_abs_defect_before": before_defect,
        "total_abs_defect_after": float(np.abs(new_curv.interior_defect).sum()),
        "total_abs_turning_before": before_turning,
        "total_abs_turning_after": float(np.abs(new_curv.boundary_turning).sum()),
        "newton_steps": steps,
        "certified": model.certified,
    }
    return u, model, info


@dataclass
class PrescriptionResult:
    """Conformal factor, metric scale and verified realized curvatures."""
    u: np.ndarray
    metric_scale: float
    realized_gaussian: np.ndarray
    realized_geodesic: np.ndarray
    thresholds: dict
    report: VerificationReport
    trace_summary: dict = field(default_factory=dict)

    def rescaled_metric(self, mesh, metric):
        return conformal_rescale(mesh, metric,
                                 self.u + 0.5 * np.log(self.metric_scale))


def _model_tolerance_pad(model):
    if model.certification is None:
        return 0.0, 0.0
    c = model.certification
    l2 = max(c["gaussian_l2_error"], c["geodesic_l2_error"])
    sup = max(c["gaussian_sup_error"], c["geodesic_sup_error"])
    return l2, sup


def _verify_prescription(mesh, metric, model, u, scale, k_target, s_target):
    h = float(metric.edge_lengths.max())
    pad_l2, pad_sup = _model_tolerance_pad(model)
    return conformal_rescale_verify(
        mesh, metric, u, scale, k_target, s_target,
        tol_interior_l2=5.0 * (h * h + pad_l2),
        tol_interior_sup=5.0 * (h + pad_sup),
        tol_boundary_l2=5.0 * (h + pad_l2),
        tol_boundary_sup=10.0 * (h + pad_sup))


def prescribe_gaussian(mesh, metric, model, K, kappa=1.0, config=None,
                       safety=0.9):
    """Realize an arbitrary Gaussian curvature field on a flat model.

    K is scaled by ``b <= 1`` until it clears the bracket threshold, the
    semilinear Robin problem with zero boundary reaction is solved, and
    the metric ``b exp(2u) g`` then has Gaussian curvature K while the
    boundary curvature becomes ``(sigma_model - kappa u) exp(-u) / sqrt(b)``.
    """
    if model.gaussian_constant != 0.0:
        raise ModelError("gaussian prescription needs a flat model "
                         "(chi = 0 model or flat model with unit boundary)")
    if kappa <= 0:
        raise ModelError("kappa must be positive")
    K = as_field_values(K, mesh, "K")
    ops = assemble(mesh, metric)

    _, probe = bracket_for_robin_problem(ops, np.zeros(mesh.vertex_count),
                                         kappa=kappa)
    c0 = probe.thresholds["C0"]
    kmax = float(np.max(K))
    b = 1.0 if kmax <= safety * c0 else safety * c0 / kmax
    problem, bracket = bracket_for_robin_problem(ops, b * K, kappa=kappa)
    u, trace = monotone_iterate(problem, bracket, config)

    sigma_induced = (model.geodesic_constant - kappa * u) * np.exp(-u)
    realized_sigma = sigma_induced / math.sqrt(b)
    report = _verify_prescription(mesh, metric, model, u, b, K, realized_sigma)
    ri, rb = problem.residual_norms(u)
    report.pde_residual_sup, report.boundary_residual_sup = ri, rb
    thresholds = dict(bracket.thresholds)
    thresholds.update({"b": b, "kappa": kappa})
    return PrescriptionResult(u, b, K, realized_sigma, thresholds, report,
                              trace.summary())


def prescribe_geodesic(mesh, metric, model, sigma, A=1.0, config=None):
    """Realize an arbitrary geodesic curvature field on a minimal-boundary
    model.

    Solves ``-Lap u + A u = 0`` with boundary reaction ``c sigma exp(u)``
    at the bracket-admissible multiplier c; the metric
    ``c^2 exp(2u) g`` then has boundary curvature sigma and Gaussian
    curvature ``(K_model - A u) exp(-2u) / c^2``.
    """
    if model.geodesic_constant != 0.0:
        raise ModelError("geodesic prescription needs a minimal-boundary "
                         "model (chi = 0 model or constant-curvature model)")
    if A <= 0:
        raise ModelError("A must be positive")
    sigma = as_field_values(sigma, mesh, "sigma")
    ops = assemble(mesh, metric)

    problem, bracket = bracket_for_neumann_problem(
        ops, np.zeros(mesh.vertex_count), sigma=sigma, A=A)
    c = problem.boundary_multiplier
    u, trace = monotone_iterate(problem, bracket, config)

    k_induced = (model.gaussian_constant - A * u) * np.exp(-2.0 * u)
    scale = c * c
    realized_k = k_induced / scale
    report = _verify_prescription(mesh, metric, model, u, scale, realized_k,
                                  sigma)
    ri, rb = problem.residual_norms(u)
    report.pde_residual_sup, report.boundary_residual_sup = ri, rb
    thresholds = dict(bracket.thresholds)
    thresholds.update({"A": A, "metric_scale": scale})
    return PrescriptionResult(u, scale, realized_k, sigma, thresholds, report,
                              trace.summary())


def prescribe_pair_chi0(mesh, metric, model, K, sigma, kappa=1.0, config=None):
    """Realize K < 0 and c sigma (sigma > 0) simultaneously for chi = 0.

    The bracket builder bisects the largest admissible multiplier D and
    the metric ``exp(2u) g`` realizes ``(K, D sigma)``.  The report adds
    the rescaled-measure Gauss-Bonnet balance of the target pair, which
    must vanish for chi = 0.
    """
    if model.kind != FLAT_GEODESIC:
        raise ModelError("pair prescription needs the chi = 0 model")
    K = as_field_values(K, mesh, "K")
    sigma = as_field_values(sigma, mesh, "sigma")
    ops = assemble(mesh, metric)

    problem, bracket, d = bracket_for_curvature_pair(ops, K, sigma,
                                                     kappa=kappa,
                                                     config=config)
    u, trace = monotone_iterate(problem, bracket, config)

    realized_sigma = d * sigma
    report = _verify_prescription(mesh, metric, model, u, 1.0, K,
                                  realized_sigma)
    new_curv = discrete_curvatures(mesh, conformal_rescale(mesh, metric, u))
    balance = float(np.sum(new_curv.dual_area * K)
                    + np.sum(new_curv.boundary_dual_length * realized_sigma))
    h = float(metric.edge_lengths.max())
    report.add("gauss_bonnet_pair_balance", balance,
               max(1e-3, 20.0 * h * h * (ops.volume + ops.boundary_length)))
    ri, rb = problem.residual_norms(u)
    report.pde_residual_sup, report.boundary_residual_sup = ri, rb
    thresholds = dict(bracket.thresholds)
    return PrescriptionResult(u, 1.0, K, realized_sigma, thresholds, report,
                              trace.summary())


@dataclass
class FeasibilityReport:
    """Outcome of the necessary-condition check for chi < 0."""
    integral_K: float
    w_field: np.ndarray
    w_min: float
    verdict: str
    reasons: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {"integral_K": float(self.integral_K),
                "w_min": float(self.w_min), "verdict": self.verdict,
                "reasons": list(self.reasons), "warnings": list(self.warnings)}


def check_necessary_negative_chi(mesh, metric, K, sigma=None):
    """Necessary conditions for realizing (K, sigma >= 0) when chi < 0.

    Solves ``-Lap w = -2K`` with Robin coefficient 2 and zero boundary
    data; the pair is non-realizable (verdict "fail") unless w > 0
    everywhere and the integral of K is negative.  A "pass" verdict makes
    no existence claim.
    """
    chi = mesh.euler_characteristic()
    if chi >= 0:
        raise ModelError("necessary-condition check applies to chi < 0 "
                         "(mesh has chi = %d)" % chi)
    K = as_field_values(K, mesh, "K")
    warnings = []
    if sigma is not None:
        sigma = as_field_values(sigma, mesh, "sigma")
        bd = mesh.is_boundary_vertex
        if float(np.min(sigma[bd])) < 0:
            raise FieldError("sigma must be nonnegative on the boundary "
                             "for this check")
    if not (np.min(K) < 0 < np.max(K)):
        warnings.append("K does not change sign (the check targets "
                        "sign-changing K positive somewhere)")

    ops = assemble(mesh, metric)
    w, _ = solve_robin(RobinProblem(ops, robin_coefficient=2.0,
                                    interior_rhs=-2.0 * K))
    integral = float(np.sum(ops.mass * K))
    w_min = float(np.min(w))
    reasons = []
    if w_min <= 0:
        reasons.append("auxiliary solution not positive (min w = %.6g)"
                       % w_min)
    if integral >= 0:
        reasons.append("integral_K >= 0 (%.6g)" % integral)
    verdict = "pass" if not reasons else "fail"
    for msg in warnings:
        logger.warning(msg)
    return FeasibilityReport(integral, w, w_min, verdict, reasons, warnings)


# ----------------------------------------------------------------------
# example-pair factory


@dataclass
class ExamplePair:
    case: str
    gaussian: np.ndarray
    geodesic: np.ndarray
    u: np.ndarray
    constants: dict
    result: PrescriptionResult


_SIGN_PATTERNS = {
    # case: (K pattern over M, sigma pattern over the boundary)
    "1": ("nonneg", "nonneg"), "2": ("changes", "nonneg"),
    "3": ("nonpos", "nonneg"), "4": ("nonneg", "changes"),
    "5": ("nonneg", "nonpos"), "6": ("changes", "changes"),
    "7": ("nonpos", "changes"), "8": ("changes", "nonpos"),
    "chi0": ("positive", "negative"),
}

_CASE_MODEL = {"1": FLAT_UNIT, "2": FLAT_UNIT, "3": FLAT_UNIT,
               "4": CONSTANT_K, "5": CONSTANT_K, "6": FLAT_UNIT,
               "7": CONSTANT_K, "8": FLAT_UNIT, "chi0": FLAT_GEODESIC}


def _interior_sign_field(ops):
    """First nonconstant eigenvector of (stiffness, mass), sup-normalized."""
    nv = ops.mesh.vertex_count
    if nv <= 1500:
        vals, vecs = eigh(ops.stiffness.toarray(), np.diag(ops.mass))
        v = vecs[:, 1]
    else:
        from scipy.sparse.linalg import eigsh
        _, vecs = eigsh(ops.stiffness.tocsc(), k=2,
                        M=sparse.diags(ops.mass).tocsc(), sigma=0.0)
        v = vecs[:, 1]
    v = v / np.max(np.abs(v))
    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    return v


def _boundary_sign_field(ops):
    """First nonconstant eigenvector of the longest boundary loop's
    weighted cycle Laplacian, zero off the loop, sup-normalized."""
    mesh = ops.mesh
    nv = mesh.vertex_count
    ekeys = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
    lengths = ops.metric.edge_lengths
    best, best_len = None, -1.0
    for loop in mesh.boundary_loops:
        nxt = np.roll(loop, -1)
        key = np.minimum(loop, nxt) * nv + np.maximum(loop, nxt)
        ls = lengths[np.searchsorted(ekeys, key)]
        if ls.sum() > best_len:
            best, best_len, best_ls = loop, ls.sum(), ls
    n = len(best)
    lap = np.zeros((n, n))
    for k in range(n):
        w = 1.0 / best_ls[k]
        k2 = (k + 1) % n
        lap[k, k] += w
        lap[k2, k2] += w
        lap[k, k2] -= w
        lap[k2, k] -= w
    _, vecs = eigh(lap)
    v = vecs[:, 1]
    v = v / np.max(np.abs(v))
    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    out = np.zeros(nv)
    out[best] = v
    return out


def _assert_pattern(name, values, pattern, slack=1e-12):
    lo, hi = float(np.min(values)), float(np.max(values))
    ok = {"nonneg": lo >= -slack, "nonpos": hi <= slack,
          "positive": lo > 0.0, "negative": hi < 0.0,
          "changes": lo < -slack and hi > slack}[pattern]
    if not ok:
        raise FieldError("%s does not satisfy sign pattern %r "
                         "(range [%.3e, %.3e])" % (name, pattern, lo, hi))


def construct_example_pair(mesh, metric, model, case):
    """Build a realizable (K, sigma) pair with a prescribed sign pattern.

    Cases "1".."8" cover chi > 0 (the sign table obstructed only by
    Gauss-Bonnet), "chi0" the positive-K / negative-sigma example for
    chi = 0.  One compatible Neumann solve produces u, and
    ``K = (data + K_model) exp(-2u)``, ``sigma = (data + sigma_model)
    exp(-u)`` realize the pair for ``exp(2u) g``; the compatibility
    constant of each case obeys its stated bound (|A| < 1, |B| < 1,
    the (-3/2, -1/2) window, or < -1).
    """
    case = str(case)
    if case not in _SIGN_PATTERNS:
        raise ModelError("unknown case %r (1..8 or chi0)" % case)
    if model.kind != _CASE_MODEL[case]:
        raise ModelError("case %s needs model %s, got %s"
                         % (case, _CASE_MODEL[case], model.kind))
    ops = assemble(mesh, metric)
    bd = mesh.is_boundary_vertex
    vol, blen = ops.volume, ops.boundary_length
    constants = {}

    def interior_mean(values):
        return float(np.sum(ops.mass * values))

    def boundary_mean(values):
        return float(np.sum(ops.boundary_mass * values))

    if case in ("1", "2", "3"):
        phi = _interior_sign_field(ops)
        if case == "1":
            f = phi - float(np.min(phi))
            f = f * (0.5 * blen / interior_mean(f))   # forces A = -1/2
        elif case == "2":
            f = phi  # mass-mean zero, so A is essentially 0
        else:
            f = phi - float(np.max(phi))
            f = f * (0.5 * blen / abs(interior_mean(f)))  # forces A = +1/2
        a_const = -interior_mean(f) / blen
        constants["A"] = a_const
        if abs(a_const) >= 1.0:
            raise FieldError("compatibility constant |A| >= 1 after scaling")
        interior_data, boundary_data = f, np.full(mesh.vertex_count, a_const)
    elif case in ("4", "5"):
        phi = _boundary_sign_field(ops)
        if case == "4":
            h = np.where(bd, phi, 0.0)  # near mass-mean zero, B near 0
        else:
            h = np.where(bd, phi - float(np.max(phi[bd])), 0.0)
            h = h * (0.5 * vol / abs(boundary_mean(h)))   # forces B = +1/2
        b_const = -boundary_mean(h) / vol
        constants["B"] = b_const
        if abs(b_const) >= 1.0:
            raise FieldError("compatibility constant |B| >= 1 after scaling")
        interior_data, boundary_data = np.full(mesh.vertex_count, b_const), h
    elif case == "6":
        phi_b = _boundary_sign_field(ops)
        f6p = np.where(bd, -1.0 + 0.4 * phi_b, 0.0)
        target = -boundary_mean(f6p)  # required interior integral, > 0
        phi = _interior_sign_field(ops)
        shift = target / vol
        scale = 2.0 * shift / abs(float(np.min(phi)))
        f6 = scale * phi + shift
        constants["F6_prime_min"] = float(np.min(f6p[bd]))
        constants["F6_prime_max"] = float(np.max(f6p[bd]))
        interior_data, boundary_data = f6, f6p
    elif case == "7":
        f7 = -1.5
        phi_b = _boundary_sign_field(ops)
        shift = -f7 * vol / blen
        scale = 2.0 * shift / abs(float(np.min(phi_b[bd])))
        f7p = np.where(bd, scale * phi_b + shift, 0.0)
        f7p = f7p - np.where(bd, (boundary_mean(f7p) + f7 * vol) / blen, 0.0)
        constants["F7"] = f7
        interior_data = np.full(mesh.vertex_count, f7)
        boundary_data = f7p
    elif case == "8":
        f8p = -1.5
        target = -f8p * blen
        phi = _interior_sign_field(ops)
        shift = target / vol
        scale = 2.0 * shift / abs(float(np.min(phi)))
        f8 = scale * phi + shift
        f8 = f8 - (interior_mean(f8) - target) / vol
        constants["F8_prime"] = f8p
        interior_data = f8
        boundary_data = np.full(mesh.vertex_count, f8p)
    else:  # chi0
        b1 = 1.0
        b2 = -b1 * vol / blen
        constants.update({"b1": b1, "b2": b2})
        interior_data = np.full(mesh.vertex_count, b1)
        boundary_data = np.full(mesh.vertex_count, b2)

    u, _ = solve_neumann_compatible(ops, interior_data, boundary_data)
    k_out = (interior_data + model.gaussian_constant) * np.exp(-2.0 * u)
    s_out = (boundary_data + model.geodesic_constant) * np.exp(-u)
    s_out = np.where(bd, s_out, 0.0)

    kp, sp = _SIGN_PATTERNS[case]
    _assert_pattern("K_%s" % case, k_out, kp)
    _assert_pattern("sigma_%s" % case, s_out[bd], sp)

    report = _verify_prescription(mesh, metric, model, u, 1.0, k_out, s_out)
    result = PrescriptionResult(u, 1.0, k_out, s_out,
                                dict(constants), report, {})
    return ExamplePair(case, k_out, s_out, u, constants, result)
