"""Monotone iteration between sub- and super-solutions.

The discrete semilinear system solved here is, componentwise,

    S u + M (A u + f0 - K exp(2u)) + B (kappa u + g0 - c sigma exp(u)) = 0

with stiffness S and lumped masses M (interior) and B (boundary): the
weak form of  -Lap u + A u + f0 = K exp(2u)  with the oblique condition
du/dnu + kappa u + g0 = c sigma exp(u).  A bracket is an ordered pair
(u_minus, u_plus) whose residuals have the sub/super signs; the scheme
repeatedly solves the shifted linear problem

    (S + lam M + mu B) u_next = M (lam u + F(u)) + B (mu u + G(u))

starting from u_plus.  With shifts at least as large as the Lipschitz
envelope of the reactions over the bracket, the map is order preserving
and the iterates decrease monotonically onto a solution; both properties
are monitored every step and violations abort the run.

Four bracket builders cover the problem families used by the
prescription pipelines:

* ``bracket_for_robin_problem``  -- kappa > 0, reports thresholds C0, C1;
* ``bracket_for_neumann_problem`` -- interior coefficient A > 0,
  thresholds C2, C3;
* ``bracket_for_curvature_pair`` -- K < 0, sigma > 0 on a chi = 0 model,
  pure Neumann; bisects the largest admissible boundary multiplier D;
* ``bracket_for_constant_flux``  -- K < 0 with constant Neumann flux.

The first two are exact discrete constructions (their inequalities hold
to roundoff); the last two go through the substitution w = exp(-2u), so
their sign checks carry a resolution-dependent slack that is recorded on
the bracket.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .elliptic import (CachedFactorization, RobinProblem, solve_robin,
                       solve_neumann_compatible)
from .errors import BracketError, IterationError
from .fields import as_field_values

logger = logging.getLogger(__name__)

EXACT_BRACKET_SLACK = 1e-9
GROWTH_CAP = 2.0 ** 60


@dataclass
class SemilinearProblem:
    """One instance of the discrete semilinear system (see module doc)."""
    operators: object
    interior_linear: float = 0.0       # A
    boundary_linear: float = 0.0       # kappa
    interior_reaction: object = None   # K, multiplies exp(2u)
    boundary_reaction: object = None   # sigma, multiplies c exp(u)
    boundary_multiplier: float = 0.0   # c
    interior_affine: object = None     # f0
    boundary_affine: object = None     # g0

    def __post_init__(self):
        mesh = self.operators.mesh
        self.interior_reaction = as_field_values(self.interior_reaction, mesh, "K")
        self.boundary_reaction = as_field_values(self.boundary_reaction, mesh,
                                                 "sigma")
        self.interior_affine = as_field_values(self.interior_affine, mesh, "f0")
        self.boundary_affine = as_field_values(self.boundary_affine, mesh, "g0")
        if self.interior_linear < 0 or self.boundary_linear < 0 \
                or self.boundary_multiplier < 0:
            raise BracketError("linear coefficients and the boundary "
                               "multiplier must be nonnegative")

    def interior_rhs(self, u):
        """F(., u) = K exp(2u) - A u - f0."""
        return (self.interior_reaction * np.exp(2.0 * u)
                - self.interior_linear * u - self.interior_affine)

    def boundary_rhs(self, u):
        """G(., u) = c sigma exp(u) - kappa u - g0."""
        return (self.boundary_multiplier * self.boundary_reaction * np.exp(u)
                - self.boundary_linear * u - self.boundary_affine)

    def residual(self, u):
        ops = self.operators
        return (ops.stiffness @ u - ops.mass * self.interior_rhs(u)
                - ops.boundary_mass * self.boundary_rhs(u))

    def residual_norms(self, u):
        """Mass-normalized sup residuals over interior and boundary rows."""
        r = self.residual(u)
        ops = self.operators
        bd = ops.mesh.is_boundary_vertex
        interior = float(np.max(np.abs(r[~bd]) / ops.mass[~bd])) \
            if np.any(~bd) else 0.0
        boundary = float(np.max(np.abs(r[bd]) / ops.boundary_mass[bd]))
        return interior, boundary

    def residual_scale(self, u):
        """Componentwise magnitude scale for sign checks of residual rows."""
        ops = self.operators
        abs_s = sparse.csr_matrix(abs(ops.stiffness))
        return (abs_s @ np.abs(u)
                + ops.mass * (1.0 + np.abs(self.interior_rhs(u)))
                + ops.boundary_mass * (1.0 + np.abs(self.boundary_rhs(u))))

    def shift_envelope(self, u_plus):
        """Smallest safe shifts (before margin) for the bracket top.

        The iteration map stays order preserving when lam bounds the
        reaction slope from below on the bracket; |K| and |sigma| cover
        both signs, which also dominates the positive-part envelope.
        """
        lam = self.interior_linear + 2.0 * float(np.max(
            np.abs(self.interior_reaction) * np.exp(2.0 * u_plus)))
        bd = self.operators.mesh.is_boundary_vertex
        mu = self.boundary_linear + self.boundary_multiplier * float(np.max(
            np.abs(self.boundary_reaction[bd]) * np.exp(u_plus[bd])))
        return lam, mu


@dataclass
class Bracket:
    """Ordered sub/super-solution pair with its construction constants."""
    u_minus: np.ndarray
    u_plus: np.ndarray
    thresholds: dict = field(default_factory=dict)
    check_slack: float = EXACT_BRACKET_SLACK


def bracket_defects(problem, bracket):
    """Signed worst-case violations (order, super sign, sub sign).

    All three are <= 0 for a valid bracket: reported positive values
    measure how badly the corresponding inequality fails, relative to the
    componentwise residual scale.
    """
    order = float(np.max(bracket.u_minus - bracket.u_plus))
    r_plus = problem.residual(bracket.u_plus)
    r_minus = problem.residual(bracket.u_minus)
    s_plus = problem.residual_scale(bracket.u_plus)
    s_minus = problem.residual_scale(bracket.u_minus)
    super_violation = float(np.max(-r_plus / s_plus))
    sub_violation = float(np.max(r_minus / s_minus))
    return order, super_violation, sub_violation


def check_bracket(problem, bracket, slack=None):
    """Raise BracketError unless the bracket inequalities hold."""
    if slack is None:
        slack = bracket.check_slack
    order, sup_v, sub_v = bracket_defects(problem, bracket)
    if order > 0.0:
        raise BracketError("bracket order violated: max(u_minus - u_plus) "
                           "= %.3e > 0" % order)
    if sup_v > slack:
        raise BracketError("super-solution inequality fails by relative "
                           "%.3e (slack %.1e)" % (sup_v, slack))
    if sub_v > slack:
        raise BracketError("sub-solution inequality fails by relative "
                           "%.3e (slack %.1e)" % (sub_v, slack))


@dataclass
class IterationConfig:
    tol: float = 1e-10
    max_iters: int = 2000
    shift_margin: float = None   # None: 0.1 * (1 + lam_envelope)
    smallness_check: bool = True


@dataclass
class IterationTrace:
    """Per-iteration diagnostics of one monotone run."""
    lambda_shift: float = 0.0
    mu_shift: float = 0.0
    deltas: list = field(default_factory=list)
    residual_sups: list = field(default_factory=list)
    monotone_flags: list = field(default_factory=list)
    lower_gap: list = field(default_factory=list)
    smallness: dict = field(default_factory=dict)
    refactorizations: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.deltas)

    def summary(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "lambda_shift": self.lambda_shift,
            "mu_shift": self.mu_shift,
            "refactorizations": len(self.refactorizations),
            "final_residual": self.residual_sups[-1] if self.residual_sups else 0.0,
            "final_delta": self.deltas[-1] if self.deltas else 0.0,
            "monotone": bool(all(self.monotone_flags)),
            "smallness": dict(self.smallness),
        }


def monotone_iterate(problem, bracket, config=None):
    """Drive the shifted linear iteration from u_plus down to a solution.

    Returns ``(u, trace)`` with ``u_minus - tol <= u <= u_plus + tol``
    componentwise and both residual sups at most ``config.tol``.  Raises
    IterationError if monotonicity or the bracket order break (shifts too
    small for this mesh) or the budget runs out.

    Since each iterate is itself a discrete super-solution (order
    preservation makes the residual identity of the update one-signed),
    the shifts are recomputed from the current iterate whenever that
    shrinks them substantially; the factorization is rebuilt then and
    otherwise reused across iterations.
    """
    if config is None:
        config = IterationConfig()
    check_bracket(problem, bracket)

    ops = problem.operators

    def shifts_at(top):
        lam_env, mu_env = problem.shift_envelope(top)
        margin = config.shift_margin
        if margin is None:
            margin = 0.1 * (1.0 + lam_env)
        return lam_env + margin, mu_env + margin

    def factorize(lam, mu):
        return CachedFactorization(
            ops.stiffness
            + sparse.diags(lam * ops.mass + mu * ops.boundary_mass))

    lam, mu = shifts_at(bracket.u_plus)
    fact = factorize(lam, mu)

    trace = IterationTrace(lambda_shift=lam, mu_shift=mu)
    if config.smallness_check:
        bd = ops.mesh.is_boundary_vertex
        g_top = problem.boundary_rhs(bracket.u_plus)
        trace.smallness = {
            "sup_boundary_reaction": float(np.max(np.abs(g_top[bd]))),
            "sup_boundary_reaction_gradient":
                ops.boundary_tangential_gradient(g_top),
        }

    u = bracket.u_plus.copy()
    mono_slack = 1e-12 * (1.0 + float(np.max(np.abs(u))))
    for k in range(config.max_iters):
        lam_new, mu_new = shifts_at(u)
        if lam_new < 0.7 * lam or mu_new < 0.7 * mu:
            lam, mu = lam_new, mu_new
            fact = factorize(lam, mu)
            trace.refactorizations.append(k)
            trace.lambda_shift, trace.mu_shift = lam, mu
        rhs = (ops.mass * (lam * u + problem.interior_rhs(u))
               + ops.boundary_mass * (mu * u + problem.boundary_rhs(u)))
        u_next, _ = fact.solve(rhs)
        delta = float(np.max(np.abs(u_next - u)))
        mono = bool(np.all(u_next <= u + mono_slack))
        gap = float(np.min(u_next - bracket.u_minus))
        res = max(problem.residual_norms(u_next))
        trace.deltas.append(delta)
        trace.residual_sups.append(res)
        trace.monotone_flags.append(mono)
        trace.lower_gap.append(gap)
        if not mono:
            raise IterationError(
                "iterate %d not componentwise nonincreasing (max increase "
                "%.3e): shifts lam=%.3e mu=%.3e too small or mesh too "
                "coarse; smallness diagnostics %s"
                % (k + 1, float(np.max(u_next - u)), lam, mu, trace.smallness))
        if gap < -(config.tol + mono_slack):
            raise IterationError(
                "bracket order violated at iterate %d: u dropped %.3e "
                "below u_minus" % (k + 1, -gap))
        u = u_next
        if res <= config.tol:
            trace.converged = True
            return u, trace
    raise IterationError("no convergence in %d iterations (last residual "
                         "%.3e, tol %.1e)"
                         % (config.max_iters, trace.residual_sups[-1],
                            config.tol))


# ----------------------------------------------------------------------
# bracket builders


def _doubling_search(start, cap, accept):
    """Smallest power-of-two multiple of ``start`` that ``accept`` takes."""
    value = start
    while value <= cap:
        if accept(value):
            return value
        value *= 2.0
    raise BracketError("shift search exceeded cap %.1e (degenerate data)" % cap)


def bracket_for_robin_problem(operators, K, sigma=None, kappa=1.0, c=None,
                              f=None, a=1.0, b1=-1.0):
    """Bracket for  -Lap u = K exp(2u),  du/dnu + kappa u = c sigma exp(u).

    The super-solution solves the linear Robin problem with data
    ``(f, a)`` (defaults 1, 1) and is positive by the maximum principle;
    thresholds ``C0 = min f exp(-2 u0)`` and ``C1 = a / max(sigma_+
    exp(u0))`` (infinite for sigma <= 0) certify the inequalities.  The
    sub-solution shifts a compatible Neumann solution down until both
    discrete sign conditions hold, exactly.

    Returns ``(problem, bracket)`` where the problem carries the chosen
    multiplier ``c`` (defaults to ``min(1, 0.9 C1)``, or 0 without sigma).
    """
    mesh = operators.mesh
    if kappa <= 0:
        raise BracketError("kappa must be positive for the Robin bracket")
    if a <= 0 or b1 >= 0:
        raise BracketError("need a > 0 and b1 < 0")
    K = as_field_values(K, mesh, "K")
    has_sigma = sigma is not None
    sigma = as_field_values(sigma, mesh, "sigma")
    f = as_field_values(1.0 if f is None else f, mesh, "f")
    if np.min(f) <= 0:
        raise BracketError("super-solution data f must be positive")

    u0, _ = solve_robin(RobinProblem(operators, robin_coefficient=kappa,
                                     interior_rhs=f, boundary_rhs=a))
    c0 = float(np.min(f * np.exp(-2.0 * u0)))
    bd = mesh.is_boundary_vertex
    sigma_pos = np.maximum(sigma[bd], 0.0) * np.exp(u0[bd])
    c1 = float(a / np.max(sigma_pos)) if np.max(sigma_pos) > 0 else math.inf

    if float(np.max(K)) > c0 * (1.0 + 1e-12):
        raise BracketError(
            "max K = %.6g exceeds the bracket threshold C0 = %.6g; scale K "
            "down (the gaussian prescription pipeline does this "
            "automatically)" % (float(np.max(K)), c0))
    if c is None:
        c = min(1.0, 0.9 * c1) if has_sigma and np.isfinite(c1) \
            else (1.0 if has_sigma else 0.0)
    if c > c1 * (1.0 + 1e-12):
        raise BracketError("boundary multiplier c = %.6g exceeds C1 = %.6g"
                           % (c, c1))

    problem = SemilinearProblem(operators, boundary_linear=kappa,
                                interior_reaction=K, boundary_reaction=sigma,
                                boundary_multiplier=c)

    b2 = -b1 * operators.volume / operators.boundary_length
    u1, _ = solve_neumann_compatible(operators, b1, b2)

    def accept(shift):
        u_minus = u1 - shift
        if np.any(u_minus > u0):
            return False
        r = problem.residual(u_minus)
        return bool(np.all(r <= EXACT_BRACKET_SLACK
                           * problem.residual_scale(u_minus)))

    shift = _doubling_search(1.0, GROWTH_CAP, accept)
    bracket = Bracket(u1 - shift, u0,
                      thresholds={"C0": c0, "C1": c1, "c": c, "kappa": kappa,
                                  "sub_shift": shift, "b1": b1, "b2": b2})
    check_bracket(problem, bracket)
    return problem, bracket


def bracket_for_neumann_problem(operators, K, sigma=None, A=1.0, c=None,
                                a=1.0, b=1.0, b1=1.0):
    """Bracket for  -Lap u + A u = K exp(2u),  du/dnu = c sigma exp(u).

    Mirrors the Robin builder with the zeroth-order interior term
    providing coercivity: the super-solution solves
    ``(-Lap + A) u0 = a, du0/dnu = b`` and yields
    ``C2 = a exp(-2 max u0)`` and ``C3 = b / max(sigma_+ exp(u0))``.
    """
    mesh = operators.mesh
    if A <= 0:
        raise BracketError("A must be positive for the Neumann bracket")
    if a <= 0 or b <= 0 or b1 <= 0:
        raise BracketError("need a, b, b1 > 0")
    K = as_field_values(K, mesh, "K")
    has_sigma = sigma is not None
    sigma = as_field_values(sigma, mesh, "sigma")

    u0, _ = solve_robin(RobinProblem(operators, robin_coefficient=0.0,
                                     interior_rhs=a, boundary_rhs=b,
                                     interior_coefficient=A))
    c2 = float(a * np.exp(-2.0 * np.max(u0)))
    bd = mesh.is_boundary_vertex
    sigma_pos = np.maximum(sigma[bd], 0.0) * np.exp(u0[bd])
    c3 = float(b / np.max(sigma_pos)) if np.max(sigma_pos) > 0 else math.inf

    if float(np.max(K)) > c2 * (1.0 + 1e-12):
        raise BracketError("max K = %.6g exceeds C2 = %.6g; scale K down"
                           % (float(np.max(K)), c2))
    if c is None:
        c = min(1.0, 0.9 * c3) if has_sigma and np.isfinite(c3) \
            else (1.0 if has_sigma else 0.0)
    if c > c3 * (1.0 + 1e-12):
        raise BracketError("boundary multiplier c = %.6g exceeds C3 = %.6g"
                           % (c, c3))

    problem = SemilinearProblem(operators, interior_linear=A,
                                interior_reaction=K, boundary_reaction=sigma,
                                boundary_multiplier=c)

    b2 = -b1 * operators.volume / operators.boundary_length
    u1, _ = solve_neumann_compatible(operators, b1, b2)

    def accept(shift):
        u_minus = u1 - shift
        if np.any(u_minus > u0):
            return False
        r = problem.residual(u_minus)
        return bool(np.all(r <= EXACT_BRACKET_SLACK
                           * problem.residual_scale(u_minus)))

    shift = _doubling_search(1.0, GROWTH_CAP, accept)
    bracket = Bracket(u1 - shift, u0,
                      thresholds={"C2": c2, "C3": c3, "c": c, "A": A,
                                  "sub_shift": shift, "b1": b1, "b2": b2})
    check_bracket(problem, bracket)
    return problem, bracket


def _transform_slack(operators):
    # brackets built through w = exp(-2u) satisfy the u-space inequalities
    # only up to the consistency error of the discrete Laplacian applied
    # to a log-transformed solution field; scale the sign slack with h
    return max(1e-6, 0.5 * operators.h_max)


def bracket_for_curvature_pair(operators, K, sigma, kappa=1.0, config=None,
                               bisect_iters=40, c_floor_factor=1e-6):
    """Bracket and largest multiplier D for the chi = 0 curvature pair.

    Problem:  -Lap u = K exp(2u),  du/dnu = c sigma exp(u)  with K < 0
    everywhere and sigma > 0 on the boundary.  The super-solution is the
    (nonpositive, nontrivial) solution of the auxiliary Robin problem
    with zero boundary data, obtained by a nested monotone run; the
    sub-solution is built in w-space: w1 = w0 + C with
    ``-Lap w0 = -2K, dw0/dnu = A_const`` compatible and A_const < 0, and
    ``u_minus = -log(w1)/2``.  D is found by bisection as the largest c
    for which the order relation, the w-space boundary inequality and the
    u-space residual signs all verify discretely.

    Returns ``(problem, bracket, D)`` with the problem carrying c = D.
    """
    mesh = operators.mesh
    K = as_field_values(K, mesh, "K")
    sigma = as_field_values(sigma, mesh, "sigma")
    bd = mesh.is_boundary_vertex
    if np.max(K) >= 0:
        raise BracketError("K must be negative everywhere: max K = %.6g at "
                           "vertex %d" % (float(np.max(K)), int(np.argmax(K))))
    sig_bd = sigma[bd]
    if np.min(sig_bd) <= 0:
        i = mesh.boundary_vertices[int(np.argmin(sig_bd))]
        raise BracketError("sigma must be positive on the boundary: "
                           "min sigma = %.6g at vertex %d"
                           % (float(np.min(sig_bd)), int(i)))

    aux_problem, aux_bracket = bracket_for_robin_problem(operators, K,
                                                         kappa=kappa)
    u_plus, aux_trace = monotone_iterate(aux_problem, aux_bracket, config)
    if float(np.max(u_plus)) > 1e-8:
        raise BracketError("auxiliary super-solution not nonpositive "
                           "(max %.3e): maximum principle failed on this "
                           "mesh" % float(np.max(u_plus)))
    if float(np.min(u_plus)) >= -1e-12:
        raise BracketError("auxiliary super-solution vanishes identically")

    a_const = -2.0 * float((operators.mass * (-K)).sum()) \
        / operators.boundary_length
    w0, _ = solve_neumann_compatible(operators, -2.0 * K, a_const)

    top = -kappa * u_plus[bd]
    c_sup = float(np.min(top / (sig_bd * np.exp(u_plus[bd]))))
    if c_sup <= 0:
        raise BracketError("no admissible boundary multiplier: the "
                           "auxiliary solution vanishes on the boundary")

    slack = _transform_slack(operators)
    ordering_floor = np.exp(-2.0 * u_plus) - w0

    def build_candidate(c):
        need_bd = (abs(a_const) / (2.0 * c * sig_bd)) ** 2 - w0[bd]
        c_shift = max(float(np.max(ordering_floor)), float(np.max(need_bd)),
                      1.0 - float(np.min(w0)))
        c_shift *= 1.0 + 1e-9
        w1 = w0 + c_shift
        u_minus = -0.5 * np.log(w1)
        problem = SemilinearProblem(operators, interior_reaction=K,
                                    boundary_reaction=sigma,
                                    boundary_multiplier=c)
        bracket = Bracket(u_minus, u_plus, check_slack=slack,
                          thresholds={"D": c, "c_sup": c_sup,
                                      "A_const": a_const,
                                      "w_shift": c_shift,
                                      "kappa_aux": kappa})
        return problem, bracket

    def admissible(c):
        if c > c_sup:
            return False
        problem, bracket = build_candidate(c)
        order, sup_v, sub_v = bracket_defects(problem, bracket)
        return order <= 0.0 and sup_v <= slack and sub_v <= slack

    worst = None
    hi = c_sup
    if admissible(hi):
        d = hi
    else:
        lo = hi
        floor = c_floor_factor * c_sup
        while lo > floor and not admissible(lo):
            lo *= 0.5
        if lo <= floor:
            problem, bracket = build_candidate(c_sup)
            worst = bracket_defects(problem, bracket)
            raise BracketError("bisection found no admissible c above "
                               "%.3e; worst violations (order, super, sub) "
                               "= %s" % (floor, worst))
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid
        d = lo

    problem, bracket = build_candidate(d)
    check_bracket(problem, bracket)
    bracket.thresholds.update({"C0": aux_bracket.thresholds["C0"],
                               "C1": aux_bracket.thresholds["C1"]})
    logger.info("chi=0 pair bracket: D = %.6g (cap %.6g), aux iterations %d",
                d, c_sup, aux_trace.iterations)
    return problem, bracket, d


def bracket_for_constant_flux(operators, K, q_exponent=3.0, kappa_factor=0.9,
                              xi_halvings=80):
    """Bracket for  -Lap u = K exp(2u),  du/dnu = kappa_tilde  with K < 0.

    The flux constant obeys ``kappa_tilde * volume^(1/q) < 1`` for a fixed
    exponent q > 2 (default 3, factor 0.9 of the cap).  The super-solution
    is ``-log(xi w0)/2`` with w0 > 0 solving the linear Robin problem
    ``-Lap w0 = -K, dw0/dnu + 2 kappa_tilde w0 = 0`` and xi shrunk by
    halving until ``xi (|grad w0|^2 / w0 - K) <= -2K`` pointwise; the
    sub-solution shifts a compatible Neumann solution with data
    ``(A_const, kappa_tilde)`` down, which keeps its flux equation exact.

    Returns ``(problem, bracket, kappa_tilde)``.
    """
    mesh = operators.mesh
    if q_exponent <= 2:
        raise BracketError("q must exceed 2")
    K = as_field_values(K, mesh, "K")
    if np.max(K) >= 0:
        raise BracketError("K must be negative everywhere: max K = %.6g"
                           % float(np.max(K)))
    kappa_tilde = kappa_factor * operators.volume ** (-1.0 / q_exponent)

    w0, _ = solve_robin(RobinProblem(operators,
                                     robin_coefficient=2.0 * kappa_tilde,
                                     interior_rhs=-K))
    if float(np.min(w0)) <= 0:
        raise BracketError("w0 not positive up to the boundary (min %.3e): "
                           "mesh quality prevents the Hopf-type positivity"
                           % float(np.min(w0)))

    gradsq = operators.gradient_squared(w0)
    ratio = gradsq / w0 - K
    xi = 1.0
    for _ in range(xi_halvings):
        if np.all(xi * ratio <= -2.0 * K):
            break
        xi *= 0.5
    else:
        raise BracketError("xi search failed: max discrete gradient ratio "
                           "%.3e" % float(np.max(ratio / (-2.0 * K))))

    u_plus = -0.5 * np.log(xi * w0)
    problem = SemilinearProblem(operators, interior_reaction=K,
                                boundary_affine=-kappa_tilde)

    a_const = -kappa_tilde * operators.boundary_length / operators.volume
    u0, _ = solve_neumann_compatible(operators, a_const, kappa_tilde)

    slack = _transform_slack(operators)

    def accept(shift):
        u_minus = u0 - shift
        if np.any(u_minus > u_plus):
            return False
        r = problem.residual(u_minus)
        return bool(np.all(r <= EXACT_BRACKET_SLACK
                           * problem.residual_scale(u_minus)))

    shift = _doubling_search(1.0, GROWTH_CAP, accept)
    bracket = Bracket(u0 - shift, u_plus, check_slack=slack,
                      thresholds={"kappa_tilde": kappa_tilde, "xi": xi,
                                  "q": q_exponent, "A_const": a_const,
                                  "sub_shift": shift})
    check_bracket(problem, bracket)
    return problem, bracket, kappa_tilde
