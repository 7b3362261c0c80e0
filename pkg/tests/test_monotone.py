import math

import numpy as np
import pytest

import meshgen
import oracles
from curvforge import (Bracket, BracketError, IterationConfig, IterationError,
                       SemilinearProblem, assemble, bracket_for_constant_flux,
                       bracket_for_curvature_pair, bracket_for_neumann_problem,
                       bracket_for_robin_problem, check_bracket,
                       monotone_iterate)


@pytest.fixture(scope="module")
def annulus_ops():
    mesh, metric = meshgen.annulus(3, 18)
    return mesh, assemble(mesh, metric)


@pytest.fixture(scope="module")
def tiny_ops():
    mesh, metric = meshgen.annulus(1, 6)  # 12 vertices
    return mesh, assemble(mesh, metric)


def test_zero_data_fixed_point(annulus_ops):
    mesh, ops = annulus_ops
    problem = SemilinearProblem(ops, boundary_linear=1.0)
    bracket = Bracket(np.full(mesh.vertex_count, -1.0),
                      np.full(mesh.vertex_count, 1.0))
    u, trace = monotone_iterate(problem, bracket,
                                IterationConfig(tol=1e-12))
    assert np.max(np.abs(u)) < 1e-9
    assert all(trace.monotone_flags)


def test_tiny_mesh_matches_dense_newton(tiny_ops):
    mesh, ops = tiny_ops
    K = np.full(mesh.vertex_count, -1.0)
    problem, bracket = bracket_for_robin_problem(ops, K, kappa=1.0)
    u, trace = monotone_iterate(problem, bracket, IterationConfig(tol=1e-12))
    dense = oracles.dense_newton(problem, bracket.u_plus)
    assert np.max(np.abs(u - dense)) < 1e-8
    assert all(trace.monotone_flags)
    assert np.all(u >= bracket.u_minus - 1e-10)
    assert np.all(u <= bracket.u_plus + 1e-10)


def test_disk_matches_dense_newton():
    mesh, metric = meshgen.hex_disk(2)  # 19 vertices
    ops = assemble(mesh, metric)
    K = np.full(mesh.vertex_count, -1.0)
    problem, bracket = bracket_for_robin_problem(ops, K, kappa=1.0)
    u, _ = monotone_iterate(problem, bracket)
    dense = oracles.dense_newton(problem, bracket.u_plus)
    assert np.max(np.abs(u - dense)) < 1e-8


def test_iterates_nonincreasing_is_enforced(annulus_ops):
    mesh, ops = annulus_ops
    pos = mesh.vertex_positions
    K = -1.0 + 0.3 * np.sin(pos[:, 0])
    problem, bracket = bracket_for_robin_problem(ops, K, kappa=0.7)
    _, trace = monotone_iterate(problem, bracket)
    assert trace.monotone_flags and all(trace.monotone_flags)
    assert min(trace.lower_gap) > -1e-10


def test_robin_bracket_contains_zero_for_zero_data(annulus_ops):
    mesh, ops = annulus_ops
    zeros = np.zeros(mesh.vertex_count)
    problem, bracket = bracket_for_robin_problem(ops, zeros, sigma=zeros,
                                                 kappa=1.0)
    assert np.all(bracket.u_minus <= 0.0)
    assert np.all(bracket.u_plus >= 0.0)


def test_robin_super_solution_positive(annulus_ops):
    # f = 1 > 0, a = 1 > 0 force u0 > 0 by the maximum principle
    mesh, ops = annulus_ops
    problem, bracket = bracket_for_robin_problem(
        ops, np.zeros(mesh.vertex_count), kappa=1.0)
    assert np.min(bracket.u_plus) > 0.0
    dense = oracles.dense_robin_solve(ops, 1.0, 1.0, 1.0)
    assert np.max(np.abs(bracket.u_plus - dense)) < 1e-10
    assert np.min(dense) > 0.0


def test_robin_threshold_inequalities_hold_exactly(annulus_ops):
    mesh, ops = annulus_ops
    pos = mesh.vertex_positions
    sigma = 0.5 + 0.25 * np.sin(2.0 * pos[:, 1])
    for f_scale, a in ((1.0, 1.0), (2.0, 2.0)):
        f = np.full(mesh.vertex_count, f_scale)
        problem, bracket = bracket_for_robin_problem(
            ops, np.zeros(mesh.vertex_count), sigma=sigma, kappa=1.0,
            f=f, a=a)
        u0 = bracket.u_plus
        c0 = bracket.thresholds["C0"]
        c1 = bracket.thresholds["C1"]
        assert np.all(f >= c0 * np.exp(2 * u0) - 1e-14)
        bd = mesh.is_boundary_vertex
        assert np.all(a >= c1 * (sigma * np.exp(u0))[bd] - 1e-12)
        assert c0 > 0 and c1 > 0


def test_robin_negative_sigma_gives_unbounded_c1(annulus_ops):
    mesh, ops = annulus_ops
    sigma = np.full(mesh.vertex_count, -5.0)
    problem, bracket = bracket_for_robin_problem(
        ops, np.zeros(mesh.vertex_count), sigma=sigma, kappa=1.0, c=3.0)
    assert math.isinf(bracket.thresholds["C1"])
    # any c is admissible for the boundary inequality; iteration still runs
    u, _ = monotone_iterate(problem, bracket)
    assert np.all(u <= bracket.u_plus + 1e-10)


def test_robin_K_above_threshold_rejected(annulus_ops):
    mesh, ops = annulus_ops
    problem, bracket = bracket_for_robin_problem(
        ops, np.zeros(mesh.vertex_count), kappa=1.0)
    big = 10.0 * bracket.thresholds["C0"]
    with pytest.raises(BracketError, match="C0"):
        bracket_for_robin_problem(ops, np.full(mesh.vertex_count, big),
                                  kappa=1.0)


def test_neumann_bracket_basics(annulus_ops):
    mesh, ops = annulus_ops
    zeros = np.zeros(mesh.vertex_count)
    problem, bracket = bracket_for_neumann_problem(ops, zeros, sigma=zeros,
                                                   A=1.0, a=1.0, b=1.0)
    u0 = bracket.u_plus
    assert np.min(u0) >= -1e-12  # maximum principle
    assert abs(bracket.thresholds["C2"]
               - math.exp(-2.0 * float(np.max(u0)))) < 1e-14
    assert np.all(bracket.u_minus <= bracket.u_plus)
    # compatible Neumann data chosen exactly
    b1, b2 = bracket.thresholds["b1"], bracket.thresholds["b2"]
    assert abs(b1 * ops.volume + b2 * ops.boundary_length) < 1e-12


def test_neumann_bracket_with_reaction_matches_newton(tiny_ops):
    mesh, ops = tiny_ops
    pos = mesh.vertex_positions
    K = np.full(mesh.vertex_count, -1.0)
    sigma = 0.5 * pos[:, 0]
    problem, bracket = bracket_for_neumann_problem(ops, K, sigma=sigma, A=1.0)
    u, trace = monotone_iterate(problem, bracket, IterationConfig(tol=1e-12))
    dense = oracles.dense_newton(problem, bracket.u_plus)
    assert np.max(np.abs(u - dense)) < 1e-8
    assert all(trace.monotone_flags)


def test_pair_bracket_chi0(annulus_ops):
    mesh, ops = annulus_ops
    V = mesh.vertex_count
    K = np.full(V, -1.0)
    sigma = np.ones(V)
    problem, bracket, d = bracket_for_curvature_pair(ops, K, sigma, kappa=1.0)
    assert d > 0
    assert problem.boundary_multiplier == d
    # super-solution nonpositive and nontrivial
    assert np.max(bracket.u_plus) <= 1e-10
    assert np.min(bracket.u_plus) < -1e-3
    assert np.all(bracket.u_minus <= bracket.u_plus)
    # w1 >= 1 makes u_minus nonpositive
    assert np.max(bracket.u_minus) <= 0.0
    u, trace = monotone_iterate(problem, bracket)
    dense = oracles.dense_newton(problem, bracket.u_plus)
    assert np.max(np.abs(u - dense)) < 1e-8
    assert all(trace.monotone_flags)


def test_pair_bracket_sign_preconditions(annulus_ops):
    mesh, ops = annulus_ops
    V = mesh.vertex_count
    K = np.full(V, -1.0)
    sigma = np.ones(V)
    K_bad = K.copy()
    K_bad[5] = 0.1
    with pytest.raises(BracketError, match="negative everywhere"):
        bracket_for_curvature_pair(ops, K_bad, sigma)
    sigma_bad = sigma.copy()
    sigma_bad[mesh.boundary_vertices[0]] = 0.0
    with pytest.raises(BracketError, match="positive on the boundary"):
        bracket_for_curvature_pair(ops, K, sigma_bad)


def test_constant_flux_kappa_bound():
    # volume 8 with q = 3 caps kappa_tilde at 1/2; default is 0.45
    mesh, metric = meshgen.grid_with_holes(nx=8, ny=4, holes=(),
                                           width=4.0, height=2.0)
    ops = assemble(mesh, metric)
    assert abs(ops.volume - 8.0) < 1e-12
    K = np.full(mesh.vertex_count, -1.0)
    problem, bracket, kt = bracket_for_constant_flux(ops, K, q_exponent=3.0)
    assert abs(kt - 0.9 * 8.0 ** (-1.0 / 3.0)) < 1e-14
    assert kt < 0.5
    assert kt * ops.volume ** (1.0 / 3.0) < 1.0


def test_constant_flux_bracket_and_solution():
    mesh, metric = meshgen.hex_disk(4)
    ops = assemble(mesh, metric)
    K = np.full(mesh.vertex_count, -1.0)
    problem, bracket, kt = bracket_for_constant_flux(ops, K)
    # w0 > 0 is part of the construction; xi halving preserves feasibility
    xi = bracket.thresholds["xi"]
    assert 0 < xi <= 1.0
    u, trace = monotone_iterate(problem, bracket)
    dense = oracles.dense_newton(problem, bracket.u_plus)
    assert np.max(np.abs(u - dense)) < 1e-8
    assert all(trace.monotone_flags)
    # flux equation holds: boundary residual rows vanish at the solution
    assert max(problem.residual_norms(u)) < 1e-9


def test_constant_flux_w0_positive_dense_check():
    mesh, metric = meshgen.hex_disk(3)
    ops = assemble(mesh, metric)
    K = np.full(mesh.vertex_count, -1.0)
    _, _, kt = bracket_for_constant_flux(ops, K)
    dense = oracles.dense_robin_solve(ops, 2.0 * kt, -K, 0.0)
    assert np.min(dense) > 0.0


def test_check_bracket_rejects_swapped_pair(annulus_ops):
    mesh, ops = annulus_ops
    problem = SemilinearProblem(ops, boundary_linear=1.0)
    bad = Bracket(np.full(mesh.vertex_count, 1.0),
                  np.full(mesh.vertex_count, -1.0))
    with pytest.raises(BracketError, match="order"):
        check_bracket(problem, bad)


def test_check_bracket_rejects_wrong_signs(annulus_ops):
    mesh, ops = annulus_ops
    # u_plus = -1 is not a super-solution of the zero-data Robin problem
    problem = SemilinearProblem(ops, boundary_linear=1.0)
    bad = Bracket(np.full(mesh.vertex_count, -2.0),
                  np.full(mesh.vertex_count, -1.0))
    with pytest.raises(BracketError, match="super-solution"):
        check_bracket(problem, bad)


def test_max_iters_exhaustion_raises(annulus_ops):
    mesh, ops = annulus_ops
    K = np.full(mesh.vertex_count, -1.0)
    problem, bracket = bracket_for_robin_problem(ops, K, kappa=1.0)
    with pytest.raises(IterationError, match="no convergence"):
        monotone_iterate(problem, bracket,
                         IterationConfig(tol=1e-12, max_iters=2))
