"""Spatial discretization: SBP operator, projector, liftings, nonlinearity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasnet.discrete import sbp_derivative

from conftest import SOUND_SPEED


def test_sbp_summation_by_parts_identity():
    """W D + D^T W equals the boundary matrix diag(-1, 0, ..., 0, 1) exactly."""
    for N in (4, 9, 16):
        h = 1.3 / N
        D = sbp_derivative(N, h)
        w = np.full(N + 1, h)
        w[0] = w[-1] = h / 2
        B = np.diag(w) @ D + D.T @ np.diag(w)
        expected = np.zeros((N + 1, N + 1))
        expected[0, 0] = -1.0
        expected[-1, -1] = 1.0
        assert np.max(np.abs(B - expected)) == 0.0


def test_sbp_exact_on_linear_functions():
    N, h = 12, 0.25
    D = sbp_derivative(N, h)
    x = h * np.arange(N + 1)
    assert np.max(np.abs(D @ (2.0 * x + 1.0) - 2.0)) < 1e-13


def test_transport_operator_skew_in_energy_inner_product(tree, rng):
    disc = tree.disc
    worst = 0.0
    for _ in range(50):
        z = disc.Pi @ rng.standard_normal(disc.grid.ndof)
        worst = max(worst, abs(disc.inner(disc.A @ z, z)) / disc.inner(z, z))
    assert worst < 1e-12


def test_projector_is_m_orthogonal(tree, rng):
    disc = tree.disc
    assert np.max(np.abs(disc.Pi @ disc.Pi - disc.Pi)) < 1e-11
    x = rng.standard_normal(disc.grid.ndof)
    y = rng.standard_normal(disc.grid.ndof)
    assert abs(disc.inner(disc.Pi @ x, y) - disc.inner(x, disc.Pi @ y)) < 1e-10


def test_projector_annihilates_constraints(tree, rng):
    """Projected states satisfy all coupling and boundary constraints."""
    disc = tree.disc
    z = disc.Pi @ rng.standard_normal(disc.grid.ndof)
    assert np.max(np.abs(disc.C @ z)) < 1e-10


def test_boundary_lifting_composition(tree):
    """The transport image of the affine lifting is the constant lifting."""
    assert np.max(np.abs(tree.disc.Atilde @ tree.disc.B1 - tree.disc.B0)) < 1e-12


def test_active_slots_match_classification(tree, tree_classification):
    disc, topo = tree.disc, tree.topology
    for k, pipe in enumerate(topo.pipes):
        assert disc.active_slots[2 * k] == (pipe.start in tree_classification.entry)
        assert disc.active_slots[2 * k + 1] == (pipe.end in tree_classification.exit)


def test_lifting_respects_boundary_values(tree, rng):
    disc = tree.disc
    phi = rng.standard_normal(2 * tree.topology.m) * disc.active_slots
    lifted = disc.lift(phi)
    for k in range(tree.topology.m):
        if disc.active_slots[2 * k]:
            assert lifted[tree.grid.p_index(k, 0)] == pytest.approx(phi[2 * k])
        if disc.active_slots[2 * k + 1]:
            N = tree.grid.pipes[k].N
            assert lifted[tree.grid.q_index(k, N)] == pytest.approx(phi[2 * k + 1])


def test_jacobian_matches_nonlinearity_difference(single_pipe, rng):
    disc = single_pipe.disc
    v = single_pipe.steady.v_e + 0.05 * rng.standard_normal(disc.grid.ndof)
    w = rng.standard_normal(disc.grid.ndof)
    eps = 1e-6
    fd = (disc.nonlinearity(v + eps * w) - disc.nonlinearity(v - eps * w)) / (2 * eps)
    an = disc.jacobian_apply(v, w)
    assert np.max(np.abs(fd - an)) < 1e-7


def test_jacobian_adjoint_is_exact_transpose(single_pipe, rng):
    disc = single_pipe.disc
    v = single_pipe.steady.v_e
    w = rng.standard_normal(disc.grid.ndof)
    z = rng.standard_normal(disc.grid.ndof)
    lhs = disc.inner(disc.jacobian_apply(v, w), z)
    rhs = disc.inner(w, disc.jacobian_adjoint_apply(v, z))
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_nonlinearity_lipschitz_within_analytic_bound(single_pipe, seed):
    disc, box, grid = single_pipe.disc, single_pipe.box, single_pipe.grid
    gen = np.random.default_rng(seed)
    lo, hi = box.lower_vec(grid), box.upper_vec(grid)
    w1 = lo + gen.random(grid.ndof) * (hi - lo)
    w2 = lo + gen.random(grid.ndof) * (hi - lo)
    dn = disc.norm(w1 - w2)
    if dn == 0.0:
        return
    ratio = disc.norm(disc.nonlinearity(w1) - disc.nonlinearity(w2)) / dn
    assert ratio <= disc.lipschitz_bound(box)


def test_vacuum_guard_reports_location(single_pipe):
    disc = single_pipe.disc
    v = single_pipe.steady.v_e.copy()
    v[single_pipe.grid.p_index(0, 3)] = 0.01
    with pytest.raises(Exception, match="pipe 'e1' node 3"):
        disc.nonlinearity(v, p_floor=0.5)


def test_mass_matrix_is_trapezoid_energy_weight(single_pipe):
    """The M-norm of the equilibrium equals the trapezoid quadrature of
    D^2 (p^2 + c^2 q^2) along the pipe."""
    sc = single_pipe
    disc, grid = sc.disc, sc.grid
    k = 0
    params = sc.topology.pipes[k].params
    N = grid.pipes[k].N
    h = params.length / N
    p = sc.steady.v_e[grid.p_slice(k)]
    q = sc.steady.v_e[grid.q_slice(k)]
    w = np.full(N + 1, h)
    w[0] = w[-1] = h / 2
    expected = params.diameter ** 2 * np.sum(w * (p ** 2 + SOUND_SPEED ** 2 * q ** 2))
    assert disc.inner(sc.steady.v_e, sc.steady.v_e) == pytest.approx(expected, rel=1e-13)
