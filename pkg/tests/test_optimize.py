"""Projected gradient optimizer, penalty stages and the KKT report."""

import numpy as np
import pytest

from gasnet.optimize import (
    CostConfig,
    OptimizeError,
    _random_reduced,
    delta_homotopy,
    kkt_residual,
    optimize,
)
from gasnet.scenario import scenario_from_dict

from conftest import single_pipe_doc


@pytest.fixture(scope="module")
def quick():
    return scenario_from_dict(single_pipe_doc(
        grid={"nodes_per_meter": 8}, horizon=0.3, time_steps=24,
        picard={"tol": 1e-12},
    ))


def test_equilibrium_target_needs_zero_iterations(quick):
    config = CostConfig(target_kind="equilibrium", sigma=1e-3,
                        grad_tol=1e-6, rho0=0.0)
    report = optimize(quick.problem, config)
    assert report.converged
    assert report.iterations == 0


def test_penalized_history_is_nonincreasing(quick):
    problem = quick.problem
    target = quick.steady.v_e.copy()
    target[quick.grid.p_slice(0)] += 0.01
    config = CostConfig(target_kind="constant", target_data=target,
                        sigma=1e-6, max_iters=40, grad_tol=1e-9, rho0=0.0)
    report = optimize(problem, config)
    hist = np.array(report.penalized_history)
    assert hist.size > 0
    assert np.all(np.diff(hist) <= 0.0)


def test_final_iterate_is_admissible(quick):
    problem = quick.problem
    target = quick.steady.v_e.copy()
    target[quick.grid.p_slice(0)] += 0.01
    config = CostConfig(target_kind="constant", target_data=target,
                        sigma=1e-6, max_iters=30, grad_tol=1e-9, rho0=0.0)
    report = optimize(problem, config)
    red = problem.reduced(report.final_signal)
    assert problem.space.is_admissible(red, tol=1e-9)


def test_inverse_crime_recovery(quick):
    """A target manufactured from a known control is recovered: the cost
    drops by many orders of magnitude from the equilibrium start."""
    problem = quick.problem
    rng = np.random.default_rng(0)
    seed_cfg = CostConfig(target_kind="constant", sigma=0.0,
                          target_data=_offset_target(quick))
    gdir = problem.riesz_gradient(problem.phi_e, seed_cfg)
    red_hat = problem.space.project_feasible(
        -0.5 * problem.space.kappa * gdir / np.max(np.abs(gdir)))
    traj_hat = problem.solve(problem.signal_from_reduced(red_hat))
    config = CostConfig(target_kind="trajectory",
                        target_data=traj_hat.midpoint_states(),
                        sigma=1e-12, max_iters=60, grad_tol=1e-14, rho0=0.0)
    j0 = problem.cost(problem.phi_e, config)
    report = optimize(problem, config)
    assert report.cost_history[-1] < 1e-6 * j0


def _offset_target(scenario):
    target = scenario.steady.v_e.copy()
    target[scenario.grid.p_slice(0)] += 0.02
    return target


def test_curvature_along_gradient_is_positive(quick):
    problem = quick.problem
    config = CostConfig(target_kind="constant", target_data=_offset_target(quick),
                        sigma=1e-6)
    from gasnet.adjoint import StepFactors
    traj = problem.solve(problem.phi_e)
    factors = StepFactors(problem.disc, traj, problem.phi_e.tau, problem.p_floor)
    g = problem.riesz_gradient(problem.phi_e, config, 0.0, traj, factors)
    curv = problem.curvature_along(g, config, 0.0, traj, factors)
    assert curv > 0.0


def test_random_reduced_is_admissible(quick):
    rng = np.random.default_rng(9)
    for _ in range(5):
        red = _random_reduced(quick.problem.space, rng,
                              amplitude=quick.problem.space.kappa)
        assert quick.problem.space.is_admissible(red, tol=1e-9)
        assert np.all(red[0] == 0.0)


def test_kkt_report_on_unconstrained_solution(quick):
    problem = quick.problem
    target = quick.steady.v_e.copy()
    target[quick.grid.p_slice(0)] += 0.005
    config = CostConfig(target_kind="constant", target_data=target,
                        sigma=1e-4, max_iters=200, grad_tol=1e-8, rho0=0.0)
    report = optimize(problem, config)
    kkt = kkt_residual(problem, config, report, rng=np.random.default_rng(0))
    assert kkt.residual > -1e-5
    assert kkt.complementarity == 0.0


def test_delta_one_homotopy_is_bit_identical(quick):
    problem = quick.problem
    config = CostConfig(target_kind="constant", target_data=_offset_target(quick),
                        sigma=1e-6, max_iters=25, grad_tol=1e-9)
    base = optimize(problem, config)
    runs = delta_homotopy(problem, config, [1.0])
    delta, sub, rerun = runs[0]
    assert delta == 1.0
    assert np.array_equal(problem.reduced(base.final_signal),
                          sub.reduced(rerun.final_signal))


def test_wrong_target_shape_raises(quick):
    config = CostConfig(target_kind="trajectory",
                        target_data=np.zeros((3, quick.grid.ndof)))
    with pytest.raises(OptimizeError):
        quick.problem.cost(quick.problem.phi_e, config)


def test_kappa_admissibility_guard(quick):
    from gasnet.optimize import ControlProblem
    with pytest.raises(OptimizeError, match="kappa_U too large"):
        ControlProblem(quick.disc, quick.steady, quick.box, quick.times,
                       kappa=100.0)
