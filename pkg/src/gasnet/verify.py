"""Built-in property battery run against a scenario's discretization.

Each check returns (name, passed, detail).  The battery is what
`gasnet verify` executes; the test suite reuses the same functions.
"""

from __future__ import annotations

import numpy as np

from .adjoint import green_identity_residual
from .controls import ControlSignal
from .forward import linear_solve, picard_solve
from .optimize import CostConfig, _random_reduced
from .steady import steady_pressure_profile

__all__ = ["run_battery"]


def _check_skew(disc, rng, n_samples=100, tol=1e-12):
    worst = 0.0
    for _ in range(n_samples):
        z = disc.Pi @ rng.standard_normal(disc.grid.ndof)
        nz = disc.inner(z, z)
        if nz == 0.0:
            continue
        worst = max(worst, abs(disc.inner(disc.A @ z, z)) / nz)
    return worst <= tol, f"max |(Az,z)|/|z|^2 = {worst:.3e}"


def _check_projector(disc, rng, tol=1e-12):
    idem = np.max(np.abs(disc.Pi @ disc.Pi - disc.Pi))
    x = rng.standard_normal(disc.grid.ndof)
    y = rng.standard_normal(disc.grid.ndof)
    sym = abs(disc.inner(disc.Pi @ x, y) - disc.inner(x, disc.Pi @ y))
    scale = max(1.0, disc.norm(x) * disc.norm(y))
    ok = idem <= 1e-11 and sym / scale <= tol
    return ok, f"idempotence {idem:.3e}, M-symmetry {sym / scale:.3e}"


def _check_b0_composition(disc, tol=1e-10):
    gap = np.max(np.abs(disc.Atilde @ disc.B1 - disc.B0))
    return gap <= tol, f"max |A B1 - B0| = {gap:.3e}"


def _check_steady_ode(scenario, tol=1e-9):
    worst = 0.0
    for k, pipe in enumerate(scenario.topology.pipes):
        params = pipe.params
        q = scenario.steady.q[k]
        p_in = scenario.steady.p_in[k]
        xs = np.linspace(0.0, params.length, 200)[1:-1]
        eps = params.length * 1e-6
        p_plus = steady_pressure_profile(params, p_in, q, xs + eps)
        p_minus = steady_pressure_profile(params, p_in, q, xs - eps)
        p_mid = steady_pressure_profile(params, p_in, q, xs)
        dpsq = (p_plus ** 2 - p_minus ** 2) / (2 * eps)
        resid = np.max(np.abs(0.5 * dpsq + params.gamma * p_mid ** 2 + params.beta * q * abs(q)))
        worst = max(worst, resid)
    return worst <= tol, f"max stationary ODE residual = {worst:.3e}"


def _check_lipschitz(scenario, rng, n_pairs=1000):
    disc, box, grid = scenario.disc, scenario.box, scenario.grid
    lo, hi = box.lower_vec(grid), box.upper_vec(grid)
    bound = disc.lipschitz_bound(box)
    worst = 0.0
    for _ in range(n_pairs):
        w1 = lo + rng.random(grid.ndof) * (hi - lo)
        w2 = lo + rng.random(grid.ndof) * (hi - lo)
        dn = disc.norm(w1 - w2)
        if dn == 0.0:
            continue
        ratio = disc.norm(disc.nonlinearity(w1) - disc.nonlinearity(w2)) / dn
        worst = max(worst, ratio)
    return worst <= bound, f"max ratio {worst:.4g} vs analytic bound {bound:.4g}"


def _check_energy(disc, rng, steps=1000, tol=1e-10):
    """Midpoint conservation of the projected transport part (source off)."""
    u0 = disc.Pi @ rng.standard_normal(disc.grid.ndof)
    tau = 1e-3 / disc.c
    states = linear_solve(disc, u0, None, tau, steps, include_source=False,
                          check_estimate=False)
    drift = abs(disc.norm(states[-1]) / disc.norm(states[0]) - 1.0)
    return drift <= tol, f"relative M-norm drift over {steps} steps = {drift:.3e}"


def _check_green(scenario, rng, tol=1e-10):
    problem = scenario.problem
    red = _random_reduced(problem.space, rng, amplitude=0.3 * problem.space.kappa)
    signal = problem.signal_from_reduced(red)
    base = problem.solve(signal)
    h = ControlSignal(problem.times,
                      _random_reduced(problem.space, rng, amplitude=0.1 * problem.space.kappa))
    v_d = np.tile(problem.steady.v_e, (base.steps, 1))
    resid = green_identity_residual(problem.disc, base, h, v_d, p_floor=problem.p_floor)
    return resid <= tol, f"relative Green residual = {resid:.3e}"


def _check_gradient(scenario, rng, tol=1e-4):
    problem = scenario.problem
    config = CostConfig(target_kind="equilibrium", sigma=scenario.cost_config.sigma)
    red = _random_reduced(problem.space, rng, amplitude=0.2 * problem.space.kappa)
    signal = problem.signal_from_reduced(red)
    traj = problem.solve(signal)
    g = problem.riesz_gradient(signal, config, traj=traj)
    worst = 0.0
    eps = 1e-4
    for _ in range(2):
        h = _random_reduced(problem.space, rng, amplitude=0.1 * problem.space.kappa)
        jp = problem.cost(problem.signal_from_reduced(red + eps * h), config)
        jm = problem.cost(problem.signal_from_reduced(red - eps * h), config)
        fd = (jp - jm) / (2 * eps)
        an = problem.space.inner(g, h)
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-14))
    return worst <= tol, f"max relative gradient error = {worst:.3e}"


def _check_contraction(scenario, rng):
    problem = scenario.problem
    red = _random_reduced(problem.space, rng, amplitude=0.3 * problem.space.kappa)
    signal = problem.signal_from_reduced(red)
    traj = picard_solve(problem.disc, problem.steady, signal,
                        tol=problem.picard_tol, max_iters=problem.picard_max_iters,
                        p_floor=problem.p_floor)
    ok = all(d < 1.0 for d in traj.deltas)
    return ok, f"contraction ratios {['%.3g' % d for d in traj.deltas]}"


def run_battery(scenario, seed: int = 0, corrupt: str | None = None) -> list:
    """Run all checks; returns a list of (name, passed, detail).

    corrupt='skew' deliberately breaks the transport operator first, as a
    negative control for the harness itself.
    """
    rng = np.random.default_rng(seed)
    disc = scenario.disc
    if corrupt == "skew":
        disc = _corrupted(disc)
    results = [
        ("skew_adjointness",) + _check_skew(disc, rng),
        ("projector",) + _check_projector(disc, rng),
        ("boundary_composition",) + _check_b0_composition(disc),
        ("steady_ode_residual",) + _check_steady_ode(scenario),
        ("lipschitz_bound",) + _check_lipschitz(scenario, rng),
        ("energy_conservation",) + _check_energy(disc, rng),
        ("green_identity",) + _check_green(scenario, rng),
        ("gradient_fd",) + _check_gradient(scenario, rng),
        ("picard_contraction",) + _check_contraction(scenario, rng),
    ]
    return results


def _corrupted(disc):
    import copy

    bad = copy.copy(disc)
    A = disc.Atilde.copy()
    # perturb an interior node: boundary rows are annihilated by the
    # projector and would mask the defect
    A[1, 1] += 1.0
    bad.Atilde = A
    bad.A = disc.Pi @ A @ disc.Pi
    return bad
