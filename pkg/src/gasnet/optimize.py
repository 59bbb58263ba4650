"""Tracking cost, Riesz gradient, projected gradient descent, KKT report.

The reduced problem minimizes

    J(Phi) = 1/2 int ||S(Phi) - v_d||_M^2 dt + sigma/2 ||Phi - Phi_e||_H2^2

over the admissible ball of reduced controls, with the state box handled
by an escalating quadratic penalty.  The gradient is assembled from the
exact discrete adjoint and lifted to the control space through the H^2
Gram matrix, so finite-difference checks agree to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import StepFactors, adjoint_solve, linearized_solve
from .controls import ControlSignal, H2Space, equilibrium_signal
from .discrete import Discretization
from .errors import GasnetError
from .forward import ForwardError, Trajectory, picard_solve
from .steady import StateBox, SteadyState

__all__ = [
    "OptimizeError",
    "CostConfig",
    "ControlProblem",
    "KKTReport",
    "OptimizationReport",
    "optimize",
    "delta_homotopy",
    "kkt_residual",
]


class OptimizeError(GasnetError):
    pass


@dataclass
class CostConfig:
    """Target, regularization and solver settings for the reduced problem."""

    target_kind: str = "equilibrium"      # equilibrium | constant | trajectory
    target_data: object = None            # constant state vector or (M, ndof) midpoints
    sigma: float = 1e-3
    max_iters: int = 200
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    max_backtracks: int = 40
    rho0: float = 1.0
    rho_factor: float = 10.0
    rho_max: float = 1e6
    feas_tol: float = 1e-8


class ControlProblem:
    """Bundle of the assembled pieces a single scenario operates on."""

    def __init__(self, disc: Discretization, steady: SteadyState, box: StateBox,
                 times, eta: float = 1.0, kappa: float | None = None,
                 picard_tol: float = 1e-10, picard_max_iters: int = 50,
                 enforce_rball: bool = True):
        self.disc = disc
        self.steady = steady
        self.box = box
        self.times = np.asarray(times, dtype=float)
        self.picard_tol = picard_tol
        self.picard_max_iters = picard_max_iters
        self.p_floor = box.p_floor()
        self.phi_e = equilibrium_signal(self.times, steady, disc.active_slots)

        lo, hi = box.lower_vec(disc.grid), box.upper_vec(disc.grid)
        self.r = float(min(np.min(steady.v_e - lo), np.min(hi - steady.v_e)))
        self.c1 = disc.lifting_h1_norm()
        if kappa is None:
            kappa = self.r / (10.0 * self.c1)
        if enforce_rball and self.c1 * kappa > self.r / 10.0 + 1e-14:
            raise OptimizeError(
                f"kappa_U too large: c1*kappa = {self.c1 * kappa:.3g} exceeds r/10 = {self.r / 10:.3g}"
            )
        self.space = H2Space(self.times, disc.active_slots, eta, kappa)
        self.rball_limit = self.r - self.c1 * kappa if enforce_rball else None

    # -- control plumbing ----------------------------------------------------

    def signal_from_reduced(self, red: np.ndarray) -> ControlSignal:
        return ControlSignal(self.times, self.phi_e.values + red)

    def reduced(self, signal: ControlSignal) -> np.ndarray:
        return signal.values - self.phi_e.values

    # -- solves and cost -------------------------------------------------------

    def solve(self, signal: ControlSignal, allow_truncation: bool = False) -> Trajectory:
        traj = picard_solve(self.disc, self.steady, signal,
                            tol=self.picard_tol, max_iters=self.picard_max_iters,
                            p_floor=self.p_floor, rball_limit=self.rball_limit)
        if traj.truncated and not allow_truncation:
            raise ForwardError("horizon truncated by the safe-tube monitor")
        return traj

    def target_midpoints(self, config: CostConfig, steps: int) -> np.ndarray:
        if config.target_kind == "equilibrium":
            return np.tile(self.steady.v_e, (steps, 1))
        if config.target_kind == "constant":
            return np.tile(np.asarray(config.target_data, dtype=float), (steps, 1))
        if config.target_kind == "trajectory":
            data = np.asarray(config.target_data, dtype=float)
            if data.shape[0] != steps:
                raise OptimizeError("target trajectory has wrong step count")
            return data
        raise OptimizeError(f"unknown target kind {config.target_kind!r}")

    def tracking_cost(self, traj: Trajectory, v_d_mid: np.ndarray) -> float:
        tau = float(self.times[1] - self.times[0])
        mids = traj.midpoint_states()
        total = 0.0
        for n in range(traj.steps):
            d = mids[n] - v_d_mid[n]
            total += tau * self.disc.inner(d, d)
        return 0.5 * total

    def penalty_value(self, traj: Trajectory, rho: float) -> float:
        if rho == 0.0:
            return 0.0
        tau = float(self.times[1] - self.times[0])
        mids = traj.midpoint_states()
        total = 0.0
        for n in range(traj.steps):
            viol = self.box.violation(self.disc.grid, mids[n])
            total += tau * self.disc.inner(viol, viol)
        return rho * total

    def cost(self, signal: ControlSignal, config: CostConfig,
             traj: Trajectory | None = None) -> float:
        if traj is None:
            traj = self.solve(signal)
        v_d = self.target_midpoints(config, traj.steps)
        red = self.reduced(signal)
        return self.tracking_cost(traj, v_d) + 0.5 * config.sigma * self.space.inner(red, red)

    def penalized_cost(self, signal, config, rho, traj=None) -> float:
        if traj is None:
            traj = self.solve(signal)
        return self.cost(signal, config, traj) + self.penalty_value(traj, rho)

    def max_violation(self, traj: Trajectory) -> float:
        mids = traj.midpoint_states()
        return float(max(np.max(np.abs(self.box.violation(self.disc.grid, mids[n])))
                         for n in range(traj.steps)))

    # -- gradient ----------------------------------------------------------------

    def riesz_gradient(self, signal: ControlSignal, config: CostConfig,
                       rho: float = 0.0, traj: Trajectory | None = None,
                       factors: StepFactors | None = None) -> np.ndarray:
        """H^2 Riesz representer of the (penalized) cost derivative,
        returned in reduced-control shape (M+1, 2m)."""
        if traj is None:
            traj = self.solve(signal)
        tau = signal.tau
        v_d = self.target_midpoints(config, traj.steps)
        mids = traj.midpoint_states()
        d_mid = mids - v_d
        if rho != 0.0:
            for n in range(traj.steps):
                d_mid[n] = d_mid[n] + 2.0 * rho * self.box.violation(self.disc.grid, mids[n])
        adj = adjoint_solve(self.disc, traj, d_mid, tau, factors, self.p_floor)
        b = adj.b.copy()
        b[0] = 0.0
        b[:, ~self.disc.active_slots] = 0.0
        g = self.space.riesz(b)
        return g + config.sigma * self.reduced(signal)

    def curvature_along(self, direction: np.ndarray, config: CostConfig,
                        rho: float, traj: Trajectory,
                        factors: StepFactors) -> float:
        """Second derivative of the (penalized) cost along a control direction,
        with the state map linearized at the base trajectory.  Used for the
        exact line-search step of the quadratic model."""
        tau = float(self.times[1] - self.times[0])
        h = ControlSignal(self.times, direction)
        sens = linearized_solve(self.disc, traj, h, factors, self.p_floor)
        sprime = sens.state_derivative(self.disc)
        sp_mid = 0.5 * (sprime[:-1] + sprime[1:])
        curv = config.sigma * self.space.inner(direction, direction)
        mids = traj.midpoint_states()
        for n in range(traj.steps):
            curv += tau * self.disc.inner(sp_mid[n], sp_mid[n])
            if rho != 0.0:
                active = self.box.violation(self.disc.grid, mids[n]) != 0.0
                masked = np.where(active, sp_mid[n], 0.0)
                curv += 2.0 * rho * tau * self.disc.inner(masked, masked)
        return curv


@dataclass
class KKTReport:
    residual: float
    multiplier_min: float
    multiplier_max: float
    complementarity: float
    zeta: float = 1.0
    directions: int = 0


@dataclass
class OptimizationReport:
    cost_history: list = field(default_factory=list)       # accepted J values
    penalized_history: list = field(default_factory=list)  # accepted J + penalty
    grad_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    rho_stages: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    status: str = ""
    final_signal: ControlSignal | None = None
    final_trajectory: Trajectory | None = None
    final_rho: float = 0.0
    lambda_mid: np.ndarray | None = None    # penalty multipliers at midpoints
    feasible: bool = True
    worst_violation: float = 0.0
    kkt: KKTReport | None = None


def optimize(problem: ControlProblem, config: CostConfig,
             initial_reduced: np.ndarray | None = None) -> OptimizationReport:
    """Projected gradient descent with Armijo backtracking and BB steps.

    Box constraints on the state enter through a quadratic penalty whose
    weight escalates until the final trajectory is feasible.
    """
    space = problem.space
    if initial_reduced is None:
        red = np.zeros_like(problem.phi_e.values)
    else:
        red = space.project_feasible(initial_reduced.copy())
    report = OptimizationReport()

    rho_values = [0.0]
    if config.rho0 > 0.0:
        rho_values = [config.rho0]
        while rho_values[-1] * config.rho_factor <= config.rho_max * (1 + 1e-12):
            rho_values.append(rho_values[-1] * config.rho_factor)

    signal = problem.signal_from_reduced(red)
    traj = problem.solve(signal)
    total_iters = 0

    for stage, rho in enumerate(rho_values):
        psi = problem.cost(signal, config, traj) + problem.penalty_value(traj, rho)
        factors = StepFactors(problem.disc, traj, signal.tau, problem.p_floor)
        g = problem.riesz_gradient(signal, config, rho, traj, factors)
        prev_red, prev_g = None, None
        stage_iters = 0
        use_bb2 = False
        while True:
            stationarity = space.norm(red - space.project_feasible(red - g))
            if stationarity <= config.grad_tol:
                report.converged = True
                break
            if total_iters >= config.max_iters:
                report.status = "iteration cap reached"
                break

            # exact step for the local quadratic model along -g
            gg = space.inner(g, g)
            curv = problem.curvature_along(g, config, rho, traj, factors)
            alpha_exact = gg / curv if curv > 0.0 else 1.0
            # Barzilai-Borwein step from the previous accepted pair,
            # alternating the two variants
            alpha_bb = None
            if prev_red is not None:
                s = red - prev_red
                y = g - prev_g
                sy = space.inner(s, y)
                if sy > 0.0:
                    if use_bb2:
                        yy = space.inner(y, y)
                        alpha_bb = sy / yy if yy > 0.0 else None
                    else:
                        alpha_bb = space.inner(s, s) / sy
                use_bb2 = not use_bb2

            candidates = [a for a in (alpha_bb, alpha_exact) if a and a > 0.0]
            accepted = False
            tried = 0
            while candidates and tried < config.max_backtracks:
                a = candidates.pop(0)
                tried += 1
                trial_red = space.project_feasible(red - a * g)
                pred = space.inner(g, red - trial_red)
                if pred <= 0.0:
                    continue
                trial_signal = problem.signal_from_reduced(trial_red)
                try:
                    trial_traj = problem.solve(trial_signal)
                except GasnetError:
                    # truncated horizon or vacuum guard: retreat along the ray
                    candidates.append(a * 0.5)
                    continue
                trial_psi = (problem.cost(trial_signal, config, trial_traj)
                             + problem.penalty_value(trial_traj, rho))
                if trial_psi <= psi - config.armijo_c * pred:
                    accepted = True
                    break
                candidates.append(a * 0.5)
            if not accepted:
                report.status = "line search failed (stationary within solver accuracy)"
                break

            prev_red, prev_g = red, g
            red, signal, traj, psi = trial_red, trial_signal, trial_traj, trial_psi
            factors = StepFactors(problem.disc, traj, signal.tau, problem.p_floor)
            g = problem.riesz_gradient(signal, config, rho, traj, factors)
            total_iters += 1
            stage_iters += 1
            report.cost_history.append(problem.cost(signal, config, traj))
            report.penalized_history.append(psi)
            report.grad_history.append(space.norm(g))
            report.step_history.append(a)

        worst = problem.max_violation(traj)
        report.rho_stages.append({"rho": rho, "iterations": stage_iters,
                                  "worst_violation": worst})
        if worst <= config.feas_tol or stage == len(rho_values) - 1:
            report.final_rho = rho
            break
        if total_iters >= config.max_iters:
            report.final_rho = rho
            break

    report.iterations = total_iters
    report.final_signal = signal
    report.final_trajectory = traj
    report.worst_violation = problem.max_violation(traj)
    report.feasible = report.worst_violation <= max(config.feas_tol, 1e-6)
    mids = traj.midpoint_states()
    lam = np.empty_like(mids)
    for n in range(traj.steps):
        lam[n] = 2.0 * report.final_rho * problem.box.violation(problem.disc.grid, mids[n])
    report.lambda_mid = lam
    if not report.status:
        report.status = "converged" if report.converged else "stopped"
    return report


def _random_reduced(space: H2Space, rng: np.random.Generator,
                    amplitude: float = 1.0, modes: int = 3) -> np.ndarray:
    """Smooth random reduced control vanishing at t = 0."""
    t = space.times
    T = t[-1]
    red = np.zeros((len(t), len(space.active_slots)))
    for s in np.flatnonzero(space.active_slots):
        prof = np.zeros_like(t)
        for j in range(1, modes + 1):
            prof += rng.standard_normal() * np.sin(j * np.pi * t / T) / j ** 2
        red[:, s] = amplitude * prof
    red[0] = 0.0
    return space.project_feasible(red)


def kkt_residual(problem: ControlProblem, config: CostConfig,
                 report: OptimizationReport, n_directions: int = 100,
                 rng: np.random.Generator | None = None) -> KKTReport:
    """First-order stationarity check over sampled feasible directions.

    Evaluates <J'(Phi*), Phi - Phi*> plus the multiplier pairing with the
    state sensitivity for random feasible Phi; returns the most negative
    value found (>= 0 up to tolerance at a stationary point).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    signal = report.final_signal
    traj = report.final_trajectory
    tau = signal.tau
    factors = StepFactors(problem.disc, traj, tau, problem.p_floor)
    g = problem.riesz_gradient(signal, config, 0.0, traj, factors)
    red_star = problem.reduced(signal)
    lam = report.lambda_mid

    worst = np.inf
    for _ in range(n_directions):
        red_rand = _random_reduced(problem.space, rng, amplitude=problem.space.kappa)
        direction = red_rand - red_star
        value = problem.space.inner(g, direction)
        if lam is not None and np.any(lam != 0.0):
            h = ControlSignal(problem.times, direction)
            sens = linearized_solve(problem.disc, traj, h, factors, problem.p_floor)
            sprime = sens.state_derivative(problem.disc)
            sp_mid = 0.5 * (sprime[:-1] + sprime[1:])
            for n in range(traj.steps):
                value += tau * problem.disc.inner(lam[n], sp_mid[n])
        worst = min(worst, value)

    comp = 0.0
    if lam is not None:
        mids = traj.midpoint_states()
        for n in range(traj.steps):
            viol = problem.box.violation(problem.disc.grid, mids[n])
            comp += tau * problem.disc.inner(np.abs(lam[n]), np.abs(viol))
    return KKTReport(
        residual=float(worst),
        multiplier_min=float(np.min(np.abs(lam))) if lam is not None else 0.0,
        multiplier_max=float(np.max(np.abs(lam))) if lam is not None else 0.0,
        complementarity=float(comp),
        directions=n_directions,
    )


def delta_homotopy(problem: ControlProblem, config: CostConfig, deltas,
                   initial_reduced: np.ndarray | None = None) -> list:
    """Re-run the optimization over a schedule of box perturbations.

    Each delta shrinks the box faces toward the equilibrium extremes;
    delta = 1 reproduces the unperturbed problem exactly.  Returns a list
    of (delta, sub_problem, report) triples; KKT quantities for a run must
    be evaluated against its own sub_problem.
    """
    p_anchor, q_anchor = problem.box.equilibrium_anchors(problem.steady)
    reports = []
    for delta in deltas:
        box_d = problem.box.transformed(float(delta), p_anchor, q_anchor)
        kappa = problem.space.kappa
        if problem.rball_limit is not None:
            lo = box_d.lower_vec(problem.disc.grid)
            hi = box_d.upper_vec(problem.disc.grid)
            r_d = float(min(np.min(problem.steady.v_e - lo),
                            np.min(hi - problem.steady.v_e)))
            kappa = min(kappa, r_d / (10.0 * problem.c1))
        sub = ControlProblem(
            problem.disc, problem.steady, box_d, problem.times,
            eta=problem.space.eta, kappa=kappa,
            picard_tol=problem.picard_tol, picard_max_iters=problem.picard_max_iters,
            enforce_rball=problem.rball_limit is not None,
        )
        try:
            reports.append((float(delta), sub, optimize(sub, config, initial_reduced)))
        except GasnetError as err:
            failed = OptimizationReport(status=f"failed: {err}")
            reports.append((float(delta), sub, failed))
    return reports
