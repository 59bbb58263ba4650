"""Time integration of the semilinear network system.

The linear part is advanced with the implicit midpoint rule; the
nonlinearity is handled by an outer fixed-point (Picard) iteration with
the previous iterate frozen at step midpoints.  At convergence the
trajectory satisfies the implicit midpoint discretization of the full
semilinear system, which is what the sensitivity and adjoint solvers
differentiate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .controls import ControlSignal
from .discrete import Discretization
from .errors import GasnetError

__all__ = [
    "ForwardError",
    "Trajectory",
    "linear_solve",
    "picard_solve",
    "kirchhoff_residual",
    "pressure_continuity_residual",
    "constraint_monitor",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 50


class ForwardError(GasnetError):
    """Solver failure (non-contraction, collapsed horizon, breakdown)."""


@dataclass
class Trajectory:
    times: np.ndarray                 # (M+1,)
    states: np.ndarray                # (M+1, ndof)
    iterations: int = 0
    deltas: list = field(default_factory=list)       # contraction ratios per sweep
    increments: list = field(default_factory=list)   # sup-over-time M-norm increments
    truncated: bool = False
    achieved_horizon: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def midpoint_states(self) -> np.ndarray:
        return 0.5 * (self.states[:-1] + self.states[1:])


def linear_solve(disc: Discretization, u0: np.ndarray, forcing, tau: float,
                 steps: int, include_source: bool = True,
                 check_estimate: bool = True) -> np.ndarray:
    """Implicit midpoint integration of u' = (A + P)u + forcing.

    forcing: None, a single state vector (constant in time), or an array
    of shape (steps, ndof) sampled at step midpoints.  Returns the array
    of states, shape (steps+1, ndof).
    """
    K = disc.K if include_source else disc.A
    n = disc.grid.ndof
    L = np.eye(n) - 0.5 * tau * K
    R = np.eye(n) + 0.5 * tau * K
    lu = scipy.linalg.lu_factor(L)

    if forcing is None:
        forcing_at = lambda nstep: 0.0
    else:
        forcing = np.asarray(forcing, dtype=float)
        if forcing.ndim == 1:
            forcing_at = lambda nstep: forcing
        else:
            forcing_at = lambda nstep: forcing[nstep]

    states = np.empty((steps + 1, n))
    states[0] = u0
    force_integral = 0.0
    gamma_bar = disc.source_norm_bound() if include_source else 0.0
    for nstep in range(steps):
        rhs = R @ states[nstep] + tau * np.asarray(forcing_at(nstep))
        states[nstep + 1] = scipy.linalg.lu_solve(lu, rhs)
        if check_estimate:
            f = forcing_at(nstep)
            force_integral += tau * (disc.norm(np.asarray(f)) if np.ndim(f) else 0.0)
            bound = np.exp(gamma_bar * tau * (nstep + 1)) * (disc.norm(u0) + force_integral)
            if disc.norm(states[nstep + 1]) > bound * (1.0 + 1e-8) + 1e-14:
                raise ForwardError(f"continuity estimate violated at step {nstep + 1}")
    return states


def picard_solve(disc: Discretization, steady, signal: ControlSignal,
                 tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                 p_floor: float = 0.0, rball_limit: float | None = None,
                 v_e: np.ndarray | None = None) -> Trajectory:
    """Fixed-point solve of the semilinear system for the control signal.

    Returns the trajectory of full states v = u + B1 Phi.  If rball_limit
    is given, the horizon is truncated at the first step whose state
    leaves the sup-norm tube of that radius around the equilibrium.
    """
    if v_e is None:
        v_e = steady.v_e
    tau = signal.tau
    n = disc.grid.ndof

    L = np.eye(n) - 0.5 * tau * disc.K
    R = np.eye(n) + 0.5 * tau * disc.K
    lu = scipy.linalg.lu_factor(L)

    mt = signal.steps
    while True:
        phi = signal.values[: mt + 1]
        phi_mid = 0.5 * (phi[:-1] + phi[1:])
        phi_dot = np.diff(phi, axis=0) / tau
        # Pi (B0 + P B1) phi_mid - Pi B1 phi_dot, per step: shape (mt, ndof)
        base = phi_mid @ (disc.B0 + disc.Pmat @ disc.B1).T - phi_dot @ disc.B1.T
        base = base @ disc.Pi.T
        lifts = phi @ disc.B1.T

        u0 = disc.Pi @ (v_e - lifts[0])
        v_prev = np.tile(v_e, (mt + 1, 1))
        deltas, increments = [], []
        rise_count = 0
        converged = False
        v_new = None
        for it in range(1, max_iters + 1):
            v_mid = 0.5 * (v_prev[:-1] + v_prev[1:])
            v_new = np.empty_like(v_prev)
            u = u0
            v_new[0] = u0 + lifts[0]
            for nstep in range(mt):
                fnl = disc.Pi @ disc.nonlinearity(v_mid[nstep], p_floor)
                rhs = R @ u + tau * (base[nstep] + fnl)
                u = scipy.linalg.lu_solve(lu, rhs)
                v_new[nstep + 1] = u + lifts[nstep + 1]
            diff = max(disc.norm(v_new[j] - v_prev[j]) for j in range(mt + 1))
            increments.append(diff)
            if len(increments) >= 2 and increments[-2] > 0.0:
                delta = diff / increments[-2]
                deltas.append(delta)
                rise_count = rise_count + 1 if delta >= 1.0 else 0
                if rise_count >= 3:
                    raise ForwardError("contraction failure; reduce T or kappa_U")
            v_prev = v_new
            if diff <= tol:
                converged = True
                break
        if not converged:
            raise ForwardError(f"Picard iteration did not reach tol {tol:g} in {max_iters} sweeps")

        if rball_limit is not None:
            dist = np.max(np.abs(v_new - v_e[None, :]), axis=1)
            breach = np.flatnonzero(dist >= rball_limit)
            breach = breach[breach > 0]
            if breach.size:
                new_mt = int(breach[0]) - 1
                if new_mt < 1:
                    raise ForwardError("horizon collapsed: state leaves the safe tube immediately")
                mt = new_mt
                continue
        break

    traj = Trajectory(
        times=signal.times[: mt + 1].copy(),
        states=v_new,
        iterations=it,
        deltas=deltas,
        increments=increments,
        truncated=(mt < signal.steps),
        achieved_horizon=float(signal.times[mt]),
    )
    traj.diagnostics["rball_dist"] = np.max(np.abs(v_new - v_e[None, :]), axis=1)
    return traj


def kirchhoff_residual(disc: Discretization, state: np.ndarray) -> dict:
    """Signed D^2-weighted flux balance per inner node."""
    out = {}
    grid, cls, topo = disc.grid, disc.classification, disc.topology
    for v in cls.inner:
        s = 0.0
        for k in cls.incident[v]:
            node = grid.vertex_node(k, v)
            s += cls.xi[v][k] * topo.pipes[k].params.diameter ** 2 * state[grid.q_index(k, node)]
        out[v] = s
    return out


def pressure_continuity_residual(disc: Discretization, state: np.ndarray) -> dict:
    """Largest pairwise pressure gap per inner node."""
    out = {}
    grid, cls = disc.grid, disc.classification
    for v in cls.inner:
        vals = [state[grid.p_index(k, grid.vertex_node(k, v))] for k in cls.incident[v]]
        out[v] = max(vals) - min(vals)
    return out


def constraint_monitor(traj: Trajectory, box, grid, tol_active_frac: float = 1e-6):
    """Margins and active set of the state box along a trajectory.

    Returns a dict with the global feasibility flag, the worst signed
    margin (negative = violated), and the list of active points
    (step, flat index) within the activity tolerance of a face.
    """
    lo, hi = box.lower_vec(grid), box.upper_vec(grid)
    width = hi - lo
    tol_active = tol_active_frac * width
    margins = np.minimum(traj.states - lo[None, :], hi[None, :] - traj.states)
    active = np.argwhere(margins <= tol_active[None, :])
    return {
        "feasible": bool(np.all(margins >= 0.0)),
        "worst_margin": float(np.min(margins)),
        "active": [(int(i), int(j)) for i, j in active],
    }
