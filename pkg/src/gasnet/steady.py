"""Equilibrium (steady state) computation and state-box geometry.

The steady state has constant mass flux per pipe and a pressure profile
given in closed form.  It serves as the initial condition of every
simulation and as the anchor of the state-constraint box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GasnetError
from .network import NetworkTopology, PipeParameters, VertexClassification

__all__ = [
    "SteadyStateError",
    "SteadyState",
    "StateBox",
    "GAMMA_SWITCH",
    "steady_pressure_profile",
    "compute_steady_state",
    "validate_suitable_set",
    "ball_radius",
]

# Below this |gamma| the general profile formula loses precision; the
# analytic gamma -> 0 limit is exact to O(gamma*L) relative error.
GAMMA_SWITCH = 1e-8

NODE_TOL = 1e-12


class SteadyStateError(GasnetError):
    """Raised when no positive steady state exists for the given data."""


def steady_pressure_profile(pipe: PipeParameters, p_in: float, q: float, x):
    """Pressure of the steady flow at position x along the pipe.

    Solves d(p^2)/dx = -2 gamma p^2 - 2 beta q|q| with p(0) = p_in.
    Accepts scalar or array x in [0, L].
    """
    x = np.asarray(x, dtype=float)
    if p_in <= 0.0:
        raise SteadyStateError("inflow pressure must be positive")
    if np.any(x < -1e-14) or np.any(x > pipe.length * (1 + 1e-14)):
        raise SteadyStateError("position outside pipe")
    beta, gamma = pipe.beta, pipe.gamma
    friction = beta * q * abs(q)
    if abs(gamma) < GAMMA_SWITCH:
        radicand = p_in ** 2 - 2.0 * friction * x
    else:
        radicand = np.exp(-2.0 * gamma * x) * (
            p_in ** 2 - (friction / gamma) * np.expm1(2.0 * gamma * x)
        )
    if np.any(radicand <= 0.0):
        bad = np.argmax(radicand <= 0.0)
        x_bad = float(np.atleast_1d(x)[bad]) if x.ndim else float(x)
        raise SteadyStateError(
            f"steady state vacuum/sonic breach at x = {x_bad:.6g}"
        )
    return np.sqrt(radicand)


@dataclass
class SteadyState:
    """Per-pipe equilibrium data sampled on the simulation grid."""

    p_in: np.ndarray            # inflow pressure per pipe
    q: np.ndarray               # constant flux per pipe
    p_out: np.ndarray           # outflow pressure per pipe
    profiles: list              # sampled p_e^k(x) on each pipe grid
    vertex_pressure: dict       # vertex id -> pressure
    v_e: np.ndarray             # flat state vector on the grid

    def max_kirchhoff_residual(self, topology, classification) -> float:
        worst = 0.0
        for v in classification.inner:
            s = sum(
                classification.xi[v][k] * topology.pipes[k].params.diameter ** 2 * self.q[k]
                for k in classification.incident[v]
            )
            worst = max(worst, abs(s))
        return worst

    def max_continuity_residual(self, topology, classification) -> float:
        worst = 0.0
        for v in classification.inner:
            vals = []
            for k in classification.incident[v]:
                pipe = topology.pipes[k]
                vals.append(self.p_in[k] if pipe.start == v else self.p_out[k])
            worst = max(worst, max(vals) - min(vals))
        return worst


def compute_steady_state(
    topology: NetworkTopology,
    classification: VertexClassification,
    grid,
    entry_pressure: dict,
    entry_flux: dict,
    flux_pins: dict | None = None,
) -> SteadyState:
    """Propagate steady data from the entry vertices through the tree.

    At each inner node the downstream inflow pressure equals the common
    node pressure and the incoming flux is split among outgoing pipes in
    proportion to D_k^2, except where a pipe flux is pinned explicitly.
    """
    m = topology.m
    pins = dict(flux_pins or {})
    pin_by_index = {}
    for pid, val in pins.items():
        pin_by_index[topology.pipe_index(str(pid))] = float(val)

    for v in classification.entry:
        if v not in entry_pressure or v not in entry_flux:
            raise SteadyStateError(f"entry vertex {v!r} needs pressure and flux data")

    q = np.full(m, np.nan)
    p_in = np.full(m, np.nan)
    vertex_pressure: dict = {}

    incoming = {v: [k for k in classification.incident[v] if topology.pipes[k].end == v]
                for v in topology.vertices}
    outgoing = {v: [k for k in classification.incident[v] if topology.pipes[k].start == v]
                for v in topology.vertices}

    # Entry vertices seed the propagation.
    for v in classification.entry:
        (k,) = outgoing[v]
        vertex_pressure[v] = float(entry_pressure[v])
        q[k] = float(entry_flux[v])
        p_in[k] = vertex_pressure[v]

    p_out = np.full(m, np.nan)
    done = [False] * m
    pending = True
    while pending:
        pending = False
        progressed = False
        for k, pipe in enumerate(topology.pipes):
            if done[k]:
                continue
            pending = True
            if math.isnan(q[k]) or math.isnan(p_in[k]):
                continue
            p_out[k] = float(steady_pressure_profile(pipe.params, p_in[k], q[k], pipe.params.length))
            done[k] = True
            progressed = True
            v = pipe.end
            if v in classification.exit:
                vertex_pressure[v] = p_out[k]
                continue
            # inner node: resolve once all incoming pipes are done
            if all(done[j] for j in incoming[v]):
                pressures = [p_out[j] for j in incoming[v]]
                if max(pressures) - min(pressures) > 1e-9 * max(pressures):
                    raise SteadyStateError(
                        f"pressure continuity infeasible at node {v!r}: "
                        f"incoming pressures {pressures}"
                    )
                vertex_pressure[v] = pressures[0]
                total = sum(topology.pipes[j].params.diameter ** 2 * q[j] for j in incoming[v])
                outs = outgoing[v]
                if not outs:
                    raise SteadyStateError(f"Kirchhoff infeasible at node {v!r}: no outgoing pipe")
                free = [j for j in outs if j not in pin_by_index]
                for j in outs:
                    if j in pin_by_index:
                        total -= topology.pipes[j].params.diameter ** 2 * pin_by_index[j]
                        q[j] = pin_by_index[j]
                        p_in[j] = vertex_pressure[v]
                if free:
                    dsum = sum(topology.pipes[j].params.diameter ** 2 for j in free)
                    for j in free:
                        q[j] = total / dsum
                        p_in[j] = vertex_pressure[v]
                elif abs(total) > 1e-12:
                    raise SteadyStateError(f"Kirchhoff infeasible at node {v!r}: pinned fluxes leave residual {total:.3e}")
        if pending and not progressed:
            # some vertex never receives data (e.g. inner node with no incoming pipe)
            stuck = [topology.pipes[k].pipe_id for k in range(m) if not done[k]]
            raise SteadyStateError("steady propagation stalled on pipes " + ", ".join(stuck))

    if np.any(q <= 0.0):
        bad = topology.pipes[int(np.argmax(q <= 0.0))].pipe_id
        raise SteadyStateError(f"nonpositive equilibrium flux on pipe {bad!r}")

    profiles = []
    v_e = np.zeros(grid.ndof)
    for k, pipe in enumerate(topology.pipes):
        prof = steady_pressure_profile(pipe.params, p_in[k], q[k], grid.pipes[k].x)
        # friction or uphill inclination forces a strictly falling profile;
        # a lossless horizontal pipe has a constant one
        lossless = pipe.params.beta == 0.0 and pipe.params.gamma == 0.0
        if lossless:
            if np.any(np.diff(prof) != 0.0):
                raise SteadyStateError(
                    f"non-constant lossless steady profile on pipe {pipe.pipe_id!r}")
        elif np.any(np.diff(prof) >= 0.0):
            raise SteadyStateError(f"non-monotone steady profile on pipe {pipe.pipe_id!r}")
        profiles.append(prof)
        v_e[grid.p_slice(k)] = prof
        v_e[grid.q_slice(k)] = q[k]

    state = SteadyState(p_in=p_in, q=q, p_out=p_out, profiles=profiles,
                        vertex_pressure=vertex_pressure, v_e=v_e)
    if state.max_kirchhoff_residual(topology, classification) > NODE_TOL:
        raise SteadyStateError("internal error: Kirchhoff residual above tolerance")
    if state.max_continuity_residual(topology, classification) > 1e-9:
        raise SteadyStateError("internal error: continuity residual above tolerance")
    return state


class StateBox:
    """Per-pipe box [a, b] x [c, d] of admissible (pressure, flux) values."""

    def __init__(self, p_bounds, q_bounds):
        """p_bounds, q_bounds: arrays of shape (m, 2)."""
        self.p_bounds = np.asarray(p_bounds, dtype=float)
        self.q_bounds = np.asarray(q_bounds, dtype=float)
        if self.p_bounds.shape != self.q_bounds.shape or self.p_bounds.shape[1] != 2:
            raise GasnetError("state box bounds must have shape (m, 2)")

    @property
    def m(self):
        return self.p_bounds.shape[0]

    def lower_vec(self, grid):
        lo = np.empty(grid.ndof)
        for k in range(self.m):
            lo[grid.p_slice(k)] = self.p_bounds[k, 0]
            lo[grid.q_slice(k)] = self.q_bounds[k, 0]
        return lo

    def upper_vec(self, grid):
        hi = np.empty(grid.ndof)
        for k in range(self.m):
            hi[grid.p_slice(k)] = self.p_bounds[k, 1]
            hi[grid.q_slice(k)] = self.q_bounds[k, 1]
        return hi

    def p_floor(self):
        return float(np.min(self.p_bounds[:, 0])) / 2.0

    def contains(self, grid, v, margin=0.0):
        return bool(np.all(v >= self.lower_vec(grid) + margin)
                    and np.all(v <= self.upper_vec(grid) - margin))

    def violation(self, grid, v):
        """Signed componentwise violation: 0 inside, distance past a face outside."""
        lo, hi = self.lower_vec(grid), self.upper_vec(grid)
        return np.maximum(v - hi, 0.0) + np.minimum(v - lo, 0.0)

    def transformed(self, delta: float, p_anchor, q_anchor):
        """Shrink every face toward per-pipe anchor values by factor delta.

        Anchors have shape (m, 2): a separate anchor per lower/upper face.
        delta = 1 returns the box unchanged (exactly, in floating point).
        """
        p_anchor = np.asarray(p_anchor, dtype=float)
        q_anchor = np.asarray(q_anchor, dtype=float)
        pb = (1.0 - delta) * p_anchor + delta * self.p_bounds
        qb = (1.0 - delta) * q_anchor + delta * self.q_bounds
        return StateBox(pb, qb)

    def equilibrium_anchors(self, steady):
        """Face anchors at the per-pipe extremes of the equilibrium profile."""
        p_anchor = np.stack([
            np.array([prof.min() for prof in steady.profiles]),
            np.array([prof.max() for prof in steady.profiles]),
        ], axis=1)
        q_anchor = np.stack([steady.q, steady.q], axis=1)
        return p_anchor, q_anchor


def validate_suitable_set(box: StateBox, steady: SteadyState, grid):
    """Check the suitability inequalities and interiority of the equilibrium.

    Returns (violations, margin): a list of human-readable violations and
    the smallest distance of the equilibrium to a box face.
    """
    violations = []
    for k in range(box.m):
        a, b = box.p_bounds[k]
        c, d = box.q_bounds[k]
        if a <= 0.0:
            violations.append(f"pipe {k}: pressure lower bound must be positive")
        if not a < b:
            violations.append(f"pipe {k}: empty pressure interval")
        if not c < d:
            violations.append(f"pipe {k}: empty flux interval")
        if a + steady.p_in[k] > b:
            violations.append(f"pipe {k}: upper pressure bound below a + p_in")
    lo, hi = box.lower_vec(grid), box.upper_vec(grid)
    margin = float(min(np.min(steady.v_e - lo), np.min(hi - steady.v_e)))
    if margin <= 0.0:
        violations.append("equilibrium not interior")
    return violations, margin


def ball_radius(inner_box: StateBox, box: StateBox) -> float:
    """Smallest face gap between a contained inner box and the outer box."""
    gaps = np.concatenate([
        (inner_box.p_bounds[:, 0] - box.p_bounds[:, 0]),
        (box.p_bounds[:, 1] - inner_box.p_bounds[:, 1]),
        (inner_box.q_bounds[:, 0] - box.q_bounds[:, 0]),
        (box.q_bounds[:, 1] - inner_box.q_bounds[:, 1]),
    ])
    if np.any(gaps < 0.0):
        raise GasnetError("inner box not contained in outer box")
    return float(np.min(gaps))
