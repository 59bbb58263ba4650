"""Spatial discretization of the network transport system.

Per pipe the semilinear system

    p_t = -c^2 q_x
    q_t = -p_x - gamma p - beta q|q|/p

is discretized with a summation-by-parts first-derivative operator on a
uniform grid (second-order centered interior stencil, first-order
one-sided boundary rows, trapezoid norm).  Node coupling (zero controlled
boundary traces, shared junction pressure, Kirchhoff flux balance) is
imposed through an M-orthogonal projector Pi, which makes the projected
transport operator exactly skew in the weighted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GasnetError
from .network import NetworkTopology, VertexClassification

__all__ = [
    "DiscretizationError",
    "PipeGrid",
    "Grid",
    "build_grid",
    "sbp_derivative",
    "Discretization",
]

MIN_NODES = 4


class DiscretizationError(GasnetError):
    """Raised for invalid grids or failed operator assembly."""


@dataclass
class PipeGrid:
    N: int
    h: float
    x: np.ndarray
    w: np.ndarray   # trapezoid quadrature weights, sum to L


class Grid:
    """Uniform per-pipe grids plus the flat index map.

    The state vector stores, pipe by pipe, first the N_k+1 pressure
    samples and then the N_k+1 flux samples.
    """

    def __init__(self, topology: NetworkTopology, counts):
        self.topology = topology
        self.pipes = []
        self._p_off = []
        self._q_off = []
        off = 0
        for k, pipe in enumerate(topology.pipes):
            N = int(counts[k])
            if N < MIN_NODES:
                raise DiscretizationError(
                    f"pipe {pipe.pipe_id!r}: need at least {MIN_NODES} cells, got {N}"
                )
            L = pipe.params.length
            h = L / N
            x = np.linspace(0.0, L, N + 1)
            w = np.full(N + 1, h)
            w[0] = w[-1] = h / 2.0
            self.pipes.append(PipeGrid(N=N, h=h, x=x, w=w))
            self._p_off.append(off)
            self._q_off.append(off + N + 1)
            off += 2 * (N + 1)
        self.ndof = off

    def p_slice(self, k):
        return slice(self._p_off[k], self._p_off[k] + self.pipes[k].N + 1)

    def q_slice(self, k):
        return slice(self._q_off[k], self._q_off[k] + self.pipes[k].N + 1)

    def p_index(self, k, node):
        return self._p_off[k] + node

    def q_index(self, k, node):
        return self._q_off[k] + node

    def vertex_node(self, k, vertex):
        pipe = self.topology.pipes[k]
        if pipe.start == vertex:
            return 0
        if pipe.end == vertex:
            return self.pipes[k].N
        raise DiscretizationError(f"vertex {vertex!r} not an endpoint of pipe {k}")


def build_grid(topology: NetworkTopology, nodes_per_meter=None, per_pipe=None) -> Grid:
    if per_pipe is not None:
        counts = [int(per_pipe[pipe.pipe_id]) for pipe in topology.pipes]
    elif nodes_per_meter is not None:
        counts = [max(MIN_NODES, round(pipe.params.length * nodes_per_meter))
                  for pipe in topology.pipes]
    else:
        raise DiscretizationError("grid resolution not specified")
    return Grid(topology, counts)


def sbp_derivative(N: int, h: float) -> np.ndarray:
    """First-derivative matrix satisfying W D + D^T W = diag(-1, 0, ..., 0, 1)
    with the trapezoid norm W = h diag(1/2, 1, ..., 1, 1/2)."""
    D = np.zeros((N + 1, N + 1))
    D[0, 0], D[0, 1] = -1.0 / h, 1.0 / h
    D[N, N - 1], D[N, N] = -1.0 / h, 1.0 / h
    for i in range(1, N):
        D[i, i - 1] = -0.5 / h
        D[i, i + 1] = 0.5 / h
    return D


class Discretization:
    """Assembled operators on a network grid.

    Attributes
    ----------
    m_diag : diagonal of the weighted mass matrix M
    Atilde : unconstrained transport operator
    Pmat   : gravity source (0, -gamma p)
    B1     : boundary lifting matrix (ndof x 2m)
    B0     : boundary forcing matrix (ndof x 2m), equals Atilde @ B1
    C      : constraint rows defining the homogeneous domain
    Pi     : M-orthogonal projector onto null(C)
    A      : Pi @ Atilde @ Pi (exactly skew in the M inner product)
    K      : Pi @ (Atilde + Pmat) @ Pi
    active_slots : boolean mask of controllable boundary slots
    """

    def __init__(self, grid: Grid, topology: NetworkTopology,
                 classification: VertexClassification):
        self.grid = grid
        self.topology = topology
        self.classification = classification
        c = topology.constants.c
        self.c = c
        n = grid.ndof
        m = topology.m

        m_diag = np.empty(n)
        Atilde = np.zeros((n, n))
        Pmat = np.zeros((n, n))
        for k, pipe in enumerate(topology.pipes):
            pg = grid.pipes[k]
            D = sbp_derivative(pg.N, pg.h)
            sp, sq = grid.p_slice(k), grid.q_slice(k)
            d2 = pipe.params.diameter ** 2
            m_diag[sp] = d2 * pg.w
            m_diag[sq] = d2 * c ** 2 * pg.w
            Atilde[sp, sq] = -c ** 2 * D
            Atilde[sq, sp] = -D
            Pmat[sq, sp] = -pipe.params.gamma * np.eye(pg.N + 1)
        self.m_diag = m_diag
        self.Atilde = Atilde
        self.Pmat = Pmat

        B1 = np.zeros((n, 2 * m))
        B0 = np.zeros((n, 2 * m))
        active = np.zeros(2 * m, dtype=bool)
        entry_set = set(classification.entry)
        exit_set = set(classification.exit)
        for k, pipe in enumerate(topology.pipes):
            pg = grid.pipes[k]
            L = pipe.params.length
            B1[grid.p_slice(k), 2 * k] = (L - pg.x) / L
            B1[grid.q_slice(k), 2 * k + 1] = pg.x / L
            B0[grid.q_slice(k), 2 * k] = 1.0 / L
            B0[grid.p_slice(k), 2 * k + 1] = -c ** 2 / L
            active[2 * k] = pipe.start in entry_set
            active[2 * k + 1] = pipe.end in exit_set
        self.B1 = B1
        self.B0 = B0
        self.active_slots = active

        self.C = self._constraint_rows()
        self.Pi = self._projector(self.C)
        self.A = self.Pi @ Atilde @ self.Pi
        self.K = self.Pi @ (Atilde + Pmat) @ self.Pi

    # -- assembly helpers -------------------------------------------------

    def _constraint_rows(self) -> np.ndarray:
        grid, topo, cls = self.grid, self.topology, self.classification
        rows = []
        for v in cls.entry:
            (k,) = cls.incident[v]
            row = np.zeros(grid.ndof)
            row[grid.p_index(k, 0)] = 1.0
            rows.append(row)
        for v in cls.exit:
            (k,) = cls.incident[v]
            row = np.zeros(grid.ndof)
            row[grid.q_index(k, grid.pipes[k].N)] = 1.0
            rows.append(row)
        for v in cls.inner:
            ks = cls.incident[v]
            k0 = ks[0]
            n0 = grid.vertex_node(k0, v)
            for k in ks[1:]:
                row = np.zeros(grid.ndof)
                row[grid.p_index(k, grid.vertex_node(k, v))] = 1.0
                row[grid.p_index(k0, n0)] = -1.0
                rows.append(row)
            row = np.zeros(grid.ndof)
            for k in ks:
                d2 = topo.pipes[k].params.diameter ** 2
                row[grid.q_index(k, grid.vertex_node(k, v))] += cls.xi[v][k] * d2
            rows.append(row)
        return np.array(rows)

    def _projector(self, C: np.ndarray) -> np.ndarray:
        minv = 1.0 / self.m_diag
        S = (C * minv) @ C.T
        try:
            cho = scipy.linalg.cho_factor(S)
        except scipy.linalg.LinAlgError:
            raise DiscretizationError("constraint assembly singular (duplicate constraints?)")
        X = scipy.linalg.cho_solve(cho, C)          # S^{-1} C
        return np.eye(self.grid.ndof) - (minv[:, None] * C.T) @ X

    # -- inner product -----------------------------------------------------

    def inner(self, u, v):
        return float(np.dot(u * self.m_diag, v))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def sup_norm(self, u):
        return float(np.max(np.abs(u)))

    # -- boundary operators --------------------------------------------------

    def check_slots(self, phi):
        phi = np.asarray(phi, dtype=float)
        if np.any(phi[~self.active_slots] != 0.0):
            bad = int(np.argmax((phi != 0.0) & ~self.active_slots))
            raise DiscretizationError(f"nonzero value in non-boundary control slot {bad}")
        return phi

    def lift(self, phi):
        return self.B1 @ phi

    def lift_boundary(self, phi):
        return self.B1 @ self.check_slots(phi)

    def boundary_forcing(self, phi, phi_prime):
        phi = self.check_slots(phi)
        phi_prime = self.check_slots(phi_prime)
        return self.B0 @ phi + self.Pmat @ (self.B1 @ phi) - self.B1 @ phi_prime

    # -- nonlinearity ------------------------------------------------------

    def _pressures(self, v):
        return [v[self.grid.p_slice(k)] for k in range(self.topology.m)]

    def _guard(self, v, p_floor):
        for k in range(self.topology.m):
            p = v[self.grid.p_slice(k)]
            if np.any(p < p_floor) or np.any(p <= 0.0):
                node = int(np.argmax((p < p_floor) | (p <= 0.0)))
                raise DiscretizationError(
                    f"vacuum guard: pressure {p[node]:.6g} below floor {p_floor:.6g} "
                    f"on pipe {self.topology.pipes[k].pipe_id!r} node {node}"
                )

    def nonlinearity(self, v, p_floor=0.0):
        """F(v) = (0, -beta q|q|/p) per pipe."""
        self._guard(v, p_floor)
        out = np.zeros_like(v)
        for k, pipe in enumerate(self.topology.pipes):
            p = v[self.grid.p_slice(k)]
            q = v[self.grid.q_slice(k)]
            out[self.grid.q_slice(k)] = -pipe.params.beta * q * np.abs(q) / p
        return out

    def jacobian_coeffs(self, v, p_floor=0.0):
        """Nodewise entries (a21, a22) of the state Jacobian of F:
        dF_q/dp = beta q|q|/p^2, dF_q/dq = -2 beta |q|/p."""
        self._guard(v, p_floor)
        a21 = np.zeros_like(v)
        a22 = np.zeros_like(v)
        for k, pipe in enumerate(self.topology.pipes):
            beta = pipe.params.beta
            p = v[self.grid.p_slice(k)]
            q = v[self.grid.q_slice(k)]
            a21[self.grid.q_slice(k)] = beta * q * np.abs(q) / p ** 2
            a22[self.grid.q_slice(k)] = -2.0 * beta * np.abs(q) / p
        return a21, a22

    def jacobian_matrix(self, v, p_floor=0.0):
        a21, a22 = self.jacobian_coeffs(v, p_floor)
        n = self.grid.ndof
        J = np.zeros((n, n))
        for k in range(self.topology.m):
            sp, sq = self.grid.p_slice(k), self.grid.q_slice(k)
            idx_p = np.arange(sp.start, sp.stop)
            idx_q = np.arange(sq.start, sq.stop)
            J[idx_q, idx_p] = a21[sq]
            J[idx_q, idx_q] = a22[sq]
        return J

    def jacobian_apply(self, v, w, p_floor=0.0):
        a21, a22 = self.jacobian_coeffs(v, p_floor)
        out = np.zeros_like(w)
        for k in range(self.topology.m):
            sp, sq = self.grid.p_slice(k), self.grid.q_slice(k)
            out[sq] = a21[sq] * w[sp] + a22[sq] * w[sq]
        return out

    def jacobian_adjoint_apply(self, v, z, p_floor=0.0):
        """M-adjoint of the Jacobian action: (Jac u, z)_M = (u, Jac* z)_M."""
        a21, a22 = self.jacobian_coeffs(v, p_floor)
        out = np.zeros_like(z)
        for k in range(self.topology.m):
            sp, sq = self.grid.p_slice(k), self.grid.q_slice(k)
            out[sp] = self.c ** 2 * a21[sq] * z[sq]
            out[sq] = a22[sq] * z[sq]
        return out

    # -- analysis helpers -----------------------------------------------------

    def lipschitz_bound(self, box) -> float:
        """Analytic Lipschitz constant of F on the box in the M norm.

        Per pipe, with Q = max(|c_k|, |d_k|) and a = a_k:
        |dF/dp| <= beta Q^2/a^2 and |dF/dq| <= 2 beta Q/a, combined by
        Cauchy-Schwarz against the c^2-weighted flux component.
        """
        worst = 0.0
        for k, pipe in enumerate(self.topology.pipes):
            beta = pipe.params.beta
            a = box.p_bounds[k, 0]
            Q = max(abs(box.q_bounds[k, 0]), abs(box.q_bounds[k, 1]))
            lp = beta * Q ** 2 / a ** 2
            lq = 2.0 * beta * Q / a
            worst = max(worst, np.sqrt(self.c ** 2 * lp ** 2 + lq ** 2))
        return float(worst)

    def source_norm_bound(self) -> float:
        """Operator M-norm bound of the gravity source Pmat."""
        return max((abs(p.params.gamma) * self.c for p in self.topology.pipes), default=0.0)

    def lifting_h1_norm(self) -> float:
        """Discrete H^1-in-space norm of the lifting of the all-ones boundary data."""
        phi = np.where(self.active_slots, 1.0, 0.0)
        z = self.B1 @ phi
        dz = np.zeros_like(z)
        for k in range(self.topology.m):
            pg = self.grid.pipes[k]
            D = sbp_derivative(pg.N, pg.h)
            dz[self.grid.p_slice(k)] = D @ z[self.grid.p_slice(k)]
            dz[self.grid.q_slice(k)] = D @ z[self.grid.q_slice(k)]
        return float(np.sqrt(self.inner(z, z) + self.inner(dz, dz)))
