"""Time-sampled boundary controls and the discrete H^2 machinery.

A control holds samples Phi(t_j) on a uniform time grid for the 2m
boundary slots (slot 2k: pressure at the start of pipe k, slot 2k+1:
flux at its end).  Only slots attached to boundary vertices are active;
all others stay identically zero.  The reduced control Phi - Phi_e
vanishes at t = 0 and lives in the discrete H^2 ball of radius eta
intersected with the sup-norm ball of radius kappa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GasnetError

__all__ = [
    "ControlError",
    "ControlSignal",
    "equilibrium_signal",
    "h2_gram",
    "H2Space",
]


class ControlError(GasnetError):
    """Invalid control data (wrong grid, nonzero dead slots, anchor mismatch)."""


@dataclass
class ControlSignal:
    """Samples of the boundary control on a uniform time grid."""

    times: np.ndarray            # shape (M+1,)
    values: np.ndarray           # shape (M+1, 2m)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.times.shape[0]:
            raise ControlError("sample count mismatch")
        steps = np.diff(self.times)
        if len(steps) < 1 or not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
            raise ControlError("time grid must be uniform")

    @property
    def tau(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def copy(self):
        return ControlSignal(self.times.copy(), self.values.copy())

    def midpoints(self):
        """Samples averaged to step midpoints, shape (M, 2m)."""
        return 0.5 * (self.values[:-1] + self.values[1:])

    def midpoint_rates(self):
        """Difference quotients at step midpoints, shape (M, 2m)."""
        return np.diff(self.values, axis=0) / self.tau

    def truncated(self, steps: int):
        return ControlSignal(self.times[: steps + 1], self.values[: steps + 1])


def equilibrium_signal(times, steady, active_slots) -> ControlSignal:
    """The constant-in-time control Phi_e holding the equilibrium boundary data."""
    m = len(steady.q)
    phi = np.zeros(2 * m)
    for k in range(m):
        if active_slots[2 * k]:
            phi[2 * k] = steady.p_in[k]
        if active_slots[2 * k + 1]:
            phi[2 * k + 1] = steady.q[k]
    values = np.tile(phi, (len(times), 1))
    return ControlSignal(np.asarray(times, dtype=float), values)


def h2_gram(steps: int, tau: float) -> np.ndarray:
    """Gram matrix of the discrete H^2 inner product on samples u_1..u_M
    of a scalar signal with u_0 = 0 (mass + first- + second-difference parts)."""
    M = steps
    # trapezoid mass on nodes 1..M (node 0 carries the fixed zero)
    M0 = np.diag(np.r_[np.full(M - 1, tau), tau / 2.0])
    # first differences d_j = (u_j - u_{j-1})/tau, j = 1..M, midpoint mass tau
    D1 = (np.eye(M) - np.eye(M, k=-1)) / tau
    # second differences s_j = (u_{j+1} - 2u_j + u_{j-1})/tau^2, j = 1..M-1
    D2 = np.zeros((M - 1, M))
    for j in range(1, M):
        if j - 1 >= 1:
            D2[j - 1, j - 2] = 1.0
        D2[j - 1, j - 1] = -2.0
        D2[j - 1, j] = 1.0
    D2 /= tau ** 2
    return M0 + tau * D1.T @ D1 + tau * D2.T @ D2


class H2Space:
    """Inner-product machinery for reduced controls on a fixed time grid."""

    def __init__(self, times, active_slots, eta: float, kappa: float):
        self.times = np.asarray(times, dtype=float)
        self.active_slots = np.asarray(active_slots, dtype=bool)
        self.eta = float(eta)
        self.kappa = float(kappa)
        self.steps = len(self.times) - 1
        self.tau = float(self.times[1] - self.times[0])
        self.gram = h2_gram(self.steps, self.tau)
        self._cho = scipy.linalg.cho_factor(self.gram)

    def check_reduced(self, red: np.ndarray):
        if red.shape != (self.steps + 1, len(self.active_slots)):
            raise ControlError("reduced control has wrong shape")
        if np.any(red[0] != 0.0):
            raise ControlError("reduced control must vanish at t = 0")
        if np.any(red[:, ~self.active_slots] != 0.0):
            raise ControlError("nonzero value in non-boundary control slot")

    def inner(self, red_a: np.ndarray, red_b: np.ndarray) -> float:
        """Discrete H^2 inner product of two reduced controls."""
        total = 0.0
        for s in np.flatnonzero(self.active_slots):
            total += float(red_a[1:, s] @ self.gram @ red_b[1:, s])
        return total

    def norm(self, red: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(red, red), 0.0)))

    def sup_norm(self, red: np.ndarray) -> float:
        return float(np.max(np.abs(red))) if red.size else 0.0

    def riesz(self, b: np.ndarray) -> np.ndarray:
        """Solve G g = b per active slot; b and result are (M+1, 2m) arrays
        of reduced-control shape (row 0 and dead slots zero)."""
        g = np.zeros_like(b)
        for s in np.flatnonzero(self.active_slots):
            g[1:, s] = scipy.linalg.cho_solve(self._cho, b[1:, s])
        return g

    def is_admissible(self, red: np.ndarray, tol=1e-12) -> bool:
        return (self.norm(red) <= self.eta * (1 + tol)
                and self.sup_norm(red) <= self.kappa * (1 + tol))

    def project_feasible(self, red: np.ndarray) -> np.ndarray:
        """Radial scaling into the intersection of the H^2 and sup-norm balls."""
        self.check_reduced(red)
        nh = self.norm(red)
        ns = self.sup_norm(red)
        s = 1.0
        if nh > 0.0:
            s = min(s, self.eta / nh)
        if ns > 0.0:
            s = min(s, self.kappa / ns)
        # tolerance keeps the projection exactly idempotent under roundoff
        if s >= 1.0 - 1e-12:
            return red.copy()
        return s * red
