"""Control signals, the discrete H^2 norm and feasibility projection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasnet.controls import ControlSignal, H2Space, equilibrium_signal, h2_gram
from gasnet.errors import GasnetError


def _space(steps=20, horizon=0.5, nslots=2, eta=1.0, kappa=0.1):
    times = np.linspace(0.0, horizon, steps + 1)
    active = np.ones(nslots, dtype=bool)
    return H2Space(times, active, eta, kappa)


def test_signal_requires_uniform_grid():
    times = np.array([0.0, 0.1, 0.25])
    with pytest.raises(GasnetError):
        ControlSignal(times, np.zeros((3, 2)))


def test_signal_midpoints_and_rates():
    times = np.linspace(0.0, 1.0, 5)
    values = np.outer(times ** 2, [1.0])
    sig = ControlSignal(times, values)
    t_mid = 0.5 * (times[:-1] + times[1:])
    assert np.allclose(sig.midpoints()[:, 0], 0.5 * (times[:-1] ** 2 + times[1:] ** 2))
    assert np.allclose(sig.midpoint_rates()[:, 0], 2.0 * t_mid)


def test_h2_gram_is_spd_and_riesz_inverts_it():
    steps, tau = 16, 0.03
    G = h2_gram(steps, tau)
    assert np.allclose(G, G.T)
    assert np.all(np.linalg.eigvalsh(G) > 0.0)
    space = _space(steps=steps, horizon=steps * tau, nslots=1)
    rng = np.random.default_rng(0)
    b = np.zeros((steps + 1, 1))
    b[1:, 0] = rng.standard_normal(steps)
    g = space.riesz(b)
    h = np.zeros_like(b)
    h[1:, 0] = rng.standard_normal(steps)
    # <riesz(b), h>_H2 must reproduce the raw pairing b^T h
    assert space.inner(g, h) == pytest.approx(float(np.sum(b * h)), rel=1e-10)


def test_h2_norm_penalizes_roughness():
    space = _space(steps=32, horizon=1.0, nslots=1)
    t = space.times
    smooth = np.zeros((len(t), 1))
    smooth[:, 0] = np.sin(np.pi * t)
    rough = smooth.copy()
    rough[1::2, 0] *= -1.0
    rough[0, 0] = 0.0
    assert space.norm(rough) > 10.0 * space.norm(smooth)


def test_check_reduced_rejects_nonzero_initial_value():
    space = _space()
    red = np.zeros((len(space.times), 2))
    red[0, 0] = 0.1
    with pytest.raises(GasnetError):
        space.check_reduced(red)


def test_projection_is_idempotent_and_feasible():
    space = _space(kappa=0.05)
    rng = np.random.default_rng(3)
    red = np.zeros((len(space.times), 2))
    red[1:] = rng.standard_normal((len(space.times) - 1, 2))
    proj = space.project_feasible(red)
    assert space.is_admissible(proj)
    again = space.project_feasible(proj)
    assert np.array_equal(proj, again)


def test_projection_fixes_feasible_points_exactly():
    space = _space(kappa=0.05)
    red = np.zeros((len(space.times), 2))
    red[1:, 0] = 1e-4
    assert space.is_admissible(red)
    assert np.array_equal(space.project_feasible(red), red)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-6, 1e3))
def test_projection_feasible_for_arbitrary_inputs(seed, scale):
    space = _space(kappa=0.02)
    gen = np.random.default_rng(seed)
    red = np.zeros((len(space.times), 2))
    red[1:] = scale * gen.standard_normal((len(space.times) - 1, 2))
    proj = space.project_feasible(red)
    assert space.norm(proj) <= space.eta * (1 + 1e-9)
    assert space.sup_norm(proj) <= space.kappa * (1 + 1e-9)


def test_equilibrium_signal_is_constant_boundary_trace(single_pipe):
    sc = single_pipe
    sig = equilibrium_signal(sc.times, sc.steady, sc.disc.active_slots)
    assert np.all(sig.values == sig.values[0])
    # slot 0 carries the entry pressure, slot 1 the exit flux
    assert sig.values[0, 0] == pytest.approx(sc.steady.p_in[0])
    assert sig.values[0, 1] == pytest.approx(sc.steady.q[0])


def test_dead_slots_must_stay_zero():
    times = np.linspace(0.0, 0.5, 11)
    active = np.array([True, False])
    space = H2Space(times, active, 1.0, 0.1)
    red = np.zeros((11, 2))
    red[1:, 1] = 0.2
    with pytest.raises(GasnetError):
        space.check_reduced(red)
