import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsemf import ensembles
from sparsemf.dynamics import ControlSet, ControlSystem, VectorField
from sparsemf.ensembles import TimeGrid
from sparsemf.error import (ControlOutOfSet, EndpointMismatch,
                            InvalidIndexError, NonFiniteState)
from sparsemf.measures import DiscreteMeasure


@pytest.fixture
def crossing_ens(crossing_sys):
    mu0 = DiscreteMeasure([[0., 1.], [0., -1.]])
    grid = TimeGrid.from_bounds(0., 2., 20)
    ctrl = np.zeros((2, 20, 1))
    ctrl[0] = -1.
    ctrl[1] = 1.
    return ensembles.integrate(crossing_sys, mu0, ctrl, grid)


def test_time_grid():
    grid = TimeGrid.from_bounds(1., 2., 4)
    assert grid.dt == pytest.approx(0.25)
    assert grid.t1 == pytest.approx(2.)
    assert np.allclose(grid.times, [1., 1.25, 1.5, 1.75, 2.])


def test_crossing_curves(crossing_ens):
    assert np.allclose(crossing_ens.positions[0, -1], [2., -1.])
    assert np.allclose(crossing_ens.positions[1, -1], [2., 1.])
    assert np.allclose(crossing_ens.positions[:, 10], [[1., 0.], [1., 0.]])
    assert np.allclose(crossing_ens.zeta[:, -1], [2., 2.])


def test_crossing_efforts(crossing_ens):
    for k in range(crossing_ens.grid.steps):
        assert ensembles.theta(crossing_ens, k) == pytest.approx(1.)
    assert ensembles.omega(crossing_ens, 0) == 0.
    assert ensembles.omega(crossing_ens, 20) == pytest.approx(2.)


def test_crossing_feasibility(crossing_ens):
    lag = ensembles.check_feasibility(crossing_ens, 'lagrangian', 2.)
    assert lag.feasible
    assert lag.measured == pytest.approx(2.)
    linf = ensembles.check_feasibility(crossing_ens, 'linf', 0.5)
    assert not linf.feasible
    assert linf.violations == tuple(range(20))
    l1 = ensembles.check_feasibility(crossing_ens, 'l1', 1.)
    assert not l1.feasible
    assert l1.violations == (20,)
    assert l1.slack == pytest.approx(-1.)


def test_feasibility_unknown_mode(crossing_ens):
    with pytest.raises(ValueError):
        ensembles.check_feasibility(crossing_ens, 'l2', 1.)


def test_theta_recomputed(twin_sys):
    mu0 = DiscreteMeasure([[0., 0.]])
    ctrl = np.array([[[1., -1.], [1., 1.]]])
    ens = ensembles.integrate(twin_sys, mu0, ctrl,
                              TimeGrid.from_bounds(0., 1., 2))
    assert ensembles.theta(ens, 0) == pytest.approx(np.sqrt(2.))
    assert ensembles.theta(ens, 0, twin_sys) == pytest.approx(0.)
    assert ensembles.theta(ens, 1, twin_sys) == pytest.approx(np.sqrt(2.))


def test_rk4_linear_exact():
    sys = ControlSystem(VectorField.linear([[1.]]), [],
                        ControlSet.ball(0, 1.)).validated()
    pos = ensembles.rk4_positions(sys, np.array([[1.]]),
                                  np.zeros((1, 100, 0)), 0.01)
    assert pos[0, -1, 0] == pytest.approx(np.e, rel=1e-9)


def test_integrate_rejects_controls(crossing_sys):
    mu0 = DiscreteMeasure([[0., 0.]])
    with pytest.raises(ControlOutOfSet):
        ensembles.integrate(crossing_sys, mu0, np.full((1, 2, 1), 1.5),
                            TimeGrid.from_bounds(0., 1., 2))
    with pytest.raises(ValueError):
        ensembles.integrate(crossing_sys, mu0, np.zeros((1, 3, 1)),
                            TimeGrid.from_bounds(0., 1., 2))


def test_integrate_overflow():
    sys = ControlSystem(VectorField.expression(['x1 * x1']), [],
                        ControlSet.ball(0, 1.))
    mu0 = DiscreteMeasure([[1.], [1e200]])
    with pytest.raises(NonFiniteState) as err:
        ensembles.integrate(sys, mu0, np.zeros((2, 5, 0)),
                            TimeGrid.from_bounds(0., 1., 5))
    assert err.value.step == 1
    assert err.value.particles == [1]


def test_marginal_index(crossing_ens):
    mu = crossing_ens.marginal(20)
    assert np.allclose(mu.points, [[2., -1.], [2., 1.]])
    with pytest.raises(InvalidIndexError):
        crossing_ens.marginal(21)
    with pytest.raises(IndexError):
        ensembles.theta(crossing_ens, 20)


def test_restrict(crossing_ens):
    part = ensembles.restrict(crossing_ens, 5, 15)
    assert part.grid.steps == 10
    assert part.grid.t0 == pytest.approx(0.5)
    assert np.allclose(part.offsets, [0.5, 0.5])
    assert np.allclose(part.positions[:, 0], crossing_ens.positions[:, 5])
    with pytest.raises(InvalidIndexError):
        ensembles.restrict(crossing_ens, 15, 5)


def test_concatenate_restores(crossing_ens):
    head = ensembles.restrict(crossing_ens, 0, 8)
    tail = ensembles.restrict(crossing_ens, 8, 20)
    glued = ensembles.concatenate(head, tail)
    assert glued.grid.steps == 20
    assert np.allclose(glued.positions, crossing_ens.positions)
    assert np.allclose(glued.zeta, crossing_ens.zeta)
    assert np.allclose(glued.controls, crossing_ens.controls)


def test_concatenate_index_swaps_at_crossing(crossing_sys, crossing_ens):
    head = ensembles.restrict(crossing_ens, 0, 10)
    mid = crossing_ens.marginal(10)
    tail = ensembles.integrate(crossing_sys, mid, np.zeros((2, 5, 1)),
                               TimeGrid(1., 0.1, 5))
    glued = ensembles.concatenate(head, tail)
    assert np.allclose(glued.positions[:, -1], [[1.5, 0.], [1.5, 0.]])
    assert np.allclose(glued.zeta[:, -1], [1., 1.])


def test_concatenate_disintegrate(crossing_sys):
    mu0 = DiscreteMeasure([[0., 1.], [0., -1.]])
    grid = TimeGrid(0., 0.1, 10)
    ctrl = np.zeros((2, 10, 1))
    ctrl[0] = -1.
    ctrl[1] = 1.
    head = ensembles.integrate(crossing_sys, mu0, ctrl, grid)
    split = DiscreteMeasure([[1., 0.], [1., 0.], [1., 0.]], [1., 1., 2.])
    tctrl = np.zeros((3, 5, 1))
    tctrl[0] = 1.
    tctrl[1] = -1.
    tail = ensembles.integrate(crossing_sys, split, tctrl,
                               TimeGrid(1., 0.1, 5))
    glued = ensembles.concatenate(head, tail, mode='disintegrate')
    assert glued.size == 6
    assert glued.weights.sum() == pytest.approx(1.)
    assert np.allclose(glued.weights, [0.125, 0.125, 0.25] * 2)
    with pytest.raises(EndpointMismatch):
        ensembles.concatenate(head, tail)


def test_concatenate_time_mismatch(crossing_ens):
    head = ensembles.restrict(crossing_ens, 0, 8)
    tail = ensembles.restrict(crossing_ens, 9, 20)
    with pytest.raises(EndpointMismatch):
        ensembles.concatenate(head, tail)


def test_concatenate_unmatched_atom(crossing_sys, crossing_ens):
    head = ensembles.restrict(crossing_ens, 0, 10)
    other = DiscreteMeasure([[1., 0.], [1., 0.5]])
    tail = ensembles.integrate(crossing_sys, other, np.zeros((2, 2, 1)),
                               TimeGrid(1., 0.1, 2))
    with pytest.raises(EndpointMismatch):
        ensembles.concatenate(head, tail)
    with pytest.raises(EndpointMismatch):
        ensembles.concatenate(head, tail, mode='disintegrate')


def test_moment_bounds(crossing_sys, crossing_ens):
    report = ensembles.check_moment_bounds(crossing_sys, crossing_ens)
    assert report.holds
    assert report.max_displacement_ratio <= 1.
    assert report.constant_d == pytest.approx(crossing_sys.growth_bound)


def test_superposition(crossing_sys, crossing_ens):
    report = ensembles.check_superposition(crossing_sys, crossing_ens)
    assert report.holds
    assert report.failures == ()


def test_initial_velocity_ensemble(crossing_sys):
    mu0 = DiscreteMeasure([[0., 1.], [0., -1.]])
    grid = TimeGrid(0., 0.01, 50)
    ens = ensembles.initial_velocity_ensemble(
        crossing_sys, mu0, [[1., -1.], [1., 0.5]], grid, 0.1)
    assert np.allclose(ens.controls[:, 0], [[-1.], [0.5]])
    assert ensembles.theta(ens, 0) == pytest.approx(0.75)
    assert np.all(ens.theta_series <= 0.75 + 1e-12)
    assert ens.omega_series[-1] <= 0.1
    with pytest.raises(ValueError):
        ensembles.initial_velocity_ensemble(
            crossing_sys, mu0, [[0., 1.], [1., 0.]], grid, 0.1)
    with pytest.raises(ValueError):
        ensembles.initial_velocity_ensemble(
            crossing_sys, mu0, [[1., -1.], [1., 0.5]], grid, 0.001)


def _random_ensemble(sys, seed, npart, steps):
    gen = np.random.default_rng(seed)
    mu0 = DiscreteMeasure(gen.normal(size=(npart, sys.d)),
                          gen.uniform(0.1, 1., size=npart))
    ctrl = gen.uniform(-1., 1., size=(npart, steps, sys.m))
    return ensembles.integrate(sys, mu0, ctrl,
                               TimeGrid(0., gen.uniform(0.05, 0.5), steps))


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(2, 12),
       st.floats(0., 1., exclude_max=True))
def test_restrict_concatenate_round_trip(crossing_sys, seed, npart, steps,
                                         frac):
    ens = _random_ensemble(crossing_sys, seed, npart, steps)
    split = 1 + int(frac * (steps - 1))
    glued = ensembles.concatenate(ensembles.restrict(ens, 0, split),
                                  ensembles.restrict(ens, split, steps))
    assert glued.grid.steps == steps
    assert np.allclose(glued.positions, ens.positions)
    assert np.allclose(glued.controls, ens.controls)
    assert np.allclose(glued.zeta, ens.zeta)
    assert np.allclose(glued.weights, ens.weights)


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 12))
def test_random_ensembles_within_moment_bounds(crossing_sys, seed, npart,
                                               steps):
    ens = _random_ensemble(crossing_sys, seed, npart, steps)
    report = ensembles.check_moment_bounds(crossing_sys, ens)
    assert report.holds
    assert report.max_displacement_ratio <= 1.
