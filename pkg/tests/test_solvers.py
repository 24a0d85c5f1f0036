import math

import numpy as np
import pytest

from sparsemf import gdpp, solvers
from sparsemf.datatypes import Budget
from sparsemf.error import HorizonExhausted, StateExplosion
from sparsemf.measures import DiscreteMeasure, TargetSpec
from sparsemf.parsers import parse_scenario


def _quick(sc, **params):
    """Scenario with cheaper solver settings."""
    opts = dict(restarts=1, max_evals=300)
    opts.update(params)
    return sc._replace(solver=sc.solver._replace(**opts))


@pytest.fixture
def transport(scenarios_dir):
    return parse_scenario(scenarios_dir / 'transport_linf.json')


def test_project_budget_linf():
    ctrl = np.array([[[1.], [0.2]], [[1.], [0.2]]])
    out = solvers.project_budget(ctrl, np.array([0.5, 0.5]), 0.1,
                                 Budget('linf', 0.5), np.zeros(2))
    assert np.allclose(out[:, 0], 0.5)
    assert np.allclose(out[:, 1], 0.2)


def test_project_budget_l1():
    ctrl = np.ones((1, 10, 1))
    out = solvers.project_budget(ctrl, np.ones(1), 0.1,
                                 Budget('l1', 0.5, 0.25), np.zeros(1))
    assert 0.1 * out.sum() == pytest.approx(0.25)


def test_project_budget_lagrangian():
    ctrl = np.ones((2, 4, 1))
    out = solvers.project_budget(ctrl, np.array([0.5, 0.5]), 0.5,
                                 Budget('lagrangian', 1.),
                                 np.array([0., 0.75]))
    assert np.allclose(out[0, :, 0], [1., 1., 0., 0.])
    assert np.allclose(out[1, :, 0], [0.5, 0., 0., 0.])


def test_project_budget_unknown():
    with pytest.raises(ValueError):
        solvers.project_budget(np.ones((1, 1, 1)), np.ones(1), 1.,
                               Budget('l3', 1.), np.zeros(1))


def test_initial_offsets(transport):
    assert np.allclose(solvers.initial_offsets(transport), [0.])
    moved = transport._replace(budget=Budget('lagrangian', 1., 0.5))
    assert np.allclose(solvers.initial_offsets(moved), [0.5])
    given = moved._replace(offsets=np.array([0.25]))
    assert np.allclose(solvers.initial_offsets(given), [0.25])


def test_transport_min_time(transport):
    res = solvers.solve(_quick(transport))
    assert res.value == pytest.approx(1., abs=transport.solver.step)
    assert res.diagnostics.feasibility.feasible
    assert res.horizon == pytest.approx(res.value)
    assert np.allclose(res.ensemble.positions[0, -1], [1.], atol=1e-9)


def test_transport_budget_scales_time(transport):
    slow = transport._replace(budget=Budget('linf', 0.5))
    res = solvers.solve(_quick(slow))
    assert res.value == pytest.approx(2., abs=transport.solver.step)


def test_transport_l1_infeasible(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'transport_l1_infeasible.json')
    res = solvers.solve(_quick(sc, max_evals=100))
    assert math.isinf(res.value)
    assert res.diagnostics.exhausted
    assert res.diagnostics.best_residual == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(HorizonExhausted):
        solvers.solve(_quick(sc, max_evals=100), strict=True)


def test_l1_spent_budget_is_drift_only(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'transport_l1_infeasible.json')
    spent = sc._replace(budget=Budget('l1', 0.5, 0.5))
    res = solvers.solve_min_time_l1(_quick(spent, max_evals=50))
    assert math.isinf(res.value)
    assert np.allclose(res.ensemble.positions, 0.)


def test_l1_rejects_offsets_out_of_range(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'transport_l1_infeasible.json')
    with pytest.raises(ValueError):
        solvers.solve_min_time_l1(sc._replace(budget=Budget('l1', 0.5, 1.)))


def test_already_on_target(transport):
    there = transport._replace(mu0=DiscreteMeasure([[1.]]))
    res = solvers.solve(there)
    assert res.value == 0.
    assert res.ensemble.grid.steps == 0


def test_advertising_tie(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'advertising_tie.json')
    res = solvers.solve(_quick(sc))
    assert res.value == pytest.approx(1., abs=1e-3)
    assert res.effort_total + res.terminal_cost == pytest.approx(res.value)


def test_advertising_zero_budget(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'advertising_zero.json')
    res = solvers.solve(sc)
    expected = math.sqrt(((math.exp(0.5) - 1)**2 +
                          (2 * math.exp(0.5) - 3)**2) / 2)
    assert res.value == pytest.approx(expected, rel=1e-6)
    assert res.effort_total == 0.
    assert np.all(res.ensemble.controls == 0.)


@pytest.mark.slow
def test_averaged_min_time(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'averaged.json')
    res = solvers.solve(sc)
    assert res.value == pytest.approx(1.5, abs=2 * sc.solver.step)
    assert res.diagnostics.feasibility.feasible


def test_solve_unknown_cost(transport):
    bogus = transport._replace(cost=transport.cost._replace(kind='other'))
    with pytest.raises(ValueError):
        solvers.solve(bogus)


def test_restarts_are_deterministic(transport):
    sc = _quick(transport, restarts=3, max_evals=200)
    prob = solvers._Problem(sc, 30, sc.solver.step, True)
    first = solvers.optimize(prob)
    second = solvers.optimize(prob)
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


def test_pattern_search_improves(transport):
    sc = _quick(transport, max_evals=400)
    prob = solvers._Problem(sc, 60, sc.solver.step, True)
    start = np.zeros(prob.shape)
    ctrl, val, evals = solvers.pattern_search(prob, start)
    assert val[0] < prob.objective(start[np.newaxis])[0, 0]
    assert evals <= 400 + 2 * 32
    assert np.all(np.abs(ctrl) <= 1. + 1e-12)


def test_cross_check_with_menu(transport):
    sc = _quick(transport, t_hi=1.5, dt=0.1,
                menu=((-1.,), (0.,), (1.,)))
    res = solvers.solve(sc)
    assert res.value == pytest.approx(1.)
    assert res.diagnostics.cross_check


def test_wrap_measure_problem(transport):
    sc = _quick(transport, t_hi=1.5, dt=0.1)
    inst = gdpp.wrap_measure_problem(sc, menu=((-1.,), (0.,), (1.,)))
    assert gdpp.value(inst, inst.states[0]) == pytest.approx(1.)
    assert all(gdpp.check_dpp(inst, x) for x in inst.states)
    with pytest.raises(StateExplosion):
        gdpp.wrap_measure_problem(sc, menu=((-1.,), (0.,), (1.,)), cap=5)
    with pytest.raises(ValueError):
        gdpp.wrap_measure_problem(sc, menu=((2.,),))


def test_validate_optimum(transport):
    sc = _quick(transport, t_hi=2., dt=0.05)
    res = solvers.solve(sc)
    report = solvers.validate_optimum(sc, res, samples=2)
    assert report.is_monotone
    assert report.is_constant
    assert len(report.times) == 4
    assert report.values[0] == pytest.approx(res.value)


def test_validate_infinite(scenarios_dir):
    sc = parse_scenario(scenarios_dir / 'transport_l1_infeasible.json')
    res = solvers.solve(_quick(sc, max_evals=50))
    with pytest.raises(ValueError):
        solvers.validate_optimum(sc, res)


@pytest.mark.parametrize('alpha', [0.5, 1., 2.])
@pytest.mark.parametrize('dist', [0.5, 1., 2.])
def test_transport_linf_time_grid(transport, dist, alpha):
    expected = dist / min(alpha, 1.)
    sc = transport._replace(budget=Budget('linf', alpha),
                            target=TargetSpec.box([dist], [dist]))
    sc = _quick(sc, dt=0.05, t_hi=expected + 1.)
    res = solvers.solve(sc)
    assert res.value == pytest.approx(expected, abs=0.05 + 1e-9)
    assert res.diagnostics.feasibility.feasible


@pytest.mark.parametrize('dist,alpha,omega0', [
    (0.5, 1., 0.),
    (0.5, 1., 0.25),
    (0.5, 0.75, 0.25),
    (1., 1., 0.25),
    (1., 0.5, 0.),
    (0.5, 0.5, 0.25),
])
def test_transport_l1_finite_iff_budget_covers(scenarios_dir, dist, alpha,
                                               omega0):
    sc = parse_scenario(scenarios_dir / 'transport_l1_infeasible.json')
    sc = sc._replace(budget=Budget('l1', alpha, omega0),
                     target=TargetSpec.box([dist], [dist]))
    res = solvers.solve(_quick(sc, dt=0.05))
    remaining = alpha - omega0
    if dist <= remaining:
        assert res.value == pytest.approx(dist, abs=0.05 + 1e-9)
        assert res.effort_total <= remaining + 1e-9
    else:
        assert math.isinf(res.value)
        assert res.diagnostics.best_residual == pytest.approx(
            dist - remaining, abs=1e-3)
