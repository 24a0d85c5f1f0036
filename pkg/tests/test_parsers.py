import json
import math

import numpy as np
import pytest

import sparsemf.parsers as prs
from sparsemf.error import (ConditionViolation, ExprEvaluationError,
                            RankConditionError, ScenarioError)


@pytest.fixture
def scenario_file(tmp_path, scenarios_dir):
    """Write a variant of the transport scenario."""
    base = json.loads((scenarios_dir / 'transport_linf.json').read_text())

    def write(**changes):
        content = dict(base)
        content.update(changes)
        path = tmp_path / 'scenario.json'
        path.write_text(json.dumps(content))
        return path
    return write


def test_parse_shipped_scenarios(scenarios_dir):
    for name in ('crossing', 'transport_linf', 'transport_l1_infeasible',
                 'advertising_tie', 'advertising_zero', 'averaged',
                 'hamiltonian_pair'):
        sc = prs.parse_scenario(scenarios_dir / f'{name}.json')
        assert sc.sys.is_validated


def test_parse_crossing(scenarios_dir):
    sc = prs.parse_scenario(scenarios_dir / 'crossing.json')
    assert sc.sys.d == 2
    assert sc.budget.mode == 'lagrangian'
    assert sc.cost.kind == 'min_time'
    assert sc.target is None
    assert sc.simulation.controls.shape == (2, 20, 1)
    assert np.all(sc.simulation.controls[0] == -1.)
    assert sc.simulation.grid.dt == pytest.approx(0.1)


def test_parse_transport(scenarios_dir):
    sc = prs.parse_scenario(scenarios_dir / 'transport_linf.json')
    assert sc.solver.restarts == 4
    assert sc.solver.seed == 7
    assert sc.solver.step == pytest.approx(0.02)
    assert sc.target.kind == 'box'


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        prs.parse_scenario(tmp_path / 'nope.json')


def test_empty_file(tmp_path):
    path = tmp_path / 'empty.json'
    path.write_text('  \n')
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert str(err.value).endswith('empty file')


def test_syntax_error_line(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{\n"dynamics": ,\n}')
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'line 2'


def test_missing_field(scenario_file):
    path = scenario_file(budget={'mode': 'linf'})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'budget.alpha'


def test_bad_budget_mode(scenario_file):
    path = scenario_file(budget={'mode': 'l2', 'alpha': 1})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'budget.mode'


def test_omega0_out_of_range(scenario_file):
    path = scenario_file(budget={'mode': 'l1', 'alpha': 1, 'omega0': 2})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'budget.omega0'


def test_box_without_origin(scenario_file, scenarios_dir):
    base = json.loads((scenarios_dir / 'transport_linf.json').read_text())
    dyn = dict(base['dynamics'])
    dyn['control_set'] = {'kind': 'box', 'lo': [0.5], 'hi': [1]}
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(scenario_file(dynamics=dyn))
    assert err.value.field == 'dynamics.control_set'
    assert '0 ∉ U' in str(err.value)


def test_expression_syntax(scenario_file, scenarios_dir):
    base = json.loads((scenarios_dir / 'transport_linf.json').read_text())
    dyn = dict(base['dynamics'])
    dyn['f0'] = {'kind': 'expr', 'components': ['x1 +']}
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(scenario_file(dynamics=dyn))
    assert err.value.field == 'dynamics.f0.components'


def test_rank_condition(scenario_file, scenarios_dir):
    base = json.loads((scenarios_dir / 'transport_linf.json').read_text())
    dyn = dict(base['dynamics'])
    dyn['columns'] = [{'kind': 'expr', 'components': ['x1']}]
    with pytest.raises(RankConditionError):
        prs.parse_scenario(scenario_file(dynamics=dyn))


def test_point_dimension(scenario_file):
    path = scenario_file(initial={'points': [[0, 1]]})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'initial.points'


def test_terminal_cost_needs_family(scenario_file):
    path = scenario_file(cost={'kind': 'terminal_w2_plus_effort',
                               'horizon': 1})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'target'


def test_terminal_cost_needs_horizon(scenario_file):
    path = scenario_file(cost={'kind': 'terminal_w2_plus_effort'})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'cost.horizon'


def test_solver_bracket(scenario_file):
    path = scenario_file(solver={'t_lo': 3, 't_hi': 2})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'solver.t_hi'


def test_integer_fields(scenario_file):
    path = scenario_file(solver={'restarts': 2.5})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'solver.restarts'


def test_menu_dimension(scenario_file):
    path = scenario_file(solver={'menu': [[0, 1]]})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'solver.menu'


def test_offsets(scenario_file):
    sc = prs.parse_scenario(scenario_file(offsets=[0.5]))
    assert np.allclose(sc.offsets, [0.5])
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(scenario_file(offsets=[2.]))
    assert err.value.field == 'offsets'


def test_simulation_shape(scenario_file):
    path = scenario_file(simulation={'t1': 1, 'steps': 4,
                                     'controls': [[[0]] * 3]})
    with pytest.raises(ScenarioError) as err:
        prs.parse_scenario(path)
    assert err.value.field == 'simulation.controls'


def test_parse_measure(scenarios_dir):
    mu = prs.parse_measure(scenarios_dir / 'mu.json')
    assert np.allclose(mu.points, [[0.], [2.]])
    assert np.allclose(mu.weights, [0.5, 0.5])


def test_parse_measure_negative_weight(tmp_path):
    path = tmp_path / 'mu.json'
    path.write_text('{"points": [[0], [1]], "weights": [1, -1]}')
    with pytest.raises(ScenarioError):
        prs.parse_measure(path)


def test_parse_instance(scenarios_dir):
    inst = prs.parse_instance(scenarios_dir / 'chain_instance.json')
    assert inst.states == ('a', 'b', 'c')
    assert math.isinf(inst.exit_costs['a'])
    assert inst.exit_costs['c'] == 5.
    assert inst.has_standstill('b')


def test_parse_instance_violation(tmp_path):
    path = tmp_path / 'inst.json'
    path.write_text(json.dumps({
        'states': ['a', 'b'],
        'transitions': [{'from': 'a', 'to': 'b', 'sigma': 's', 'cost': 1}],
        'exit': {'b': 0}}))
    with pytest.raises(ConditionViolation):
        prs.parse_instance(path)


def test_parse_instance_unknown_state(tmp_path):
    path = tmp_path / 'inst.json'
    path.write_text(json.dumps({
        'states': ['a'],
        'transitions': [{'from': 'a', 'to': 'z', 'sigma': 's', 'cost': 1}]}))
    with pytest.raises(ScenarioError):
        prs.parse_instance(path)


def test_parse_covector(scenarios_dir):
    cov = prs.parse_covector(scenarios_dir / 'covector.json')
    assert np.allclose(cov.p, [[-3.], [-1.]])
    assert cov.p_omega == 0.


def test_parse_vector():
    assert np.allclose(prs.parse_vector('1/4, -2,3'), [0.25, -2., 3.])
    with pytest.raises(ExprEvaluationError):
        prs.parse_vector('x1')


def test_read_result(tmp_path):
    path = tmp_path / 'result.json'
    path.write_text('{"value": "+inf", "seed": 3}')
    found = prs.read_result(path)
    assert math.isinf(found['value'])
    assert found['seed'] == 3
