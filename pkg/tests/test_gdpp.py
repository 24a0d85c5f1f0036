import math

import pytest
from hypothesis import given, settings, strategies as st

from sparsemf import gdpp
from sparsemf.error import (ConditionViolation, InvalidTrajectory,
                            MissingSelfLoop)
from sparsemf.gdpp import GeneralizedInstance, GeneralizedTrajectory


@pytest.fixture
def chain():
    return GeneralizedInstance.with_standstill(
        'abc', [('a', 'b', 'ab', 1.), ('b', 'c', 'bc', 2.),
                ('a', 'c', 'ac', 3.)], {'c': 5.})


def test_chain_values(chain):
    assert gdpp.value(chain, 'a') == pytest.approx(8.)
    assert gdpp.value(chain, 'b') == pytest.approx(7.)
    assert gdpp.value(chain, 'c') == pytest.approx(5.)
    assert all(gdpp.check_dpp(chain, x) for x in 'abc')


def test_chain_optimal_transition(chain):
    best = gdpp.optimal_transition(chain, 'a')
    assert best.target == 'c'
    assert best.sigma == 'ac'
    assert best.cost == 3.


def test_chain_brute_force(chain):
    assert gdpp.brute_force_value(chain, 'a') == pytest.approx(8.)


def test_unreachable_exit():
    inst = GeneralizedInstance.with_standstill(
        'ab', [('a', 'b', 's', 1.)], {})
    assert math.isinf(gdpp.value(inst, 'a'))
    assert gdpp.optimal_transition(inst, 'a') is None
    assert gdpp.check_dpp(inst, 'a')


def test_condition_c1_violation():
    with pytest.raises(ConditionViolation) as err:
        GeneralizedInstance.with_standstill(
            'abc', [('a', 'b', 's', 1.), ('b', 'c', 's', 1.),
                    ('a', 'c', 's', 5.)], {'c': 0.})
    assert err.value.condition == 'C1'


def test_condition_c2_violation():
    with pytest.raises(ConditionViolation) as err:
        GeneralizedInstance('ab', [('a', 'b', 's', 1.)], {'b': 0.})
    assert err.value.condition == 'C2'


def test_unchecked_instance():
    inst = GeneralizedInstance('ab', [('a', 'b', 's', 1.)], {'b': 0.},
                               check=False)
    assert gdpp.value(inst, 'a') == 1.


def test_instance_input_errors():
    with pytest.raises(ValueError):
        GeneralizedInstance('aa', [], {})
    with pytest.raises(ValueError):
        GeneralizedInstance('ab', [('a', 'z', 's', 1.)], {})
    with pytest.raises(ValueError):
        GeneralizedInstance('ab', [('a', 'b', 's', -1.)], {}, check=False)
    with pytest.raises(ValueError):
        GeneralizedInstance('ab', [('a', 'b', 's', 1.), ('a', 'b', 's', 2.)],
                            {}, check=False)


def test_h_constant_on_optimal(chain):
    traj = GeneralizedTrajectory('ac', ['stay', 'ac']).validated(chain)
    report = gdpp.check_h_monotone(chain, traj)
    assert report.values == pytest.approx((8., 8.))
    assert report.is_monotone
    assert report.is_constant
    assert report.is_optimal
    assert report.consistent


def test_h_increases_on_detour():
    inst = GeneralizedInstance.with_standstill(
        'abc', [('a', 'b', 'ab', 2.), ('b', 'c', 'bc', 2.),
                ('a', 'c', 'ac', 3.)], {'c': 5.})
    traj = GeneralizedTrajectory('ab', ['stay', 'ab']).validated(inst)
    report = gdpp.check_h_monotone(inst, traj)
    assert report.values == pytest.approx((8., 9.))
    assert report.increases == (1,)
    assert report.is_monotone
    assert not report.is_constant
    assert not report.is_optimal
    assert report.consistent


def test_terminal_strict_at_interior_stop():
    inst = GeneralizedInstance.with_standstill(
        'abc', [('a', 'b', 'ab', 1.), ('b', 'c', 'bc', 2.),
                ('a', 'c', 'ac', 3.)], {'b': 10., 'c': 5.})
    traj = GeneralizedTrajectory('ab', ['stay', 'ab']).validated(inst)
    report = gdpp.check_h_monotone(inst, traj)
    assert report.values == pytest.approx((8., 8.))
    terminal = gdpp.check_terminal(inst, traj)
    assert terminal.strict
    assert terminal.holds
    assert not terminal.attained


def test_terminal_attained(chain):
    traj = GeneralizedTrajectory('ac', ['stay', 'ac']).validated(chain)
    report = gdpp.check_terminal(chain, traj)
    assert report.value_bound
    assert not report.strict
    assert report.optimal
    assert report.attained
    assert report.holds


def test_terminal_needs_self_loop():
    inst = GeneralizedInstance('ab', [('a', 'a', 'stay', 0.),
                                      ('a', 'b', 's', 1.)], {'b': 0.},
                               check=False)
    traj = GeneralizedTrajectory('ab', ['stay', 's'])
    with pytest.raises(MissingSelfLoop):
        gdpp.check_terminal(inst, traj)


def test_trajectory_needs_standstill_start(chain):
    with pytest.raises(InvalidTrajectory):
        GeneralizedTrajectory('ab', ['ab', 'ab']).validated(chain)


def test_trajectory_unreachable(chain):
    with pytest.raises(InvalidTrajectory):
        GeneralizedTrajectory('ab', ['stay', 'ac']).validated(chain)


def test_trajectory_times():
    with pytest.raises(ValueError):
        GeneralizedTrajectory('ab', ['stay', 's'], times=[1., 1.])
    with pytest.raises(ValueError):
        GeneralizedTrajectory('ab', ['stay'])


def test_trajectory_witnesses(chain):
    traj = GeneralizedTrajectory('abc', ['stay', 'ab', 'ac'])
    checked = traj.validated(chain)
    assert checked.witnesses[0, 2] == 'ac'
    assert checked.witnesses[1, 2] == 'bc'
    assert checked.witnesses[1, 1] == 'stay'


def _closure(costs):
    """Min-plus transitive closure, which satisfies both conditions."""
    size = len(costs)
    best = [row[:] for row in costs]
    for k in range(size):
        for i in range(size):
            for j in range(size):
                best[i][j] = min(best[i][j], best[i][k] + best[k][j])
    return best


@settings(deadline=None, max_examples=50)
@given(st.integers(2, 5).flatmap(lambda n: st.tuples(
    st.lists(st.lists(st.one_of(st.just(math.inf), st.integers(0, 9)),
                      min_size=n, max_size=n), min_size=n, max_size=n),
    st.lists(st.one_of(st.just(math.inf), st.integers(0, 9)),
             min_size=n, max_size=n))))
def test_value_matches_brute_force(data):
    raw, exits = data
    size = len(raw)
    for i in range(size):
        raw[i][i] = 0
    best = _closure(raw)
    states = list(range(size))
    transitions = [(i, j, 'c', best[i][j]) for i in states for j in states
                   if math.isfinite(best[i][j])]
    inst = GeneralizedInstance(states, transitions, dict(enumerate(exits)))
    for x in states:
        assert gdpp.value(inst, x) == gdpp.brute_force_value(inst, x)
        assert gdpp.check_dpp(inst, x)
