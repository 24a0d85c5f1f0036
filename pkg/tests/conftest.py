import pytest


@pytest.fixture(scope='session')
def repo_dir():
    import pathlib
    return pathlib.Path(__file__).parent.parent.resolve()


@pytest.fixture(scope='session')
def scenarios_dir(repo_dir):
    return repo_dir / 'scenarios'


@pytest.fixture(scope='module')
def line_sys():
    from sparsemf.dynamics import ControlSet, ControlSystem, VectorField
    return ControlSystem(VectorField.constant([0.]),
                         [VectorField.constant([1.])],
                         ControlSet.ball(1, 1.)).validated()


@pytest.fixture(scope='module')
def crossing_sys():
    from sparsemf.dynamics import ControlSet, ControlSystem, VectorField
    return ControlSystem(VectorField.constant([1., 0.]),
                         [VectorField.constant([0., 1.])],
                         ControlSet.ball(1, 1.)).validated()


@pytest.fixture(scope='module')
def twin_sys():
    """Planar system with two identical control columns."""
    from sparsemf.dynamics import ControlSet, ControlSystem, VectorField
    col = VectorField.constant([1., 0.])
    return ControlSystem(VectorField.constant([0., 0.]), [col, col],
                         ControlSet.ball(2, 2.)).validated()
