import re
import pytest
import sparsemf.args
import sparsemf.commands


def test_no_args(capsys):
    sparsemf.args.parse_args([])()
    output = capsys.readouterr()
    expected = re.compile(
        r'sparsemf solves sparsity-constrained.*'
        r'Run `sparsemf -h` for usage\n$',
        flags=re.DOTALL)
    assert expected.fullmatch(output.out)


def test_help(capsys):
    with pytest.raises(SystemExit):
        sparsemf.args.parse_args(['-h'])
    output = capsys.readouterr()
    expected = re.compile(
        r'^usage:.*\nsparsemf solves sparsity-constrained.*\n'
        r'.*psi.*Compute the control magnitude density\n'
        r'.*--help.*show this help message and exit.*$',
        flags=re.DOTALL)
    assert expected.fullmatch(output.out)


def test_invalid_argument(capsys):
    with pytest.raises(SystemExit):
        sparsemf.args.parse_args(['-dummyinvalidarg'])
    output = capsys.readouterr()
    expected = re.compile(
        r'^usage: .*error: unrecognized arguments:.*\n$',
        flags=re.DOTALL)
    assert expected.fullmatch(output.err)


def test_invalid_subcmd(capsys):
    with pytest.raises(SystemExit):
        sparsemf.args.parse_args(['dummyinvalidcmd'])
    output = capsys.readouterr()
    expected = re.compile(
        r'^usage: .*error:.*invalid choice:.*\n$',
        flags=re.DOTALL)
    assert expected.fullmatch(output.err)


@pytest.mark.parametrize('name,func', [
    ('psi', sparsemf.commands.psi_cmd),
    ('wasserstein', sparsemf.commands.wasserstein_cmd),
    ('simulate', sparsemf.commands.simulate_cmd),
    ('solve', sparsemf.commands.solve_cmd),
    ('validate', sparsemf.commands.validate_cmd),
    ('hamiltonian', sparsemf.commands.hamiltonian_cmd),
    ('dpp-check', sparsemf.commands.dpp_check_cmd),
    ('version', sparsemf.commands.version_cmd),
    ('config', sparsemf.commands.config_cmd),
])
def test_subcmd(name, func):
    assert sparsemf.args.parse_args([name]) is func


def test_subcmd_options():
    sparsemf.args.parse_args(['solve', '-s', 'other.json', '--seed', '3',
                              '-o', 'out.json'])
    assert sparsemf.conf.core.scenario == 'other.json'
    assert sparsemf.conf.core.seed == 3
    assert sparsemf.conf.solve.out == 'out.json'
    del sparsemf.conf.core.scenario
    del sparsemf.conf.core.seed
    del sparsemf.conf.solve.out


def test_wasserstein_order_choices(capsys):
    with pytest.raises(SystemExit):
        sparsemf.args.parse_args(['wasserstein', '--p', '3'])
    output = capsys.readouterr()
    assert 'invalid choice' in output.err
