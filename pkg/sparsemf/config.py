"""Define configuration variables for sparsemf.

See :mod:`sparsemf.args` for additional definitions related to the command
line interface.
"""

from __future__ import annotations
import pathlib

from loam.manager import ConfOpt as Conf
from loam import tools
from loam.tools import switch_opt, command_flag

HOME_DIR = pathlib.Path.home()
CONFIG_DIR = HOME_DIR / '.config' / 'sparsemf'
CONFIG_FILE = CONFIG_DIR / 'config.toml'
CONFIG_LOCAL = pathlib.Path('.sparsemf.toml')

CONF_DEF = {}

CONF_DEF['common'] = dict(
    config=command_flag(None, 'print config options'),
    set=tools.set_conf_opt(),
)

CONF_DEF['core'] = dict(
    scenario=Conf('scenario.json', True, 's', {},
                  True, 'path of the scenario file', '_files'),
    seed=Conf(None, True, None, {'type': int},
              False, 'override the scenario seed'),
    restarts=Conf(None, True, None, {'type': int},
                  False, 'override the number of local search starts'),
    manifest=switch_opt(True, None, 'write a run manifest next to outputs'),
)

CONF_DEF['psi'] = dict(
    x=Conf('0', True, None, {}, False, 'point, comma separated'),
    v=Conf('0', True, None, {}, False, 'velocity, comma separated'),
)

CONF_DEF['wasserstein'] = dict(
    mu=Conf('mu.json', True, None, {}, False, 'first measure file',
            '_files'),
    nu=Conf('nu.json', True, None, {}, False, 'second measure file',
            '_files'),
    p=Conf(2, True, None, {'type': int, 'choices': (1, 2)},
           True, 'order of the Wasserstein distance'),
)

CONF_DEF['simulate'] = dict(
    out=Conf('simulation.json', True, 'o', {}, True,
             'ensemble output file'),
    dump_traj=Conf('', True, None, {}, True,
                   'trajectory CSV file, none if empty'),
    recompute_psi=switch_opt(False, None,
                             'recompute psi from the realized velocities'),
)

CONF_DEF['solve'] = dict(
    out=Conf('result.json', True, 'o', {}, True, 'result output file'),
    dump_traj=Conf('', True, None, {}, True,
                   'trajectory CSV file, none if empty'),
    strict=switch_opt(False, None, 'error out when the horizon cap is hit'),
)

CONF_DEF['validate'] = dict(
    result=Conf('result.json', True, 'r', {}, True,
                'result file written by solve', '_files'),
    samples=Conf(5, True, None, {}, True,
                 'number of interior sample times'),
)

CONF_DEF['hamiltonian'] = dict(
    covector=Conf('covector.json', True, None, {}, False,
                  'covector file', '_files'),
    mode=Conf('linf', True, None, {'choices': ('linf', 'l1')},
              True, 'budget mode of the hamiltonian'),
    alpha=Conf(None, True, None, {'type': float},
               False, 'budget, defaults to the scenario budget'),
)

CONF_DEF['dpp'] = dict(
    instance=Conf('instance.json', True, 'i', {}, False,
                  'generalized instance file', '_files'),
    origin=Conf(None, True, 'f', {}, False, 'initial state'),
    path=Conf('', True, None, {}, False,
              'comma separated states of a trajectory to check'),
)

CONF_DEF['config'] = tools.config_conf_section()
