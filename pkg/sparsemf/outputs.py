"""Writers of result, manifest, trajectory and ensemble files.

Result files are written with sorted keys and a fixed indentation so that
runs sharing a scenario, a seed and a library version produce byte-identical
files. Infinite values are spelled ``"+inf"``.
"""

from __future__ import annotations
import hashlib
import json
import math
import typing

import numpy as np
import pandas as pd

from .magnitude import psi

if typing.TYPE_CHECKING:
    from typing import Any, Dict, Mapping, Optional
    from pathlib import Path
    from pandas import DataFrame
    from .datatypes import RunManifest, Scenario, SolveResult
    from .dynamics import ControlSystem
    from .ensembles import Ensemble


def scenario_hash(path: Path) -> str:
    """Hex sha256 digest of a file's content."""
    return hashlib.sha256(path.read_bytes()).hexdigest()


def json_value(val: Any) -> Any:
    """Convert numpy scalars and arrays, spell infinities as strings."""
    if isinstance(val, np.ndarray):
        return [json_value(v) for v in val.tolist()]
    if isinstance(val, (list, tuple)):
        return [json_value(v) for v in val]
    if isinstance(val, dict):
        return {str(k): json_value(v) for k, v in val.items()}
    if isinstance(val, np.generic):
        val = val.item()
    if isinstance(val, float) and math.isinf(val):
        return '+inf' if val > 0 else '-inf'
    return val


def dumps(data: Mapping[str, Any]) -> str:
    """Deterministic JSON text of a mapping."""
    return json.dumps(json_value(dict(data)), sort_keys=True, indent=2,
                      allow_nan=False) + '\n'


def write_json(path: Path, data: Mapping[str, Any]) -> None:
    """Write a mapping with :func:`dumps`."""
    path.write_text(dumps(data))


def result_dict(sc: Scenario, res: SolveResult) -> Dict[str, Any]:
    """Content of a result file."""
    return dict(value=res.value, mode=sc.budget.mode, alpha=sc.budget.alpha,
                T=res.horizon, effort_total=res.effort_total,
                terminal_cost=res.terminal_cost, seed=sc.solver.seed,
                restarts=res.diagnostics.restarts)


def write_result(path: Path, sc: Scenario, res: SolveResult) -> None:
    """Write the result file of a solve run."""
    write_json(path, result_dict(sc, res))


def manifest_path(out: Path) -> Path:
    """Path of the manifest emitted alongside an output file."""
    return out.with_name(out.stem + '.manifest.json')


def write_manifest(out: Path, manifest: RunManifest) -> Path:
    """Write the manifest of the run that produced out.

    Returns:
        the path of the manifest file.
    """
    path = manifest_path(out)
    write_json(path, manifest.to_dict())
    return path


def _psi_table(ens: Ensemble, sys: Optional[ControlSystem]) -> np.ndarray:
    norms = np.linalg.norm(ens.controls, axis=2)
    if sys is None:
        return norms
    out = np.empty_like(norms)
    for i, k in np.ndindex(*norms.shape):
        pt = ens.positions[i, k]
        res = psi(sys, pt, sys.velocity(pt, ens.controls[i, k]))
        out[i, k] = norms[i, k] if res.value is None else min(res.value,
                                                              norms[i, k])
    return out


def ensemble_to_frame(ens: Ensemble,
                      sys: Optional[ControlSystem] = None) -> DataFrame:
    """Tabulate an ensemble, one row per grid time and particle.

    Columns are t, particle_id, x_1..x_d, u_1..u_m, psi, zeta and weight.
    The control of the last cell is repeated on the final grid time.

    Args:
        ens: the ensemble.
        sys: when given, psi is recomputed from the realized velocities,
            otherwise it is the norm of the stored control.
    """
    nparts, nsteps = ens.size, ens.grid.steps
    mdim = ens.controls.shape[2]
    if nsteps:
        ctrl = np.concatenate([ens.controls, ens.controls[:, -1:]], axis=1)
        mags = _psi_table(ens, sys)
        mags = np.concatenate([mags, mags[:, -1:]], axis=1)
    else:
        ctrl = np.zeros((nparts, 1, mdim))
        mags = np.zeros((nparts, 1))
    # time-major rows
    data: Dict[str, Any] = {
        't': np.repeat(ens.grid.times, nparts),
        'particle_id': np.tile(np.arange(nparts), nsteps + 1),
    }
    pos = ens.positions.transpose(1, 0, 2).reshape(-1, ens.dim)
    for j in range(ens.dim):
        data[f'x_{j + 1}'] = pos[:, j]
    ctrl = ctrl.transpose(1, 0, 2).reshape(-1, mdim)
    for j in range(mdim):
        data[f'u_{j + 1}'] = ctrl[:, j]
    data['psi'] = mags.T.reshape(-1)
    data['zeta'] = ens.zeta.T.reshape(-1)
    data['weight'] = np.tile(ens.weights, nsteps + 1)
    return pd.DataFrame(data)


def dump_trajectory(path: Path, ens: Ensemble,
                    sys: Optional[ControlSystem] = None) -> None:
    """Write :func:`ensemble_to_frame` as CSV, 17 significant digits."""
    ensemble_to_frame(ens, sys).to_csv(path, index=False,
                                       float_format='%.17g')


def ensemble_dict(ens: Ensemble) -> Dict[str, Any]:
    """Plain representation of an ensemble, lossless through JSON."""
    return dict(grid=dict(t0=ens.grid.t0, dt=ens.grid.dt,
                          steps=ens.grid.steps),
                positions=ens.positions, zeta=ens.zeta,
                weights=ens.weights, controls=ens.controls)


def save_ensemble(path: Path, ens: Ensemble) -> None:
    """Save an ensemble, see :func:`sparsemf.parsers.load_ensemble`."""
    write_json(path, ensemble_dict(ens))
