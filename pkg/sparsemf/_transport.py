"""Exact discrete optimal transport.

Uniform measures with the same number of atoms reduce to an assignment
problem. General instances are solved by the transportation simplex: a
staircase north-west corner basis, dual potentials on the spanning tree of
basic cells, and pivots along the cycle closed by the entering cell.
"""

from __future__ import annotations
from collections import deque
import logging
import typing

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .error import TransportError

if typing.TYPE_CHECKING:
    from typing import Dict, List, Tuple
    from numpy import ndarray
    Flows = Dict[Tuple[int, int], float]

logger = logging.getLogger(__name__)


def assignment(cost: ndarray) -> Tuple[float, Flows]:
    """Optimal plan between two uniform measures with N atoms each."""
    nat = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    flows = {(int(i), int(j)): 1. / nat for i, j in zip(rows, cols)}
    return float(cost[rows, cols].sum()) / nat, flows


def _northwest_corner(supply: ndarray, demand: ndarray) -> Flows:
    """Staircase initial basis with exactly n+m-1 cells."""
    rem_a = supply.copy()
    rem_b = demand.copy()
    nrows, ncols = supply.size, demand.size
    flows = {}
    i = j = 0
    while True:
        flow = max(0., min(rem_a[i], rem_b[j]))
        flows[i, j] = flow
        rem_a[i] -= flow
        rem_b[j] -= flow
        if i == nrows - 1 and j == ncols - 1:
            break
        if j == ncols - 1 or (i < nrows - 1 and rem_a[i] <= rem_b[j]):
            i += 1
        else:
            j += 1
    return flows


def _adjacency(nrows: int, flows: Flows) -> List[List[int]]:
    """Adjacency of the basis tree, rows are nodes 0..n-1 and columns n.."""
    adj: List[List[int]] = [[] for _ in range(nrows + 1 + max(
        (j for _, j in flows), default=0))]
    for i, j in sorted(flows):
        adj[i].append(nrows + j)
        adj[nrows + j].append(i)
    return adj


def _potentials(cost: ndarray, flows: Flows) -> Tuple[ndarray, ndarray]:
    """Dual potentials with u_i + v_j = C_ij on basic cells, u_0 = 0."""
    nrows, ncols = cost.shape
    adj = _adjacency(nrows, flows)
    pot = np.full(nrows + ncols, np.nan)
    pot[0] = 0.
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nxt in adj[node]:
            if np.isnan(pot[nxt]):
                if node < nrows:
                    pot[nxt] = cost[node, nxt - nrows] - pot[node]
                else:
                    pot[nxt] = cost[nxt, node - nrows] - pot[node]
                queue.append(nxt)
    if np.any(np.isnan(pot)):
        raise TransportError('basis is not a spanning tree')
    return pot[:nrows], pot[nrows:]


def _tree_path(nrows: int, flows: Flows, start: int, goal: int) -> List[int]:
    """Nodes on the tree path from start to goal."""
    adj = _adjacency(nrows, flows)
    parent = {start: start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt in adj[node]:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def transport_simplex(supply: ndarray, demand: ndarray, cost: ndarray,
                      max_iter: int = 0) -> Tuple[float, Flows]:
    """Solve the balanced transportation problem exactly.

    Args:
        supply: source weights, summing to 1.
        demand: target weights, summing to 1.
        cost: cost matrix.
        max_iter: pivot cap, defaults to 50 (n+m)^2. Past the cap the problem
            is handed to the HiGHS linear programming solver.
    Returns:
        the optimal cost and the flows on basic cells.
    """
    nrows, ncols = cost.shape
    if max_iter <= 0:
        max_iter = 50 * (nrows + ncols)**2
    flows = _northwest_corner(supply, demand)
    eps = 1e-12 * max(1., float(np.abs(cost).max()))
    for _ in range(max_iter):
        pot_u, pot_v = _potentials(cost, flows)
        reduced = cost - pot_u[:, np.newaxis] - pot_v[np.newaxis, :]
        enter = np.unravel_index(np.argmin(reduced), reduced.shape)
        if reduced[enter] >= -eps:
            break
        irow, jcol = int(enter[0]), int(enter[1])
        # cycle: entering cell then tree path from its column to its row
        path = _tree_path(nrows, flows, nrows + jcol, irow)
        cells = []
        for a_node, b_node in zip(path[:-1], path[1:]):
            if a_node < nrows:
                cells.append((a_node, b_node - nrows))
            else:
                cells.append((b_node, a_node - nrows))
        minus = cells[0::2]
        plus = cells[1::2]
        leave = min(minus, key=lambda cell: flows[cell])
        theta = flows[leave]
        for cell in minus:
            flows[cell] -= theta
        for cell in plus:
            flows[cell] += theta
        del flows[leave]
        flows[irow, jcol] = theta
    else:
        logger.warning('transport simplex reached %d pivots, '
                       'falling back to HiGHS', max_iter)
        return linprog_transport(supply, demand, cost)
    value = sum(flow * cost[cell] for cell, flow in sorted(flows.items()))
    return float(value), flows


def linprog_transport(supply: ndarray, demand: ndarray,
                      cost: ndarray) -> Tuple[float, Flows]:
    """Solve the transportation linear program with HiGHS."""
    nrows, ncols = cost.shape
    a_eq = np.zeros((nrows + ncols, nrows * ncols))
    for i in range(nrows):
        a_eq[i, i * ncols:(i + 1) * ncols] = 1.
    for j in range(ncols):
        a_eq[nrows + j, j::ncols] = 1.
    res = linprog(cost.ravel(), A_eq=a_eq,
                  b_eq=np.concatenate([supply, demand]),
                  bounds=(0, None), method='highs')
    if not res.success:
        raise TransportError(f'linear program failed: {res.message}')
    plan = res.x.reshape(nrows, ncols)
    flows = {(int(i), int(j)): float(plan[i, j])
             for i, j in zip(*np.nonzero(plan > 0))}
    return float(res.fun), flows
