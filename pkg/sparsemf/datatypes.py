"""Types describing problems, reports and results."""

from __future__ import annotations
from typing import NamedTuple, TYPE_CHECKING
import math

if TYPE_CHECKING:
    from typing import Any, Dict, Mapping, Optional, Tuple
    from numpy import ndarray
    from .dynamics import ControlSystem
    from .ensembles import Ensemble, TimeGrid
    from .measures import DiscreteMeasure, TargetSpec


class ValidationReport(NamedTuple):
    """Outcome of sampling the standing assumptions on probe points.

    Attributes:
        ranks: sampled rank of A(x) at each probe.
        growth_constant: max over probes of the sum of field norms divided by
            1+|x|, an estimate of the growth constant C.
        rank_constant: whether all probes share the same rank.
        failed_probes: indices of probes where a field could not be
            evaluated.
    """

    ranks: Tuple[int, ...]
    growth_constant: float
    rank_constant: bool
    failed_probes: Tuple[int, ...]

    @property
    def rank(self) -> int:
        """Rank at the first probe."""
        return self.ranks[0] if self.ranks else 0

    @property
    def ok(self) -> bool:
        """Whether the assumptions hold on all probes."""
        return self.rank_constant and not self.failed_probes


class PsiResult(NamedTuple):
    """Control magnitude density at a point.

    Attributes:
        value: minimal control norm, None when the velocity is not admissible.
        control: a norm-minimal control realizing the velocity, None when
            value is None.
        residual: norm of f(x, control) - v, or of the best residual found
            when the velocity is not admissible.
    """

    value: Optional[float]
    control: Optional[ndarray]
    residual: float

    @property
    def finite(self) -> bool:
        """Whether the velocity is admissible."""
        return self.value is not None


class FeasibilityReport(NamedTuple):
    """Budget feasibility of an ensemble.

    Attributes:
        feasible: whether the budget holds within tolerance.
        mode: the budget mode checked.
        alpha: the budget level.
        measured: the constrained quantity (max instantaneous effort,
            final cumulative effort or max per-curve effort).
        slack: alpha - measured, negative when violated.
        violations: offending step indices (linf), the last step index (l1)
            or offending particle indices (lagrangian).
    """

    feasible: bool
    mode: str
    alpha: float
    measured: float
    slack: float
    violations: Tuple[int, ...]

    @property
    def violation(self) -> float:
        """Amount by which the budget is exceeded."""
        return max(0., -self.slack)


class BoundReport(NamedTuple):
    """Check of the displacement and moment estimates along an ensemble.

    Attributes:
        holds: whether both estimates hold everywhere.
        max_displacement_ratio: max of displacement over its bound.
        max_moment_ratio: max of the moment over its bound.
        constant_d: the constant D used.
        constant_k: the moment constant K used.
    """

    holds: bool
    max_displacement_ratio: float
    max_moment_ratio: float
    constant_d: float
    constant_k: float


class SuperpositionReport(NamedTuple):
    """Check that averaged velocities at coincident atoms are admissible.

    Attributes:
        holds: whether every averaged velocity lies in F(x).
        max_residual: largest residual of the averaged velocities.
        failures: (step, particle) pairs whose averaged velocity failed.
    """

    holds: bool
    max_residual: float
    failures: Tuple[Tuple[int, int], ...]


class Budget(NamedTuple):
    """Sparsity budget of a scenario.

    Attributes:
        mode: one of ``'linf'``, ``'l1'`` and ``'lagrangian'``.
        alpha: the budget level.
        omega0: initial cumulative effort (L1 and Lagrangian modes).
    """

    mode: str
    alpha: float
    omega0: float = 0.


class CostSpec(NamedTuple):
    """Cost functional of a scenario.

    Attributes:
        kind: one of ``'min_time'``, ``'averaged_min_time'`` and
            ``'terminal_w2_plus_effort'``.
        horizon: fixed horizon of terminal-cost problems.
        effort_weight: weight of the integrated effort.
        terminal_weight: weight of the terminal Wasserstein cost.
    """

    kind: str
    horizon: Optional[float] = None
    effort_weight: float = 1.
    terminal_weight: float = 1.


class SolverParams(NamedTuple):
    """Numerical parameters of the solvers.

    Attributes:
        t_lo: lower end of the horizon bracket.
        t_hi: horizon cap.
        dt: time step, defaults to 1e-2 (t_hi - t_lo).
        restarts: number of local search starts.
        seed: base seed from which restart seeds are derived.
        max_evals: cap on objective evaluations per restart.
        blocks: finest number of time blocks perturbed by the local search.
        tol_target: tolerance on the target distance.
        menu: optional finite control menu enabling the finite-state
            cross-check.
        state_cap: cap on the number of states of the finite-state model.
    """

    t_lo: float = 0.
    t_hi: float = 10.
    dt: Optional[float] = None
    restarts: int = 8
    seed: int = 0
    max_evals: int = 5000
    blocks: int = 32
    tol_target: float = 1e-9
    menu: Optional[Tuple[Tuple[float, ...], ...]] = None
    state_cap: int = 100_000

    @property
    def step(self) -> float:
        """Time step in use."""
        if self.dt is not None:
            return self.dt
        return 1e-2 * (self.t_hi - self.t_lo)


class Simulation(NamedTuple):
    """Prescribed controls to integrate.

    Attributes:
        grid: the time grid.
        controls: array of shape (N, steps, m).
    """

    grid: TimeGrid
    controls: ndarray


class Scenario(NamedTuple):
    """Full problem description.

    Attributes:
        sys: the validated control system.
        mu0: the initial measure.
        budget: the sparsity budget.
        target: target of minimum time problems, target family of terminal
            cost problems, or the set S of averaged minimum time problems.
        cost: the cost functional.
        solver: numerical parameters.
        simulation: prescribed controls, if any.
        offsets: initial per-particle efforts, defaults to budget.omega0.
    """

    sys: ControlSystem
    mu0: DiscreteMeasure
    budget: Budget
    target: Optional[TargetSpec]
    cost: CostSpec
    solver: SolverParams = SolverParams()
    simulation: Optional[Simulation] = None
    offsets: Optional[ndarray] = None


class SolveDiagnostics(NamedTuple):
    """Diagnostics attached to a solver result.

    Attributes:
        feasibility: feasibility report of the returned ensemble.
        restarts: number of local search starts used at the final horizon.
        trace: (horizon, best objective) pairs in evaluation order.
        cross_check: agreement with the finite-state model, None when the
            scenario has no control menu.
        exhausted: whether the horizon cap was reached without success.
        best_residual: best target distance at the horizon cap.
    """

    feasibility: FeasibilityReport
    restarts: int
    trace: Tuple[Tuple[float, float], ...]
    cross_check: Optional[bool] = None
    exhausted: bool = False
    best_residual: float = 0.


class SolveResult(NamedTuple):
    """Solution of an optimal control problem.

    Attributes:
        value: optimal value, ``math.inf`` when infeasible.
        ensemble: the optimal (or best found) ensemble.
        horizon: final time of the ensemble.
        effort_total: integrated effort of the ensemble.
        terminal_cost: terminal Wasserstein cost (0 for minimum time).
        diagnostics: solver diagnostics.
    """

    value: float
    ensemble: Ensemble
    horizon: float
    effort_total: float
    terminal_cost: float
    diagnostics: SolveDiagnostics

    @property
    def finite(self) -> bool:
        """Whether the value is finite."""
        return math.isfinite(self.value)


class DPPReport(NamedTuple):
    """Monotonicity of h along a computed optimum.

    Attributes:
        times: sampled times.
        values: h at the sampled times.
        tolerance: tolerance used.
        is_monotone: whether h is nondecreasing within tolerance.
        is_constant: whether h is constant within tolerance.
        max_decrease: largest decrease between consecutive samples.
    """

    times: Tuple[float, ...]
    values: Tuple[float, ...]
    tolerance: float
    is_monotone: bool
    is_constant: bool
    max_decrease: float


class RunManifest(NamedTuple):
    """Provenance of a CLI run.

    Attributes:
        scenario_hash: sha256 of the scenario file.
        seed: base seed in effect.
        version: library version.
        wall_time: run duration in seconds.
        tolerances: tolerance set in effect.
    """

    scenario_hash: str
    seed: int
    version: str
    wall_time: float
    tolerances: Mapping[str, float]

    def to_dict(self) -> Dict[str, Any]:
        """Plain dict suitable for JSON output."""
        return dict(scenario_hash=self.scenario_hash, seed=self.seed,
                    version=self.version, wall_time=self.wall_time,
                    tolerances=dict(self.tolerances))


class Transition(NamedTuple):
    """Transition of a generalized control system.

    Attributes:
        source: initial state.
        target: final state.
        sigma: identifier of the control steering source to target.
        cost: nonnegative cost, possibly ``math.inf``.
    """

    source: Any
    target: Any
    sigma: str
    cost: float


class HReport(NamedTuple):
    """Evaluation of h(t) = c(x, gamma(t), sigma(t)) + V(gamma(t)).

    Attributes:
        values: h at every index of the trajectory.
        is_monotone: whether h is nondecreasing.
        is_constant: whether h is constant.
        is_optimal: whether V(x) = c(x, gamma(t), sigma(t)) + V(gamma(t))
            at every index.
        increases: indices where h increases.
    """

    values: Tuple[float, ...]
    is_monotone: bool
    is_constant: bool
    is_optimal: bool
    increases: Tuple[int, ...]

    @property
    def consistent(self) -> bool:
        """Whether constancy and optimality agree."""
        return self.is_constant == self.is_optimal


class TerminalReport(NamedTuple):
    """Checks at the final state of a generalized trajectory.

    Attributes:
        value_bound: V(gamma(b)) <= c_f(gamma(b)).
        strict: V(gamma(b)) < c_f(gamma(b)).
        optimal: whether the trajectory is optimal.
        attained: V(gamma(a)) = c(gamma(a), gamma(b), sigma(b)) +
            c_f(gamma(b)).
        optimal_implies_attained: optimality together with
            V(gamma(b)) = c_f(gamma(b)) yields attainment.
        attained_implies_optimal: attainment yields optimality.
    """

    value_bound: bool
    strict: bool
    optimal: bool
    attained: bool
    optimal_implies_attained: bool
    attained_implies_optimal: bool

    @property
    def holds(self) -> bool:
        """Whether the three statements hold."""
        return (self.value_bound and self.optimal_implies_attained and
                self.attained_implies_optimal)
