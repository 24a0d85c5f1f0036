"""Exceptions raised by sparsemf."""

from __future__ import annotations
import typing

if typing.TYPE_CHECKING:
    from os import PathLike
    from typing import Any, Optional, Sequence, Union


class SmfError(Exception):
    """Base class for exceptions raised by sparsemf.

    Note:
        All exceptions derive from this class. To catch any error that might be
        raised by sparsemf due to invalid inputs or infeasible requests, you
        only need to catch this exception.
    """

    pass


class RankDeficiencyWarning(UserWarning):
    """Emitted when the pseudo-inverse cutoff discards singular directions."""

    pass


class ExprSyntaxError(SmfError):
    """Raised when a vector field expression cannot be parsed.

    Attributes:
        src: the offending source string.
        column: 1-based column where the problem was detected.
        msg: description of the problem.
    """

    def __init__(self, src: str, column: int, msg: str):
        self.src = src
        self.column = column
        self.msg = msg
        super().__init__(f'{msg} at column {column} in {src!r}')


class ExprEvaluationError(SmfError):
    """Raised when an expression cannot be evaluated at a point.

    Attributes:
        expr: printed form of the failing subexpression.
        msg: description of the problem.
    """

    def __init__(self, expr: str, msg: str):
        self.expr = expr
        self.msg = msg
        super().__init__(f'{msg} while evaluating {expr}')


class ControlOutOfSet(SmfError):
    """Raised when a control lies outside the control set.

    Attributes:
        control: the offending control.
        distance: its distance to the control set.
    """

    def __init__(self, control: Sequence[float], distance: float):
        self.control = control
        self.distance = distance
        super().__init__(
            f'control {list(control)} is at distance {distance:.3e} '
            'from the control set')


class RankConditionError(SmfError):
    """Raised when the sampled rank of A(x) is not constant.

    Attributes:
        ranks: the distinct sampled ranks.
    """

    def __init__(self, ranks: Sequence[int]):
        self.ranks = ranks
        super().__init__(f'rank of A(x) varies across probes: {list(ranks)}')


class NotValidatedError(SmfError):
    """Raised when an operation needs a validated control system."""

    def __init__(self, what: str):
        self.what = what
        super().__init__(f'{what} requires a validated control system')


class NonFiniteState(SmfError):
    """Raised when integration produces non finite coordinates.

    Attributes:
        step: grid index at which the state stopped being finite.
        particles: indices of the affected particles.
    """

    def __init__(self, step: int, particles: Sequence[int]):
        self.step = step
        self.particles = particles
        super().__init__(
            f'non finite state at step {step} for particles {list(particles)}')


class InvalidIndexError(SmfError, IndexError):
    """Raised when a grid index is out of range.

    Attributes:
        index: the invalid index.
        msg: the error message.
    """

    def __init__(self, index: Any, msg: str):
        self.index = index
        self.msg = msg
        super().__init__(f'{msg}: {index}')


class EndpointMismatch(SmfError):
    """Raised when two ensembles cannot be glued.

    Attributes:
        atom: the offending endpoint (position and weight) if any.
        msg: the error message.
    """

    def __init__(self, msg: str, atom: Optional[Any] = None):
        self.atom = atom
        self.msg = msg
        super().__init__(msg if atom is None else f'{msg}: {atom}')


class TransportError(SmfError):
    """Raised when a transport problem cannot be solved."""

    def __init__(self, msg: str):
        self.msg = msg
        super().__init__(msg)


class ConditionViolation(SmfError):
    """Raised when a generalized instance violates C1 or C2.

    Attributes:
        condition: either ``'C1'`` or ``'C2'``.
        witness: the transitions exhibiting the violation.
    """

    def __init__(self, condition: str, witness: Sequence[Any]):
        self.condition = condition
        self.witness = witness
        super().__init__(f'condition {condition} fails for {list(witness)}')


class MissingSelfLoop(SmfError):
    """Raised when a terminal state has no zero-cost standstill.

    Attributes:
        state: the terminal state.
    """

    def __init__(self, state: Any):
        self.state = state
        super().__init__(f'no zero-cost self transition at state {state!r}')


class InvalidTrajectory(SmfError):
    """Raised when a generalized trajectory is not admissible.

    Attributes:
        index: position in the trajectory where the check failed.
        msg: the error message.
    """

    def __init__(self, index: Any, msg: str):
        self.index = index
        self.msg = msg
        super().__init__(f'{msg} at index {index}')


class StateExplosion(SmfError):
    """Raised when a reachable set exceeds the configured cap.

    Attributes:
        cap: the configured cap on the number of states.
    """

    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f'reachable set exceeds {cap} states')


class HorizonExhausted(SmfError):
    """Raised when the horizon cap is reached without meeting the target.

    Attributes:
        horizon: the horizon cap.
        residual: best target distance found at the cap.
    """

    def __init__(self, horizon: float, residual: float):
        self.horizon = horizon
        self.residual = residual
        super().__init__(
            f'target not reached within horizon {horizon}, '
            f'best residual {residual:.3e}')


class ScenarioError(SmfError):
    """Raised when an input file is malformed or fails validation.

    Attributes:
        file: path of the file where a problem was encountered.
        field: dotted path of the offending field, empty for the whole file.
        msg: error message.
    """

    def __init__(self, file: Union[str, PathLike], field: str, msg: str):
        self.file = file
        self.field = field
        self.msg = msg
        where = f'{file}' if not field else f'{file}: {field}'
        super().__init__(f'{where}: {msg}')


class InvalidControlSet(SmfError, ValueError):
    """Raised when a control set is not convex compact with 0 in it.

    Attributes:
        msg: the failed requirement.
    """

    def __init__(self, msg: str):
        self.msg = msg
        super().__init__(msg)
