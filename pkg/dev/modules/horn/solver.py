"""Depth-first SLD resolution with step accounting.

Leftmost goal selection, clauses tried in source order, first solution wins.
The search keeps an explicit choice-point stack and a binding trail so deep
derivations never touch the Python recursion limit.
"""

import itertools
import logging
import operator
from dataclasses import dataclass, field

from core.conf import bench_setting
from core.errors import ContractError, InstantiationError, NonTerminationError

from .terms import Compound, Integer, Variable, indicator, variables_of

logger = logging.getLogger(__name__)

_COMPARE = {
    "<": operator.lt,
    ">": operator.gt,
    "=<": operator.le,
    ">=": operator.ge,
    "=:=": operator.eq,
}


@dataclass(frozen=True)
class ProofResult:
    success: bool
    bindings: dict = field(default_factory=dict)
    # resolution steps on the accepted proof path
    steps: int = 0
    # every successful head unification, backtracked branches included
    explored: int = 0

    def __post_init__(self):
        if not self.success and (self.bindings or self.steps):
            raise ContractError("a failed proof carries no bindings or steps")
        if self.steps > self.explored:
            raise ContractError("steps cannot exceed explored")

    def to_dict(self):
        return {
            "success": self.success,
            "bindings": {name: str(value) for name, value in self.bindings.items()},
            "steps": self.steps,
            "explored": self.explored,
        }


def walk(term, bindings):
    while isinstance(term, Variable) and term in bindings:
        term = bindings[term]
    return term


def resolve(term, bindings):
    """Substitute bindings all the way down."""
    term = walk(term, bindings)
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(resolve(arg, bindings) for arg in term.args))
    return term


def unify(left, right, bindings, trail):
    pending = [(left, right)]
    while pending:
        a, b = pending.pop()
        a = walk(a, bindings)
        b = walk(b, bindings)
        if a == b:
            continue
        if isinstance(a, Variable):
            bindings[a] = b
            trail.append(a)
        elif isinstance(b, Variable):
            bindings[b] = a
            trail.append(b)
        elif isinstance(a, Compound) and isinstance(b, Compound):
            if a.functor != b.functor or a.arity != b.arity:
                return False
            pending.extend(zip(a.args, b.args, strict=True))
        else:
            return False
    return True


def _undo(bindings, trail, mark):
    while len(trail) > mark:
        del bindings[trail.pop()]


def _rename(term, scope):
    if isinstance(term, Variable):
        return Variable(term.name, scope)
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(_rename(arg, scope) for arg in term.args))
    return term


def _compare(goal, bindings):
    values = []
    for arg in goal.args:
        value = walk(arg, bindings)
        if not isinstance(value, Integer):
            raise InstantiationError(
                f"comparison {resolve(goal, bindings)} needs ground integer arguments", goal=str(goal)
            )
        values.append(value.value)
    return _COMPARE[goal.functor](*values)


def _push(goals, rest):
    for goal in reversed(goals):
        rest = (goal, rest)
    return rest


def _ground_bindings(query, bindings):
    solution = {}
    for var in variables_of(query):
        value = resolve(var, bindings)
        if not var.name.startswith("_") and not variables_of(value):
            solution[var.name] = value
    return solution


def solve(program, query, depth_limit=None):
    """Find the first solution of ``query`` against ``program``.

    Bindings hold the fully resolved value of each named query variable.
    Variables the proof leaves unbound, wholly or in part, are omitted.

    Raises NonTerminationError once the current derivation grows beyond
    ``depth_limit`` resolution steps (``DEPTH_LIMIT`` setting by default).
    """
    if isinstance(query, (Variable, Integer)):
        raise InstantiationError(f"query {query} is not callable", query=str(query))
    limit = depth_limit if depth_limit is not None else bench_setting("DEPTH_LIMIT")

    bindings = {}
    trail = []
    choice_points = []
    scopes = itertools.count(1)

    goals = (query, None)
    steps = 0
    explored = 0
    first_clause = 0

    while True:
        if goals is None:
            return ProofResult(True, _ground_bindings(query, bindings), steps, explored)

        goal, rest = goals
        goal = walk(goal, bindings)
        advanced = False

        if isinstance(goal, Variable):
            raise InstantiationError(f"goal {goal} is unbound")
        if isinstance(goal, Integer):
            raise InstantiationError(f"goal {goal} is not callable")

        if isinstance(goal, Compound) and goal.is_comparison:
            if _compare(goal, bindings):
                goals = rest
                advanced = True
        else:
            candidates = program.clauses_for(goal)
            for position in range(first_clause, len(candidates)):
                clause = candidates[position]
                mark = len(trail)
                scope = next(scopes)
                if not unify(goal, _rename(clause.head, scope), bindings, trail):
                    _undo(bindings, trail, mark)
                    continue
                explored += 1
                if steps + 1 > limit:
                    raise NonTerminationError(
                        f"derivation exceeded the depth limit of {limit} steps", limit=limit, goal=str(indicator(goal))
                    )
                if position + 1 < len(candidates):
                    choice_points.append((goals, position + 1, mark, steps))
                goals = _push([_rename(g, scope) for g in clause.body], rest)
                steps += 1
                advanced = True
                break

        first_clause = 0
        if advanced:
            continue
        if not choice_points:
            logger.debug("No proof for %s after %d explored steps", query, explored)
            return ProofResult(False, {}, 0, explored)
        goals, first_clause, mark, steps = choice_points.pop()
        _undo(bindings, trail, mark)

