"""Term, clause and program values for the definite-clause subset."""

import re
from dataclasses import dataclass, field

from core.errors import ContractError

COMPARISON_OPERATORS = ("<", ">", "=<", ">=", "=:=")

_PLAIN_ATOM = re.compile(r"^[a-z]\w*$")


@dataclass(frozen=True)
class Variable:
    name: str
    # 0 for variables written in the source; renamed clause copies get a fresh scope
    scope: int = 0

    def __str__(self):
        return self.name if self.scope == 0 else f"{self.name}_{self.scope}"


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        if _PLAIN_ATOM.match(self.name):
            return self.name
        escaped = self.name.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{escaped}'"


@dataclass(frozen=True)
class Integer:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ContractError(f"compound {self.functor!r} needs at least one argument")

    @property
    def arity(self):
        return len(self.args)

    @property
    def is_comparison(self):
        return self.functor in COMPARISON_OPERATORS and self.arity == 2

    def __str__(self):
        if self.is_comparison:
            return f"{self.args[0]} {self.functor} {self.args[1]}"
        return f"{Atom(self.functor)}({', '.join(str(arg) for arg in self.args)})"


def indicator(term):
    """Predicate key (name, arity) of a callable term."""
    if isinstance(term, Atom):
        return term.name, 0
    if isinstance(term, Compound):
        return term.functor, term.arity
    raise ContractError(f"{term} is not callable")


def variables_of(term):
    pending = [term]
    found = []
    while pending:
        current = pending.pop()
        if isinstance(current, Variable):
            if current not in found:
                found.append(current)
        elif isinstance(current, Compound):
            pending.extend(reversed(current.args))
    return found


@dataclass(frozen=True)
class Clause:
    head: Atom | Compound
    body: tuple = ()

    def __post_init__(self):
        if not isinstance(self.head, (Atom, Compound)) or getattr(self.head, "is_comparison", False):
            raise ContractError(f"clause head {self.head} must be an atom or compound term")

    @property
    def is_fact(self):
        return not self.body

    def __str__(self):
        if self.is_fact:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(goal) for goal in self.body)}."


@dataclass(frozen=True)
class Program:
    clauses: tuple = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for clause in self.clauses:
            index.setdefault(indicator(clause.head), []).append(clause)
        object.__setattr__(self, "_index", {key: tuple(value) for key, value in index.items()})

    def clauses_for(self, term):
        return self._index.get(indicator(term), ())

    def __add__(self, other):
        return Program(self.clauses + other.clauses)

    def __str__(self):
        return "\n".join(str(clause) for clause in self.clauses)
