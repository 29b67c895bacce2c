"""Arpeggio grammar and visitor for definite Horn clause programs.

Supported: facts and rules terminated by ``.``, ``:-`` bodies separated by
commas, ``%`` line comments, variables, atoms (plain or quoted), integers,
compound terms and the integer comparisons ``< > =< >= =:=``.
"""

import functools
import itertools
import logging
import threading

from arpeggio import EOF, NoMatch, Optional, ParserPython, PTNodeVisitor, StrMatch, ZeroOrMore, visit_parse_tree
from arpeggio import RegExMatch as _

from core.errors import HornSyntaxError

from .terms import Atom, Clause, Compound, Integer, Program, Variable

logger = logging.getLogger(__name__)


def comment():
    return _(r"%.*")


def variable():
    return _(r"[A-Z_][A-Za-z0-9_]*")


def name():
    return _(r"[a-z][A-Za-z0-9_]*")


def quoted():
    return _(r"'(?:[^'\\]|\\.)*'")


def integer():
    return _(r"-?\d+")


def comparison_op():
    return _(r"=:=|=<|>=|<|>")


def atom():
    return [name, quoted]


def compound():
    return atom, "(", term, ZeroOrMore(",", term), ")"


def term():
    return [compound, variable, integer, atom]


def operand():
    return [variable, integer, atom]


def comparison():
    return operand, comparison_op, operand


def goal():
    return [comparison, term]


def body():
    return goal, ZeroOrMore(",", goal)


def head():
    return [compound, atom]


def clause():
    return head, Optional(":-", body), "."


def program():
    return ZeroOrMore(clause), EOF


class _Operator(str):
    """Marks a comparison operator among visitor children."""


class HornVisitor(PTNodeVisitor):
    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self._anonymous = itertools.count(1)

    @staticmethod
    def _terms(children):
        # drop punctuation literals, keep built values
        return [child for child in children if not isinstance(child, str) or isinstance(child, _Operator)]

    def visit_variable(self, node, children):
        if node.value == "_":
            return Variable(f"_G{next(self._anonymous)}")
        return Variable(node.value)

    def visit_name(self, node, children):
        return Atom(node.value)

    def visit_quoted(self, node, children):
        inner = node.value[1:-1]
        return Atom(inner.replace("\\'", "'").replace("\\\\", "\\"))

    def visit_integer(self, node, children):
        return Integer(int(node.value))

    def visit_comparison_op(self, node, children):
        return _Operator(node.value)

    def visit_atom(self, node, children):
        return self._terms(children)[0]

    def visit_compound(self, node, children):
        functor, *args = self._terms(children)
        return Compound(functor.name, tuple(args))

    def visit_term(self, node, children):
        return self._terms(children)[0]

    def visit_operand(self, node, children):
        return self._terms(children)[0]

    def visit_comparison(self, node, children):
        left, operator, right = self._terms(children)
        return Compound(str(operator), (left, right))

    def visit_goal(self, node, children):
        return self._terms(children)[0]

    def visit_body(self, node, children):
        return tuple(self._terms(children))

    def visit_head(self, node, children):
        return self._terms(children)[0]

    def visit_clause(self, node, children):
        parts = self._terms(children)
        goals = parts[1] if len(parts) > 1 else ()
        return Clause(parts[0], goals)

    def visit_program(self, node, children):
        return Program(tuple(child for child in children if isinstance(child, Clause)))


_parse_lock = threading.Lock()


@functools.cache
def _parser():
    return ParserPython(program, comment_def=comment, reduce_tree=False)


def _describe(rule):
    if isinstance(rule, StrMatch):
        return rule.to_match
    return rule.rule_name or rule.name


@functools.lru_cache(maxsize=1024)
def parse_program(text):
    """Parse Horn program text into an immutable Program.

    Raises HornSyntaxError carrying 1-based line/column and the tokens the
    parser expected at the failure point.
    """
    parser = _parser()
    try:
        with _parse_lock:
            tree = parser.parse(text)
    except NoMatch as exc:
        line, column = parser.pos_to_linecol(exc.position)
        expected = sorted({_describe(rule) for rule in exc.rules})
        where = "end of input" if exc.position >= len(text.rstrip()) else f"line {line}, column {column}"
        raise HornSyntaxError(
            f"syntax error at {where}: expected {' or '.join(expected)}",
            line=line,
            column=column,
            expected=expected,
        ) from exc

    parsed = visit_parse_tree(tree, HornVisitor())
    logger.debug("Parsed %d clauses", len(parsed.clauses))
    return parsed


def parse_term(text):
    """Parse a single goal such as ``decision(X)`` (no trailing period)."""
    parsed = parse_program(f"query_ :- {text}.")
    goals = parsed.clauses[0].body
    if len(goals) != 1:
        raise HornSyntaxError(f"expected one goal, got {len(goals)}", line=1, column=1, expected=["goal"])
    return goals[0]
