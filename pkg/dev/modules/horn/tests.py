import itertools
import random
from dataclasses import replace
from pathlib import Path

from django.test import SimpleTestCase

from core.errors import DomainError, HornSyntaxError, InstantiationError, NonTerminationError
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.domain import ComplexityTier, Decision

from .parser import parse_program, parse_term
from .solver import solve
from .terms import Atom, Compound, Integer, Variable
from .tiers import assign_tiers, quartile_boundaries
from .verification import verify_pair

MINI_DATASET = Path(__file__).resolve().parents[1] / "dilemmas" / "fixtures" / "mini.json"

DOMAIN = ("a", "b", "c")
RULE_ONE_BODIES = (
    [("p", ("X",))],
    [("q", ("X", "Y"))],
    [("p", ("X",)), ("q", ("X", "Y"))],
    [("q", ("X", "Y")), ("p", ("Y",))],
    [("q", ("Y", "X"))],
)
RULE_TWO_BODIES = (
    [("r", ("X",))],
    [("r", ("X",)), ("q", ("X", "Y"))],
    [("q", ("X", "Y")), ("r", ("Y",))],
    [("p", ("X",)), ("r", ("X",))],
)
QUERIES = (
    ("r", ("X",)),
    ("s", ("X",)),
    ("p", ("X",)),
    ("q", ("X", "Y")),
    ("r", ("a",)),
    ("s", ("b",)),
    ("q", ("a", "Y")),
)


def _is_var(symbol):
    return symbol[0].isupper()


def _ground(literal, env):
    return literal[0], tuple(env.get(arg, arg) for arg in literal[1])


def _render(literal):
    functor, args = literal
    return f"{functor}({', '.join(args)})"


def _random_program(rng):
    facts = []
    for _ in range(rng.randint(0, 4)):
        if rng.random() < 0.5:
            facts.append(("p", (rng.choice(DOMAIN),)))
        else:
            facts.append(("q", (rng.choice(DOMAIN), rng.choice(DOMAIN))))
    rules = []
    if rng.random() < 0.85:
        rules.append((("r", ("X",)), rng.choice(RULE_ONE_BODIES)))
        if rng.random() < 0.6:
            rules.append((("s", ("X",)), rng.choice(RULE_TWO_BODIES)))
    return facts, rules


def _program_text(facts, rules):
    lines = [f"{_render(fact)}." for fact in facts]
    lines += [f"{_render(head)} :- {', '.join(_render(goal) for goal in body)}." for head, body in rules]
    return "\n".join(lines)


def _fixpoint(facts, rules):
    """Forward chaining over the finite domain until nothing new is derived."""
    known = set(facts)
    changed = True
    while changed:
        changed = False
        for head, body in rules:
            names = sorted({arg for _, args in body for arg in args if _is_var(arg)})
            for values in itertools.product(DOMAIN, repeat=len(names)):
                env = dict(zip(names, values, strict=True))
                if all(_ground(goal, env) in known for goal in body) and _ground(head, env) not in known:
                    known.add(_ground(head, env))
                    changed = True
    return known


def _first_solution(facts, rules, query):
    """Recursive depth-first reference prover, source order, leftmost goal."""
    clauses = [(fact, []) for fact in facts] + list(rules)
    counter = itertools.count()

    def walk(symbol, env):
        while _is_var(symbol) and symbol in env:
            symbol = env[symbol]
        return symbol

    def unify_args(left, right, env):
        env = dict(env)
        for a, b in zip(left, right, strict=True):
            a, b = walk(a, env), walk(b, env)
            if a == b:
                continue
            if _is_var(a):
                env[a] = b
            elif _is_var(b):
                env[b] = a
            else:
                return None
        return env

    def prove(goals, env):
        if not goals:
            yield env
            return
        (functor, args), rest = goals[0], goals[1:]
        for head, body in clauses:
            if head[0] != functor or len(head[1]) != len(args):
                continue
            suffix = f"_{next(counter)}"

            def rename(literal, suffix=suffix):
                return literal[0], tuple(a + suffix if _is_var(a) else a for a in literal[1])

            unified = unify_args(args, rename(head)[1], env)
            if unified is not None:
                yield from prove([rename(goal) for goal in body] + rest, unified)

    for env in prove([query], {}):
        return {arg: walk(arg, env) for arg in query[1] if _is_var(arg)}
    return None


class ParseProgramTest(SimpleTestCase):
    def test_single_fact(self):
        """Test "p(a)." parses to one fact"""
        program = parse_program("p(a).")
        self.assertEqual(len(program.clauses), 1)
        self.assertEqual(program.clauses[0].head, Compound("p", (Atom("a"),)))
        self.assertTrue(program.clauses[0].is_fact)

    def test_rule_with_comparison(self):
        """Test a rule body with a comparison keeps three goals"""
        program = parse_program("better(X,Y) :- cost(X,CX), cost(Y,CY), CX < CY.")
        rule = program.clauses[0]
        self.assertEqual(len(rule.body), 3)
        self.assertEqual(rule.body[2], Compound("<", (Variable("CX"), Variable("CY"))))

    def test_unterminated_compound(self):
        """Test "p(a" fails at end of input expecting ")" """
        with self.assertRaises(HornSyntaxError) as ctx:
            parse_program("p(a")
        self.assertEqual(ctx.exception.line, 1)
        self.assertEqual(ctx.exception.column, 4)
        self.assertIn(")", ctx.exception.expected)
        self.assertIn("end of input", ctx.exception.message)

    def test_syntax_error_position_on_later_line(self):
        with self.assertRaises(HornSyntaxError) as ctx:
            parse_program("p(a).\nq(b) :- .")
        self.assertEqual(ctx.exception.line, 2)

    def test_pretty_print_round_trip(self):
        """Test printed clauses parse back to the same program"""
        text = (
            "% shared background\nscore( x , 8 ).\nquoted('Hello world', -3).\n"
            "best(X) :- score(X, S), S >= 5, ok.\nok."
        )
        program = parse_program(text)
        self.assertEqual(str(program).splitlines()[0], "score(x, 8).")
        self.assertEqual(parse_program(str(program)), program)
        self.assertEqual(program.clauses[1].head.args[0], Atom("Hello world"))
        self.assertEqual(program.clauses[1].head.args[1], Integer(-3))

    def test_empty_program(self):
        self.assertEqual(parse_program("% nothing here\n").clauses, ())

    def test_anonymous_variables_are_distinct(self):
        clause = parse_program("pair(_, _).").clauses[0]
        first, second = clause.head.args
        self.assertNotEqual(first, second)


class SolveTest(SimpleTestCase):
    def test_single_fact_resolution(self):
        """Test p(X) against "p(a)." binds X=a in one step"""
        result = solve(parse_program("p(a)."), parse_term("p(X)"))
        self.assertTrue(result.success)
        self.assertEqual(result.bindings, {"X": Atom("a")})
        self.assertEqual(result.steps, 1)

    def test_rule_then_fact(self):
        """Test a rule step followed by a fact step counts two steps"""
        result = solve(parse_program("q(b). p(X) :- q(X)."), parse_term("p(X)"))
        self.assertEqual(result.bindings, {"X": Atom("b")})
        self.assertEqual(result.steps, 2)
        self.assertEqual(result.explored, 2)

    def test_left_recursion_hits_depth_limit(self):
        """Test left recursion raises a nontermination error"""
        with self.assertRaises(NonTerminationError):
            solve(parse_program("p(X) :- p(X)."), parse_term("p(a)"), depth_limit=500)

    def test_default_depth_limit(self):
        with self.assertRaises(NonTerminationError) as ctx:
            solve(parse_program("p(X) :- p(X)."), parse_term("p(a)"))
        self.assertEqual(ctx.exception.details["limit"], 10_000)

    def test_backtracking_counts_in_explored_only(self):
        program = parse_program("c(1). c(2). c(3). big(X) :- c(X), X > 2.")
        result = solve(program, parse_term("big(X)"))
        self.assertEqual(result.bindings, {"X": Integer(3)})
        self.assertEqual(result.steps, 2)
        self.assertEqual(result.explored, 4)

    def test_bindings_are_ground(self):
        """Test a binding is fully resolved and a partly unbound one is left out"""
        nested = solve(parse_program("inner(b). box(f(Y, a)) :- inner(Y)."), parse_term("box(X)"))
        self.assertEqual(nested.bindings, {"X": Compound("f", (Atom("b"), Atom("a")))})

        partial = solve(parse_program("box(f(Inner, a))."), parse_term("box(X)"))
        self.assertTrue(partial.success)
        self.assertEqual(partial.bindings, {})

    def test_failure_has_no_bindings(self):
        result = solve(parse_program("p(a)."), parse_term("p(b)"))
        self.assertFalse(result.success)
        self.assertEqual(result.bindings, {})
        self.assertEqual(result.steps, 0)

    def test_comparison_on_unbound_variable(self):
        """Test comparing an unbound variable raises an instantiation error"""
        with self.assertRaises(InstantiationError):
            solve(parse_program("lt(X) :- X < 3."), parse_term("lt(Y)"))

    def test_comparison_on_atom(self):
        with self.assertRaises(InstantiationError):
            solve(parse_program("lt(X) :- X < 3."), parse_term("lt(a)"))

    def test_all_comparison_operators(self):
        program = parse_program("t :- 1 < 2, 2 > 1, 2 =< 2, 3 >= 3, 4 =:= 4.")
        self.assertTrue(solve(program, parse_term("t")).success)

    def test_determinism(self):
        pair = load_dataset(MINI_DATASET)[1]
        program = parse_program(pair.program("biased"))
        self.assertEqual(solve(program, parse_term("decision(X)")), solve(program, parse_term("decision(X)")))

    def test_agrees_with_reference_oracles(self):
        """Test random small programs against forward chaining and a reference prover"""
        rng = random.Random(20240611)
        for _ in range(1000):
            facts, rules = _random_program(rng)
            query = rng.choice(QUERIES)
            result = solve(parse_program(_program_text(facts, rules)), parse_term(_render(query)))

            derivable = _fixpoint(facts, rules)
            expected_success = any(
                fact[0] == query[0] and all(_is_var(q) or q == f for q, f in zip(query[1], fact[1], strict=False))
                for fact in derivable
            )
            self.assertEqual(result.success, expected_success, _program_text(facts, rules))

            first = _first_solution(facts, rules, query)
            if result.success:
                found = {name: value.name for name, value in result.bindings.items()}
                self.assertEqual(found, first)
                instance = (query[0], tuple(found.get(arg, arg) for arg in query[1]))
                self.assertIn(instance, derivable)
            else:
                self.assertIsNone(first)


class VerifyPairTest(SimpleTestCase):
    def setUp(self):
        self.pairs = load_dataset(MINI_DATASET)

    def test_fixture_pairs_match_hand_traces(self):
        """Test every bundled pair is consistent with its recorded hand trace"""
        for pair in self.pairs:
            verification = verify_pair(pair)
            trace = pair.extras["hand_trace"]
            self.assertTrue(verification.consistent, verification.diagnostics)
            self.assertEqual(verification.unbiased_decision, pair.expected_decision)
            self.assertEqual(verification.unbiased_steps, trace["unbiased_steps"])
            self.assertEqual(verification.biased_steps, trace["biased_steps"])
            self.assertEqual(verification.unbiased_explored, trace["unbiased_explored"])
            self.assertEqual(verification.biased_explored, trace["biased_explored"])

    def test_variants_disagree(self):
        """Test a biased program deriving the other option is inconsistent"""
        pair = self.pairs[0]
        flipped = pair.biased_program.replace("score(print_statements, 3)", "score(print_statements, 10)")
        verification = verify_pair(replace(pair, biased_program=flipped))
        self.assertFalse(verification.consistent)
        self.assertEqual(verification.unbiased_decision, Decision.option_a())
        self.assertEqual(verification.biased_decision, Decision.option_b())

    def test_no_solution_is_reported(self):
        pair = replace(self.pairs[2], biased_program="total_cost(option_a, 40).")
        verification = verify_pair(pair)
        self.assertFalse(verification.consistent)
        self.assertFalse(verification.biased_decision.is_valid)
        self.assertEqual(verification.biased_steps, 0)

    def test_swapping_variants_swaps_costs(self):
        pair = self.pairs[1]
        extended = pair.biased_program + "\nscore(unused, 1)."
        original = verify_pair(replace(pair, biased_program=extended))
        swapped = verify_pair(replace(pair, biased_program=pair.unbiased_program, unbiased_program=extended))
        self.assertEqual(original.consistent, swapped.consistent)
        self.assertEqual(original.unbiased_steps, swapped.biased_steps)
        self.assertEqual(original.biased_steps, swapped.unbiased_steps)

    def test_parse_error_propagates(self):
        with self.assertRaises(HornSyntaxError):
            verify_pair(replace(self.pairs[0], shared_axioms="decision(option_a"))


class AssignTiersTest(SimpleTestCase):
    def setUp(self):
        self.template = load_dataset(MINI_DATASET)[0]

    def pairs_with_steps(self, steps):
        return [replace(self.template, pair_id=f"p{i}", inference_steps=value) for i, value in enumerate(steps)]

    def test_eight_values_split_evenly(self):
        """Test steps 1..8 split two per tier"""
        tiers = [tier for _, tier in assign_tiers(self.pairs_with_steps(range(1, 9)))]
        expected = [ComplexityTier.LOW] * 2 + [ComplexityTier.MID_LOW] * 2
        expected += [ComplexityTier.MID_HIGH] * 2 + [ComplexityTier.HIGH] * 2
        self.assertEqual(tiers, expected)

    def test_identical_steps_resolve_downward(self):
        tiers = {tier for _, tier in assign_tiers(self.pairs_with_steps([5] * 6))}
        self.assertEqual(tiers, {ComplexityTier.LOW})

    def test_single_pair(self):
        self.assertEqual(assign_tiers(self.pairs_with_steps([42])), [("p0", ComplexityTier.LOW)])

    def test_empty_input(self):
        with self.assertRaises(DomainError):
            assign_tiers([])

    def test_steps_computed_when_missing(self):
        """Test pairs without recorded steps are tiered from their proofs"""
        tiers = dict(assign_tiers(load_dataset(MINI_DATASET)))
        self.assertEqual(quartile_boundaries([6, 6, 8]), (6, 6, 8))
        self.assertEqual(tiers["confirmation-logging-001"], ComplexityTier.LOW)
        self.assertEqual(tiers["hyperbolic-refactor-001"], ComplexityTier.MID_HIGH)

    def test_tiers_are_monotone(self):
        rng = random.Random(7)
        steps = [rng.randint(1, 40) for _ in range(50)]
        assigned = dict(assign_tiers(self.pairs_with_steps(steps)))
        ordered = sorted(zip(steps, (assigned[f"p{i}"] for i in range(50)), strict=True))
        ranks = [tier.rank for _, tier in ordered]
        self.assertEqual(ranks, sorted(ranks))
