import random

import pytest

from semparse.data import KnowledgeBase, Triple, first_hop, second_hop
from semparse.errors import ExecutionError, ParseError
from semparse.oracle import brute_execute_sexpr
from semparse.sexpr import (
    And,
    ArgMax,
    Compare,
    Count,
    EntitySet,
    Join,
    Reverse,
    decompose_sexpr,
    execute_sexpr,
    parse_sexpr,
    print_sexpr,
)

from genutil import random_kb, random_sexpr


class TestParse:
    def test_single_join(self):
        assert parse_sexpr("(JOIN r1 e1)") == Join("r1", EntitySet("e1"))

    def test_and_with_reverse(self):
        ast = parse_sexpr("(AND (JOIN r1 e1) (JOIN (R r2) e2))")
        assert ast == And(
            Join("r1", EntitySet("e1")), Join(Reverse("r2"), EntitySet("e2"))
        )

    def test_count_roundtrip_modulo_whitespace(self):
        text = "(COUNT  (JOIN r1   (JOIN r2 e1)))"
        ast = parse_sexpr(text)
        assert print_sexpr(ast) == "(COUNT (JOIN r1 (JOIN r2 e1)))"
        assert parse_sexpr(print_sexpr(ast)) == ast

    def test_compare_literals(self):
        assert parse_sexpr("(< num0 5)") == Compare("lt", "num0", 5)
        assert parse_sexpr("(>= num0 2.5)") == Compare("ge", "num0", 2.5)
        assert parse_sexpr('(> txt0 "2020-01-01")') == Compare("gt", "txt0", "2020-01-01")

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "(JOIN r1 e1",
            "(JOIN r1)",
            "(FROB r1 e1)",
            "(JOIN r1 e1) extra",
            "(R r1)",
            "(JOIN (R r1 r2) e1)",
            "(AND (COUNT e1) e2)",  # COUNT below the root
        ],
    )
    def test_parse_errors(self, text):
        with pytest.raises(ParseError):
            parse_sexpr(text)

    def test_error_carries_offset(self):
        with pytest.raises(ParseError) as err:
            parse_sexpr("(JOIN r1 e1) junk")
        assert err.value.offset == 13


class TestPrint:
    def test_entity(self):
        assert print_sexpr(EntitySet("e1")) == "e1"

    def test_join(self):
        assert print_sexpr(Join("r1", EntitySet("e1"))) == "(JOIN r1 e1)"

    def test_generated_asts_roundtrip(self):
        rng = random.Random(7)
        for _ in range(500):
            ast = random_sexpr(rng)
            assert parse_sexpr(print_sexpr(ast)) == ast

    def test_print_parse_idempotent(self):
        rng = random.Random(8)
        for _ in range(200):
            text = print_sexpr(random_sexpr(rng))
            assert print_sexpr(parse_sexpr(text)) == text


class TestDecompose:
    def test_single_join(self):
        prims, ops = decompose_sexpr(parse_sexpr("(JOIN r1 e1)"))
        assert prims == [first_hop("e1", "r1", "in")]
        assert ops == ["JOIN"]

    def test_two_hop(self):
        prims, ops = decompose_sexpr(parse_sexpr("(JOIN r2 (JOIN r1 e1))"))
        assert prims == [second_hop("r2", "in"), first_hop("e1", "r1", "in")]
        assert ops == ["JOIN", "JOIN"]

    def test_count_and(self):
        prims, ops = decompose_sexpr(
            parse_sexpr("(COUNT (AND (JOIN r1 e1) (JOIN r3 e2)))")
        )
        assert prims == [first_hop("e1", "r1", "in"), first_hop("e2", "r3", "in")]
        assert ops == ["COUNT", "AND", "JOIN", "JOIN"]

    def test_argmax_contributes_second_hop(self):
        prims, _ = decompose_sexpr(parse_sexpr("(ARGMAX (JOIN (R r1) e1) num0)"))
        assert second_hop("num0", "out") in prims
        assert first_hop("e1", "r1", "out") in prims

    def test_hop_count_bounded_by_joins_on_join_trees(self):
        rng = random.Random(11)
        for _ in range(300):
            ast = random_sexpr(rng)
            text = print_sexpr(ast)
            if "ARGMAX" in text or "ARGMIN" in text or "(<" in text or "(>" in text:
                continue
            prims, ops = decompose_sexpr(ast)
            joins = ops.count("JOIN")
            assert len(prims) <= joins

    def test_relations_covered_once(self):
        ast = parse_sexpr("(AND (JOIN r1 e1) (JOIN r1 e1))")
        prims, _ = decompose_sexpr(ast)
        assert len(prims) == 1  # deduplicated by payload


class TestExecute:
    def test_one_triple_join(self):
        kb = KnowledgeBase([Triple("e1", "r1", "e2")])
        assert execute_sexpr(parse_sexpr("(JOIN r1 e2)"), kb) == {"e1"}

    def test_reverse_join(self):
        kb = KnowledgeBase([Triple("e1", "r1", "e2")])
        assert execute_sexpr(parse_sexpr("(JOIN (R r1) e1)"), kb) == {"e2"}

    def test_and_idempotent(self):
        rng = random.Random(3)
        for _ in range(50):
            kb = random_kb(rng)
            sub = random_sexpr(rng, max_depth=2)
            while isinstance(sub, Count):
                sub = random_sexpr(rng, max_depth=2)
            try:
                expected = execute_sexpr(sub, kb)
            except ExecutionError:
                continue
            assert execute_sexpr(And(sub, sub), kb) == expected

    def test_and_commutative(self):
        kb = KnowledgeBase(
            [Triple("e1", "r1", "e2"), Triple("e3", "r1", "e2"), Triple("e1", "r2", "e4")]
        )
        left = parse_sexpr("(AND (JOIN r1 e2) (JOIN r2 e4))")
        right = parse_sexpr("(AND (JOIN r2 e4) (JOIN r1 e2))")
        assert execute_sexpr(left, kb) == execute_sexpr(right, kb) == {"e1"}

    def test_join_distributes_over_union(self):
        rng = random.Random(5)
        for _ in range(100):
            kb = random_kb(rng)
            relation = "r1"
            s = {rng.choice(list("e1 e2 e3".split()))}
            t = {rng.choice(list("e4 e5 e6".split()))}
            def run(members):
                out = set()
                for m in members:
                    out |= execute_sexpr(Join(relation, EntitySet(m)), kb)
                return out
            assert run(s | t) == run(s) | run(t)

    def test_count(self):
        kb = KnowledgeBase([Triple("e1", "r1", "e2"), Triple("e3", "r1", "e2")])
        assert execute_sexpr(parse_sexpr("(COUNT (JOIN r1 e2))"), kb) == 2

    def test_argmax_ties_return_all(self):
        kb = KnowledgeBase(
            [
                Triple("a", "num0", 5, "int"),
                Triple("b", "num0", 5, "int"),
                Triple("c", "num0", 1, "int"),
                Triple("x", "r1", "a"),
                Triple("x", "r1", "b"),
                Triple("x", "r1", "c"),
            ]
        )
        assert execute_sexpr(parse_sexpr("(ARGMAX (JOIN (R r1) x) num0)"), kb) == {"a", "b"}

    def test_argmax_without_literal_edges_is_empty(self):
        kb = KnowledgeBase([Triple("x", "r1", "a")])
        assert execute_sexpr(parse_sexpr("(ARGMAX (JOIN (R r1) x) num0)"), kb) == set()

    def test_compare(self):
        kb = KnowledgeBase(
            [Triple("a", "num0", 5, "int"), Triple("b", "num0", 9, "int")]
        )
        assert execute_sexpr(parse_sexpr("(> num0 6)"), kb) == {"b"}
        assert execute_sexpr(parse_sexpr("(<= num0 9)"), kb) == {"a", "b"}

    def test_compare_strings_lexicographic(self):
        kb = KnowledgeBase(
            [
                Triple("a", "txt0", "2020-01-01", "str"),
                Triple("b", "txt0", "2021-06-01", "str"),
            ]
        )
        assert execute_sexpr(parse_sexpr('(> txt0 "2020-12-31")'), kb) == {"b"}

    def test_compare_type_mismatch_raises(self):
        kb = KnowledgeBase([Triple("a", "txt0", "red", "str")])
        with pytest.raises(ExecutionError):
            execute_sexpr(parse_sexpr("(> txt0 5)"), kb)


class TestDifferential:
    def test_matches_brute_force_oracle(self):
        rng = random.Random(12345)
        checked = 0
        for _ in range(1000):
            kb = random_kb(rng)
            ast = random_sexpr(rng)
            try:
                fast = execute_sexpr(ast, kb)
                fast_err = False
            except ExecutionError:
                fast, fast_err = None, True
            try:
                brute = brute_execute_sexpr(ast, kb)
                brute_err = False
            except ExecutionError:
                brute, brute_err = None, True
            assert fast_err == brute_err, print_sexpr(ast)
            if not fast_err:
                assert fast == brute, print_sexpr(ast)
            checked += 1
        assert checked == 1000

    def test_empty_kb_joins_denote_empty(self):
        kb = KnowledgeBase([])
        assert brute_execute_sexpr(parse_sexpr("(JOIN r1 e1)"), kb) == set()
        assert execute_sexpr(parse_sexpr("(JOIN r1 e1)"), kb) == set()
