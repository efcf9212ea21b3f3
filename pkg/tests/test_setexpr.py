"""Set expression grammar and evaluation, checked against a brute-force
membership evaluator."""

import random

import pytest

from conftest import blob, distinct, fp
from ctro.certs import DistinctStore
from ctro.setexpr import (
    Name,
    Op,
    ParseError,
    UnboundIdentifier,
    eval_setexpr,
    identifiers,
    parse_setexpr,
)


def brute_force_members(expr, env):
    """Independent oracle: decide membership element by element."""

    def contains(node, elem):
        if isinstance(node, Name):
            return elem in env[node.value].members
        l, r = contains(node.left, elem), contains(node.right, elem)
        return {"&": l and r, "|": l or r, "-": l and not r}[node.kind]

    universe = set()
    for store in env.values():
        universe |= store.members
    return frozenset(e for e in universe if contains(expr, e))


class TestParse:
    def test_intersection(self):
        assert parse_setexpr("A & B") == Op("&", Name("A"), Name("B"))

    def test_precedence(self):
        assert parse_setexpr("A | B & C") == Op(
            "|", Name("A"), Op("&", Name("B"), Name("C"))
        )

    def test_left_assoc_union_difference(self):
        assert parse_setexpr("A - B | C") == Op(
            "|", Op("-", Name("A"), Name("B")), Name("C")
        )

    def test_parens(self):
        assert parse_setexpr("(A | B) & C") == Op(
            "&", Op("|", Name("A"), Name("B")), Name("C")
        )

    def test_unclosed_paren_offset(self):
        with pytest.raises(ParseError) as e:
            parse_setexpr("A & (B")
        assert e.value.offset == 5

    def test_quoted_identifiers(self):
        expr = parse_setexpr('"DigiCert Log Server 2" & Oak')
        assert expr == Op("&", Name("DigiCert Log Server 2"), Name("Oak"))

    def test_quote_escapes(self):
        assert parse_setexpr(r'"a\"b"') == Name('a"b')

    def test_dash_is_identifier_char(self):
        # "A-B" is one identifier; difference needs spacing
        assert parse_setexpr("A-B") == Name("A-B")
        assert parse_setexpr("A - B") == Op("-", Name("A"), Name("B"))

    def test_unterminated_string(self):
        with pytest.raises(ParseError) as e:
            parse_setexpr('A & "oops')
        assert e.value.offset == 4

    def test_unexpected_character(self):
        with pytest.raises(ParseError) as e:
            parse_setexpr("A $ B")
        assert e.value.offset == 2

    def test_trailing_tokens(self):
        with pytest.raises(ParseError):
            parse_setexpr("A B")

    def test_empty_input(self):
        with pytest.raises(ParseError):
            parse_setexpr("   ")

    def test_identifiers_listing(self):
        assert identifiers(parse_setexpr("A & (B | A) - C")) == ["A", "B", "C"]


class TestEval:
    def setup_method(self):
        self.env = {
            "A": distinct(["a", "b"]),
            "B": distinct(["b", "c"]),
            "C": distinct(["c", "d", "e"]),
        }

    def test_self_difference_empty(self):
        assert len(eval_setexpr(parse_setexpr("A - A"), self.env)) == 0

    def test_intersection(self):
        out = eval_setexpr(parse_setexpr("A & B"), self.env)
        assert out.members == frozenset({fp("b")})

    def test_union_difference(self):
        out = eval_setexpr(parse_setexpr("A | B - C"), self.env)
        # left-assoc: (A | B) - C
        assert out.members == frozenset({fp("a"), fp("b")})

    def test_unbound(self):
        with pytest.raises(UnboundIdentifier):
            eval_setexpr(parse_setexpr("A & Nope"), self.env)

    def test_result_carries_blobs(self):
        out = eval_setexpr(parse_setexpr("A & B"), self.env)
        assert out.blobs[fp("b")] == blob("b")

    def test_membership_only_operands(self):
        env = {"X": DistinctStore.from_fingerprints([fp("a"), fp("b")]), "A": self.env["A"]}
        out = eval_setexpr(parse_setexpr("X & A"), env)
        assert out.members == frozenset({fp("a"), fp("b")})
        # blobs known only via A
        assert set(out.blobs) == {fp("a"), fp("b")}

    def test_randomized_against_brute_force(self):
        r = random.Random(1234)
        names = ["S1", "S2", "S3"]
        ops = ["&", "|", "-"]

        def random_expr(depth):
            if depth == 0 or r.random() < 0.3:
                return Name(r.choice(names))
            return Op(r.choice(ops), random_expr(depth - 1), random_expr(depth - 1))

        for round_no in range(1000):
            env = {
                name: distinct([f"{round_no}:{i}" for i in r.sample(range(64), r.randrange(0, 33))])
                for name in names
            }
            expr = random_expr(3)
            assert eval_setexpr(expr, env).members == brute_force_members(expr, env)
