"""S-expression logical forms over a knowledge base.

Grammar (prefix notation, uppercase operators, whitespace separated):

    expr    := atom
             | "(" "JOIN" rel expr ")"
             | "(" "AND" expr expr ")"
             | "(" "COUNT" expr ")"            -- root only
             | "(" "ARGMAX" expr relation ")"
             | "(" "ARGMIN" expr relation ")"
             | "(" cmp relation literal ")"    -- cmp in < <= > >=
    rel     := relation | "(" "R" relation ")"
    atom    := entity id
    literal := number | quoted string | bare token

``(R r)`` reverses traversal direction and is only legal as the relation
slot of a JOIN. Execution treats expressions as operations on sets of
entities (and literals, which reverse joins can reach).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .data import (
    KnowledgeBase,
    LiteralValue,
    Primitive,
    first_hop,
    second_hop,
)
from .errors import ExecutionError, ParseError

COMPARE_SYMBOLS = {"lt": "<", "le": "<=", "gt": ">", "ge": ">="}
SYMBOL_TO_COMPARE = {v: k for k, v in COMPARE_SYMBOLS.items()}


@dataclass(frozen=True)
class EntitySet:
    entity: str


@dataclass(frozen=True)
class Reverse:
    relation: str


@dataclass(frozen=True)
class Join:
    relation: Union[str, Reverse]
    operand: "SExpr"


@dataclass(frozen=True)
class And:
    left: "SExpr"
    right: "SExpr"


@dataclass(frozen=True)
class Count:
    operand: "SExpr"


@dataclass(frozen=True)
class ArgMax:
    operand: "SExpr"
    relation: str


@dataclass(frozen=True)
class ArgMin:
    operand: "SExpr"
    relation: str


@dataclass(frozen=True)
class Compare:
    op: str  # lt | le | gt | ge
    relation: str
    literal: LiteralValue


SExpr = Union[EntitySet, Join, And, Count, ArgMax, ArgMin, Compare]


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Tokens as (kind, value, byte offset); kind in lparen/rparen/atom/string."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == "(":
            tokens.append(("lparen", "(", i))
            i += 1
        elif ch == ")":
            tokens.append(("rparen", ")", i))
            i += 1
        elif ch == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise ParseError("unterminated string literal", i)
            tokens.append(("string", "".join(buf), i))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()"':
                j += 1
            tokens.append(("atom", text[i:j], i))
            i = j
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.end_offset = len(text)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end_offset)
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> SExpr:
        ast = self.parse_expr(at_root=True)
        extra = self.peek()
        if extra is not None:
            raise ParseError(f"trailing input {extra[1]!r}", extra[2])
        return ast

    def parse_expr(self, at_root: bool = False) -> SExpr:
        tok = self.next()
        if tok[0] == "atom":
            return EntitySet(tok[1])
        if tok[0] != "lparen":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        head = self.next()
        if head[0] != "atom":
            raise ParseError("expected operator after '('", head[2])
        op = head[1]
        if op == "JOIN":
            rel = self.parse_relation_slot()
            operand = self.parse_expr()
            node: SExpr = Join(rel, operand)
        elif op == "AND":
            node = And(self.parse_expr(), self.parse_expr())
        elif op == "COUNT":
            if not at_root:
                raise ParseError("COUNT is only allowed at the root", head[2])
            node = Count(self.parse_expr())
        elif op in ("ARGMAX", "ARGMIN"):
            operand = self.parse_expr()
            rel = self.expect("atom")[1]
            node = ArgMax(operand, rel) if op == "ARGMAX" else ArgMin(operand, rel)
        elif op in SYMBOL_TO_COMPARE:
            rel = self.expect("atom")[1]
            node = Compare(SYMBOL_TO_COMPARE[op], rel, self.parse_literal())
        elif op == "R":
            raise ParseError("(R relation) is only allowed inside JOIN", head[2])
        else:
            raise ParseError(f"unknown operator {op!r}", head[2])
        self.expect("rparen")
        return node

    def parse_relation_slot(self) -> Union[str, Reverse]:
        tok = self.next()
        if tok[0] == "atom":
            return tok[1]
        if tok[0] == "lparen":
            head = self.expect("atom")
            if head[1] != "R":
                raise ParseError(f"expected R, found {head[1]!r}", head[2])
            rel = self.expect("atom")[1]
            self.expect("rparen")
            return Reverse(rel)
        raise ParseError("expected relation or (R relation)", tok[2])

    def parse_literal(self) -> LiteralValue:
        tok = self.next()
        if tok[0] == "string":
            return tok[1]
        if tok[0] != "atom":
            raise ParseError("expected literal", tok[2])
        raw = tok[1]
        try:
            return int(raw)
        except ValueError:
            pass
        try:
            return float(raw)
        except ValueError:
            return raw


def parse_sexpr(text: str) -> SExpr:
    if not text.strip():
        raise ParseError("empty input", 0)
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Printer
# --------------------------------------------------------------------------

def _print_literal(value: LiteralValue) -> str:
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return repr(value)


def print_sexpr(ast: SExpr) -> str:
    """Canonical single-space-separated form; round-trips through parse_sexpr."""
    if isinstance(ast, EntitySet):
        return ast.entity
    if isinstance(ast, Join):
        rel = f"(R {ast.relation.relation})" if isinstance(ast.relation, Reverse) else ast.relation
        return f"(JOIN {rel} {print_sexpr(ast.operand)})"
    if isinstance(ast, And):
        return f"(AND {print_sexpr(ast.left)} {print_sexpr(ast.right)})"
    if isinstance(ast, Count):
        return f"(COUNT {print_sexpr(ast.operand)})"
    if isinstance(ast, ArgMax):
        return f"(ARGMAX {print_sexpr(ast.operand)} {ast.relation})"
    if isinstance(ast, ArgMin):
        return f"(ARGMIN {print_sexpr(ast.operand)} {ast.relation})"
    if isinstance(ast, Compare):
        return f"({COMPARE_SYMBOLS[ast.op]} {ast.relation} {_print_literal(ast.literal)})"
    raise TypeError(f"not an S-expression node: {ast!r}")


# --------------------------------------------------------------------------
# Decomposition
# --------------------------------------------------------------------------

def decompose_sexpr(ast: SExpr) -> tuple[list[Primitive], list[str]]:
    """Split an AST into deduplicated primitives plus pre-order operator names.

    The JOIN adjacent to an entity becomes a FirstHop anchored there; every
    other relation (outer JOINs, ARGMAX/ARGMIN keys, comparison relations)
    becomes a SecondHop. Direction is "in" for plain traversal and "out"
    under (R ...); ARGMAX/ARGMIN/compare relations read literals off the
    frontier, which is an out-direction traversal.
    """
    primitives: dict[Primitive, None] = {}
    operations: list[str] = []

    def join_parts(rel: Union[str, Reverse]) -> tuple[str, str]:
        if isinstance(rel, Reverse):
            return rel.relation, "out"
        return rel, "in"

    def walk(node: SExpr) -> None:
        if isinstance(node, EntitySet):
            return
        if isinstance(node, Join):
            operations.append("JOIN")
            relation, direction = join_parts(node.relation)
            if isinstance(node.relation, Reverse):
                operations.append("R")
            if isinstance(node.operand, EntitySet):
                primitives.setdefault(first_hop(node.operand.entity, relation, direction), None)
            else:
                primitives.setdefault(second_hop(relation, direction), None)
            walk(node.operand)
        elif isinstance(node, And):
            operations.append("AND")
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Count):
            operations.append("COUNT")
            walk(node.operand)
        elif isinstance(node, (ArgMax, ArgMin)):
            operations.append("ARGMAX" if isinstance(node, ArgMax) else "ARGMIN")
            primitives.setdefault(second_hop(node.relation, "out"), None)
            walk(node.operand)
        elif isinstance(node, Compare):
            operations.append(COMPARE_SYMBOLS[node.op])
            primitives.setdefault(second_hop(node.relation, "out"), None)
        else:
            raise TypeError(f"not an S-expression node: {node!r}")

    walk(ast)
    return list(primitives), operations


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------

def comparison_key(value: LiteralValue):
    """Coerce a literal to its comparison class: float for anything numeric
    (including numeric-looking strings), str otherwise."""
    if isinstance(value, bool):
        raise ExecutionError("boolean literals are not comparable")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        return value


def compare_values(left: LiteralValue, op: str, right: LiteralValue) -> bool:
    a, b = comparison_key(left), comparison_key(right)
    if isinstance(a, float) != isinstance(b, float):
        raise ExecutionError(f"cannot compare {left!r} with {right!r}")
    if op == "lt":
        return a < b
    if op == "le":
        return a <= b
    if op == "gt":
        return a > b
    if op == "ge":
        return a >= b
    raise ExecutionError(f"unknown comparison {op!r}")


def _extremum(kb: KnowledgeBase, members: set, relation: str, largest: bool) -> set:
    """Members attaining the extremal literal over their out r-edges.
    Members without a literal r-edge are excluded; no such edge at all
    yields the empty set."""
    best_key = None
    winners: set = set()
    for t in kb.by_relation.get(relation, ()):
        if t.obj_kind == "entity" or t.subject not in members:
            continue
        key = comparison_key(t.obj)
        if best_key is None:
            best_key, winners = key, {t.subject}
            continue
        if isinstance(key, float) != isinstance(best_key, float):
            raise ExecutionError(f"mixed literal types under relation {relation!r}")
        if key == best_key:
            winners.add(t.subject)
        elif (key > best_key) == largest:
            best_key, winners = key, {t.subject}
    return winners


def execute_sexpr(ast: SExpr, kb: KnowledgeBase):
    """Evaluate via the adjacency indices. Returns a set of values, or an
    int for a COUNT root."""
    if isinstance(ast, Count):
        return len(_execute_set(ast.operand, kb))
    return _execute_set(ast, kb)


def _execute_set(ast: SExpr, kb: KnowledgeBase) -> set:
    if isinstance(ast, EntitySet):
        return {ast.entity}
    if isinstance(ast, Join):
        operand = _execute_set(ast.operand, kb)
        result: set = set()
        if isinstance(ast.relation, Reverse):
            relation = ast.relation.relation
            for member in operand:
                if not isinstance(member, str):
                    continue
                for rel, obj in kb.out_edges(member):
                    if rel == relation:
                        result.add(obj)
        else:
            for member in operand:
                for rel, subject in kb.in_edges(member):
                    if rel == ast.relation:
                        result.add(subject)
        return result
    if isinstance(ast, And):
        return _execute_set(ast.left, kb) & _execute_set(ast.right, kb)
    if isinstance(ast, ArgMax):
        return _extremum(kb, _execute_set(ast.operand, kb), ast.relation, largest=True)
    if isinstance(ast, ArgMin):
        return _extremum(kb, _execute_set(ast.operand, kb), ast.relation, largest=False)
    if isinstance(ast, Compare):
        result = set()
        for t in kb.by_relation.get(ast.relation, ()):
            if t.obj_kind == "entity":
                continue
            if compare_values(t.obj, ast.op, ast.literal):
                result.add(t.subject)
        return result
    if isinstance(ast, Count):
        raise ExecutionError("COUNT is only allowed at the root")
    raise TypeError(f"not an S-expression node: {ast!r}")
