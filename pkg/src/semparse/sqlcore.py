"""SQL-subset logical forms over a Database.

Covered: single SELECT with optional aggregations (AVG/COUNT/MAX/MIN/SUM),
equi-joins (``JOIN t ON a.x = b.y``), WHERE trees over and/or, the Table-1
conditional operators (between, =, >, <, >=, <=, !=, in, like, is, exists
and their negations), GROUP BY with aggregate-comparison HAVING, a single
ORDER BY key with optional LIMIT, and one set operation per query node
(except/intersect/union). Subqueries appear only under IN and EXISTS.

Execution uses bag semantics with nested-loop joins; aggregations skip
nulls; ORDER BY is a stable sort with nulls last ascending and first
descending; set operations use set semantics over rows.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Union

from .data import Database, LiteralValue, Primitive, tb_cl, tb_cl_vl
from .errors import ExecutionError, ParseError

AGGREGATIONS = ("AVG", "COUNT", "MAX", "MIN", "SUM")
SET_OPS = ("except", "intersect", "union")
CONDITIONAL_OPS = (
    "between", "=", ">", "<", ">=", "<=", "!=", "in", "like", "is",
    "exists", "not in", "not like", "not between", "is not",
)
_HAVING_OPS = ("=", ">", "<", ">=", "<=", "!=")


@dataclass(frozen=True)
class ColumnRef:
    table: Optional[str]
    column: str

    def render(self) -> str:
        return f"{self.table}.{self.column}" if self.table else self.column


@dataclass(frozen=True)
class SelectItem:
    agg: Optional[str]
    column: Union[ColumnRef, str]  # ColumnRef, or "*" (star)

    def render(self) -> str:
        inner = self.column if isinstance(self.column, str) else self.column.render()
        return f"{self.agg}({inner})" if self.agg else inner


@dataclass(frozen=True)
class JoinClause:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class Condition:
    """Leaf predicate. ``column`` is None only for EXISTS; ``values`` holds
    literal operands (2 for between, any number for IN lists, none for
    is/is not and subquery forms)."""

    column: Optional[ColumnRef]
    op: str
    values: tuple = ()
    subquery: Optional["SqlQuery"] = None


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "BoolExpr"
    right: "BoolExpr"


BoolExpr = Union[Condition, BoolOp]


@dataclass(frozen=True)
class Having:
    agg: str
    column: Union[ColumnRef, str]
    op: str
    value: LiteralValue


@dataclass(frozen=True)
class OrderBy:
    item: SelectItem
    direction: str = "asc"
    limit: Optional[int] = None


@dataclass(frozen=True)
class SqlQuery:
    select: tuple[SelectItem, ...]
    from_table: str
    joins: tuple[JoinClause, ...] = ()
    where: Optional[BoolExpr] = None
    group_by: tuple[ColumnRef, ...] = ()
    having: Optional[Having] = None
    order_by: Optional[OrderBy] = None
    set_op: Optional[tuple[str, "SqlQuery"]] = None


# --------------------------------------------------------------------------
# Tokenizer
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<op>>=|<=|!=|<>|=|>|<|\(|\)|,|\.|\*|-)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_#]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "select", "from", "join", "on", "where", "group", "order", "by", "having",
    "limit", "asc", "desc", "and", "or", "not", "between", "in", "like", "is",
    "null", "exists", "union", "intersect", "except", "avg", "count", "max",
    "min", "sum", "as", "distinct", "over",
}


def _tokenize_sql(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group(0)
        if kind != "ws":
            if kind == "ident" and value.lower() in _KEYWORDS:
                tokens.append(("kw", value.lower(), pos))
            elif kind == "string":
                tokens.append(("string", value[1:-1].replace("''", "'"), pos))
            elif kind == "op" and value == "<>":
                tokens.append(("op", "!=", pos))
            else:
                tokens.append((kind, value, pos))
        pos = m.end()
    return tokens


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _SqlParser:
    def __init__(self, text: str):
        self.tokens = _tokenize_sql(text)
        self.pos = 0
        self.end = len(text)

    def peek(self, ahead: int = 0):
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of query", self.end)
        self.pos += 1
        return tok

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "kw" and tok[1] in words

    def eat_kw(self, word: str):
        tok = self.next()
        if tok[0] != "kw" or tok[1] != word:
            raise ParseError(f"expected {word.upper()}, found {tok[1]!r}", tok[2])
        return tok

    def eat_op(self, symbol: str):
        tok = self.next()
        if tok[0] != "op" or tok[1] != symbol:
            raise ParseError(f"expected {symbol!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> SqlQuery:
        query = self.parse_query()
        extra = self.peek()
        if extra is not None:
            raise ParseError(f"trailing input {extra[1]!r}", extra[2])
        return query

    def parse_query(self) -> SqlQuery:
        core = self.parse_select_core()
        if self.at_kw(*SET_OPS):
            op = self.next()[1]
            rhs = self.parse_query()
            return replace(core, set_op=(op, rhs))
        return core

    def parse_select_core(self) -> SqlQuery:
        self.eat_kw("select")
        if self.at_kw("distinct"):
            tok = self.next()
            raise ParseError("DISTINCT is outside the subset", tok[2])
        items = [self.parse_select_item()]
        while self.curr_is_op(","):
            self.next()
            items.append(self.parse_select_item())

        self.eat_kw("from")
        from_table = self.parse_ident("table name")
        joins = []
        while self.at_kw("join"):
            self.next()
            table = self.parse_ident("table name")
            self.eat_kw("on")
            left = self.parse_column_ref()
            self.eat_op("=")
            right = self.parse_column_ref()
            joins.append(JoinClause(table, left, right))
        if self.at_kw("as"):
            tok = self.next()
            raise ParseError("table aliases (AS) are outside the subset", tok[2])

        where = None
        if self.at_kw("where"):
            self.next()
            where = self.parse_bool_expr()

        group_by: tuple[ColumnRef, ...] = ()
        having = None
        if self.at_kw("group"):
            self.next()
            self.eat_kw("by")
            refs = [self.parse_column_ref()]
            while self.curr_is_op(","):
                self.next()
                refs.append(self.parse_column_ref())
            group_by = tuple(refs)
            if self.at_kw("having"):
                self.next()
                having = self.parse_having()
        elif self.at_kw("having"):
            tok = self.next()
            raise ParseError("HAVING without GROUP BY is outside the subset", tok[2])

        order_by = None
        if self.at_kw("order"):
            self.next()
            self.eat_kw("by")
            item = self.parse_select_item()
            direction = "asc"
            if self.at_kw("asc", "desc"):
                direction = self.next()[1]
            limit = None
            if self.at_kw("limit"):
                self.next()
                tok = self.next()
                if tok[0] != "number" or "." in tok[1]:
                    raise ParseError("LIMIT expects an integer", tok[2])
                limit = int(tok[1])
            order_by = OrderBy(item, direction, limit)
        elif self.at_kw("limit"):
            tok = self.next()
            raise ParseError("LIMIT without ORDER BY is outside the subset", tok[2])

        return SqlQuery(
            select=tuple(items),
            from_table=from_table,
            joins=tuple(joins),
            where=where,
            group_by=group_by,
            having=having,
            order_by=order_by,
        )

    def curr_is_op(self, symbol: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] == symbol

    def parse_ident(self, what: str) -> str:
        tok = self.next()
        if tok[0] != "ident":
            raise ParseError(f"expected {what}, found {tok[1]!r}", tok[2])
        return tok[1]

    def parse_column_ref(self) -> ColumnRef:
        first = self.parse_ident("column reference")
        if self.curr_is_op("."):
            self.next()
            column = self.parse_ident("column name")
            return ColumnRef(first, column)
        return ColumnRef(None, first)

    def parse_select_item(self) -> SelectItem:
        tok = self.peek()
        if tok is not None and tok[0] == "kw" and tok[1].upper() in AGGREGATIONS:
            agg = self.next()[1].upper()
            self.eat_op("(")
            if self.curr_is_op("*"):
                self.next()
                column: Union[ColumnRef, str] = "*"
            else:
                column = self.parse_column_ref()
            self.eat_op(")")
            if self.at_kw("over"):
                over = self.next()
                raise ParseError("window functions (OVER) are outside the subset", over[2])
            return SelectItem(agg, column)
        if self.curr_is_op("*"):
            self.next()
            return SelectItem(None, "*")
        if tok is not None and tok[0] == "op" and tok[1] == "(":
            raise ParseError("subqueries are only allowed under IN and EXISTS", tok[2])
        return SelectItem(None, self.parse_column_ref())

    def parse_having(self) -> Having:
        item = self.parse_select_item()
        if item.agg is None:
            raise ParseError(
                "HAVING supports only aggregate comparisons", self.end
            )
        tok = self.next()
        if tok[0] != "op" or tok[1] not in _HAVING_OPS:
            raise ParseError(f"expected comparison in HAVING, found {tok[1]!r}", tok[2])
        return Having(item.agg, item.column, tok[1], self.parse_literal())

    def parse_bool_expr(self) -> BoolExpr:
        node = self.parse_bool_term()
        while self.at_kw("or"):
            self.next()
            node = BoolOp("or", node, self.parse_bool_term())
        return node

    def parse_bool_term(self) -> BoolExpr:
        node = self.parse_bool_factor()
        while self.at_kw("and"):
            self.next()
            node = BoolOp("and", node, self.parse_bool_factor())
        return node

    def parse_bool_factor(self) -> BoolExpr:
        if self.curr_is_op("("):
            # parenthesized boolean group (not a subquery: those only follow IN/EXISTS)
            mark = self.pos
            self.next()
            if self.at_kw("select"):
                tok = self.peek()
                raise ParseError(
                    "subqueries are only allowed under IN and EXISTS", tok[2]
                )
            self.pos = mark
            self.next()
            node = self.parse_bool_expr()
            self.eat_op(")")
            return node
        return self.parse_condition()

    def parse_condition(self) -> Condition:
        if self.at_kw("exists"):
            self.next()
            self.eat_op("(")
            sub = self.parse_query()
            self.eat_op(")")
            return Condition(None, "exists", (), sub)

        column = self.parse_column_ref()
        negated = False
        if self.at_kw("not"):
            self.next()
            negated = True

        tok = self.next()
        if tok[0] == "op" and tok[1] in _HAVING_OPS:
            if negated:
                raise ParseError("NOT before a comparison operator", tok[2])
            return Condition(column, tok[1], (self.parse_literal(),))
        if tok[0] == "kw" and tok[1] == "between":
            low = self.parse_literal()
            self.eat_kw("and")
            high = self.parse_literal()
            return Condition(column, "not between" if negated else "between", (low, high))
        if tok[0] == "kw" and tok[1] == "like":
            pattern = self.parse_literal()
            if not isinstance(pattern, str):
                raise ParseError("LIKE expects a string pattern", tok[2])
            return Condition(column, "not like" if negated else "like", (pattern,))
        if tok[0] == "kw" and tok[1] == "in":
            self.eat_op("(")
            if self.at_kw("select"):
                sub = self.parse_query()
                self.eat_op(")")
                return Condition(column, "not in" if negated else "in", (), sub)
            values = [self.parse_literal()]
            while self.curr_is_op(","):
                self.next()
                values.append(self.parse_literal())
            self.eat_op(")")
            return Condition(column, "not in" if negated else "in", tuple(values))
        if tok[0] == "kw" and tok[1] == "is":
            if negated:
                raise ParseError("NOT before IS", tok[2])
            op = "is"
            if self.at_kw("not"):
                self.next()
                op = "is not"
            self.eat_kw("null")
            return Condition(column, op, ())
        raise ParseError(f"expected a conditional operator, found {tok[1]!r}", tok[2])

    def parse_literal(self) -> LiteralValue:
        tok = self.next()
        if tok[0] == "string":
            return tok[1]
        if tok[0] == "number":
            return float(tok[1]) if "." in tok[1] else int(tok[1])
        if tok[0] == "op" and tok[1] == "-":
            tok = self.next()
            if tok[0] != "number":
                raise ParseError("expected number after '-'", tok[2])
            return -float(tok[1]) if "." in tok[1] else -int(tok[1])
        raise ParseError(f"expected literal, found {tok[1]!r}", tok[2])


def parse_sql(text: str) -> SqlQuery:
    if not text.strip():
        raise ParseError("empty input", 0)
    return _SqlParser(text).parse()


# --------------------------------------------------------------------------
# Printer
# --------------------------------------------------------------------------

def _print_value(value: LiteralValue) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return repr(value)


def _print_condition(cond: Condition) -> str:
    if cond.op == "exists":
        return f"EXISTS ({print_sql(cond.subquery)})"
    col = cond.column.render()
    if cond.op in _HAVING_OPS:
        return f"{col} {cond.op} {_print_value(cond.values[0])}"
    if cond.op in ("between", "not between"):
        low, high = cond.values
        return f"{col} {cond.op.upper()} {_print_value(low)} AND {_print_value(high)}"
    if cond.op in ("like", "not like"):
        return f"{col} {cond.op.upper()} {_print_value(cond.values[0])}"
    if cond.op in ("in", "not in"):
        if cond.subquery is not None:
            return f"{col} {cond.op.upper()} ({print_sql(cond.subquery)})"
        inner = ", ".join(_print_value(v) for v in cond.values)
        return f"{col} {cond.op.upper()} ({inner})"
    if cond.op in ("is", "is not"):
        return f"{col} {cond.op.upper()} NULL"
    raise TypeError(f"unknown conditional operator {cond.op!r}")


def _print_bool(node: BoolExpr, parent_op: Optional[str] = None, right: bool = False) -> str:
    if isinstance(node, Condition):
        return _print_condition(node)
    text = (
        f"{_print_bool(node.left, node.op)} {node.op.upper()} "
        f"{_print_bool(node.right, node.op, right=True)}"
    )
    needs_parens = parent_op is not None and (
        (parent_op == "and" and node.op == "or") or (right and parent_op == node.op)
    )
    return f"({text})" if needs_parens else text


def print_sql(q: SqlQuery) -> str:
    """Canonical uppercase-keyword, single-space rendering."""
    parts = ["SELECT " + ", ".join(item.render() for item in q.select)]
    parts.append(f"FROM {q.from_table}")
    for join in q.joins:
        parts.append(f"JOIN {join.table} ON {join.left.render()} = {join.right.render()}")
    if q.where is not None:
        parts.append("WHERE " + _print_bool(q.where))
    if q.group_by:
        parts.append("GROUP BY " + ", ".join(ref.render() for ref in q.group_by))
    if q.having is not None:
        inner = q.having.column if isinstance(q.having.column, str) else q.having.column.render()
        parts.append(f"HAVING {q.having.agg}({inner}) {q.having.op} {_print_value(q.having.value)}")
    if q.order_by is not None:
        clause = f"ORDER BY {q.order_by.item.render()} {q.order_by.direction.upper()}"
        if q.order_by.limit is not None:
            clause += f" LIMIT {q.order_by.limit}"
        parts.append(clause)
    text = " ".join(parts)
    if q.set_op is not None:
        op, rhs = q.set_op
        text += f" {op.upper()} {print_sql(rhs)}"
    return text


# --------------------------------------------------------------------------
# Decomposition
# --------------------------------------------------------------------------

def decompose_sql(q: SqlQuery) -> tuple[list[Primitive], list[str]]:
    """Primitives plus operation names for a query.

    Column refs without an attached literal become TbCl primitives; each
    condition literal becomes one TbClVl carrying the conditional operator.
    Literal-less conditional operators (IS, EXISTS, subquery IN) appear in
    the operations list instead, as do clause keywords, aggregations, and
    set operations. Unqualified refs are attributed to the FROM table when
    the query reads a single table.
    """
    primitives: dict[Primitive, None] = {}
    operations: list[str] = []

    def walk(query: SqlQuery) -> None:
        sole_table = query.from_table if not query.joins else None

        def owner(ref: ColumnRef) -> str:
            return ref.table or sole_table or ""

        def add_tb_cl(ref: ColumnRef) -> None:
            primitives.setdefault(tb_cl(owner(ref), ref.column), None)

        operations.append("SELECT")
        for item in query.select:
            if item.agg is not None:
                operations.append(item.agg)
            if isinstance(item.column, ColumnRef):
                add_tb_cl(item.column)
        for join in query.joins:
            operations.append("JOIN")
            add_tb_cl(join.left)
            add_tb_cl(join.right)
        if query.where is not None:
            operations.append("WHERE")
            walk_bool(query.where, add_tb_cl, owner)
        if query.group_by:
            operations.append("GROUP BY")
            for ref in query.group_by:
                add_tb_cl(ref)
        if query.having is not None:
            operations.append("HAVING")
            operations.append(query.having.agg)
            if isinstance(query.having.column, ColumnRef):
                add_tb_cl(query.having.column)
        if query.order_by is not None:
            operations.append("ORDER BY")
            item = query.order_by.item
            if item.agg is not None:
                operations.append(item.agg)
            if isinstance(item.column, ColumnRef):
                add_tb_cl(item.column)
            if query.order_by.limit is not None:
                operations.append("LIMIT")
        if query.set_op is not None:
            operations.append(query.set_op[0].upper())
            walk(query.set_op[1])

    def walk_bool(node: BoolExpr, add_tb_cl, owner) -> None:
        if isinstance(node, BoolOp):
            operations.append(node.op.upper())
            walk_bool(node.left, add_tb_cl, owner)
            walk_bool(node.right, add_tb_cl, owner)
            return
        cond = node
        if cond.op == "exists":
            operations.append("EXISTS")
        elif cond.values:
            for value in cond.values:
                primitives.setdefault(
                    tb_cl_vl(owner(cond.column), cond.column.column, cond.op, value), None
                )
        else:
            operations.append(cond.op.upper())
            if cond.column is not None:
                add_tb_cl(cond.column)
        if cond.subquery is not None:
            walk(cond.subquery)

    walk(q)
    return list(primitives), operations


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------

def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _order_compare_guard(left, right) -> None:
    if _is_number(left) != _is_number(right):
        raise ExecutionError(f"cannot order-compare {left!r} with {right!r}")


def evaluate_comparison(value, op: str, literal) -> bool:
    """Shared scalar comparison semantics; None compares false."""
    if value is None:
        return False
    if op == "=":
        return value == literal
    if op == "!=":
        return value != literal
    _order_compare_guard(value, literal)
    if op == ">":
        return value > literal
    if op == "<":
        return value < literal
    if op == ">=":
        return value >= literal
    if op == "<=":
        return value <= literal
    raise ExecutionError(f"unknown comparison {op!r}")


def like_match(value, pattern: str) -> bool:
    """Case-insensitive LIKE with % and _ wildcards."""
    if value is None:
        return False
    if not isinstance(value, str):
        raise ExecutionError("LIKE requires a text operand")
    regex = "".join(
        ".*" if ch == "%" else "." if ch == "_" else re.escape(ch) for ch in pattern
    )
    return re.fullmatch(regex, value, flags=re.IGNORECASE) is not None


class _Executor:
    def __init__(self, db: Database):
        self.db = db

    # -- name resolution ----------------------------------------------------

    def resolve(self, ref: ColumnRef, tables: list[str]) -> tuple[str, str]:
        if ref.table is not None:
            if ref.table not in tables:
                raise ExecutionError(f"table {ref.table!r} is not in FROM")
            if not self.db.has_table(ref.table):
                raise ExecutionError(f"unknown table {ref.table!r}")
            if ref.column not in self.db.table(ref.table).column_names():
                raise ExecutionError(f"unknown column {ref.render()!r}")
            return ref.table, ref.column
        owners = [
            t for t in tables
            if self.db.has_table(t) and ref.column in self.db.table(t).column_names()
        ]
        if not owners:
            raise ExecutionError(f"unresolvable column {ref.column!r}")
        if len(owners) > 1:
            raise ExecutionError(f"ambiguous column {ref.column!r}")
        return owners[0], ref.column

    def column_type(self, resolved: tuple[str, str]) -> str:
        return self.db.table(resolved[0]).column_type(resolved[1])

    # -- FROM / JOIN --------------------------------------------------------

    def build_rows(self, q: SqlQuery) -> tuple[list[str], list[dict]]:
        tables = [q.from_table] + [j.table for j in q.joins]
        if len(set(tables)) != len(tables):
            raise ExecutionError("duplicate table in FROM (aliases are outside the subset)")
        for name in tables:
            if not self.db.has_table(name):
                raise ExecutionError(f"unknown table {name!r}")

        envs: list[dict] = [
            {q.from_table: row} for row in self.db.table(q.from_table).rows
        ]
        seen = [q.from_table]
        for join in q.joins:
            seen.append(join.table)
            left = self.resolve(join.left, seen)
            right = self.resolve(join.right, seen)
            joined = []
            for env in envs:
                for row in self.db.table(join.table).rows:
                    candidate = dict(env)
                    candidate[join.table] = row
                    lv = self.env_value(candidate, left)
                    rv = self.env_value(candidate, right)
                    if lv is not None and rv is not None and lv == rv:
                        joined.append(candidate)
            envs = joined
        return tables, envs

    def env_value(self, env: dict, resolved: tuple[str, str]):
        table, column = resolved
        row = env[table]
        return row[self.db.table(table).column_index(column)]

    # -- WHERE --------------------------------------------------------------

    def eval_bool(self, node: BoolExpr, env: dict, tables: list[str]) -> bool:
        if isinstance(node, BoolOp):
            left = self.eval_bool(node.left, env, tables)
            right = self.eval_bool(node.right, env, tables)
            return (left and right) if node.op == "and" else (left or right)
        return self.eval_condition(node, env, tables)

    def eval_condition(self, cond: Condition, env: dict, tables: list[str]) -> bool:
        if cond.op == "exists":
            return bool(execute_sql(cond.subquery, self.db))
        value = self.env_value(env, self.resolve(cond.column, tables))
        if cond.op in _HAVING_OPS:
            return evaluate_comparison(value, cond.op, cond.values[0])
        if cond.op in ("between", "not between"):
            low, high = cond.values
            inside = (
                value is not None
                and evaluate_comparison(value, ">=", low)
                and evaluate_comparison(value, "<=", high)
            )
            return (not inside and value is not None) if cond.op == "not between" else inside
        if cond.op in ("like", "not like"):
            hit = like_match(value, cond.values[0])
            return (not hit and value is not None) if cond.op == "not like" else hit
        if cond.op in ("in", "not in"):
            if cond.subquery is not None:
                rows = execute_sql(cond.subquery, self.db)
                if rows and len(rows[0]) != 1:
                    raise ExecutionError("IN subquery must select a single column")
                pool = [row[0] for row in rows]
            else:
                pool = list(cond.values)
            hit = value is not None and any(value == item for item in pool)
            return (not hit and value is not None) if cond.op == "not in" else hit
        if cond.op == "is":
            return value is None
        if cond.op == "is not":
            return value is not None
        raise ExecutionError(f"unknown conditional operator {cond.op!r}")

    # -- aggregation / projection --------------------------------------------

    def eval_aggregate(self, item: SelectItem, group: list[dict], tables: list[str]):
        agg = item.agg
        if item.column == "*":
            if agg != "COUNT":
                raise ExecutionError(f"{agg}(*) is not defined")
            return len(group)
        resolved = self.resolve(item.column, tables)
        values = [self.env_value(env, resolved) for env in group]
        values = [v for v in values if v is not None]
        if agg == "COUNT":
            return len(values)
        if not values:
            return None
        if agg in ("SUM", "AVG"):
            if self.column_type(resolved) != "number":
                raise ExecutionError(f"{agg} on text column {item.column.render()!r}")
            total = sum(values)
            return total if agg == "SUM" else total / len(values)
        if agg == "MAX":
            return max(values)
        if agg == "MIN":
            return min(values)
        raise ExecutionError(f"unknown aggregation {agg!r}")

    def project(self, q: SqlQuery, tables: list[str], envs: list[dict]) -> list[list]:
        has_agg = any(item.agg for item in q.select) or q.having is not None
        order = q.order_by

        if q.group_by or has_agg:
            if q.group_by:
                keys = [self.resolve(ref, tables) for ref in q.group_by]
                groups: dict[tuple, list[dict]] = {}
                for env in envs:
                    key = tuple(self.env_value(env, k) for k in keys)
                    groups.setdefault(key, []).append(env)
            else:
                keys = []
                groups = {(): envs}

            grouped_refs = {k for k in keys}
            out = []
            for key, members in groups.items():
                if q.having is not None:
                    agg_item = SelectItem(q.having.agg, q.having.column)
                    agg_value = self.eval_aggregate(agg_item, members, tables)
                    if agg_value is None or not evaluate_comparison(
                        agg_value, q.having.op, q.having.value
                    ):
                        continue
                row = []
                for item in q.select:
                    if item.agg is not None:
                        row.append(self.eval_aggregate(item, members, tables))
                    else:
                        if item.column == "*":
                            raise ExecutionError("bare * with GROUP BY or aggregates")
                        resolved = self.resolve(item.column, tables)
                        if resolved not in grouped_refs:
                            raise ExecutionError(
                                f"column {item.column.render()!r} is neither grouped nor aggregated"
                            )
                        row.append(self.env_value(members[0], resolved))
                sort_key = None
                if order is not None:
                    sort_key = self.group_order_key(order.item, members, keys, key, tables)
                out.append((sort_key, row))
            return self.finish(out, order)

        # ungrouped path
        out = []
        for env in envs:
            row = []
            for item in q.select:
                if item.column == "*":
                    for table in tables:
                        row.extend(env[table])
                else:
                    row.append(self.env_value(env, self.resolve(item.column, tables)))
            sort_key = None
            if order is not None:
                if order.item.agg is not None:
                    raise ExecutionError("aggregate ORDER BY requires GROUP BY")
                sort_key = self.env_value(env, self.resolve(order.item.column, tables))
            out.append((sort_key, row))
        return self.finish(out, order)

    def group_order_key(self, item, members, keys, key, tables):
        if item.agg is not None:
            return self.eval_aggregate(item, members, tables)
        resolved = self.resolve(item.column, tables)
        if resolved not in set(keys):
            raise ExecutionError("ORDER BY column must be grouped or aggregated")
        return key[keys.index(resolved)]

    def finish(self, decorated: list[tuple], order: Optional[OrderBy]) -> list[list]:
        if order is None:
            return [row for _, row in decorated]
        non_null = [(k, row) for k, row in decorated if k is not None]
        nulls = [row for k, row in decorated if k is None]
        if non_null:
            first = non_null[0][0]
            for key, _ in non_null[1:]:
                _order_compare_guard(first, key)
        non_null.sort(key=lambda pair: pair[0], reverse=(order.direction == "desc"))
        rows = (
            [row for _, row in non_null] + nulls
            if order.direction == "asc"
            else nulls + [row for _, row in non_null]
        )
        if order.limit is not None:
            rows = rows[: order.limit]
        return rows


def _row_key(row: list) -> tuple:
    return tuple(row)


def execute_sql(q: SqlQuery, db: Database) -> list[list]:
    """Run a subset query, returning result rows."""
    ex = _Executor(db)
    tables, envs = ex.build_rows(q)
    if q.where is not None:
        envs = [env for env in envs if ex.eval_bool(q.where, env, tables)]
    rows = ex.project(q, tables, envs)

    if q.set_op is not None:
        op, rhs_query = q.set_op
        rhs = execute_sql(rhs_query, db)
        if rows and rhs and len(rows[0]) != len(rhs[0]):
            raise ExecutionError("set operation column count mismatch")
        left_unique: dict[tuple, list] = {}
        for row in rows:
            left_unique.setdefault(_row_key(row), row)
        rhs_keys = {_row_key(row) for row in rhs}
        if op == "union":
            merged = dict(left_unique)
            for row in rhs:
                merged.setdefault(_row_key(row), row)
            return list(merged.values())
        if op == "intersect":
            return [row for key, row in left_unique.items() if key in rhs_keys]
        if op == "except":
            return [row for key, row in left_unique.items() if key not in rhs_keys]
        raise ExecutionError(f"unknown set operation {op!r}")
    return rows
