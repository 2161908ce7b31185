"""Index-free reference implementations for testing and benchmarking.

Everything here is deliberately slow: executors materialize candidate sets
by scanning the whole store per node, and the logical-form enumerators
realize the combinatorial baseline (every path, every clause combination)
that primitive enumeration avoids. Shared with the executors are the AST
and store types only, never their evaluation code.
"""

from __future__ import annotations

from itertools import combinations, product
from typing import Optional

from .data import Database, KnowledgeBase
from .errors import ExecutionError
from . import sexpr as sx
from . import sqlcore as sq


# --------------------------------------------------------------------------
# Knowledge base
# --------------------------------------------------------------------------

def _brute_compare_class(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        return value


def brute_execute_sexpr(ast: sx.SExpr, kb: KnowledgeBase):
    """Same denotation as execute_sexpr, computed by whole-KB scans."""
    if isinstance(ast, sx.Count):
        return len(_brute_set(ast.operand, kb))
    return _brute_set(ast, kb)


def _brute_set(ast: sx.SExpr, kb: KnowledgeBase) -> set:
    if isinstance(ast, sx.EntitySet):
        return {ast.entity}
    if isinstance(ast, sx.Join):
        operand = _brute_set(ast.operand, kb)
        out: set = set()
        for t in kb.triples:
            if isinstance(ast.relation, sx.Reverse):
                if t.relation == ast.relation.relation and t.subject in operand:
                    out.add(t.obj)
            else:
                if t.relation == ast.relation and t.obj in operand:
                    out.add(t.subject)
        return out
    if isinstance(ast, sx.And):
        return _brute_set(ast.left, kb) & _brute_set(ast.right, kb)
    if isinstance(ast, (sx.ArgMax, sx.ArgMin)):
        members = _brute_set(ast.operand, kb)
        largest = isinstance(ast, sx.ArgMax)
        pairs = []
        for t in kb.triples:
            if t.relation == ast.relation and t.obj_kind != "entity" and t.subject in members:
                pairs.append((t.subject, _brute_compare_class(t.obj)))
        if not pairs:
            return set()
        classes = {isinstance(k, float) for _, k in pairs}
        if len(classes) > 1:
            raise ExecutionError(f"mixed literal types under relation {ast.relation!r}")
        best = max(k for _, k in pairs) if largest else min(k for _, k in pairs)
        return {s for s, k in pairs if k == best}
    if isinstance(ast, sx.Compare):
        lit = _brute_compare_class(ast.literal)
        out = set()
        for t in kb.triples:
            if t.relation != ast.relation or t.obj_kind == "entity":
                continue
            value = _brute_compare_class(t.obj)
            if isinstance(value, float) != isinstance(lit, float):
                raise ExecutionError(f"cannot compare {t.obj!r} with {ast.literal!r}")
            if (
                (ast.op == "lt" and value < lit)
                or (ast.op == "le" and value <= lit)
                or (ast.op == "gt" and value > lit)
                or (ast.op == "ge" and value >= lit)
            ):
                out.add(t.subject)
        return out
    if isinstance(ast, sx.Count):
        raise ExecutionError("COUNT is only allowed at the root")
    raise TypeError(f"not an S-expression node: {ast!r}")


def _directed_edges(kb: KnowledgeBase, entity: str):
    """Every (triple, direction) traversable from ``entity``; direction is
    "out" when the entity is the subject."""
    for t in kb.triples:
        if t.subject == entity:
            yield t, "out"
        if t.obj_is_entity and t.obj == entity:
            yield t, "in"


def _hop_form(relation: str, direction: str, inner: sx.SExpr) -> sx.Join:
    if direction == "out":
        return sx.Join(sx.Reverse(relation), inner)
    return sx.Join(relation, inner)


def enumerate_logical_forms_kb(
    linked: list[str],
    kb: KnowledgeBase,
    depth: int = 2,
    allow_backtrack: bool = False,
) -> list[sx.SExpr]:
    """Every one- and two-hop JOIN form rooted at a linked entity.

    This is the exhaustive path baseline: each distinct traversal yields its
    own logical form, so fan-outs multiply. Re-traversing the arrival triple
    backwards is skipped unless ``allow_backtrack`` is set.
    """
    forms: dict[str, sx.SExpr] = {}
    for entity in linked:
        for t, direction in _directed_edges(kb, entity):
            inner = _hop_form(t.relation, direction, sx.EntitySet(entity))
            forms.setdefault(sx.print_sexpr(inner), inner)
            if depth < 2:
                continue
            frontier = t.obj if direction == "out" else t.subject
            if not isinstance(frontier, str) or (direction == "out" and not t.obj_is_entity):
                continue
            for t2, d2 in _directed_edges(kb, frontier):
                if t2 == t and not allow_backtrack:
                    continue
                outer = _hop_form(t2.relation, d2, inner)
                forms.setdefault(sx.print_sexpr(outer), outer)
    return list(forms.values())


def reachable_second_hops(
    linked: list[str],
    kb: KnowledgeBase,
    allow_backtrack: bool = False,
) -> set[tuple[str, str]]:
    """(relation, direction) pairs that end some two-hop path from ``linked``."""
    pairs: set[tuple[str, str]] = set()
    for entity in linked:
        for t, direction in _directed_edges(kb, entity):
            frontier = t.obj if direction == "out" else t.subject
            if not isinstance(frontier, str) or (direction == "out" and not t.obj_is_entity):
                continue
            for t2, d2 in _directed_edges(kb, frontier):
                if t2 == t and not allow_backtrack:
                    continue
                pairs.add((t2.relation, d2))
    return pairs


# --------------------------------------------------------------------------
# Database
# --------------------------------------------------------------------------

def brute_execute_sql(q: sq.SqlQuery, db: Database) -> list[list]:
    """Cross-product evaluation with post-filtering; agrees with execute_sql."""
    tables = [q.from_table] + [j.table for j in q.joins]
    if len(set(tables)) != len(tables):
        raise ExecutionError("duplicate table in FROM (aliases are outside the subset)")
    for name in tables:
        if not db.has_table(name):
            raise ExecutionError(f"unknown table {name!r}")

    # full cross product, then equi-join predicates applied like any filter
    row_lists = [db.table(name).rows for name in tables]
    envs = [dict(zip(tables, combo)) for combo in product(*row_lists)]

    def resolve(ref: sq.ColumnRef) -> tuple[str, str]:
        if ref.table is not None:
            if ref.table not in tables or not db.has_table(ref.table):
                raise ExecutionError(f"table {ref.table!r} is not in FROM")
            if ref.column not in db.table(ref.table).column_names():
                raise ExecutionError(f"unknown column {ref.render()!r}")
            return ref.table, ref.column
        owners = [t for t in tables if ref.column in db.table(t).column_names()]
        if len(owners) != 1:
            raise ExecutionError(f"unresolvable or ambiguous column {ref.column!r}")
        return owners[0], ref.column

    def value_of(env: dict, ref: sq.ColumnRef):
        table, column = resolve(ref)
        return env[table][db.table(table).column_index(column)]

    for join in q.joins:
        kept = []
        for env in envs:
            lv = value_of(env, join.left)
            rv = value_of(env, join.right)
            if lv is not None and rv is not None and lv == rv:
                kept.append(env)
        envs = kept

    def test(node: sq.BoolExpr, env: dict) -> bool:
        if isinstance(node, sq.BoolOp):
            # eager on both sides, matching execute_sql's error behavior
            left = test(node.left, env)
            right = test(node.right, env)
            return (left and right) if node.op == "and" else (left or right)
        cond = node
        if cond.op == "exists":
            return bool(brute_execute_sql(cond.subquery, db))
        value = value_of(env, cond.column)
        if cond.op in ("=", "!=", ">", "<", ">=", "<="):
            return sq.evaluate_comparison(value, cond.op, cond.values[0])
        if cond.op in ("between", "not between"):
            low, high = cond.values
            inside = (
                value is not None
                and sq.evaluate_comparison(value, ">=", low)
                and sq.evaluate_comparison(value, "<=", high)
            )
            return (value is not None and not inside) if cond.op == "not between" else inside
        if cond.op in ("like", "not like"):
            hit = sq.like_match(value, cond.values[0])
            return (value is not None and not hit) if cond.op == "not like" else hit
        if cond.op in ("in", "not in"):
            if cond.subquery is not None:
                rows = brute_execute_sql(cond.subquery, db)
                if rows and len(rows[0]) != 1:
                    raise ExecutionError("IN subquery must select a single column")
                pool = [row[0] for row in rows]
            else:
                pool = list(cond.values)
            hit = value is not None and any(value == item for item in pool)
            return (value is not None and not hit) if cond.op == "not in" else hit
        if cond.op == "is":
            return value is None
        if cond.op == "is not":
            return value is not None
        raise ExecutionError(f"unknown conditional operator {cond.op!r}")

    if q.where is not None:
        envs = [env for env in envs if test(q.where, env)]

    def aggregate(item: sq.SelectItem, members: list[dict]):
        if item.column == "*":
            if item.agg != "COUNT":
                raise ExecutionError(f"{item.agg}(*) is not defined")
            return len(members)
        table, column = resolve(item.column)
        values = [
            env[table][db.table(table).column_index(column)]
            for env in members
        ]
        values = [v for v in values if v is not None]
        if item.agg == "COUNT":
            return len(values)
        if not values:
            return None
        if item.agg in ("SUM", "AVG"):
            if db.table(table).column_type(column) != "number":
                raise ExecutionError(f"{item.agg} on text column")
            return sum(values) if item.agg == "SUM" else sum(values) / len(values)
        if item.agg == "MAX":
            return max(values)
        if item.agg == "MIN":
            return min(values)
        raise ExecutionError(f"unknown aggregation {item.agg!r}")

    has_agg = any(item.agg for item in q.select) or q.having is not None
    decorated: list[tuple] = []

    if q.group_by or has_agg:
        keys = [resolve(ref) for ref in q.group_by]
        groups: dict[tuple, list[dict]] = {}
        if q.group_by:
            for env in envs:
                key = tuple(env[t][db.table(t).column_index(c)] for t, c in keys)
                groups.setdefault(key, []).append(env)
        else:
            groups[()] = envs
        for key, members in groups.items():
            if q.having is not None:
                value = aggregate(sq.SelectItem(q.having.agg, q.having.column), members)
                if value is None or not sq.evaluate_comparison(value, q.having.op, q.having.value):
                    continue
            row = []
            for item in q.select:
                if item.agg is not None:
                    row.append(aggregate(item, members))
                else:
                    if item.column == "*":
                        raise ExecutionError("bare * with GROUP BY or aggregates")
                    resolved = resolve(item.column)
                    if resolved not in keys:
                        raise ExecutionError(
                            f"column {item.column.render()!r} is neither grouped nor aggregated"
                        )
                    row.append(key[keys.index(resolved)])
            sort_key = None
            if q.order_by is not None:
                item = q.order_by.item
                if item.agg is not None:
                    sort_key = aggregate(item, members)
                else:
                    resolved = resolve(item.column)
                    if resolved not in keys:
                        raise ExecutionError("ORDER BY column must be grouped or aggregated")
                    sort_key = key[keys.index(resolved)]
            decorated.append((sort_key, row))
    else:
        for env in envs:
            row = []
            for item in q.select:
                if item.column == "*":
                    for t in tables:
                        row.extend(env[t])
                else:
                    row.append(value_of(env, item.column))
            sort_key = None
            if q.order_by is not None:
                if q.order_by.item.agg is not None:
                    raise ExecutionError("aggregate ORDER BY requires GROUP BY")
                sort_key = value_of(env, q.order_by.item.column)
            decorated.append((sort_key, row))

    if q.order_by is None:
        rows = [row for _, row in decorated]
    else:
        non_null = [(k, r) for k, r in decorated if k is not None]
        nulls = [r for k, r in decorated if k is None]
        if non_null:
            first = non_null[0][0]
            for k, _ in non_null[1:]:
                if (isinstance(first, (int, float)) and not isinstance(first, bool)) != (
                    isinstance(k, (int, float)) and not isinstance(k, bool)
                ):
                    raise ExecutionError(f"cannot order-compare {first!r} with {k!r}")
        non_null.sort(key=lambda pair: pair[0], reverse=(q.order_by.direction == "desc"))
        if q.order_by.direction == "asc":
            rows = [r for _, r in non_null] + nulls
        else:
            rows = nulls + [r for _, r in non_null]
        if q.order_by.limit is not None:
            rows = rows[: q.order_by.limit]

    if q.set_op is not None:
        op, rhs_query = q.set_op
        rhs = brute_execute_sql(rhs_query, db)
        if rows and rhs and len(rows[0]) != len(rhs[0]):
            raise ExecutionError("set operation column count mismatch")
        left_unique: dict[tuple, list] = {}
        for row in rows:
            left_unique.setdefault(tuple(row), row)
        rhs_keys = {tuple(row) for row in rhs}
        if op == "union":
            merged = dict(left_unique)
            for row in rhs:
                merged.setdefault(tuple(row), row)
            return list(merged.values())
        if op == "intersect":
            return [row for key, row in left_unique.items() if key in rhs_keys]
        return [row for key, row in left_unique.items() if key not in rhs_keys]
    return rows


def enumerate_logical_forms_db(
    db: Database,
    value_conditions: list[tuple[str, str, str, object]],
    max_where: int = 3,
    max_forms: Optional[int] = None,
) -> list[sq.SqlQuery]:
    """The clause-combination baseline for one question.

    Builds every single-table SELECT over the schema: each column crossed
    with each aggregation (plus COUNT(*)), optionally filtered by up to
    ``max_where`` of the question's matched value conditions (table, column,
    op, value), AND-joined. The count of these forms is what primitive
    enumeration is measured against.
    """
    forms: list[sq.SqlQuery] = []
    for table in db.tables:
        conds = [
            sq.Condition(sq.ColumnRef(t, c), op, (v,))
            for t, c, op, v in value_conditions
            if t == table.name
        ]
        cond_subsets: list[tuple] = [()]
        for size in range(1, min(max_where, len(conds)) + 1):
            cond_subsets.extend(combinations(conds, size))
        items: list[sq.SelectItem] = [sq.SelectItem("COUNT", "*")]
        for column, ctype in table.columns:
            ref = sq.ColumnRef(table.name, column)
            items.append(sq.SelectItem(None, ref))
            for agg in AGG_FOR_TYPE[ctype]:
                items.append(sq.SelectItem(agg, ref))
        for item in items:
            for subset in cond_subsets:
                where: Optional[sq.BoolExpr] = None
                for cond in subset:
                    where = cond if where is None else sq.BoolOp("and", where, cond)
                forms.append(
                    sq.SqlQuery(select=(item,), from_table=table.name, where=where)
                )
                if max_forms is not None and len(forms) >= max_forms:
                    return forms
    return forms


AGG_FOR_TYPE = {
    "number": ("AVG", "COUNT", "MAX", "MIN", "SUM"),
    "text": ("COUNT", "MAX", "MIN"),
}
