"""Seeded random generators for differential and round-trip tests."""

from __future__ import annotations

import random

from semparse.data import Database, KnowledgeBase, Table, Triple
from semparse import sexpr as sx
from semparse import sqlcore as sq

ENTITIES = [f"e{i}" for i in range(20)]
ENTITY_RELATIONS = [f"r{i}" for i in range(6)]
NUMBER_RELATIONS = ["num0", "num1"]
TEXT_RELATIONS = ["txt0"]
TEXT_LITERALS = ["red", "blue", "green", "2020-01-01"]


def random_kb(rng: random.Random, max_triples: int = 50) -> KnowledgeBase:
    triples = []
    for _ in range(rng.randrange(0, max_triples + 1)):
        kind = rng.random()
        subject = rng.choice(ENTITIES)
        if kind < 0.7:
            triples.append(Triple(subject, rng.choice(ENTITY_RELATIONS), rng.choice(ENTITIES)))
        elif kind < 0.9:
            relation = rng.choice(NUMBER_RELATIONS)
            if rng.random() < 0.8:
                triples.append(Triple(subject, relation, rng.randrange(0, 100), "int"))
            else:
                triples.append(Triple(subject, relation, rng.randrange(0, 100) / 2, "float"))
        else:
            # occasionally emit strings under a number relation to exercise
            # the mixed-type execution error on both executors
            relation = rng.choice(TEXT_RELATIONS + NUMBER_RELATIONS[:1])
            triples.append(Triple(subject, relation, rng.choice(TEXT_LITERALS), "str"))
    names = {e: e.upper() for e in ENTITIES}
    return KnowledgeBase(triples, names)


def random_sexpr(rng: random.Random, max_depth: int = 3) -> sx.SExpr:
    def literal():
        roll = rng.random()
        if roll < 0.6:
            return rng.randrange(0, 100)
        if roll < 0.8:
            return rng.randrange(0, 100) / 2
        return rng.choice(TEXT_LITERALS)

    def rel_slot():
        relation = rng.choice(ENTITY_RELATIONS)
        return sx.Reverse(relation) if rng.random() < 0.4 else relation

    def expr(depth: int) -> sx.SExpr:
        if depth <= 0 or rng.random() < 0.25:
            return sx.EntitySet(rng.choice(ENTITIES))
        roll = rng.random()
        if roll < 0.55:
            return sx.Join(rel_slot(), expr(depth - 1))
        if roll < 0.8:
            return sx.And(expr(depth - 1), expr(depth - 1))
        return sx.Compare(
            rng.choice(["lt", "le", "gt", "ge"]),
            rng.choice(NUMBER_RELATIONS + TEXT_RELATIONS),
            literal(),
        )

    body = expr(max_depth)
    roll = rng.random()
    if roll < 0.15:
        return sx.Count(body)
    if roll < 0.25:
        return sx.ArgMax(body, rng.choice(NUMBER_RELATIONS))
    if roll < 0.35:
        return sx.ArgMin(body, rng.choice(NUMBER_RELATIONS))
    return body


# --------------------------------------------------------------------------
# SQL
# --------------------------------------------------------------------------

TEXT_POOL = ["red", "blue", "green", "ze_bra", "a%c"]


def random_db(rng: random.Random, max_tables: int = 3, max_rows: int = 20) -> Database:
    tables = []
    for t in range(rng.randrange(1, max_tables + 1)):
        columns = [("k", "number"), (f"n{t}", "number"), (f"s{t}", "text")]
        rows = []
        for _ in range(rng.randrange(0, max_rows + 1)):
            rows.append(
                [
                    rng.randrange(0, 8) if rng.random() > 0.1 else None,
                    rng.randrange(0, 30) if rng.random() > 0.1 else None,
                    rng.choice(TEXT_POOL) if rng.random() > 0.1 else None,
                ]
            )
        tables.append(Table(f"t{t}", columns, rows))
    return Database(tables)


def _columns(db: Database, table: str) -> list[tuple[str, str]]:
    return db.table(table).columns


def random_sql(rng: random.Random, db: Database, allow_set_op: bool = True) -> sq.SqlQuery:
    table_names = [t.name for t in db.tables]
    rng.shuffle(table_names)
    n_tables = rng.randrange(1, len(table_names) + 1)
    chosen = table_names[:n_tables]
    from_table, join_tables = chosen[0], chosen[1:]
    joins = tuple(
        sq.JoinClause(t, sq.ColumnRef(prev, "k"), sq.ColumnRef(t, "k"))
        for prev, t in zip(chosen, join_tables)
    )

    def ref(col_type: str | None = None) -> sq.ColumnRef:
        table = rng.choice(chosen)
        options = [c for c, ct in _columns(db, table) if col_type in (None, ct)]
        return sq.ColumnRef(table, rng.choice(options))

    def literal_for(column: sq.ColumnRef):
        ctype = db.table(column.table).column_type(column.column)
        if ctype == "number" and rng.random() > 0.08:
            return rng.randrange(0, 30) if rng.random() < 0.8 else rng.randrange(0, 30) / 2
        if ctype == "text" and rng.random() > 0.08:
            return rng.choice(TEXT_POOL)
        # deliberate type mismatch: both executors must fail identically
        return rng.choice(TEXT_POOL) if ctype == "number" else rng.randrange(0, 30)

    def condition() -> sq.Condition:
        roll = rng.random()
        column = ref()
        if roll < 0.45:
            op = rng.choice(["=", "!=", ">", "<", ">=", "<="])
            return sq.Condition(column, op, (literal_for(column),))
        if roll < 0.6:
            column = ref("number")
            low = rng.randrange(0, 20)
            op = rng.choice(["between", "not between"])
            return sq.Condition(column, op, (low, low + rng.randrange(0, 10)))
        if roll < 0.7:
            column = ref("text")
            op = rng.choice(["like", "not like"])
            pattern = rng.choice(["%e%", "b_ue", "red", "%n", "z%"])
            return sq.Condition(column, op, (pattern,))
        if roll < 0.8:
            op = rng.choice(["in", "not in"])
            values = tuple(literal_for(column) for _ in range(rng.randrange(1, 4)))
            return sq.Condition(column, op, values)
        if roll < 0.9:
            return sq.Condition(column, rng.choice(["is", "is not"]), ())
        sub_table = rng.choice([t.name for t in db.tables])
        if rng.random() < 0.5:
            sub = sq.SqlQuery(
                select=(sq.SelectItem(None, sq.ColumnRef(sub_table, rng.choice(
                    [c for c, _ in _columns(db, sub_table)]))),),
                from_table=sub_table,
            )
            return sq.Condition(column, rng.choice(["in", "not in"]), (), sub)
        sub = sq.SqlQuery(
            select=(sq.SelectItem(None, "*"),),
            from_table=sub_table,
        )
        return sq.Condition(None, "exists", (), sub)

    def bool_tree(depth: int) -> sq.BoolExpr:
        if depth <= 0 or rng.random() < 0.55:
            return condition()
        return sq.BoolOp(rng.choice(["and", "or"]), bool_tree(depth - 1), bool_tree(depth - 1))

    where = bool_tree(2) if rng.random() < 0.7 else None

    group_by: tuple[sq.ColumnRef, ...] = ()
    having = None
    order_by = None
    agg_of = {"number": ["AVG", "COUNT", "MAX", "MIN", "SUM"], "text": ["COUNT", "MAX", "MIN"]}

    def agg_item() -> sq.SelectItem:
        if rng.random() < 0.3:
            return sq.SelectItem("COUNT", "*")
        column = ref()
        ctype = db.table(column.table).column_type(column.column)
        return sq.SelectItem(rng.choice(agg_of[ctype]), column)

    mode = rng.random()
    if mode < 0.25:
        gref = ref()
        group_by = (gref,)
        select = [sq.SelectItem(None, gref)]
        if rng.random() < 0.8:
            select.append(agg_item())
        if rng.random() < 0.4:
            item = agg_item()
            having = sq.Having(item.agg, item.column, rng.choice(["=", ">", "<", ">=", "<="]),
                               rng.randrange(0, 6))
        if rng.random() < 0.5:
            key = sq.SelectItem(None, gref) if rng.random() < 0.5 else select[-1]
            order_by = sq.OrderBy(key, rng.choice(["asc", "desc"]),
                                  rng.randrange(1, 5) if rng.random() < 0.5 else None)
    elif mode < 0.45:
        select = [agg_item()]
        if rng.random() < 0.3:
            select.append(agg_item())
    else:
        if rng.random() < 0.15:
            select = [sq.SelectItem(None, "*")]
        else:
            select = [sq.SelectItem(None, ref()) for _ in range(rng.randrange(1, 3))]
        if rng.random() < 0.4:
            order_by = sq.OrderBy(sq.SelectItem(None, ref()), rng.choice(["asc", "desc"]),
                                  rng.randrange(1, 5) if rng.random() < 0.5 else None)

    query = sq.SqlQuery(
        select=tuple(select),
        from_table=from_table,
        joins=joins,
        where=where,
        group_by=group_by,
        having=having,
        order_by=order_by,
    )

    if allow_set_op and rng.random() < 0.15 and not any(
        item.column == "*" and item.agg is None for item in query.select
    ):
        rhs = random_sql(rng, db, allow_set_op=False)
        rhs_items = []
        for i in range(len(query.select)):
            column = sq.ColumnRef(rhs.from_table, rng.choice(
                [c for c, _ in _columns(db, rhs.from_table)]))
            rhs_items.append(sq.SelectItem(None, column))
        rhs = sq.SqlQuery(select=tuple(rhs_items), from_table=rhs.from_table,
                          joins=(), where=rhs.where)
        query = sq.SqlQuery(
            select=query.select, from_table=query.from_table, joins=query.joins,
            where=query.where, group_by=query.group_by, having=query.having,
            order_by=query.order_by,
            set_op=(rng.choice(["union", "intersect", "except"]), rhs),
        )
    return query
