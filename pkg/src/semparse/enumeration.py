"""Question-relevant primitive candidates from a store.

KB path: first hops are the linked entities' adjacent (relation, direction)
pairs; second hops are the (relation, direction) pairs adjacent to any
entity one first-hop traversal away. Counts stay additive because hops are
collected per relation, never per path; re-traversing the arrival triple
backwards is excluded by default so a star graph with fan-outs N and M
yields exactly N + M primitives (set ``allow_backtrack`` to keep those
reverse pairs).

DB path: every table.column becomes a TbCl; TbClVl candidates come from
fuzzy-matching question phrases against text cells (paired with ``=``) and
from pairing question numbers with every number column under a configured
operator subset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .data import (
    Database,
    FIRST_HOP,
    KnowledgeBase,
    Primitive,
    Question,
    SECOND_HOP,
    TB_CL,
    TB_CL_VL,
    TbClVlPayload,
    first_hop,
    second_hop,
    tb_cl,
    tb_cl_vl,
)
from .text import best_phrase_similarity, extract_numbers

DEFAULT_MATCH_THRESHOLD = 0.85
DEFAULT_NUMERIC_OPS = ("=", ">", "<", ">=", "<=")
DEFAULT_MAX_NGRAM = 5


@dataclass
class EnumerationResult:
    """Per-category candidate lists, deduplicated by payload."""

    first_hop: list[Primitive] = field(default_factory=list)
    second_hop: list[Primitive] = field(default_factory=list)
    tb_cl: list[Primitive] = field(default_factory=list)
    tb_cl_vl: list[Primitive] = field(default_factory=list)

    _LISTS = {
        FIRST_HOP: "first_hop",
        SECOND_HOP: "second_hop",
        TB_CL: "tb_cl",
        TB_CL_VL: "tb_cl_vl",
    }

    def by_category(self, category: str) -> list[Primitive]:
        return getattr(self, self._LISTS[category])

    def all_primitives(self) -> list[Primitive]:
        return self.first_hop + self.second_hop + self.tb_cl + self.tb_cl_vl

    @property
    def stats(self) -> dict[str, int]:
        return {cat: len(self.by_category(cat)) for cat in self._LISTS}

    def to_json(self) -> dict:
        return {
            "first_hop": [p.to_json() for p in self.first_hop],
            "second_hop": [p.to_json() for p in self.second_hop],
            "tb_cl": [p.to_json() for p in self.tb_cl],
            "tb_cl_vl": [p.to_json() for p in self.tb_cl_vl],
            "stats": self.stats,
        }

    @staticmethod
    def from_json(record: dict) -> "EnumerationResult":
        return EnumerationResult(
            first_hop=[Primitive.from_json(r) for r in record["first_hop"]],
            second_hop=[Primitive.from_json(r) for r in record["second_hop"]],
            tb_cl=[Primitive.from_json(r) for r in record["tb_cl"]],
            tb_cl_vl=[Primitive.from_json(r) for r in record["tb_cl_vl"]],
        )


def dump_enumerations(results: Iterable[tuple[str, EnumerationResult]], path) -> None:
    """One {"question_id", ...fields} JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for question_id, result in results:
            record = {"question_id": question_id}
            record.update(result.to_json())
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# Entity linking
# --------------------------------------------------------------------------

def link_entities(
    question: Question,
    kb: KnowledgeBase,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    max_ngram: int = DEFAULT_MAX_NGRAM,
) -> list[str]:
    """Entity ids for a question.

    Provided mentions are returned verbatim (the teacher-forcing path);
    otherwise display names are fuzzy-matched against question phrases and
    hits at or above the threshold come back ranked by similarity.
    """
    if question.entity_mentions is not None:
        return list(question.entity_mentions)
    scored = []
    for entity, name in kb.name_index.items():
        score = best_phrase_similarity(name, question.text, max_ngram)
        if score >= threshold:
            scored.append((entity, score))
    scored.sort(key=lambda pair: -pair[1])
    return [entity for entity, _ in scored]


# --------------------------------------------------------------------------
# KB primitives
# --------------------------------------------------------------------------

def enumerate_kb_primitives(
    question: Question,
    kb: KnowledgeBase,
    linked: list[str],
    allow_backtrack: bool = False,
) -> EnumerationResult:
    result = EnumerationResult()
    firsts: dict[tuple[str, str, str], None] = {}
    # frontier entity -> triples it was reached through (skipped on hop two)
    frontier: dict[str, set] = {}

    for entity in linked:
        for relation, obj in kb.out_edges(entity):
            firsts.setdefault((entity, relation, "out"), None)
        for relation, subject in kb.in_edges(entity):
            firsts.setdefault((entity, relation, "in"), None)

    for t in kb.triples:
        for entity in linked:
            if t.subject == entity and t.obj_is_entity:
                frontier.setdefault(str(t.obj), set()).add(t)
            if t.obj_is_entity and t.obj == entity:
                frontier.setdefault(t.subject, set()).add(t)

    seconds: dict[tuple[str, str], None] = {}
    for member, arrivals in frontier.items():
        for t in kb.triples:
            if not allow_backtrack and t in arrivals:
                continue
            if t.subject == member:
                seconds.setdefault((t.relation, "out"), None)
            if t.obj_is_entity and t.obj == member:
                seconds.setdefault((t.relation, "in"), None)

    result.first_hop = [first_hop(e, r, d) for e, r, d in firsts]
    result.second_hop = [second_hop(r, d) for r, d in seconds]
    return result


# --------------------------------------------------------------------------
# DB primitives
# --------------------------------------------------------------------------

def enumerate_db_primitives(
    question: Question,
    db: Database,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    numeric_ops: tuple[str, ...] = DEFAULT_NUMERIC_OPS,
    max_ngram: int = DEFAULT_MAX_NGRAM,
    supplement: bool = False,
) -> EnumerationResult:
    result = EnumerationResult()
    for table in db.tables:
        for column, _ in table.columns:
            result.tb_cl.append(tb_cl(table.name, column))

    values: dict[TbClVlPayload, None] = {}
    for table in db.tables:
        for index, (column, ctype) in enumerate(table.columns):
            if ctype != "text":
                continue
            seen_cells: set[str] = set()
            for row in table.rows:
                cell = row[index]
                if cell is None or cell in seen_cells:
                    continue
                seen_cells.add(cell)
                if best_phrase_similarity(cell, question.text, max_ngram) >= threshold:
                    values.setdefault(TbClVlPayload(table.name, column, "=", cell), None)

    numbers = extract_numbers(question.text)
    for number in numbers:
        for table in db.tables:
            for column, ctype in table.columns:
                if ctype != "number":
                    continue
                for op in numeric_ops:
                    values.setdefault(TbClVlPayload(table.name, column, op, number), None)

    result.tb_cl_vl = [Primitive(TB_CL_VL, payload) for payload in values]
    if supplement:
        matched = [p for p in result.tb_cl_vl if p.payload.op == "="]
        for companion in supplement_column_names(db, matched):
            if companion.payload not in values:
                values[companion.payload] = None
                result.tb_cl_vl.append(companion)
    return result


def supplement_column_names(db: Database, matched: list[Primitive]) -> list[Primitive]:
    """Same-row companions for matched cells.

    For each matched cell value, every row holding it contributes one
    ``sibling_column = sibling_value`` primitive per non-null sibling cell,
    so vague column names travel with an example value.
    """
    companions: dict[TbClVlPayload, None] = {}
    for prim in matched:
        payload = prim.payload
        if not isinstance(payload, TbClVlPayload) or not db.has_table(payload.table):
            continue
        table = db.table(payload.table)
        try:
            anchor = table.column_index(payload.column)
        except KeyError:
            continue
        for row in table.rows:
            if row[anchor] != payload.value:
                continue
            for index, (column, _) in enumerate(table.columns):
                if index == anchor or row[index] is None:
                    continue
                companions.setdefault(
                    TbClVlPayload(table.name, column, "=", row[index]), None
                )
    return [Primitive(TB_CL_VL, payload) for payload in companions]


def enumerate_primitives(
    question: Question,
    kb: Optional[KnowledgeBase] = None,
    db: Optional[Database] = None,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    numeric_ops: tuple[str, ...] = DEFAULT_NUMERIC_OPS,
    max_ngram: int = DEFAULT_MAX_NGRAM,
    allow_backtrack: bool = False,
    supplement: bool = False,
) -> EnumerationResult:
    """Modality dispatch used by the pipeline."""
    if question.modality == "kb":
        if kb is None:
            raise ValueError("kb question without a knowledge base")
        linked = link_entities(question, kb, threshold, max_ngram)
        return enumerate_kb_primitives(question, kb, linked, allow_backtrack)
    if db is None:
        raise ValueError("db question without a database")
    return enumerate_db_primitives(
        question, db, threshold, numeric_ops, max_ngram, supplement
    )
