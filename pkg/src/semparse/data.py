"""Structured data stores, questions, primitives, and file ingestion.

Two stores are supported: a triple-based knowledge base and a relational
database with typed columns. Both are immutable after load and safe for
concurrent readers.

File formats (all UTF-8, LF line endings):
  * triples TSV: subject \\t relation \\t object \\t object-kind, where
    object-kind is one of entity/int/float/str. An optional companion
    names TSV (``<stem>.names.tsv``) maps entity-id \\t display-name.
  * DB schema JSON: {"tables": [{"name": ..., "columns":
    [{"name": ..., "type": "text"|"number"}]}]}, plus one
    ``<table>.csv`` per table (header row matching the schema) in a rows
    directory.
  * questions JSONL: one object per line with id/text/modality and the
    optional fields gold_logical_form, entity_mentions, answers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import IngestionError

CellValue = Union[str, int, float, None]
LiteralValue = Union[str, int, float]

OBJECT_KINDS = ("entity", "int", "float", "str")

# Primitive categories and the special tokens used to tag them in model input.
FIRST_HOP = "FirstHop"
SECOND_HOP = "SecondHop"
TB_CL = "TbCl"
TB_CL_VL = "TbClVl"
KB_CATEGORIES = (FIRST_HOP, SECOND_HOP)
DB_CATEGORIES = (TB_CL, TB_CL_VL)
ALL_CATEGORIES = KB_CATEGORIES + DB_CATEGORIES
CATEGORY_TOKENS = {
    FIRST_HOP: "<|firsthop|>",
    SECOND_HOP: "<|secondhop|>",
    TB_CL: "<|tb_cl|>",
    TB_CL_VL: "<|tb_cl_vl|>",
}


@dataclass(frozen=True)
class Triple:
    """One subject-relation-object fact.

    ``obj`` is an entity id when ``obj_kind == "entity"``, otherwise a typed
    literal (int, float, or string; dates travel as strings).
    """

    subject: str
    relation: str
    obj: LiteralValue
    obj_kind: str = "entity"

    @property
    def obj_is_entity(self) -> bool:
        return self.obj_kind == "entity"


class KnowledgeBase:
    """Immutable triple store with subject/object adjacency indices.

    ``out_index`` maps a subject entity to its (relation, object) pairs;
    ``in_index`` maps an object value to its (relation, subject) pairs.
    The two indices are exact inverses over entity-object triples; the
    in-index additionally covers literal objects so comparison joins can
    run off it.
    """

    def __init__(self, triples: Iterable[Triple], names: Optional[dict[str, str]] = None):
        self.triples: list[Triple] = list(triples)
        self.out_index: dict[str, list[tuple[str, LiteralValue]]] = {}
        self.in_index: dict[LiteralValue, list[tuple[str, str]]] = {}
        self.by_relation: dict[str, list[Triple]] = {}
        self.name_index: dict[str, str] = dict(names or {})
        for t in self.triples:
            self.out_index.setdefault(t.subject, []).append((t.relation, t.obj))
            self.in_index.setdefault(t.obj, []).append((t.relation, t.subject))
            self.by_relation.setdefault(t.relation, []).append(t)

    def __len__(self) -> int:
        return len(self.triples)

    def entities(self) -> list[str]:
        """All entity ids, in first-seen order."""
        seen: dict[str, None] = {}
        for t in self.triples:
            seen.setdefault(t.subject, None)
            if t.obj_is_entity:
                seen.setdefault(str(t.obj), None)
        return list(seen)

    def out_edges(self, entity: str) -> list[tuple[str, LiteralValue]]:
        return self.out_index.get(entity, [])

    def in_edges(self, value: LiteralValue) -> list[tuple[str, str]]:
        return self.in_index.get(value, [])


@dataclass
class Table:
    name: str
    columns: list[tuple[str, str]]  # (column name, "text"|"number")
    rows: list[list[CellValue]] = field(default_factory=list)

    def column_names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def column_type(self, column: str) -> str:
        for c, t in self.columns:
            if c == column:
                return t
        raise KeyError(column)

    def column_index(self, column: str) -> int:
        for i, (c, _) in enumerate(self.columns):
            if c == column:
                return i
        raise KeyError(column)


class Database:
    """Immutable set of named tables with row-major cell storage."""

    def __init__(self, tables: Iterable[Table]):
        self.tables: list[Table] = list(tables)
        self._by_name = {t.name: t for t in self.tables}
        if len(self._by_name) != len(self.tables):
            raise IngestionError("duplicate table name in database")
        for t in self.tables:
            names = t.column_names()
            if len(set(names)) != len(names):
                raise IngestionError(f"duplicate column name in table {t.name!r}")

    def table(self, name: str) -> Table:
        return self._by_name[name]

    def has_table(self, name: str) -> bool:
        return name in self._by_name

    def total_columns(self) -> int:
        return sum(len(t.columns) for t in self.tables)


@dataclass
class Question:
    id: str
    text: str
    modality: str  # "kb" | "db"
    gold_logical_form: Optional[str] = None
    entity_mentions: Optional[list[str]] = None
    answers: Optional[list] = None

    def to_json(self) -> dict:
        record: dict = {"id": self.id, "text": self.text, "modality": self.modality}
        if self.gold_logical_form is not None:
            record["gold_logical_form"] = self.gold_logical_form
        if self.entity_mentions is not None:
            record["entity_mentions"] = self.entity_mentions
        if self.answers is not None:
            record["answers"] = self.answers
        return record


# --------------------------------------------------------------------------
# Primitives
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FirstHopPayload:
    """A relation adjacent to an anchor entity. Direction is relative to the
    anchor: "in" means the anchor is the object of the traversed triples."""

    entity: str
    relation: str
    direction: str  # "out" | "in"


@dataclass(frozen=True)
class SecondHopPayload:
    relation: str
    direction: str  # relative to the first-hop frontier entity


@dataclass(frozen=True)
class TbClPayload:
    table: str
    column: str


@dataclass(frozen=True)
class TbClVlPayload:
    table: str
    column: str
    op: str
    value: LiteralValue


Payload = Union[FirstHopPayload, SecondHopPayload, TbClPayload, TbClVlPayload]

_PAYLOAD_TYPES = {
    FIRST_HOP: FirstHopPayload,
    SECOND_HOP: SecondHopPayload,
    TB_CL: TbClPayload,
    TB_CL_VL: TbClVlPayload,
}


def _render_value(value: LiteralValue) -> str:
    return str(value)


@dataclass(frozen=True)
class Primitive:
    """Category-tagged atomic candidate. The surface string is derived from
    the payload, so equal payloads always render identically."""

    category: str
    payload: Payload

    def __post_init__(self):
        expected = _PAYLOAD_TYPES.get(self.category)
        if expected is None:
            raise ValueError(f"unknown primitive category {self.category!r}")
        if not isinstance(self.payload, expected):
            raise ValueError(f"payload {self.payload!r} does not match {self.category}")

    @property
    def surface(self) -> str:
        p = self.payload
        if isinstance(p, FirstHopPayload):
            rel = p.relation if p.direction == "in" else f"(R {p.relation})"
            return f"{rel} {p.entity}"
        if isinstance(p, SecondHopPayload):
            return p.relation if p.direction == "in" else f"(R {p.relation})"
        if isinstance(p, TbClPayload):
            return f"{p.table}.{p.column}"
        return f"{p.table}.{p.column} {p.op} {_render_value(p.value)}"

    def to_json(self) -> dict:
        record = {"category": self.category}
        record.update(self.payload.__dict__)
        return record

    @staticmethod
    def from_json(record: dict) -> "Primitive":
        category = record["category"]
        cls = _PAYLOAD_TYPES[category]
        fields = {k: v for k, v in record.items() if k != "category"}
        return Primitive(category, cls(**fields))


def first_hop(entity: str, relation: str, direction: str) -> Primitive:
    return Primitive(FIRST_HOP, FirstHopPayload(entity, relation, direction))


def second_hop(relation: str, direction: str) -> Primitive:
    return Primitive(SECOND_HOP, SecondHopPayload(relation, direction))


def tb_cl(table: str, column: str) -> Primitive:
    return Primitive(TB_CL, TbClPayload(table, column))


def tb_cl_vl(table: str, column: str, op: str, value: LiteralValue) -> Primitive:
    return Primitive(TB_CL_VL, TbClVlPayload(table, column, op, value))


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------

def _parse_object(raw: str, kind: str, path: Path, lineno: int) -> LiteralValue:
    if kind in ("entity", "str"):
        return raw
    try:
        return int(raw) if kind == "int" else float(raw)
    except ValueError:
        raise IngestionError(
            f"{path}:{lineno}: object {raw!r} does not parse as {kind}"
        ) from None


def load_kb(path: str | Path, names_path: str | Path | None = None) -> KnowledgeBase:
    """Load a knowledge base from a triples TSV.

    Looks for ``<stem>.names.tsv`` next to the triples file when
    ``names_path`` is not given; the names file is optional.
    """
    path = Path(path)
    triples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise IngestionError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            subject, relation, raw_obj, kind = parts
            if kind not in OBJECT_KINDS:
                raise IngestionError(f"{path}:{lineno}: unknown object kind {kind!r}")
            triples.append(Triple(subject, relation, _parse_object(raw_obj, kind, path, lineno), kind))

    if names_path is None:
        candidate = path.with_suffix(".names.tsv")
        names_path = candidate if candidate.exists() else None
    names = {}
    if names_path is not None:
        names_path = Path(names_path)
        with names_path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise IngestionError(
                        f"{names_path}:{lineno}: expected 2 tab-separated fields"
                    )
                names[parts[0]] = parts[1]
    return KnowledgeBase(triples, names)


def _parse_cell(raw: str, col_type: str, table: str, rownum: int) -> CellValue:
    if raw == "":
        return None
    if col_type == "text":
        return raw
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise IngestionError(
            f"table {table!r} row {rownum}: cell {raw!r} is not numeric"
        ) from None


def load_db(schema_path: str | Path, rows_dir: str | Path) -> Database:
    """Load a database from a schema JSON plus one CSV per table."""
    schema_path = Path(schema_path)
    rows_dir = Path(rows_dir)
    try:
        schema = json.loads(schema_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{schema_path}: invalid JSON: {exc}") from None

    tables = []
    for spec in schema.get("tables", []):
        name = spec["name"]
        columns = []
        for col in spec["columns"]:
            if col["type"] not in ("text", "number"):
                raise IngestionError(
                    f"table {name!r}: unknown column type {col['type']!r}"
                )
            columns.append((col["name"], col["type"]))
        table = Table(name=name, columns=columns)

        csv_path = rows_dir / f"{name}.csv"
        with csv_path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestionError(f"table {name!r}: rows file has no header") from None
            if header != table.column_names():
                raise IngestionError(
                    f"table {name!r}: header {header} does not match schema columns "
                    f"{table.column_names()}"
                )
            for rownum, row in enumerate(reader, start=1):
                if len(row) != len(columns):
                    raise IngestionError(
                        f"table {name!r} row {rownum}: expected {len(columns)} cells, "
                        f"got {len(row)}"
                    )
                table.rows.append(
                    [_parse_cell(raw, ctype, name, rownum) for raw, (_, ctype) in zip(row, columns)]
                )
        tables.append(table)
    return Database(tables)


def load_questions(path: str | Path) -> list[Question]:
    path = Path(path)
    questions = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            for required in ("id", "text", "modality"):
                if required not in record:
                    raise IngestionError(f"{path}:{lineno}: missing field {required!r}")
            if record["modality"] not in ("kb", "db"):
                raise IngestionError(
                    f"{path}:{lineno}: unknown modality {record['modality']!r}"
                )
            questions.append(
                Question(
                    id=record["id"],
                    text=record["text"],
                    modality=record["modality"],
                    gold_logical_form=record.get("gold_logical_form"),
                    entity_mentions=record.get("entity_mentions"),
                    answers=record.get("answers"),
                )
            )
    return questions


def save_questions(questions: Iterable[Question], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q.to_json(), sort_keys=True) + "\n")
