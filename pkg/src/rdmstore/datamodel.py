"""Core entity-graph types and the inheritance/validation semantics.

The store holds one universal object, the Entity, which is a RecordType,
a Record, an AbstractProperty, or a File. Entities are linked by
directed, transitive is-a edges (``parents``) that model both subtyping
and instantiation. Children implicitly inherit their ancestors'
properties as deontic obligations whose strength is the Importance:
missing Obligatory properties are errors, Recommended ones warnings,
Suggested ones silently accepted. Fix properties are not inherited.

Values are plain Python objects tagged by type: int, float, bool, str,
datetime.date, datetime.datetime, Quantity, Ref, or a homogeneous tuple
of those. ``None`` is the Null value; a triple with a Null value still
counts as present for obligation checking.

All functions here are pure over an immutable read-view (any Mapping
from entity id to Entity) and safe for concurrent readers.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from . import units
from .errors import LookupError_
from .units import Quantity


class EntityKind(str, Enum):
    RECORD_TYPE = "RecordType"
    RECORD = "Record"
    ABSTRACT_PROPERTY = "AbstractProperty"
    FILE = "File"


class Importance(str, Enum):
    OBLIGATORY = "Obligatory"
    RECOMMENDED = "Recommended"
    SUGGESTED = "Suggested"
    FIX = "Fix"


# Deontic strength for inheritance; Fix sits outside the order.
_STRENGTH = {
    Importance.OBLIGATORY: 3,
    Importance.RECOMMENDED: 2,
    Importance.SUGGESTED: 1,
}


@dataclass(frozen=True)
class Ref:
    """A reference value pointing at another entity by id."""

    target: int


@dataclass(frozen=True)
class Datatype:
    """Declared expectations of an AbstractProperty.

    type_tag names the expected value type ("Integer", "Double",
    "Quantity", "Text", "Boolean", "Datetime", "Date", "Reference", or
    "ListOf:<scalar>"). unit is the default unit symbol for Quantity
    values; low/high bound the permitted numeric range (inclusive);
    default is copied into a triple supplied with Null.
    """

    type_tag: Optional[str] = None
    unit: Optional[str] = None
    low: Optional[float] = None
    high: Optional[float] = None
    default: object = None


@dataclass(frozen=True)
class FileMeta:
    path: str
    size: int
    checksum: str


@dataclass(frozen=True)
class EntityProperty:
    """The triple attached to entities: abstract property, value or Null, importance."""

    property_ref: int
    value: object = None
    importance: Importance = Importance.FIX
    unit_override: Optional[str] = None


@dataclass(frozen=True)
class Entity:
    id: int
    kind: EntityKind
    name: str
    description: Optional[str] = None
    parents: tuple[int, ...] = ()
    properties: tuple[EntityProperty, ...] = ()
    datatype: Optional[Datatype] = None
    file_meta: Optional[FileMeta] = None

    def __post_init__(self):
        if (self.file_meta is not None) != (self.kind is EntityKind.FILE):
            raise ValueError("file_meta present iff kind is File")
        if self.datatype is not None and self.kind is not EntityKind.ABSTRACT_PROPERTY:
            raise ValueError("datatype only legal on AbstractProperty entities")


@dataclass
class ValidationReport:
    """Outcome of importance/range checking; errors force a transaction abort."""

    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)
    notes: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def merge(self, other: "ValidationReport") -> None:
        self.errors.extend(other.errors)
        self.warnings.extend(other.warnings)
        self.notes.extend(other.notes)


View = Mapping[int, Entity]


def _resolve(entity_id: int, view: View) -> Entity:
    try:
        return view[entity_id]
    except KeyError:
        raise LookupError_(entity_id) from None


def ancestors(entity_id: int, view: View) -> set[int]:
    """Transitive closure over parent edges, excluding the entity itself."""
    seen: set[int] = set()
    stack = list(_resolve(entity_id, view).parents)
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        seen.add(p)
        stack.extend(_resolve(p, view).parents)
    return seen


def is_descendant(a: int, b: int, view: View) -> bool:
    """True iff b is reachable from a via one or more parent edges.

    Irreflexive: is_descendant(x, x) is False (the query layer unions an
    entity with its own name match, so reflexivity is not needed here).
    """
    _resolve(b, view)
    return b in ancestors(a, view)


def effective_obligations(e: Entity, view: View) -> list[tuple[int, Importance, int]]:
    """Inherited property obligations of e: (abstract property id, importance, source).

    Union over all transitive ancestors of their non-Fix property
    triples; a property inherited along several paths keeps the
    strongest importance. Fix properties have no effect on children.
    """
    best: dict[int, tuple[Importance, int]] = {}
    seen: set[int] = set()
    stack = list(e.parents)
    while stack:
        pid = stack.pop()
        if pid in seen:
            continue
        seen.add(pid)
        parent = _resolve(pid, view)
        stack.extend(parent.parents)
        for prop in parent.properties:
            if prop.importance is Importance.FIX:
                continue
            cur = best.get(prop.property_ref)
            if cur is None or _STRENGTH[prop.importance] > _STRENGTH[cur[0]]:
                best[prop.property_ref] = (prop.importance, pid)
    return [(ref, imp, src) for ref, (imp, src) in sorted(best.items())]


def _satisfies(triple_ref: int, obliged_ref: int, view: View) -> bool:
    # A triple satisfies an obligation with the same abstract property or
    # any descendant of it.
    return triple_ref == obliged_ref or is_descendant(triple_ref, obliged_ref, view)


def _numeric_in_unit(value: object, ap: Entity) -> Optional[float]:
    """Magnitude of a numeric value expressed in the property's default unit."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, Quantity):
        if ap.datatype is not None and ap.datatype.unit:
            target = units.DEFAULT_REGISTRY.get(ap.datatype.unit)
            if value.unit.dimension != target.dimension:
                return None
            return units.convert(value, target).magnitude
        return value.magnitude
    return None


def validate(e: Entity, view: View) -> ValidationReport:
    """Check e against its inherited obligations and declared datatypes.

    Presence (even with a Null value) satisfies an obligation. Also
    reports permitted-range violations and dimension mismatches against
    the abstract property's declared default unit.
    """
    report = ValidationReport()
    for obliged_ref, importance, _src in effective_obligations(e, view):
        if any(_satisfies(p.property_ref, obliged_ref, view) for p in e.properties):
            continue
        name = _resolve(obliged_ref, view).name
        if importance is Importance.OBLIGATORY:
            report.errors.append((e.id, name))
        elif importance is Importance.RECOMMENDED:
            report.warnings.append((e.id, name))
        else:
            report.notes.append((e.id, name))

    for prop in e.properties:
        ap = _resolve(prop.property_ref, view)
        if ap.datatype is None:
            continue
        values = prop.value if isinstance(prop.value, tuple) else (prop.value,)
        for value in values:
            if value is None:
                continue
            if (
                isinstance(value, Quantity)
                and ap.datatype.unit
                and units.DEFAULT_REGISTRY.known(ap.datatype.unit)
                and value.unit.dimension
                != units.DEFAULT_REGISTRY.get(ap.datatype.unit).dimension
            ):
                report.errors.append((e.id, ap.name))
                continue
            if ap.datatype.low is None and ap.datatype.high is None:
                continue
            magnitude = _numeric_in_unit(value, ap)
            if magnitude is None:
                continue
            if ap.datatype.low is not None and magnitude < ap.datatype.low:
                report.errors.append((e.id, ap.name))
            elif ap.datatype.high is not None and magnitude > ap.datatype.high:
                report.errors.append((e.id, ap.name))
    return report


def value_type_tag(value: object) -> str:
    """The wire-format type tag of a value."""
    if isinstance(value, bool):
        return "Boolean"
    if isinstance(value, int):
        return "Integer"
    if isinstance(value, float):
        return "Double"
    if isinstance(value, Quantity):
        return "Quantity"
    if isinstance(value, dt.datetime):
        return "Datetime"
    if isinstance(value, dt.date):
        return "Date"
    if isinstance(value, Ref):
        return "Reference"
    if isinstance(value, str):
        return "Text"
    if isinstance(value, tuple):
        inner = {value_type_tag(v) for v in value if v is not None}
        if len(inner) > 1:
            raise ValueError("list elements must share one scalar type")
        return "ListOf:" + (inner.pop() if inner else "Text")
    raise ValueError(f"unsupported value type {type(value).__name__}")
