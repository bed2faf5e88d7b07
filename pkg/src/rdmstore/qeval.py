"""Query execution against an immutable store snapshot.

Name resolution follows the subtype closure: an entity is a candidate
for name X if it is named X or has any transitive ancestor named X
(case-insensitive). Filters only see explicitly present property
triples; inherited obligations do not materialize values.

Quantity comparisons convert through the unit layer; incompatible
dimensions make the candidate a non-match and add a per-query warning
instead of failing the whole search.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import ql, units
from .datamodel import Entity, EntityKind, EntityProperty, Ref
from .units import Quantity


class Snapshot(Mapping):
    """Read-view over an entity dict with lazily built query indexes."""

    def __init__(self, entities: Mapping[int, Entity]):
        self._entities = entities
        self._closure: dict[int, frozenset[str]] = {}
        self._by_name: Optional[dict[str, set[int]]] = None
        self._referrers: Optional[dict[int, list[tuple[int, int]]]] = None

    # Mapping protocol -------------------------------------------------
    def __getitem__(self, key):
        return self._entities[key]

    def __iter__(self):
        return iter(self._entities)

    def __len__(self):
        return len(self._entities)

    # indexes ----------------------------------------------------------
    def name_closure(self, entity_id: int) -> frozenset[str]:
        """Lower-cased names of the entity and all its transitive ancestors."""
        cached = self._closure.get(entity_id)
        if cached is not None:
            return cached
        e = self._entities.get(entity_id)
        if e is None:
            result: frozenset[str] = frozenset()
        else:
            names = {e.name.lower()}
            # iterative DFS with memoization; parent graphs are acyclic
            for pid in e.parents:
                names |= self.name_closure(pid)
            result = frozenset(names)
        self._closure[entity_id] = result
        return result

    def ids_for_name(self, name_lower: str) -> set[int]:
        if self._by_name is None:
            index: dict[str, set[int]] = {}
            for eid in self._entities:
                for n in self.name_closure(eid):
                    index.setdefault(n, set()).add(eid)
            self._by_name = index
        return self._by_name.get(name_lower, set())

    def referrers(self, target_id: int) -> list[tuple[int, int]]:
        """(holder id, property ref) pairs whose reference value hits target_id."""
        if self._referrers is None:
            index: dict[int, list[tuple[int, int]]] = {}
            for e in self._entities.values():
                for p in e.properties:
                    values = p.value if isinstance(p.value, tuple) else (p.value,)
                    for v in values:
                        if isinstance(v, Ref):
                            index.setdefault(v.target, []).append((e.id, p.property_ref))
            self._referrers = index
        return self._referrers.get(target_id, [])


def snapshot_of(store) -> Snapshot:
    """Cached Snapshot for a store's current committed state."""
    cached = getattr(store, "_qeval_snapshot", None)
    if cached is not None and cached[0] == store.last_seq:
        return cached[1]
    snap = Snapshot(store.snapshot())
    store._qeval_snapshot = (store.last_seq, snap)
    return snap


_KIND_MAP = {
    "ENTITY": None,
    "RECORDTYPE": EntityKind.RECORD_TYPE,
    "RECORD": EntityKind.RECORD,
    "PROPERTY": EntityKind.ABSTRACT_PROPERTY,
    "FILE": EntityKind.FILE,
}


def resolve_name(name: Optional[str], kind: Optional[str], snap: Snapshot) -> set[int]:
    if name is None:
        ids = set(snap)
    else:
        ids = set(snap.ids_for_name(name.lower()))
    wanted = _KIND_MAP.get(kind) if kind is not None else None
    if wanted is not None:
        ids = {i for i in ids if snap[i].kind is wanted}
    return ids


# ---------------------------------------------------------------------------
# value-level comparison semantics

_NUM_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _pattern_regex(pattern: str) -> re.Pattern:
    return re.compile(".*".join(re.escape(p) for p in pattern.split("*")) + r"\Z", re.IGNORECASE | re.DOTALL)


def _as_datetime(v) -> dt.datetime:
    if isinstance(v, dt.datetime):
        return v
    return dt.datetime(v.year, v.month, v.day)


def _stored_quantity(v, triple: EntityProperty, snap: Snapshot) -> Optional[Quantity]:
    """Give a bare stored number its declared unit, if any."""
    if isinstance(v, Quantity):
        return v
    symbol = triple.unit_override
    if symbol is None:
        ap = snap._entities.get(triple.property_ref)
        if ap is not None and ap.datatype is not None:
            symbol = ap.datatype.unit
    if symbol is None or not units.DEFAULT_REGISTRY.known(symbol):
        return None
    return Quantity(float(v), units.DEFAULT_REGISTRY.get(symbol))


def value_satisfies(
    v: object,
    op: str,
    lit: ql.Literal,
    triple: EntityProperty,
    snap: Snapshot,
    warnings: list[str],
) -> bool:
    """Does one non-Null scalar value satisfy ``op literal``?"""
    if isinstance(lit, ql.PatternLit):
        return isinstance(v, str) and _pattern_regex(lit.pattern).match(v) is not None
    if isinstance(lit, ql.QuantityLit):
        rhs = Quantity(lit.magnitude, units.DEFAULT_REGISTRY.get(lit.unit_symbol))
        if isinstance(v, bool) or not isinstance(v, (int, float, Quantity)):
            return False
        lhs = _stored_quantity(v, triple, snap)
        if lhs is None:
            warnings.append(
                f"unitless value compared against {lit.magnitude} {lit.unit_symbol}"
            )
            return False
        outcome = units.compare(lhs, op, rhs)
        if outcome is None:
            warnings.append(
                f"incomparable dimensions: {lhs.unit.symbol or 'dimensionless'} vs {lit.unit_symbol}"
            )
            return False
        return outcome
    if isinstance(lit, (ql.IntLit, ql.DoubleLit)):
        n = lit.value
        if isinstance(v, bool):
            return False
        if isinstance(v, (int, float)):
            return _NUM_OPS[op](v, n)
        if isinstance(v, Quantity):
            if v.unit.dimension != units.DIMENSIONLESS:
                warnings.append(
                    f"quantity in {v.unit.symbol} compared against bare number {n}"
                )
                return False
            return _NUM_OPS[op](v.magnitude, n)
        if isinstance(v, (dt.date, dt.datetime)):
            # a bare number against a date-valued property means its year
            return _NUM_OPS[op](v.year, n)
        if isinstance(v, Ref) and op in ("=", "!="):
            return _NUM_OPS[op](v.target, n)
        return False
    if isinstance(lit, ql.TextLit):
        if not isinstance(v, str):
            return False
        return _NUM_OPS[op](v, lit.text)
    if isinstance(lit, ql.BoolLit):
        if not isinstance(v, bool) or op not in ("=", "!="):
            return False
        return _NUM_OPS[op](v, lit.value)
    if isinstance(lit, (ql.DateLit, ql.DatetimeLit)):
        if isinstance(v, bool) or not isinstance(v, (dt.date, dt.datetime)):
            return False
        return _NUM_OPS[op](_as_datetime(v), _as_datetime(lit.value))
    raise TypeError(f"unknown literal {lit!r}")


# ---------------------------------------------------------------------------
# filter evaluation


class _Evaluator:
    """Compiles each filter node once into a closure over the snapshot.

    The per-entity hot path then runs without AST dispatch; property-name
    resolution is memoized per node because the same few abstract
    properties recur across every candidate.
    """

    def __init__(self, snap: Snapshot):
        self.snap = snap
        self.warnings: list[str] = []
        self._subquery_cache: dict[int, frozenset[int]] = {}
        self._compiled: dict[int, object] = {}

    def _prop_matches(self, triple_ref: int, prop_name: str) -> bool:
        return prop_name in self.snap.name_closure(triple_ref)

    def _matching_triples(self, e: Entity, prop_name: str):
        name = prop_name.lower()
        for triple in e.properties:
            if self._prop_matches(triple.property_ref, name):
                yield triple

    def _subquery_ids(self, sub: ql.SubQuery) -> frozenset[int]:
        key = id(sub)
        cached = self._subquery_cache.get(key)
        if cached is not None:
            return cached
        ids = resolve_name(sub.name, None, self.snap)
        if sub.filter is not None:
            matcher = self.compile(sub.filter)
            ids = {i for i in ids if matcher(self.snap[i])}
        result = frozenset(ids)
        self._subquery_cache[key] = result
        return result

    def compile(self, f: ql.Filter):
        compiled = self._compiled.get(id(f))
        if compiled is None:
            compiled = self._compile(f)
            self._compiled[id(f)] = compiled
        return compiled

    def _name_memo(self, prop_name: str):
        """ref id → does the named abstract property cover it?"""
        closure_of = self.snap.name_closure
        name = prop_name.lower()
        memo: dict[int, bool] = {}

        def covered(ref: int) -> bool:
            hit = memo.get(ref)
            if hit is None:
                hit = name in closure_of(ref)
                memo[ref] = hit
            return hit

        return covered

    def _compile(self, f: ql.Filter):
        snap = self.snap
        warnings = self.warnings
        if isinstance(f, ql.Comparison):
            covered = self._name_memo(f.prop)
            op, lit = f.op, f.literal
            if isinstance(lit, (ql.IntLit, ql.DoubleLit)) and op in _NUM_OPS:
                # plain numeric values skip the generic type dispatch
                num_cmp, n = _NUM_OPS[op], lit.value

                def run_numeric(e: Entity) -> bool:
                    for triple in e.properties:
                        if not covered(triple.property_ref):
                            continue
                        v = triple.value
                        for s in v if type(v) is tuple else (v,):
                            if type(s) is int or type(s) is float:
                                if num_cmp(s, n):
                                    return True
                            elif s is not None and value_satisfies(
                                s, op, lit, triple, snap, warnings
                            ):
                                return True
                    return False

                return run_numeric

            def run_comparison(e: Entity) -> bool:
                for triple in e.properties:
                    if not covered(triple.property_ref):
                        continue
                    v = triple.value
                    for s in v if type(v) is tuple else (v,):
                        if s is not None and value_satisfies(s, op, lit, triple, snap, warnings):
                            return True
                return False

            return run_comparison
        if isinstance(f, ql.InYear):
            covered = self._name_memo(f.prop)
            year = f.year

            def run_in_year(e: Entity) -> bool:
                for triple in e.properties:
                    if not covered(triple.property_ref):
                        continue
                    v = triple.value
                    for s in v if type(v) is tuple else (v,):
                        if isinstance(s, (dt.date, dt.datetime)) and s.year == year:
                            return True
                return False

            return run_in_year
        if isinstance(f, ql.Conjunction):
            children = tuple(self._compile(c) for c in f.children)

            def run_conjunction(e: Entity) -> bool:
                for child in children:
                    if not child(e):
                        return False
                return True

            return run_conjunction
        if isinstance(f, ql.Disjunction):
            children = tuple(self._compile(c) for c in f.children)

            def run_disjunction(e: Entity) -> bool:
                for child in children:
                    if child(e):
                        return True
                return False

            return run_disjunction
        if isinstance(f, ql.Negation):
            child = self._compile(f.child)
            return lambda e: not child(e)
        if isinstance(f, ql.Reference):
            covered = self._name_memo(f.role) if f.role is not None else None
            target = f.target

            def run_reference(e: Entity) -> bool:
                targets = self._subquery_ids(target)
                for triple in e.properties:
                    if covered is not None and not covered(triple.property_ref):
                        continue
                    v = triple.value
                    for s in v if type(v) is tuple else (v,):
                        if isinstance(s, Ref) and s.target in targets:
                            return True
                return False

            return run_reference
        if isinstance(f, ql.BackReference):
            covered = self._name_memo(f.role) if f.role is not None else None
            source = f.source

            def run_backreference(e: Entity) -> bool:
                sources = self._subquery_ids(source)
                for holder_id, prop_ref in snap.referrers(e.id):
                    if holder_id not in sources:
                        continue
                    if covered is None or covered(prop_ref):
                        return True
                return False

            return run_backreference
        raise TypeError(f"unknown filter {f!r}")

    def eval_filter(self, e: Entity, f: ql.Filter) -> bool:
        return self.compile(f)(e)


def eval_filter(e: Entity, f: ql.Filter, snap: Snapshot) -> tuple[bool, list[str]]:
    ev = _Evaluator(snap)
    return ev.eval_filter(e, f), ev.warnings


# ---------------------------------------------------------------------------
# result shaping


@dataclass
class QueryResult:
    kind: str  # "count" | "entities" | "table"
    count: Optional[int] = None
    entities: list[Entity] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    rows: list[list[str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def render_value(value: object) -> str:
    """Canonical cell text: numbers in shortest round-trip form, quantities
    with their unit symbol, dates ISO 8601, references as the target id."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Quantity):
        return f"{repr(value.magnitude)} {value.unit.symbol}".rstrip()
    if isinstance(value, (dt.datetime, dt.date)):
        return value.isoformat()
    if isinstance(value, Ref):
        return str(value.target)
    if isinstance(value, str):
        return value
    if isinstance(value, tuple):
        return ",".join(render_value(v) for v in value)
    raise TypeError(f"unrenderable value {value!r}")


def execute(
    q: ql.QueryAst,
    snap: Snapshot,
    principal=None,
    acl_engine=None,
) -> QueryResult:
    ev = _Evaluator(snap)
    ids = sorted(resolve_name(q.name, q.kind, snap))
    if q.filter is not None:
        matcher = ev.compile(q.filter)
        entities = snap._entities
        ids = [i for i in ids if matcher(entities[i])]
    if acl_engine is not None:
        ids = [i for i in ids if acl_engine.allows(principal, "retrieve", i)]
    if q.prefix == "COUNT":
        return QueryResult("count", count=len(ids), warnings=ev.warnings)
    if q.prefix == "FIND":
        return QueryResult("entities", entities=[snap[i] for i in ids], warnings=ev.warnings)
    columns = ["id"] + list(q.fields)
    rows = []
    for i in ids:
        e = snap[i]
        row = [str(e.id)]
        for fname in q.fields:
            cell = ""
            for triple in ev._matching_triples(e, fname):
                cell = render_value(triple.value)
                break
            row.append(cell)
        rows.append(row)
    return QueryResult("table", columns=columns, rows=rows, warnings=ev.warnings)


def to_tsv(result: QueryResult) -> str:
    """Bit-stable TSV of a table result: header row, \\t separators, \\n endings."""
    lines = ["\t".join(result.columns)]
    lines.extend("\t".join(row) for row in result.rows)
    return "\n".join(lines) + "\n"
