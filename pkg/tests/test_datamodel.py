import random

import pytest
from hypothesis import given, strategies as st

from rdmstore import datamodel
from rdmstore.datamodel import (
    Datatype,
    Entity,
    EntityKind,
    EntityProperty,
    FileMeta,
    Importance,
    effective_obligations,
    is_descendant,
    validate,
)
from rdmstore.errors import LookupError_
from rdmstore.units import DEFAULT_REGISTRY, Quantity

RT = EntityKind.RECORD_TYPE
AP = EntityKind.ABSTRACT_PROPERTY
O, R, S, F = Importance.OBLIGATORY, Importance.RECOMMENDED, Importance.SUGGESTED, Importance.FIX


def rec(eid, name, parents=(), props=()):
    return Entity(eid, EntityKind.RECORD, name, parents=tuple(parents), properties=tuple(props))


def rtype(eid, name, parents=(), props=()):
    return Entity(eid, RT, name, parents=tuple(parents), properties=tuple(props))


def aprop(eid, name, **dt):
    return Entity(eid, AP, name, datatype=Datatype(**dt) if dt else None)


class TestIsDescendant:
    def test_irreflexive(self):
        view = {1: rtype(1, "A")}
        assert is_descendant(1, 1, view) is False

    def test_transitive_chain(self):
        view = {1: rtype(1, "A"), 2: rtype(2, "B", [1]), 3: rtype(3, "C", [2])}
        assert is_descendant(3, 1, view) is True
        assert is_descendant(1, 3, view) is False

    def test_unknown_id(self):
        with pytest.raises(LookupError_):
            is_descendant(1, 2, {1: rtype(1, "A")})

    def test_desk_fixture_chain(self, desk):
        store, ids = desk
        view = store.snapshot()
        assert is_descendant(ids["exp3"], ids["Experiment"], view)
        assert is_descendant(ids["LabExperiment"], ids["Experiment"], view)
        assert not is_descendant(ids["Experiment"], ids["LabExperiment"], view)


class TestEffectiveObligations:
    def test_no_parents(self):
        view = {1: rec(1, "lonely")}
        assert effective_obligations(view[1], view) == []

    def test_strongest_importance_wins(self):
        view = {
            10: aprop(10, "date"),
            1: rtype(1, "grand", props=[EntityProperty(10, None, S)]),
            2: rtype(2, "parent", [1], props=[EntityProperty(10, None, O)]),
            3: rec(3, "child", [2]),
        }
        obligations = effective_obligations(view[3], view)
        assert obligations == [(10, O, 2)]

    def test_fix_not_inherited(self):
        view = {
            10: aprop(10, "comment"),
            1: rtype(1, "parent", props=[EntityProperty(10, "x", F)]),
            2: rec(2, "child", [1]),
        }
        assert effective_obligations(view[2], view) == []

    def test_invariant_under_parent_order_and_duplicates(self):
        view = {
            10: aprop(10, "p"),
            11: aprop(11, "q"),
            1: rtype(1, "a", props=[EntityProperty(10, None, R)]),
            2: rtype(2, "b", props=[EntityProperty(11, None, O)]),
        }
        child_ab = rec(3, "c", [1, 2])
        child_ba = rec(3, "c", [2, 1])
        child_dup = rec(3, "c", [1, 2, 1, 2])
        expected = effective_obligations(child_ab, view)
        assert effective_obligations(child_ba, view) == expected
        assert effective_obligations(child_dup, view) == expected


def _brute_force_obligations(e, view):
    """Independent oracle: enumerate all ancestors recursively, fold by max strength."""
    strength = {O: 3, R: 2, S: 1}

    def all_ancestors(eid, seen):
        for p in view[eid].parents:
            if p not in seen:
                seen.add(p)
                all_ancestors(p, seen)
        return seen

    ancestor_set = set()
    for p in e.parents:
        ancestor_set.add(p)
        all_ancestors(p, ancestor_set)
    best = {}
    for aid in ancestor_set:
        for prop in view[aid].properties:
            if prop.importance is F:
                continue
            cur = best.get(prop.property_ref)
            if cur is None or strength[prop.importance] > strength[cur]:
                best[prop.property_ref] = prop.importance
    return {(ref, imp) for ref, imp in best.items()}


@given(st.integers(0, 10_000))
def test_obligations_match_bruteforce_on_random_dags(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 20)
    view = {}
    ap_ids = list(range(100, 104))
    for a in ap_ids:
        view[a] = aprop(a, f"p{a}")
    for i in range(1, n + 1):
        parents = tuple(rng.sample(range(1, i), min(len(range(1, i)), rng.randint(0, 2))))
        props = tuple(
            EntityProperty(rng.choice(ap_ids), None, rng.choice([O, R, S, F]))
            for _ in range(rng.randint(0, 3))
        )
        view[i] = rtype(i, f"t{i}", parents, props)
    target = view[rng.randint(1, n)]
    got = {(ref, imp) for ref, imp, _src in effective_obligations(target, view)}
    assert got == _brute_force_obligations(target, view)


class TestValidate:
    def _view(self):
        return {
            10: aprop(10, "date"),
            11: aprop(11, "room_temperature", type_tag="Quantity", unit="K"),
            1: rtype(
                1,
                "Experiment",
                props=[EntityProperty(10, None, O), EntityProperty(11, None, R)],
            ),
        }

    def test_missing_obligatory_is_error(self):
        view = self._view()
        e = rec(2, "exp", [1])
        report = validate(e, view)
        assert report.errors == [(2, "date")]

    def test_null_value_satisfies_presence(self):
        view = self._view()
        e = rec(2, "exp", [1], [EntityProperty(10, None, F)])
        assert validate(e, view).errors == []

    def test_missing_recommended_is_warning(self):
        view = self._view()
        e = rec(2, "exp", [1], [EntityProperty(10, None, F)])
        report = validate(e, view)
        assert report.errors == []
        assert report.warnings == [(2, "room_temperature")]

    def test_subtype_of_obliged_property_satisfies(self):
        view = self._view()
        view[12] = Entity(12, AP, "start date", parents=(10,))
        e = rec(2, "exp", [1], [EntityProperty(12, None, F)])
        assert validate(e, view).errors == []

    def test_dimension_mismatch_is_error(self):
        view = self._view()
        metre = Quantity(1.0, DEFAULT_REGISTRY.get("m"))
        e = rec(2, "exp", [1], [EntityProperty(10, None, F), EntityProperty(11, metre, F)])
        assert (2, "room_temperature") in validate(e, view).errors

    def test_range_violation(self):
        view = {
            10: aprop(10, "rating", type_tag="Integer", low=0, high=5),
            1: rtype(1, "T"),
        }
        good = rec(2, "r", [1], [EntityProperty(10, 4, F)])
        bad = rec(3, "r", [1], [EntityProperty(10, 9, F)])
        assert validate(good, view).errors == []
        assert validate(bad, view).errors == [(3, "rating")]

    def test_range_checked_in_declared_unit(self):
        view = {
            10: aprop(10, "temp", type_tag="Quantity", unit="K", low=0, high=400),
            1: rtype(1, "T"),
        }
        celsius = Quantity(20.0, DEFAULT_REGISTRY.get("°C"))  # 293.15 K, inside
        hot = Quantity(200.0, DEFAULT_REGISTRY.get("°C"))  # 473.15 K, outside
        assert validate(rec(2, "a", [1], [EntityProperty(10, celsius, F)]), view).errors == []
        assert validate(rec(3, "b", [1], [EntityProperty(10, hot, F)]), view).errors == [(3, "temp")]


class TestEntityInvariants:
    def test_file_meta_only_on_files(self):
        with pytest.raises(ValueError):
            Entity(1, EntityKind.RECORD, "x", file_meta=FileMeta("/p", 0, "00"))
        with pytest.raises(ValueError):
            Entity(1, EntityKind.FILE, "x")  # file without meta

    def test_datatype_only_on_abstract_properties(self):
        with pytest.raises(ValueError):
            Entity(1, EntityKind.RECORD, "x", datatype=Datatype("Text"))
