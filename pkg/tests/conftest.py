"""Shared fixtures: the desk-scale dataset used across the suite."""

from __future__ import annotations

import datetime as dt

import pytest

from rdmstore import units
from rdmstore.datamodel import (
    Datatype,
    Entity,
    EntityKind,
    EntityProperty,
    Importance,
    Ref,
)
from rdmstore.store import Insert, Store, Transaction
from rdmstore.units import Quantity

K = units.DEFAULT_REGISTRY.get("K")
DEG_C = units.DEFAULT_REGISTRY.get("°C")


def _prop(ref, value=None, importance=Importance.FIX, unit=None):
    return EntityProperty(ref, value, importance, unit_override=unit)


def build_desk_fixture(data_dir) -> tuple[Store, dict[str, int]]:
    """RecordTypes Experiment / ExperimentSeries / Person / Article plus
    5 experiments (3 dated 2017, 2 dated 2016), 3 persons, 2 articles,
    4 files, and one experiment series referencing the 2017 experiments."""
    store = Store(data_dir)
    t = iter(range(-1, -100, -1))
    ids: dict[str, int] = {}

    def draft(key, kind, name, **kw):
        tid = next(t)
        ids[key] = tid
        return Insert(Entity(tid, kind, name, **kw))

    O, R, S, F = Importance.OBLIGATORY, Importance.RECOMMENDED, Importance.SUGGESTED, Importance.FIX
    instructions = [
        # abstract properties
        draft("date", EntityKind.ABSTRACT_PROPERTY, "date", datatype=Datatype("Date")),
        draft("room_temperature", EntityKind.ABSTRACT_PROPERTY, "room_temperature",
              datatype=Datatype("Quantity", unit="K")),
        draft("first name", EntityKind.ABSTRACT_PROPERTY, "first name", datatype=Datatype("Text")),
        draft("family name", EntityKind.ABSTRACT_PROPERTY, "family name", datatype=Datatype("Text")),
        draft("date of birth", EntityKind.ABSTRACT_PROPERTY, "date of birth", datatype=Datatype("Date")),
        draft("Author", EntityKind.ABSTRACT_PROPERTY, "Author", datatype=Datatype("Reference")),
        draft("Title", EntityKind.ABSTRACT_PROPERTY, "Title", datatype=Datatype("Text")),
        draft("comment", EntityKind.ABSTRACT_PROPERTY, "comment", datatype=Datatype("Text")),
    ]
    instructions += [
        # record types
        draft("Experiment", EntityKind.RECORD_TYPE, "Experiment", properties=(
            _prop(ids["date"], None, O),
            _prop(ids["room_temperature"], None, R),
            _prop(ids["comment"], "template comment", F),
        )),
        # a subtype re-declares inherited obligations with Null values;
        # presence (even Null) satisfies them
        draft("LabExperiment", EntityKind.RECORD_TYPE, "LabExperiment",
              parents=(ids["Experiment"],), properties=(
                  _prop(ids["date"], None, O),
                  _prop(ids["room_temperature"], None, R),
              )),
        draft("ExperimentSeries", EntityKind.RECORD_TYPE, "ExperimentSeries"),
        draft("Person", EntityKind.RECORD_TYPE, "Person", properties=(
            _prop(ids["first name"], None, R),
            _prop(ids["family name"], None, R),
            _prop(ids["date of birth"], None, S),
        )),
        draft("Article", EntityKind.RECORD_TYPE, "Article", properties=(
            _prop(ids["Author"], None, R),
            _prop(ids["Title"], None, R),
        )),
    ]

    def experiment(key, parent_key, date, temperature):
        return draft(key, EntityKind.RECORD, key, parents=(ids[parent_key],), properties=(
            _prop(ids["date"], date, F),
            _prop(ids["room_temperature"], temperature, F),
        ))

    instructions += [
        experiment("exp1", "Experiment", dt.date(2017, 3, 1), Quantity(300.0, K)),
        experiment("exp2", "Experiment", dt.date(2017, 6, 12), Quantity(22.5, DEG_C)),
        experiment("exp3", "LabExperiment", dt.date(2017, 11, 30), Quantity(295.0, K)),
        experiment("exp4", "Experiment", dt.date(2016, 2, 14), Quantity(18.0, DEG_C)),
        experiment("exp5", "LabExperiment", dt.date(2016, 9, 9), Quantity(301.5, K)),
    ]

    def person(key, first, family, born):
        return draft(key, EntityKind.RECORD, key, parents=(ids["Person"],), properties=(
            _prop(ids["first name"], first, F),
            _prop(ids["family name"], family, F),
            _prop(ids["date of birth"], born, F),
        ))

    instructions += [
        person("ada", "Ada", "Lively", dt.date(2001, 5, 17)),
        person("ben", "Ben", "Sturm", dt.date(1985, 1, 2)),
        person("cleo", "Cleo", "Tanaka", dt.date(2003, 12, 24)),
    ]
    instructions += [
        draft("article1", EntityKind.RECORD, "article1", parents=(ids["Article"],), properties=(
            _prop(ids["Author"], Ref(ids["ada"]), F),
            _prop(ids["Title"], "On terminating ventricular fibrillation with low-energy pulses", F),
        )),
        draft("article2", EntityKind.RECORD, "article2", parents=(ids["Article"],), properties=(
            _prop(ids["Author"], (Ref(ids["ben"]), Ref(ids["cleo"])), F),
            _prop(ids["Title"], "Ice cream rheology at lab temperatures", F),
        )),
        draft("series1", EntityKind.RECORD, "series1", parents=(ids["ExperimentSeries"],),
              properties=(
                  _prop(ids["comment"], "ice cream testing campaign", F),
              )),
    ]
    result = store.execute_transaction(Transaction(instructions, principal="fixture"))
    assert result.committed, result.report.errors
    assigned = {key: result.id_map[tid] for key, tid in ids.items()}

    # four file entities
    files_tx = []
    for n in range(4):
        path = data_dir / f"raw{n}.dat"
        path.write_bytes(bytes(range(n * 3 % 250)) * (n + 1))
        files_tx.append(store.ingest_file(path, f"/raw/raw{n}.dat", temp_id=-(n + 1)))
    res2 = store.execute_transaction(Transaction(files_tx, principal="fixture"))
    assert res2.committed
    for n in range(4):
        assigned[f"file{n}"] = res2.id_map[-(n + 1)]
    return store, assigned


@pytest.fixture
def desk(tmp_path):
    store, ids = build_desk_fixture(tmp_path / "data")
    yield store, ids
    store.close()
