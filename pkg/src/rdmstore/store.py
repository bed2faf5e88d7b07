"""Embedded, crash-safe entity store.

Persistence is a periodic full snapshot plus a write-ahead log of
committed transactions. Each WAL record is framed as 4-byte big-endian
payload length, XML payload, 4-byte CRC32. A torn trailing record is
discarded on recovery; a checksum-corrupt interior record is a hard
recovery error naming its byte offset.

Data directory layout::

    snapshot-<seq>.caos   one entity per line, wire-format XML, UTF-8
    wal.caos              binary framed records as above
    meta                  "<last snapshot seq>\\t<next entity id>"

Concurrency: one writer at a time (internal lock); readers receive
immutable committed snapshots and never block.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import os
import struct
import threading
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from . import datamodel, wire
from .datamodel import Entity, EntityKind, EntityProperty, FileMeta, Ref, ValidationReport
from .errors import (
    AuthorizationError,
    ConflictError,
    LookupError_,
    RecoveryError,
    WireFormatError,
)

WAL_NAME = "wal.caos"
META_NAME = "meta"


@dataclass(frozen=True)
class Insert:
    """Insert instruction; the draft entity carries a negative temporary id."""

    entity: Entity


@dataclass(frozen=True)
class Update:
    """Whole-entity replacement under an existing id."""

    entity: Entity


@dataclass(frozen=True)
class Delete:
    entity_id: int


Instruction = Union[Insert, Update, Delete]


@dataclass
class Transaction:
    instructions: list[Instruction] = field(default_factory=list)
    principal: str = "anonymous"


class TxStatus(str, Enum):
    COMMITTED = "Committed"
    REJECTED = "Rejected"


@dataclass
class TransactionResult:
    status: TxStatus
    id_map: dict[int, int] = field(default_factory=dict)
    report: ValidationReport = field(default_factory=ValidationReport)
    log_seq: Optional[int] = None

    @property
    def committed(self) -> bool:
        return self.status is TxStatus.COMMITTED


@dataclass(frozen=True)
class LogEntry:
    log_seq: int
    timestamp: dt.datetime
    principal: str
    summary: tuple[str, ...]


def _remap_value(value: object, id_map: dict[int, int]) -> object:
    if isinstance(value, Ref) and value.target in id_map:
        return Ref(id_map[value.target])
    if isinstance(value, tuple):
        return tuple(_remap_value(v, id_map) for v in value)
    return value


def _remap_entity(e: Entity, id_map: dict[int, int]) -> Entity:
    return replace(
        e,
        id=id_map.get(e.id, e.id),
        parents=tuple(id_map.get(p, p) for p in e.parents),
        properties=tuple(
            replace(
                p,
                property_ref=id_map.get(p.property_ref, p.property_ref),
                value=_remap_value(p.value, id_map),
            )
            for p in e.properties
        ),
    )


def _referenced_ids(e: Entity) -> set[int]:
    """All entity ids e points at: parents, property refs, reference values."""
    out = set(e.parents)
    for p in e.properties:
        out.add(p.property_ref)
        values = p.value if isinstance(p.value, tuple) else (p.value,)
        for v in values:
            if isinstance(v, Ref):
                out.add(v.target)
    return out


def sha256_file(path: Path) -> tuple[int, str]:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as f:
        while chunk := f.read(1 << 20):
            h.update(chunk)
            size += len(chunk)
    return size, h.hexdigest()


def transaction_to_xml(tx: Transaction):
    import xml.etree.ElementTree as ET

    root = ET.Element("Transaction")
    for instr in tx.instructions:
        if isinstance(instr, Insert):
            ET.SubElement(root, "Insert").append(wire.entity_to_xml(instr.entity))
        elif isinstance(instr, Update):
            ET.SubElement(root, "Update").append(wire.entity_to_xml(instr.entity))
        else:
            ET.SubElement(root, "Delete", id=str(instr.entity_id))
    return root


def transaction_from_xml(root, principal: str = "anonymous") -> Transaction:
    if root.tag != "Transaction":
        raise WireFormatError(f"expected <Transaction>, got <{root.tag}>")
    instructions: list[Instruction] = []
    for child in root:
        if child.tag in ("Insert", "Update"):
            entities = list(child)
            if len(entities) != 1:
                raise WireFormatError(f"<{child.tag}> must wrap exactly one <Entity>")
            entity = wire.entity_from_xml(entities[0])
            instructions.append(Insert(entity) if child.tag == "Insert" else Update(entity))
        elif child.tag == "Delete":
            try:
                instructions.append(Delete(int(child.get("id", ""))))
            except ValueError as exc:
                raise WireFormatError("<Delete> needs an integer id") from exc
        else:
            raise WireFormatError(f"unexpected <{child.tag}> inside <Transaction>")
    return Transaction(instructions, principal)


class Store:
    """The embedded entity store; open it on a data directory."""

    def __init__(self, data_dir: str | Path, acl=None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.acl = acl
        self._lock = threading.Lock()
        self._entities: dict[int, Entity] = {}
        self._next_id = 1
        self._seq = 0
        self._log: list[LogEntry] = []
        self._recover()
        self._wal = open(self.data_dir / WAL_NAME, "ab")

    # ------------------------------------------------------------------
    # recovery

    def _recover(self) -> None:
        snapshot_seq = 0
        meta_path = self.data_dir / META_NAME
        if meta_path.exists():
            parts = meta_path.read_text("utf-8").split()
            snapshot_seq, self._next_id = int(parts[0]), int(parts[1])
            snap_path = self.data_dir / f"snapshot-{snapshot_seq}.caos"
            for line in snap_path.read_text("utf-8").splitlines():
                if not line.strip():
                    continue
                e = wire.entity_from_xml(wire.from_bytes(line.encode("utf-8")))
                self._entities[e.id] = e
        self._seq = snapshot_seq
        self._replay_wal(snapshot_seq)

    def _replay_wal(self, snapshot_seq: int) -> None:
        wal_path = self.data_dir / WAL_NAME
        if not wal_path.exists():
            return
        data = wal_path.read_bytes()
        pos = 0
        good_end = 0
        while pos < len(data):
            if pos + 4 > len(data):
                break  # torn length prefix
            (length,) = struct.unpack(">I", data[pos : pos + 4])
            end = pos + 4 + length + 4
            if end > len(data):
                break  # torn payload or CRC
            payload = data[pos + 4 : pos + 4 + length]
            (crc,) = struct.unpack(">I", data[end - 4 : end])
            if zlib.crc32(payload) != crc:
                if end == len(data):
                    break  # torn tail that garbled its own CRC
                raise RecoveryError(pos)
            self._apply_wal_record(payload, snapshot_seq)
            good_end = end
            pos = end
        if good_end < len(data):
            with open(wal_path, "r+b") as f:
                f.truncate(good_end)

    def _apply_wal_record(self, payload: bytes, snapshot_seq: int) -> None:
        root = wire.from_bytes(payload)
        if root.tag != "Commit":
            raise WireFormatError(f"unexpected WAL record <{root.tag}>")
        seq = int(root.get("seq"))
        next_id = int(root.get("next_id"))
        principal = root.get("principal", "anonymous")
        ts = dt.datetime.fromisoformat(root.get("ts"))
        summary: list[str] = []
        for child in root:
            if child.tag == "Put":
                e = wire.entity_from_xml(child[0])
                verb = "update" if e.id in self._entities else "insert"
                if seq > snapshot_seq:
                    self._entities[e.id] = e
                summary.append(f"{verb}:{e.id}")
            elif child.tag == "Del":
                eid = int(child.get("id"))
                if seq > snapshot_seq:
                    self._entities.pop(eid, None)
                summary.append(f"delete:{eid}")
            else:
                raise WireFormatError(f"unexpected <{child.tag}> in WAL record")
        self._log.append(LogEntry(seq, ts, principal, tuple(summary)))
        self._seq = seq
        self._next_id = max(self._next_id, next_id)

    # ------------------------------------------------------------------
    # reads

    def snapshot(self) -> dict[int, Entity]:
        """The current committed entity set; treat as immutable."""
        return self._entities

    @property
    def last_seq(self) -> int:
        return self._seq

    def retrieve(self, entity_id: int, principal=None) -> Entity:
        if self.acl is not None and not self.acl.allows(principal, "retrieve", entity_id):
            raise AuthorizationError(f"retrieve denied on entity {entity_id}")
        snap = self._entities
        if entity_id not in snap:
            raise LookupError_(entity_id)
        return snap[entity_id]

    def read_log(self, from_seq: int, to_seq: int, principal=None) -> list[LogEntry]:
        if self.acl is not None and not self.acl.allows(principal, "read-log", None):
            raise AuthorizationError("read-log denied")
        return [e for e in self._log if from_seq <= e.log_seq <= to_seq]

    # ------------------------------------------------------------------
    # writes

    def execute_transaction(self, tx: Transaction, principal=None) -> TransactionResult:
        with self._lock:
            return self._execute_locked(tx, principal)

    def _execute_locked(self, tx: Transaction, principal) -> TransactionResult:
        self._authorize(tx, principal)
        report = ValidationReport()

        temp_ids = [i.entity.id for i in tx.instructions if isinstance(i, Insert)]
        if any(t >= 0 for t in temp_ids):
            report.errors.append((0, "<insert requires a negative temporary id>"))
            return TransactionResult(TxStatus.REJECTED, report=report)
        touched_ids = temp_ids + [
            i.entity.id if isinstance(i, Update) else i.entity_id
            for i in tx.instructions
            if not isinstance(i, Insert)
        ]
        if len(set(touched_ids)) != len(touched_ids):
            report.errors.append((0, "<id appears in more than one instruction>"))
            return TransactionResult(TxStatus.REJECTED, report=report)

        id_map = {t: self._next_id + n for n, t in enumerate(temp_ids)}
        next_id = self._next_id + len(temp_ids)

        staged = dict(self._entities)
        puts: list[Entity] = []
        dels: list[int] = []
        for instr in tx.instructions:
            if isinstance(instr, Insert):
                e = _remap_entity(instr.entity, id_map)
                staged[e.id] = e
                puts.append(e)
            elif isinstance(instr, Update):
                if instr.entity.id not in staged:
                    report.errors.append((instr.entity.id, "<unknown entity>"))
                    continue
                e = _remap_entity(instr.entity, id_map)
                staged[e.id] = e
                puts.append(e)
            else:
                if instr.entity_id not in staged:
                    report.errors.append((instr.entity_id, "<unknown entity>"))
                    continue
                del staged[instr.entity_id]
                dels.append(instr.entity_id)
        if report.errors:
            return TransactionResult(TxStatus.REJECTED, report=report)

        puts = [self._materialize_defaults(e, staged) for e in puts]
        for e in puts:
            staged[e.id] = e

        self._check_integrity(puts, dels, staged, report)
        if report.errors:
            return TransactionResult(TxStatus.REJECTED, report=report)

        for e in self._revalidation_set(puts, dels, staged):
            report.merge(datamodel.validate(e, staged))
        if report.errors:
            return TransactionResult(TxStatus.REJECTED, report=report)

        seq = self._seq + 1
        self._append_wal(seq, next_id, tx.principal, puts, dels)
        self._entities = staged
        self._next_id = next_id
        self._seq = seq
        inserted = set(id_map.values())
        summary = tuple(
            [f"{'insert' if e.id in inserted else 'update'}:{e.id}" for e in puts]
            + [f"delete:{i}" for i in dels]
        )
        entry = LogEntry(seq, dt.datetime.now(dt.timezone.utc), tx.principal, summary)
        self._log.append(entry)
        return TransactionResult(TxStatus.COMMITTED, id_map=id_map, report=report, log_seq=seq)

    def _authorize(self, tx: Transaction, principal) -> None:
        if self.acl is None:
            return
        for instr in tx.instructions:
            if isinstance(instr, Insert):
                ok = self.acl.allows(principal, "insert", None)
            elif isinstance(instr, Update):
                ok = self.acl.allows(principal, "update", instr.entity.id)
            else:
                ok = self.acl.allows(principal, "delete", instr.entity_id)
            if not ok:
                raise AuthorizationError("transaction not permitted")

    def _materialize_defaults(self, e: Entity, staged: dict[int, Entity]) -> Entity:
        changed = False
        props = []
        for p in e.properties:
            ap = staged.get(p.property_ref)
            if (
                p.value is None
                and ap is not None
                and ap.datatype is not None
                and ap.datatype.default is not None
            ):
                props.append(replace(p, value=ap.datatype.default))
                changed = True
            else:
                props.append(p)
        return replace(e, properties=tuple(props)) if changed else e

    def _check_integrity(self, puts, dels, staged, report: ValidationReport) -> None:
        for e in puts:
            for target in _referenced_ids(e):
                if target not in staged:
                    report.errors.append((e.id, f"<unresolved reference #{target}>"))
            for p in e.properties:
                ap = staged.get(p.property_ref)
                if ap is not None and ap.kind is not EntityKind.ABSTRACT_PROPERTY:
                    report.errors.append((e.id, f"<#{p.property_ref} is not an abstract property>"))
        if report.errors:
            return
        # cycles: any new cycle must pass through a written entity
        for e in puts:
            if e.id in datamodel.ancestors(e.id, staged):
                report.errors.append((e.id, "<is-a cycle>"))
        # delete safety: nothing may still point at a deleted entity
        deleted = set(dels)
        if deleted:
            for other in staged.values():
                hit = _referenced_ids(other) & deleted
                for target in hit:
                    report.errors.append((other.id, f"<still references deleted #{target}>"))

    def _revalidation_set(self, puts, dels, staged) -> list[Entity]:
        """Written entities plus everything inheriting from a written/deleted one."""
        dirty = {e.id for e in puts} | set(dels)
        out = list(puts)
        for e in staged.values():
            if e.id not in dirty and datamodel.ancestors(e.id, staged) & dirty:
                out.append(e)
        return out

    def _append_wal(self, seq, next_id, principal, puts, dels) -> None:
        import xml.etree.ElementTree as ET

        root = ET.Element(
            "Commit",
            seq=str(seq),
            next_id=str(next_id),
            principal=principal,
            ts=dt.datetime.now(dt.timezone.utc).isoformat(),
        )
        for e in puts:
            ET.SubElement(root, "Put").append(wire.entity_to_xml(e))
        for eid in dels:
            ET.SubElement(root, "Del", id=str(eid))
        payload = wire.to_bytes(root)
        record = struct.pack(">I", len(payload)) + payload + struct.pack(">I", zlib.crc32(payload))
        self._wal.write(record)
        self._wal.flush()
        os.fsync(self._wal.fileno())

    # ------------------------------------------------------------------
    # maintenance

    def checkpoint(self) -> None:
        """Write a full snapshot so recovery can skip older WAL records."""
        with self._lock:
            seq = self._seq
            snap_path = self.data_dir / f"snapshot-{seq}.caos"
            tmp = snap_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as f:
                for eid in sorted(self._entities):
                    f.write(wire.to_bytes(wire.entity_to_xml(self._entities[eid])).decode("utf-8"))
                    f.write("\n")
                f.flush()
                os.fsync(f.fileno())
            tmp.replace(snap_path)
            meta_tmp = self.data_dir / (META_NAME + ".tmp")
            meta_tmp.write_text(f"{seq}\t{self._next_id}\n", "utf-8")
            meta_tmp.replace(self.data_dir / META_NAME)

    def close(self) -> None:
        self._wal.close()

    # ------------------------------------------------------------------
    # file ingestion

    def ingest_file(
        self, fs_path: str | Path, target_path: str, principal=None, temp_id: int = -1
    ) -> Insert:
        """Build the Insert instruction for a File entity describing fs_path.

        The file itself is neither moved nor modified; only path, size
        and SHA-256 checksum are recorded.
        """
        for e in self._entities.values():
            if e.file_meta is not None and e.file_meta.path == target_path:
                raise ConflictError(f"target path {target_path!r} already ingested")
        size, digest = sha256_file(Path(fs_path))
        name = target_path.rsplit("/", 1)[-1] or target_path
        entity = Entity(
            id=temp_id,
            kind=EntityKind.FILE,
            name=name,
            file_meta=FileMeta(path=target_path, size=size, checksum=digest),
        )
        return Insert(entity)
