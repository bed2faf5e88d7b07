"""Operator command line: serve, ingest file trees, load models, run queries.

Exit codes: 0 ok, 2 bad configuration, 3 query syntax error,
4 authentication/authorization failure, 5 transaction rejected.

``query`` runs either embedded (--data-dir) or against a running server
(--server-url); both modes emit byte-identical output for the same
store state because they share the same renderers.
"""

from __future__ import annotations

import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import click

from . import qeval, ql, wire
from .acl import AclEngine, UserRegistry
from .config import load_config
from .errors import ConfigError, QuerySyntaxError, RdmError, UnitError
from .store import Insert, Store, Transaction, Update

EXIT_CONFIG = 2
EXIT_SYNTAX = 3
EXIT_AUTH = 4
EXIT_REJECTED = 5


@click.group()
def main():
    """Research-data-management engine."""


def _open_store(data_dir: str) -> Store:
    return Store(data_dir)


# ---------------------------------------------------------------------------
# serve


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def serve(config_path: str):
    """Run the HTTP server until interrupted."""
    import uvicorn

    from . import units
    from .server import ServerState, create_app

    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if cfg.unit_file:
        units.DEFAULT_REGISTRY.load_extension_file(cfg.unit_file)
    acl_engine = None
    rules_file = cfg.resolved_rules_file()
    if rules_file.exists():
        acl_engine = AclEngine.load(rules_file)
    store = Store(cfg.data_dir, acl=acl_engine)
    users_file = cfg.resolved_users_file()
    users = UserRegistry.load(users_file) if users_file.exists() else UserRegistry()
    state = ServerState(store, users, anonymous_enabled=cfg.anonymous_enabled)
    app = create_app(state, static_dir=cfg.static_dir)
    uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port, log_level="warning")


# ---------------------------------------------------------------------------
# query


def _render_plain(result: qeval.QueryResult) -> str:
    if result.kind == "count":
        return f"{result.count}\n"
    if result.kind == "entities":
        return "".join(f"{e.id}\t{e.name}\n" for e in result.entities)
    return qeval.to_tsv(result)


def _render_embedded(result: qeval.QueryResult, fmt: str) -> bytes:
    from .server import _result_document

    if fmt == "xml":
        return wire.to_bytes(_result_document(result))
    if fmt == "tsv":
        if result.kind != "table":
            raise click.ClickException("--format tsv needs a SELECT query")
        return qeval.to_tsv(result).encode("utf-8")
    return _render_plain(result).encode("utf-8")


def _plain_from_xml(body: bytes) -> bytes:
    root = ET.fromstring(body)
    count = root.find("Count")
    if count is not None:
        return f"{count.text}\n".encode("utf-8")
    table = root.find("Table")
    if table is not None:
        lines = ["\t".join(c.get("name", "") for c in table.find("Header"))]
        for row in table.findall("Row"):
            lines.append("\t".join(cell.text or "" for cell in row))
        return ("\n".join(lines) + "\n").encode("utf-8")
    out = []
    for e in root.findall("Entity"):
        out.append(f"{e.get('id')}\t{e.get('name')}\n")
    return "".join(out).encode("utf-8")


def _query_server(server_url: str, text: str, fmt: str) -> bytes:
    import httpx

    url = server_url.rstrip("/") + "/Entity/"
    headers = {"Accept": "text/tab-separated-values"} if fmt == "tsv" else {}
    response = httpx.get(url, params={"query": text}, headers=headers)
    if response.status_code == 400:
        click.echo(response.text, err=True)
        sys.exit(EXIT_SYNTAX)
    if response.status_code in (401, 403):
        click.echo(response.text, err=True)
        sys.exit(EXIT_AUTH)
    response.raise_for_status()
    if fmt == "plain":
        return _plain_from_xml(response.content)
    return response.content


@main.command()
@click.argument("text")
@click.option("--data-dir", type=click.Path(), default=None)
@click.option("--server-url", default=None)
@click.option("--format", "fmt", type=click.Choice(["xml", "tsv", "plain"]), default="plain")
def query(text: str, data_dir, server_url, fmt):
    """Run a query and print the result."""
    if server_url:
        sys.stdout.buffer.write(_query_server(server_url, text, fmt))
        return
    if not data_dir:
        click.echo("error: need --data-dir or --server-url", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        ast = ql.parse(text)
    except (QuerySyntaxError, UnitError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SYNTAX)
    store = _open_store(data_dir)
    result = qeval.execute(ast, qeval.snapshot_of(store))
    sys.stdout.buffer.write(_render_embedded(result, fmt))
    store.close()


# ---------------------------------------------------------------------------
# ingest


@main.command()
@click.argument("root", type=click.Path(exists=True, file_okay=False))
@click.option("--prefix", default="/", help="store path prefix")
@click.option("--data-dir", type=click.Path(), required=True)
@click.option("--user", "user_name", default="operator")
def ingest(root: str, prefix: str, data_dir: str, user_name: str):
    """Record every regular file under ROOT as a File entity.

    Re-running on an unchanged tree is a no-op: files whose store path
    already exists with the same size and checksum are skipped.
    """
    from .store import sha256_file

    store = _open_store(data_dir)
    existing = {
        e.file_meta.path: e
        for e in store.snapshot().values()
        if e.file_meta is not None
    }
    instructions = []
    temp = -1
    skipped = 0
    total_bytes = 0
    root_path = Path(root)
    for fs_path in sorted(p for p in root_path.rglob("*") if p.is_file()):
        rel = fs_path.relative_to(root_path).as_posix()
        target = prefix.rstrip("/") + "/" + rel
        size, digest = sha256_file(fs_path)
        prior = existing.get(target)
        if prior is not None:
            if prior.file_meta.size == size and prior.file_meta.checksum == digest:
                skipped += 1
                continue
            from dataclasses import replace

            from .datamodel import FileMeta

            updated = replace(prior, file_meta=FileMeta(target, size, digest))
            instructions.append(Update(updated))
        else:
            instructions.append(store.ingest_file(fs_path, target, temp_id=temp))
            temp -= 1
        total_bytes += size
    result = store.execute_transaction(Transaction(instructions, principal=user_name))
    if not result.committed:
        for eid, prop in result.report.errors:
            click.echo(f"error: entity {eid}: {prop}", err=True)
        store.close()
        sys.exit(EXIT_REJECTED)
    click.echo(
        f"{len(instructions)} files ingested ({total_bytes} bytes), {skipped} unchanged"
    )
    store.close()


# ---------------------------------------------------------------------------
# model loading


def _resolve_model_entities(root: ET.Element, store: Store) -> list[ET.Element]:
    """Assign temp ids to model entities and resolve name-based links."""
    if root.tag != "Model":
        raise click.ClickException(f"model file must have a <Model> root, got <{root.tag}>")
    by_name: dict[str, int] = {}
    snapshot = store.snapshot()
    for e in snapshot.values():
        by_name.setdefault(e.name, e.id)
    temp = -1
    elements = []
    for el in root:
        if el.tag != "Entity":
            raise click.ClickException(f"unexpected <{el.tag}> in model file")
        if el.get("id") is None:
            el.set("id", str(temp))
            temp -= 1
        name = el.get("name")
        if name and name not in by_name:
            by_name[name] = int(el.get("id"))
        elements.append(el)
    for el in elements:
        for child in el:
            if child.tag == "Parent" and child.get("id") is None:
                pname = child.get("name")
                if pname not in by_name:
                    raise click.ClickException(f"unknown parent name {pname!r}")
                child.set("id", str(by_name[pname]))
            if child.tag == "Property" and child.get("ref") is None:
                pname = child.get("name")
                if pname not in by_name:
                    raise click.ClickException(f"unknown property name {pname!r}")
                child.set("ref", str(by_name[pname]))
    return elements


@main.command("load")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--data-dir", type=click.Path(), required=True)
@click.option("--user", "user_name", default="operator")
def load_model(model_file: str, data_dir: str, user_name: str):
    """Insert the entities declared in an XML model file.

    Entities may omit ids; Parent and Property links may use names
    instead of ids, resolved against the file and then the store.
    """
    store = _open_store(data_dir)
    root = ET.fromstring(Path(model_file).read_bytes())
    elements = _resolve_model_entities(root, store)
    instructions = [Insert(wire.entity_from_xml(el)) for el in elements]
    result = store.execute_transaction(Transaction(instructions, principal=user_name))
    if not result.committed:
        for eid, prop in result.report.errors:
            click.echo(f"error: entity {eid}: {prop}", err=True)
        store.close()
        sys.exit(EXIT_REJECTED)
    click.echo(f"{len(instructions)} entities loaded")
    store.close()


# ---------------------------------------------------------------------------
# user management


@main.group()
def user():
    """Manage the user registry (users.caos)."""


@user.command("add")
@click.argument("name")
@click.option("--data-dir", type=click.Path(), required=True)
@click.option("--password-file", type=click.Path(exists=True), default=None)
@click.option("--roles", default="", help="comma-separated role names")
def user_add(name: str, data_dir: str, password_file, roles: str):
    users_path = Path(data_dir) / "users.caos"
    registry = UserRegistry.load(users_path) if users_path.exists() else UserRegistry()
    if password_file:
        password = Path(password_file).read_text("utf-8").strip()
    else:
        password = click.prompt("password", hide_input=True)
    registry.add_user(name, password, [r for r in roles.split(",") if r])
    Path(data_dir).mkdir(parents=True, exist_ok=True)
    registry.save(users_path)
    click.echo(f"user {name!r} saved")


@user.command("roles")
@click.argument("name")
@click.argument("roles")
@click.option("--data-dir", type=click.Path(), required=True)
def user_roles(name: str, roles: str, data_dir: str):
    users_path = Path(data_dir) / "users.caos"
    registry = UserRegistry.load(users_path)
    registry.set_roles(name, [r for r in roles.split(",") if r])
    registry.save(users_path)
    click.echo(f"roles of {name!r} set to {roles}")


if __name__ == "__main__":
    main()
