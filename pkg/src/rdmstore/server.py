"""HTTP service: RESTful XML protocol over the store, evaluator and ACL.

Endpoints::

    GET  /Entity/{id}            one entity as XML
    GET  /Entity/?query=...      query results (Accept: text/tab-separated-values
                                 turns a SELECT result into the evaluator's TSV)
    POST /Transaction            XML transaction document
    POST /login                  urlencoded username/password, sets a session cookie
    /webui/                      static assets for the browser console

Every mutation goes through Store.execute_transaction, so no endpoint
can produce a state a transaction could not. Sessions are in-memory
with 24 h expiry; an expired token behaves exactly like no token.
"""

from __future__ import annotations

import datetime as dt
import secrets
import urllib.parse
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles

from . import acl as aclmod
from . import qeval, ql, wire
from .acl import AclEngine, Principal, UserRegistry
from .errors import (
    AuthorizationError,
    QuerySyntaxError,
    UnitError,
    WireFormatError,
)
from .store import Store, transaction_from_xml

MAX_QUERY_BYTES = 64 * 1024
SESSION_TTL = dt.timedelta(hours=24)
XML_TYPE = "application/xml"
TSV_TYPE = "text/tab-separated-values"


@dataclass
class Session:
    token: str
    principal: Principal
    expires: dt.datetime


def _xml_response(element: ET.Element, status: int = 200) -> Response:
    return Response(wire.to_bytes(element), status_code=status, media_type=XML_TYPE)


def _error_doc(message: str, **attrs: str) -> ET.Element:
    el = ET.Element("Error", **attrs)
    el.text = message
    return el


class ServerState:
    def __init__(
        self,
        store: Store,
        users: Optional[UserRegistry] = None,
        anonymous_enabled: bool = True,
    ):
        self.store = store
        self.users = users or UserRegistry()
        self.anonymous_enabled = anonymous_enabled
        self.sessions: dict[str, Session] = {}

    def principal_for(self, request: Request) -> Principal:
        token = request.cookies.get("session")
        if token:
            session = self.sessions.get(token)
            if session is not None:
                if session.expires > dt.datetime.now(dt.timezone.utc):
                    return session.principal
                del self.sessions[token]
        if self.anonymous_enabled:
            return aclmod.ANONYMOUS
        return Principal("anonymous", frozenset(), authenticated=False)

    def open_session(self, principal: Principal) -> Session:
        token = secrets.token_urlsafe(32)
        session = Session(token, principal, dt.datetime.now(dt.timezone.utc) + SESSION_TTL)
        self.sessions[token] = session
        return session


def _result_document(result: qeval.QueryResult) -> ET.Element:
    root = ET.Element("Response")
    if result.kind == "count":
        count = ET.SubElement(root, "Count")
        count.text = str(result.count)
    elif result.kind == "entities":
        for e in result.entities:
            root.append(wire.entity_to_xml(e))
    else:
        table = ET.SubElement(root, "Table")
        header = ET.SubElement(table, "Header")
        for col in result.columns:
            ET.SubElement(header, "Column", name=col)
        for row in result.rows:
            row_el = ET.SubElement(table, "Row")
            for cell in row:
                cell_el = ET.SubElement(row_el, "Cell")
                cell_el.text = cell
    for w in result.warnings:
        ET.SubElement(root, "Warning").text = w
    return root


def create_app(state: ServerState, static_dir: Optional[str | Path] = None) -> FastAPI:
    app = FastAPI(title="rdmstore", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.rdm = state

    @app.get("/Entity/{entity_id}")
    def handle_retrieve(entity_id: str, request: Request) -> Response:
        principal = state.principal_for(request)
        try:
            eid = int(entity_id)
        except ValueError:
            return _xml_response(_error_doc(f"malformed entity id {entity_id!r}"), 400)
        if eid <= 0:
            return _xml_response(_error_doc("entity ids are positive"), 400)
        snap = qeval.snapshot_of(state.store)
        if state.store.acl is not None and not state.store.acl.allows(principal, "retrieve", eid):
            return _xml_response(_error_doc("retrieve denied"), 403)
        if eid not in snap:
            return _xml_response(_error_doc(f"no entity {eid}"), 404)
        return _xml_response(wire.entity_to_xml(snap[eid], lambda i: snap[i].name if i in snap else None))

    @app.get("/Entity/")
    @app.get("/Entity")
    def handle_query(request: Request, query: str = "") -> Response:
        principal = state.principal_for(request)
        if len(query.encode("utf-8")) > MAX_QUERY_BYTES:
            return _xml_response(_error_doc("query too large"), 414)
        if not query:
            return _xml_response(_error_doc("missing query parameter"), 400)
        try:
            ast = ql.parse(query)
        except QuerySyntaxError as exc:
            return _xml_response(_error_doc(str(exc), position=str(exc.position)), 400)
        except UnitError as exc:
            return _xml_response(_error_doc(str(exc)), 400)
        snap = qeval.snapshot_of(state.store)
        result = qeval.execute(ast, snap, principal, state.store.acl)
        accept = request.headers.get("accept", "")
        if result.kind == "table" and TSV_TYPE in accept:
            return Response(qeval.to_tsv(result), media_type=TSV_TYPE)
        return _xml_response(_result_document(result))

    @app.post("/Transaction")
    async def handle_transaction(request: Request) -> Response:
        principal = state.principal_for(request)
        body = await request.body()
        try:
            root = wire.from_bytes(body)
            tx = transaction_from_xml(root, principal=principal.name)
        except (WireFormatError, UnitError) as exc:
            return _xml_response(_error_doc(str(exc)), 400)
        try:
            result = state.store.execute_transaction(tx, principal=principal)
        except AuthorizationError as exc:
            return _xml_response(_error_doc(str(exc)), 403)
        doc = ET.Element("Response")
        if result.committed:
            id_map = ET.SubElement(doc, "IdMap")
            for temp, assigned in sorted(result.id_map.items()):
                ET.SubElement(id_map, "Map", **{"from": str(temp), "to": str(assigned)})
            for eid, prop in result.report.warnings:
                ET.SubElement(doc, "Warning", entity=str(eid), property=prop)
            return _xml_response(doc)
        for eid, prop in result.report.errors:
            ET.SubElement(doc, "Error", entity=str(eid), property=prop)
        for eid, prop in result.report.warnings:
            ET.SubElement(doc, "Warning", entity=str(eid), property=prop)
        return _xml_response(doc, 422)

    @app.post("/login")
    async def handle_login(request: Request) -> Response:
        body = (await request.body()).decode("utf-8")
        form = urllib.parse.parse_qs(body)
        username = form.get("username", [""])[0]
        password = form.get("password", [""])[0]
        principal, ok = state.users.authenticate(username, password)
        if not ok:
            return _xml_response(_error_doc("authentication failed"), 401)
        session = state.open_session(principal)
        doc = ET.Element("Session", token=session.token, expires=session.expires.isoformat())
        response = _xml_response(doc)
        response.set_cookie("session", session.token, httponly=True)
        return response

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/webui", StaticFiles(directory=str(static_dir), html=True), name="webui")

        @app.get("/")
        def index() -> Response:
            return RedirectResponse("/webui/")

    return app
