import datetime as dt
import random
import xml.etree.ElementTree as ET

import pytest
from fastapi.testclient import TestClient

from rdmstore import wire
from rdmstore.acl import ANONYMOUS_ROLE, AclEngine, AclRule, UserRegistry, admin_ruleset
from rdmstore.server import ServerState, create_app

from .conftest import build_desk_fixture
from .generators import random_entity


@pytest.fixture
def service(tmp_path):
    store, ids = build_desk_fixture(tmp_path / "data")
    users = UserRegistry()
    users.add_user("root", "rootpw", ["admin"])
    state = ServerState(store, users=users)
    client = TestClient(create_app(state))
    yield client, store, ids, state
    store.close()


def login(client, username, password):
    return client.post(
        "/login",
        content=f"username={username}&password={password}",
        headers={"content-type": "application/x-www-form-urlencoded"},
    )


class TestRetrieve:
    def test_entity_as_xml(self, service):
        client, store, ids, _ = service
        r = client.get(f"/Entity/{ids['exp2']}")
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("application/xml")
        root = ET.fromstring(r.content)
        assert root.tag == "Entity"
        assert root.get("name") == "exp2"
        # parent and property elements carry display names for browsing
        assert root.find("Parent").get("name") == "Experiment"
        names = {p.get("name") for p in root.findall("Property")}
        assert names == {"date", "room_temperature"}

    def test_round_trips_through_wire_layer(self, service):
        client, store, ids, _ = service
        r = client.get(f"/Entity/{ids['exp2']}")
        entity = wire.entity_from_xml(wire.from_bytes(r.content))
        assert entity == store.retrieve(ids["exp2"])

    def test_not_found(self, service):
        client, *_ = service
        assert client.get("/Entity/999999").status_code == 404

    def test_malformed_and_nonpositive_ids(self, service):
        client, *_ = service
        assert client.get("/Entity/zero").status_code == 400
        assert client.get("/Entity/0").status_code == 400
        assert client.get("/Entity/-3").status_code == 400

    def test_acl_denial(self, service):
        client, store, ids, _ = service
        store.acl = AclEngine()  # default-deny for everyone
        assert client.get(f"/Entity/{ids['exp1']}").status_code == 403


class TestQuery:
    def test_count(self, service):
        client, *_ = service
        r = client.get("/Entity/", params={"query": "COUNT Experiment with date in 2017"})
        assert r.status_code == 200
        assert ET.fromstring(r.content).findtext("Count") == "3"

    def test_find_returns_entities(self, service):
        client, store, ids, _ = service
        r = client.get("/Entity/", params={"query": "FIND RECORD Person"})
        root = ET.fromstring(r.content)
        assert len(root.findall("Entity")) == 3

    def test_select_as_xml_table(self, service):
        client, *_ = service
        r = client.get("/Entity/", params={
            "query": "SELECT first name, family name FROM person WITH date of birth > 2000"
        })
        table = ET.fromstring(r.content).find("Table")
        cols = [c.get("name") for c in table.find("Header")]
        assert cols == ["id", "first name", "family name"]
        rows = [[c.text for c in row] for row in table.findall("Row")]
        assert [row[1:] for row in rows] == [["Ada", "Lively"], ["Cleo", "Tanaka"]]

    def test_select_as_tsv(self, service):
        client, *_ = service
        r = client.get(
            "/Entity/",
            params={"query": "SELECT first name FROM person WITH date of birth > 2000"},
            headers={"accept": "text/tab-separated-values"},
        )
        assert r.headers["content-type"].startswith("text/tab-separated-values")
        lines = r.text.splitlines()
        assert lines[0] == "id\tfirst name"
        assert [l.split("\t")[1] for l in lines[1:]] == ["Ada", "Cleo"]

    def test_syntax_error_reports_position(self, service):
        client, *_ = service
        r = client.get("/Entity/", params={"query": "FIND T WITH x >"})
        assert r.status_code == 400
        assert ET.fromstring(r.content).get("position") == "15"

    def test_missing_query(self, service):
        client, *_ = service
        assert client.get("/Entity/").status_code == 400

    def test_oversized_query(self, service):
        # the test HTTP client refuses URLs this long, so drive the ASGI
        # interface directly
        import asyncio
        import urllib.parse

        client, *_ = service
        query = urllib.parse.quote("FIND " + "x" * (64 * 1024))
        scope = {
            "type": "http",
            "http_version": "1.1",
            "method": "GET",
            "scheme": "http",
            "path": "/Entity/",
            "raw_path": b"/Entity/",
            "query_string": f"query={query}".encode(),
            "headers": [],
            "client": ("127.0.0.1", 1234),
            "server": ("testserver", 80),
        }
        received = {}

        async def receive():
            return {"type": "http.request", "body": b"", "more_body": False}

        async def send(message):
            if message["type"] == "http.response.start":
                received["status"] = message["status"]

        asyncio.run(client.app(scope, receive, send))
        assert received["status"] == 414

    def test_warnings_surface_in_response(self, service):
        client, *_ = service
        r = client.get("/Entity/", params={
            "query": "FIND RECORD Experiment WITH room_temperature > 3 m"
        })
        warnings = ET.fromstring(r.content).findall("Warning")
        assert warnings and "incomparable" in warnings[0].text


class TestTransaction:
    def _insert_doc(self, body: str) -> bytes:
        return f"<Transaction>{body}</Transaction>".encode()

    def test_insert_returns_id_map(self, service):
        client, store, ids, _ = service
        doc = self._insert_doc(
            f'<Insert><Entity id="-1" kind="Record" name="exp9" note="">'
            f'</Entity></Insert>'.replace(' note=""', "")
        )
        r = client.post("/Transaction", content=doc)
        assert r.status_code == 200
        mapping = ET.fromstring(r.content).find("IdMap").find("Map")
        assigned = int(mapping.get("to"))
        assert mapping.get("from") == "-1"
        assert store.retrieve(assigned).name == "exp9"

    def test_missing_obligatory_names_the_property(self, service):
        client, store, ids, _ = service
        doc = self._insert_doc(
            f'<Insert><Entity id="-1" kind="Record" name="bad">'
            f'<Parent id="{ids["Experiment"]}"/></Entity></Insert>'
        )
        r = client.post("/Transaction", content=doc)
        assert r.status_code == 422
        errors = ET.fromstring(r.content).findall("Error")
        assert any(e.get("property") == "date" for e in errors)

    def test_recommended_missing_warns_but_commits(self, service):
        client, store, ids, _ = service
        doc = self._insert_doc(
            f'<Insert><Entity id="-1" kind="Record" name="sparse">'
            f'<Parent id="{ids["Experiment"]}"/>'
            f'<Property ref="{ids["date"]}" importance="Fix" type="Date" value="2018-01-01"/>'
            f"</Entity></Insert>"
        )
        r = client.post("/Transaction", content=doc)
        assert r.status_code == 200
        warnings = ET.fromstring(r.content).findall("Warning")
        assert any(w.get("property") == "room_temperature" for w in warnings)

    def test_malformed_xml(self, service):
        client, *_ = service
        assert client.post("/Transaction", content=b"<Transaction><Oops/></Transaction>").status_code == 400
        assert client.post("/Transaction", content=b"not xml").status_code == 400

    def test_acl_denied_insert(self, service):
        client, store, ids, _ = service
        store.acl = AclEngine([AclRule(ANONYMOUS_ROLE, "retrieve", "allow")])
        doc = self._insert_doc('<Insert><Entity id="-1" kind="Record" name="x"/></Insert>')
        assert client.post("/Transaction", content=doc).status_code == 403

    def test_wire_round_trip_over_http(self, service):
        client, store, ids, _ = service
        rng = random.Random(5)
        # a randomized entity posted and fetched back must survive unchanged
        ap_pool = [ids["date"], ids["comment"]]
        for trial in range(20):
            e = random_entity(rng, -1, ap_pool=ap_pool, ref_pool=[ids["exp1"], ids["ada"]])
            payload = b"<Transaction><Insert>" + wire.to_bytes(wire.entity_to_xml(e)) + b"</Insert></Transaction>"
            r = client.post("/Transaction", content=payload)
            if r.status_code != 200:
                continue  # some random entities are legitimately rejected
            assigned = int(ET.fromstring(r.content).find("IdMap").find("Map").get("to"))
            fetched = wire.entity_from_xml(wire.from_bytes(client.get(f"/Entity/{assigned}").content))
            assert fetched == store.retrieve(assigned)


class TestSessions:
    def test_login_sets_cookie_and_grants_roles(self, service):
        client, store, ids, state = service
        store.acl = admin_ruleset()  # only the admin role may do anything
        assert client.get(f"/Entity/{ids['exp1']}").status_code == 403
        r = login(client, "root", "rootpw")
        assert r.status_code == 200
        assert ET.fromstring(r.content).tag == "Session"
        assert "session" in client.cookies
        assert client.get(f"/Entity/{ids['exp1']}").status_code == 200

    def test_bad_credentials_uniform_401(self, service):
        client, *_ = service
        a = login(client, "root", "wrong")
        b = login(client, "ghost", "wrong")
        assert a.status_code == b.status_code == 401
        assert a.content == b.content

    def test_expired_session_is_anonymous(self, service):
        client, store, ids, state = service
        store.acl = admin_ruleset()
        login(client, "root", "rootpw")
        for session in state.sessions.values():
            session.expires = dt.datetime.now(dt.timezone.utc) - dt.timedelta(seconds=1)
        assert client.get(f"/Entity/{ids['exp1']}").status_code == 403

    def test_garbage_token_is_anonymous(self, service):
        client, store, ids, _ = service
        store.acl = admin_ruleset()
        client.cookies.set("session", "forged")
        assert client.get(f"/Entity/{ids['exp1']}").status_code == 403


def test_static_console_mount(tmp_path):
    store, _ = build_desk_fixture(tmp_path / "data")
    static = tmp_path / "webui"
    static.mkdir()
    (static / "index.html").write_text("<!doctype html><title>console</title>")
    client = TestClient(create_app(ServerState(store), static_dir=static))
    r = client.get("/webui/", follow_redirects=False)
    assert r.status_code == 200 and b"console" in r.content
    assert client.get("/", follow_redirects=False).status_code == 307
    store.close()
