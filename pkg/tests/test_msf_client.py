import threading

import pytest

from pentestmcp.mock.msf_daemon import FakeMsfDaemon, make_http_server
from pentestmcp.msf.client import (
    HttpTransport,
    InProcessTransport,
    MsfRpcClient,
    MsfRpcError,
    MsfTransportError,
    RpcEndpoint,
)


@pytest.fixture()
def daemon(struts_fixture):
    return FakeMsfDaemon(struts_fixture)


@pytest.fixture()
def client(daemon):
    return MsfRpcClient(InProcessTransport(daemon), "msf", "mock")


class TestInProcess:
    def test_login_then_call(self, client):
        assert client.call("session.list") == {}
        assert client.token is not None

    def test_search_roundtrip(self, client):
        hits = client.call("module.search", "struts")
        assert any("struts2_content_type_ognl" in h["fullname"] for h in hits)

    def test_daemon_error_surfaces_message(self, client):
        with pytest.raises(MsfRpcError, match="Invalid Module"):
            client.call("module.info", "exploit", "ghost/module")

    def test_expired_token_triggers_one_transparent_relogin(self, daemon, client):
        client.call("session.list")
        assert daemon.login_count == 1
        daemon.revoke_all_tokens()
        assert client.call("session.list") == {}
        assert daemon.login_count == 2

    def test_token_and_password_not_in_repr(self, daemon, client):
        client.call("session.list")
        text = repr(client) + repr(RpcEndpoint(host="h", password="hunter2"))
        assert "hunter2" not in text
        for token in daemon.issued_tokens:
            assert token not in text


class TestHttpTransport:
    @pytest.fixture()
    def http_server(self, struts_fixture):
        daemon = FakeMsfDaemon(struts_fixture)
        server = make_http_server(daemon, "127.0.0.1", 0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        yield daemon, server.server_address[1]
        server.shutdown()
        server.server_close()

    def test_login_and_search_over_the_wire(self, http_server):
        daemon, port = http_server
        endpoint = RpcEndpoint(host="127.0.0.1", port=port, username="msf", password="mock")
        client = MsfRpcClient(HttpTransport(endpoint), endpoint.username, endpoint.password)
        hits = client.call("module.search", "struts")
        assert hits
        assert daemon.login_count == 1

    def test_malformed_post_is_transport_error(self, http_server):
        _, port = http_server
        import requests

        resp = requests.post(f"http://127.0.0.1:{port}/api/", data=b"\xff\xff", timeout=5)
        assert resp.status_code == 500

    def test_unreachable_daemon_is_transport_error(self):
        endpoint = RpcEndpoint(host="127.0.0.1", port=9, username="msf", password="x")
        client = MsfRpcClient(HttpTransport(endpoint, timeout=0.2), "msf", "x")
        with pytest.raises(MsfTransportError):
            client.call("session.list")
