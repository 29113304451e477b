"""MessagePack-RPC client for the Metasploit daemon.

Calls are encoded as [method, token, params...] arrays and POSTed to the
daemon's API path with the binary msgpack content type. The auth token
is single-owner state inside the client: it is never logged and never
appears in rendered tool output. An expired token triggers exactly one
transparent re-login and retry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol

import requests

from .. import msgpackio


class MsfTransportError(Exception):
    """The daemon could not be reached or returned garbage; retriable."""


class MsfRpcError(Exception):
    """The daemon answered with an error map; carries its error_message."""


@dataclass(frozen=True)
class RpcEndpoint:
    host: str
    port: int = 55553
    username: str = "msf"
    password: str = field(default="", repr=False)
    tls: bool = False

    @property
    def url(self) -> str:
        scheme = "https" if self.tls else "http"
        return f"{scheme}://{self.host}:{self.port}/api/"


class MsfTransport(Protocol):
    def post(self, body: bytes) -> bytes: ...


class HttpTransport:
    """POSTs msgpack bodies to a live daemon (or the fake one on --listen)."""

    def __init__(self, endpoint: RpcEndpoint, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._session = requests.Session()
        # msfrpcd ships a self-signed certificate
        self._session.verify = not endpoint.tls

    def post(self, body: bytes) -> bytes:
        try:
            resp = self._session.post(
                self.endpoint.url,
                data=body,
                headers={"Content-Type": "binary/message-pack"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise MsfTransportError(f"daemon unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise MsfTransportError(f"daemon returned HTTP {resp.status_code}")
        return resp.content


class InProcessTransport:
    """Feeds encoded calls straight into a fake daemon instance."""

    def __init__(self, daemon):
        self.daemon = daemon

    def post(self, body: bytes) -> bytes:
        try:
            return self.daemon.handle_request(body)
        except msgpackio.MsgpackError as exc:
            raise MsfTransportError(f"malformed msgpack traffic: {exc}") from exc


def _normalize(value: Any) -> Any:
    """Decode stray byte strings the ruby daemon leaves in responses."""
    if isinstance(value, bytes):
        return value.decode("utf-8", errors="replace")
    if isinstance(value, dict):
        return {_normalize(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_normalize(v) for v in value]
    return value


class MsfRpcClient:
    def __init__(self, transport: MsfTransport, username: str, password: str):
        self._transport = transport
        self._username = username
        self._password = password
        self._token: str | None = None

    def __repr__(self):
        return f"MsfRpcClient(user={self._username!r}, authenticated={self._token is not None})"

    @property
    def token(self) -> str | None:
        return self._token

    def _roundtrip(self, call: list) -> Any:
        try:
            body = msgpackio.packb(call)
            raw = self._transport.post(body)
            return _normalize(msgpackio.unpackb(raw))
        except msgpackio.MsgpackError as exc:
            raise MsfTransportError(f"codec failure: {exc}") from exc

    def login(self) -> None:
        result = self._roundtrip(["auth.login", self._username, self._password])
        if not isinstance(result, dict) or result.get("error") or "token" not in result:
            message = result.get("error_message", "login failed") if isinstance(result, dict) else "login failed"
            raise MsfRpcError(message)
        self._token = result["token"]

    def call(self, method: str, *params: Any) -> Any:
        """Invoke one daemon method, re-authenticating once if needed."""
        if self._token is None:
            self.login()
        result = self._roundtrip([method, self._token, *params])
        if isinstance(result, dict) and result.get("error"):
            message = str(result.get("error_message", "RPC error"))
            if "authentication token" in message.lower():
                self.login()
                result = self._roundtrip([method, self._token, *params])
                if isinstance(result, dict) and result.get("error"):
                    raise MsfRpcError(str(result.get("error_message", "RPC error")))
                return result
            raise MsfRpcError(message)
        return result
