"""MCP client side: spawn server processes and drive them over stdio.

Each server is a child process speaking newline-delimited JSON-RPC on its
stdin/stdout. Requests on one connection are strictly serialized, so the
next decodable response line always answers the request in flight.
"""

from __future__ import annotations

import os
import subprocess
from pathlib import Path

from .. import protocol


class McpStartupError(Exception):
    """A server failed to spawn or complete the initialize handshake."""


class McpClientError(Exception):
    """A request failed at the protocol or transport level."""


def _child_env() -> dict[str, str]:
    """Environment for server children; keeps the package importable when
    running from a source checkout without an install."""
    env = dict(os.environ)
    package_root = str(Path(__file__).resolve().parents[2])
    existing = env.get("PYTHONPATH", "")
    if package_root not in existing.split(os.pathsep):
        env["PYTHONPATH"] = package_root + (os.pathsep + existing if existing else "")
    return env


class ServerHandle:
    def __init__(self, name: str, proc: subprocess.Popen):
        self.name = name
        self.proc = proc
        self.tools: list[dict] = []
        self.server_info: dict = {}
        self._next_id = 0

    def _send(self, msg: protocol.RpcMessage) -> None:
        try:
            self.proc.stdin.write(protocol.encode_message(msg))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise McpClientError(f"server '{self.name}' is gone: {exc}") from exc

    def request(self, method: str, params=None):
        self._next_id += 1
        msg_id = self._next_id
        self._send(protocol.request(msg_id, method, params))
        while True:
            line = self.proc.stdout.readline()
            if not line:
                raise McpClientError(f"server '{self.name}' closed the connection")
            try:
                reply = protocol.decode_message(line)
            except protocol.ProtocolError as exc:
                raise McpClientError(f"server '{self.name}' sent garbage: {exc}") from exc
            if reply.kind == "response" and reply.id == msg_id:
                if reply.error is not None:
                    raise McpClientError(
                        f"server '{self.name}' error {reply.error.code}: {reply.error.message}"
                    )
                return reply.result

    def notify(self, method: str, params=None) -> None:
        self._send(protocol.notification(method, params))

    def tool_names(self) -> set[str]:
        return {tool["name"] for tool in self.tools}

    def call_tool(self, name: str, arguments: dict) -> tuple[str, bool]:
        """Invoke one tool; returns (joined text, is_error flag)."""
        result = self.request("tools/call", {"name": name, "arguments": arguments})
        blocks = [b.get("text", "") for b in result.get("content", []) if b.get("type") == "text"]
        return "\n".join(blocks), bool(result.get("isError"))

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


def spawn_server(name: str, argv: list[str]) -> ServerHandle:
    """Start one server and run the initialize handshake."""
    try:
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            env=_child_env(),
        )
    except OSError as exc:
        raise McpStartupError(f"server '{name}' failed to start: {exc}") from exc
    handle = ServerHandle(name, proc)
    try:
        init = handle.request(
            "initialize",
            {
                "protocolVersion": protocol.PROTOCOL_VERSION,
                "capabilities": {},
                "clientInfo": {"name": "pentestmcp-run", "version": "0.1.0"},
            },
        )
        handle.server_info = init.get("serverInfo", {})
        handle.notify("notifications/initialized")
        handle.tools = handle.request("tools/list").get("tools", [])
    except McpClientError as exc:
        handle.close()
        raise McpStartupError(f"server '{name}' failed to start: {exc}") from exc
    return handle


def spawn_servers(config: dict[str, list[str]]) -> dict[str, ServerHandle]:
    """Spawn every configured server; on failure, tear down the started ones."""
    handles: dict[str, ServerHandle] = {}
    try:
        for name, argv in config.items():
            handles[name] = spawn_server(name, argv)
    except McpStartupError:
        for handle in handles.values():
            handle.close()
        raise
    return handles


def shutdown_servers(handles: dict[str, ServerHandle]) -> None:
    for handle in handles.values():
        handle.close()
