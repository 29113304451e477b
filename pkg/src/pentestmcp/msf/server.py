"""The metasploit MCP server: seven tools over the daemon's RPC API.

Covers the kill-chain tail: searching for exploits, reading module and
payload details, launching an exploit with a payload, and driving the
resulting shell or meterpreter session. Exploit launches poll the session
list for a configurable window and report handler/session lines in the
execution log; session interaction reads until output is quiescent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .. import __version__
from ..protocol import (
    McpServer,
    ToolCallResult,
    ToolDescriptor,
    ToolError,
    ToolRegistry,
    serve,
)
from ..resources import resolve_scenario
from .client import HttpTransport, InProcessTransport, MsfRpcClient, MsfRpcError, RpcEndpoint

DEFAULT_SESSION_WAIT_SECS = 30.0
DEFAULT_SESSION_POLL_SECS = 1.0
DEFAULT_READ_POLL_SECS = 0.2
DEFAULT_INTERACT_TIMEOUT_SECS = 5.0


def _render_reference(ref) -> str:
    if isinstance(ref, (list, tuple)):
        return "-".join(str(part) for part in ref)
    return str(ref)


def _render_options_table(options: dict) -> list[str]:
    lines = ["  NAME            REQUIRED  DEFAULT          DESCRIPTION"]
    for name, spec in options.items():
        required = "yes" if spec.get("required") else "no"
        default = spec.get("default")
        default_text = "-" if default is None else str(default)
        lines.append(f"  {name:<15} {required:<9} {default_text:<16} {spec.get('desc', '')}")
    return lines


class MsfTools:
    """Tool handlers bound to one RPC client."""

    def __init__(
        self,
        client: MsfRpcClient,
        session_wait_secs: float = DEFAULT_SESSION_WAIT_SECS,
        session_poll_secs: float = DEFAULT_SESSION_POLL_SECS,
        read_poll_secs: float = DEFAULT_READ_POLL_SECS,
    ):
        self.client = client
        self.session_wait_secs = session_wait_secs
        self.session_poll_secs = session_poll_secs
        self.read_poll_secs = read_poll_secs

    def _call(self, method: str, *params):
        try:
            return self.client.call(method, *params)
        except MsfRpcError as exc:
            raise ToolError(str(exc)) from exc

    # -- discovery ---------------------------------------------------------

    def search(self, args: dict) -> ToolCallResult:
        query = args["query"].strip()
        if not query:
            raise ToolError("query must not be empty")
        records = self._call("module.search", query)
        if not records:
            return ToolCallResult.text("no modules found")
        lines = [
            json.dumps(
                {
                    "type": rec.get("type", ""),
                    "name": rec.get("name", ""),
                    "fullname": rec.get("fullname", ""),
                    "rank": rec.get("rank", ""),
                    "disclosure_date": rec.get("disclosuredate", ""),
                }
            )
            for rec in records
        ]
        return ToolCallResult.text("\n".join(lines))

    def info(self, args: dict) -> ToolCallResult:
        module_name = args["module_name"]
        module_type = args["module_type"]
        try:
            info = self.client.call("module.info", module_type, module_name)
            options = self.client.call("module.options", module_type, module_name)
        except MsfRpcError as exc:
            if "invalid module" in str(exc).lower():
                raise ToolError(f"module not found: {module_type}/{module_name}") from exc
            raise ToolError(str(exc)) from exc
        lines = [
            f"Name: {info.get('name', module_name)}",
            f"Module: {module_type}/{module_name}",
            f"Rank: {info.get('rank', '')}",
            f"Disclosed: {info.get('disclosuredate', '')}",
            "",
            "Description:",
            str(info.get("description", "")).strip(),
        ]
        references = info.get("references") or []
        if references:
            lines += ["", "References:"]
            lines += [f"  {_render_reference(ref)}" for ref in references]
        if options:
            lines += ["", "Options:"]
            lines += _render_options_table(options)
        return ToolCallResult.text("\n".join(lines))

    def module_payloads(self, args: dict) -> ToolCallResult:
        module = args["module"]
        try:
            result = self.client.call("module.compatible_payloads", module)
        except MsfRpcError as exc:
            if "invalid module" in str(exc).lower():
                raise ToolError(f"module not found: {module}") from exc
            raise ToolError(str(exc)) from exc
        payloads = result.get("payloads", [])
        if not payloads:
            return ToolCallResult.text("no compatible payloads")
        return ToolCallResult.text("\n".join(payloads))

    def payload_info(self, args: dict) -> ToolCallResult:
        payload = args["payload"]
        try:
            info = self.client.call("module.info", "payload", payload)
            options = self.client.call("module.options", "payload", payload)
        except MsfRpcError as exc:
            if "invalid module" in str(exc).lower():
                raise ToolError(f"payload not found: {payload}") from exc
            raise ToolError(str(exc)) from exc
        lines = [
            f"Payload: {payload}",
            "",
            "Description:",
            str(info.get("description", "")).strip(),
            "",
            f"Options: {','.join(options)}",
        ]
        if options:
            lines += _render_options_table(options)
        return ToolCallResult.text("\n".join(lines))

    # -- exploitation --------------------------------------------------------

    def exploit(self, args: dict) -> ToolCallResult:
        module = args["module"]
        module_options = args["module_options"]
        payload = args["payload"]
        payload_options = args["payload_options"]

        payload_defaults = {}
        try:
            for name, spec in self.client.call("module.options", "payload", payload).items():
                if spec.get("default") is not None:
                    payload_defaults[name] = spec["default"]
        except MsfRpcError:
            pass  # unknown payload surfaces from module.execute below

        # payload_options override module_options on collision; user values
        # override payload defaults; PAYLOAD itself always wins
        merged = dict(payload_defaults)
        merged.update(module_options)
        merged.update(payload_options)
        merged["PAYLOAD"] = payload

        before = set(self._session_map())
        result = self._call("module.execute", "exploit", module, merged)
        job_id = result.get("job_id")

        log: list[str] = []
        for key in module_options:
            log.append(f"{key} = {module_options[key]}")
        log.append(f"payload = {payload}")
        for key in payload_options:
            log.append(f"{key} = {payload_options[key]}")
        for key, value in payload_defaults.items():
            if key not in module_options and key not in payload_options:
                log.append(f"{key} = {value}")
        for line in result.get("console") or []:
            log.append(str(line))
        if "LHOST" in merged and "LPORT" in merged:
            log.append(f"[*] Started reverse TCP handler on {merged['LHOST']}:{merged['LPORT']}")

        new_sessions = self._wait_for_sessions(before)
        if new_sessions:
            for sid, record in new_sessions:
                log.append(_session_opened_line(sid, record))
        else:
            log.append(f"[*] Exploit running as background job {job_id}.")
            log.append(
                f"[*] Exploit completed, but no session was created within {self.session_wait_secs:g}s."
            )
        return ToolCallResult.text("\n".join(log))

    def _session_map(self) -> dict:
        sessions = self._call("session.list")
        return sessions if isinstance(sessions, dict) else {}

    def _wait_for_sessions(self, before: set) -> list[tuple[int, dict]]:
        deadline = time.monotonic() + self.session_wait_secs
        while True:
            current = self._session_map()
            fresh = sorted(sid for sid in current if sid not in before)
            if fresh:
                return [(sid, current[sid]) for sid in fresh]
            if time.monotonic() >= deadline:
                return []
            time.sleep(self.session_poll_secs)

    # -- post-exploitation -----------------------------------------------------

    def sessions(self, args: dict) -> ToolCallResult:
        session_map = self._session_map()
        rendered = {str(sid): session_map[sid] for sid in sorted(session_map)}
        return ToolCallResult.text(json.dumps(rendered, indent=2))

    def session_interact(self, args: dict) -> ToolCallResult:
        session_id = args["session_id"]
        command = args["command"]
        timeout = args.get("timeout", DEFAULT_INTERACT_TIMEOUT_SECS)

        record = self._session_map().get(session_id)
        if record is None:
            raise ToolError(f"session not found: {session_id}")
        channel = record.get("type")
        if channel not in ("shell", "meterpreter"):
            raise ToolError(f"session {session_id} has unknown type {channel!r}")

        self._call(f"session.{channel}_write", session_id, command + "\n")

        deadline = time.monotonic() + float(timeout)
        output = ""
        while True:
            chunk = self._call(f"session.{channel}_read", session_id).get("data", "")
            if isinstance(chunk, bytes):
                chunk = chunk.decode("utf-8", errors="replace")
            if chunk:
                output += chunk
            elif output:
                # quiescent: one poll interval passed with no new bytes
                break
            if time.monotonic() >= deadline:
                break
            time.sleep(self.read_poll_secs)
        if not output:
            raise ToolError(f"no output before timeout ({timeout}s)")
        return ToolCallResult.text(output)


def _session_opened_line(sid, record: dict) -> str:
    kind = "Meterpreter session" if record.get("type") == "meterpreter" else "Command shell session"
    tunnel = ""
    if record.get("tunnel_local") and record.get("tunnel_peer"):
        tunnel = f" ({record['tunnel_local']} -> {record['tunnel_peer']})"
    return f"[*] {kind} {sid} opened{tunnel}"


SEARCH_DESCRIPTOR = ToolDescriptor(
    name="metasploit_search",
    description=(
        "Search the Metasploit module database. Parameters: 'query' is a list of "
        "keywords matched against module names, paths, and references (for example "
        "'struts CVE-2017-5638' or 'ms17_010'). Returns one JSON record per matching "
        "module with its type, name, fullname, rank, and disclosure date, or "
        "'no modules found'."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "query": {"type": "string", "description": "Search keywords"},
        },
        "required": ["query"],
    },
)

INFO_DESCRIPTOR = ToolDescriptor(
    name="metasploit_info",
    description=(
        "Fetch details for one Metasploit module. Parameters: 'module_name' is the "
        "module path without the type prefix (for example "
        "'multi/http/struts2_content_type_ognl'); 'module_type' is exploit, auxiliary, "
        "post, or payload. Returns the module description, references, and the full "
        "option table with required flags and defaults."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "module_name": {"type": "string", "description": "Module path, no type prefix"},
            "module_type": {"type": "string", "description": "exploit, auxiliary, post, or payload"},
        },
        "required": ["module_name", "module_type"],
    },
)

MODULE_PAYLOADS_DESCRIPTOR = ToolDescriptor(
    name="metasploit_module_payloads",
    description=(
        "List the payloads compatible with an exploit module. Parameters: 'module' is "
        "the exploit path (for example 'windows/smb/ms17_010_eternalblue'). Returns one "
        "payload name per line."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "module": {"type": "string", "description": "Exploit module path"},
        },
        "required": ["module"],
    },
)

PAYLOAD_INFO_DESCRIPTOR = ToolDescriptor(
    name="metasploit_payload_info",
    description=(
        "Fetch details for one payload. Parameters: 'payload' is the payload path (for "
        "example 'cmd/unix/reverse_bash'). Returns the payload description and its "
        "option table, including the connection options (LHOST, LPORT) for reverse "
        "connectors."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "payload": {"type": "string", "description": "Payload path"},
        },
        "required": ["payload"],
    },
)

EXPLOIT_DESCRIPTOR = ToolDescriptor(
    name="metasploit_exploit",
    description=(
        "Launch an exploit module with a payload. Parameters: 'module' is the exploit "
        "path; 'module_options' is an object of module options such as RHOSTS and "
        "RPORT; 'payload' is the payload path; 'payload_options' is an object of "
        "payload options such as LHOST and LPORT. All four are required. Returns an "
        "execution log echoing the resolved options, handler status, and any session "
        "that opened within the wait window."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "module": {"type": "string", "description": "Exploit module path"},
            "module_options": {"type": "object", "description": "Module options (RHOSTS, RPORT, ...)"},
            "payload": {"type": "string", "description": "Payload path"},
            "payload_options": {"type": "object", "description": "Payload options (LHOST, LPORT, ...)"},
        },
        "required": ["module", "module_options", "payload", "payload_options"],
    },
)

SESSIONS_DESCRIPTOR = ToolDescriptor(
    name="metasploit_sessions",
    description=(
        "List the open sessions the daemon is tracking. No parameters. Returns a JSON "
        "map from session id to session record (type, tunnel endpoints, target host)."
    ),
    input_schema={"type": "object", "properties": {}, "required": []},
)

SESSION_INTERACT_DESCRIPTOR = ToolDescriptor(
    name="metasploit_session_interact",
    description=(
        "Run one command on an open session. Parameters: 'session_id' is the integer "
        "session id from metasploit_sessions; 'command' is the command line to send; "
        "'timeout' is the read timeout in seconds (default 5). Shell and meterpreter "
        "sessions are driven over their own channels. Returns the accumulated command "
        "output once it goes quiet."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "session_id": {"type": "integer", "description": "Session id"},
            "command": {"type": "string", "description": "Command to run"},
            "timeout": {"type": "number", "description": "Read timeout in seconds"},
        },
        "required": ["session_id", "command"],
    },
)


def build_registry(tools: MsfTools) -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(SEARCH_DESCRIPTOR, tools.search)
    registry.register(INFO_DESCRIPTOR, tools.info)
    registry.register(MODULE_PAYLOADS_DESCRIPTOR, tools.module_payloads)
    # the traces call this tool under both names; only the canonical one is listed
    registry.register(PAYLOAD_INFO_DESCRIPTOR, tools.payload_info, aliases=("metasploit_module_payload_info",))
    registry.register(EXPLOIT_DESCRIPTOR, tools.exploit)
    registry.register(SESSIONS_DESCRIPTOR, tools.sessions)
    registry.register(SESSION_INTERACT_DESCRIPTOR, tools.session_interact)
    return registry


def build_client(args: argparse.Namespace) -> MsfRpcClient:
    if args.backend == "mock":
        from ..mock.msf_daemon import FakeMsfDaemon
        from ..mock.scenario import load_scenario

        scenario = args.scenario or os.environ.get("PENTESTMCP_MOCK_SCENARIO")
        if not scenario:
            raise SystemExit("mock backend needs --scenario or PENTESTMCP_MOCK_SCENARIO")
        daemon = FakeMsfDaemon(load_scenario(resolve_scenario(scenario)))
        return MsfRpcClient(InProcessTransport(daemon), args.msf_user, "mock")
    password = os.environ.get("MSF_PASSWORD")
    if not password:
        raise SystemExit("real backend needs the MSF_PASSWORD environment variable")
    endpoint = RpcEndpoint(
        host=args.msf_host, port=args.msf_port, username=args.msf_user, password=password, tls=args.tls
    )
    return MsfRpcClient(HttpTransport(endpoint), endpoint.username, endpoint.password)


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="pentestmcp-metasploit", description="metasploit MCP server on stdio"
    )
    parser.add_argument("--backend", choices=("real", "mock"), default="mock")
    parser.add_argument("--scenario", default=None)
    parser.add_argument("--msf-host", default="127.0.0.1")
    parser.add_argument("--msf-port", type=int, default=55553)
    parser.add_argument("--msf-user", default="msf")
    parser.add_argument("--tls", action="store_true")
    parser.add_argument("--session-wait-secs", type=float, default=DEFAULT_SESSION_WAIT_SECS)
    parser.add_argument("--session-poll-secs", type=float, default=DEFAULT_SESSION_POLL_SECS)
    parser.add_argument("--read-poll-secs", type=float, default=DEFAULT_READ_POLL_SECS)
    args = parser.parse_args(argv)

    tools = MsfTools(
        build_client(args),
        session_wait_secs=args.session_wait_secs,
        session_poll_secs=args.session_poll_secs,
        read_poll_secs=args.read_poll_secs,
    )
    server = McpServer("pentestmcp-metasploit", __version__, build_registry(tools))
    serve(server, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    main()
