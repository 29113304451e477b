"""Fake Metasploit RPC daemon driven by a scenario fixture.

Serves the msgpack-RPC surface the metasploit server uses: auth.login,
module search/info/options/compatible_payloads/execute, and session
list/read/write. Sessions only come into existence through a successful
module.execute that satisfies one of the fixture's exploit rules; ids
are handed out from a monotonic counter and never reused.

The daemon is deterministic: identical call sequences against the same
fixture produce byte-identical responses. It can be used in process or
exposed on a loopback port (--listen) for wire-level integration tests.
"""

from __future__ import annotations

import argparse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .. import msgpackio
from ..resources import resolve_scenario
from .scenario import ScenarioFixture, load_scenario

INVALID_TOKEN = "Invalid Authentication Token"

# Fallback output for commands the fixture does not table.
SHELL_FALLBACK = "sh: 1: {cmd}: not found\n"
METERPRETER_FALLBACK = "[-] Unknown command: {cmd}\n"


def _error(message: str, error_class: str = "Msf::RPC::Exception") -> dict:
    return {"error": True, "error_class": error_class, "error_message": message}


class _Template(dict):
    def __missing__(self, key):
        return "{" + key + "}"


class FakeMsfDaemon:
    def __init__(self, fixture: ScenarioFixture):
        self.fixture = fixture
        self.login_count = 0
        self.issued_tokens: list[str] = []
        self._valid_tokens: set[str] = set()
        self._next_session_id = 1
        self._next_job_id = 0
        self._sessions: dict[int, dict] = {}
        self._buffers: dict[int, str] = {}
        # (channel, session_id) pairs, for routing assertions in tests
        self.channel_log: list[tuple[str, int]] = []
        self.last_execute_options: dict | None = None

    # -- test knobs -------------------------------------------------------

    def revoke_all_tokens(self) -> None:
        """Simulate daemon-side token expiry."""
        self._valid_tokens.clear()

    # -- wire layer -------------------------------------------------------

    def handle_request(self, body: bytes) -> bytes:
        """Decode one msgpack call array, dispatch, encode the result map."""
        call = msgpackio.unpackb(body)
        if not isinstance(call, list) or not call or not isinstance(call[0], str):
            raise msgpackio.MsgpackError("call must be [method, params...]")
        return msgpackio.packb(self.dispatch(call[0], call[1:]))

    def dispatch(self, method: str, params: list) -> dict | list:
        if method == "auth.login":
            return self._auth_login(*params)
        if not params or params[0] not in self._valid_tokens:
            return _error(INVALID_TOKEN)
        args = params[1:]
        handler = {
            "core.version": self._core_version,
            "module.search": self._module_search,
            "module.info": self._module_info,
            "module.options": self._module_options,
            "module.compatible_payloads": self._compatible_payloads,
            "module.execute": self._module_execute,
            "session.list": self._session_list,
            "session.shell_read": lambda sid: self._session_read("shell", sid),
            "session.shell_write": lambda sid, data: self._session_write("shell", sid, data),
            "session.meterpreter_read": lambda sid: self._session_read("meterpreter", sid),
            "session.meterpreter_write": lambda sid, data: self._session_write("meterpreter", sid, data),
        }.get(method)
        if handler is None:
            return _error(f"Unknown RPC method: {method}")
        try:
            return handler(*args)
        except TypeError as exc:
            return _error(f"Bad parameters for {method}: {exc}")

    # -- auth ---------------------------------------------------------------

    def _auth_login(self, username=None, password=None) -> dict:
        # mock mode: any non-empty credentials are accepted
        if not username or not password:
            return _error("Login Failed", error_class="Msf::RPC::AuthError")
        self.login_count += 1
        token = f"TEMP{self.login_count:016d}"
        self._valid_tokens.add(token)
        self.issued_tokens.append(token)
        return {"result": "success", "token": token}

    def _core_version(self) -> dict:
        return {"version": "6.4.0-mock", "ruby": "3.0.0", "api": "1.0"}

    # -- modules ------------------------------------------------------------

    def _module_search(self, query: str) -> list:
        """Every whitespace token must substring-match, case-insensitive."""
        tokens = [t.lower() for t in str(query).split()]
        hits = []
        for mod in self.fixture.msf.modules:
            haystack = " ".join([mod.fullname, mod.name, *mod.references]).lower()
            if all(tok in haystack for tok in tokens):
                hits.append(
                    {
                        "type": mod.type,
                        "name": mod.name,
                        "fullname": mod.fullname,
                        "rank": mod.rank,
                        "disclosuredate": mod.disclosure_date or "",
                    }
                )
        return hits

    def _find_module(self, module_type: str, path: str):
        if module_type == "payload":
            return self.fixture.msf.payload_infos.get(path)
        return self.fixture.msf.module_by_path(path, module_type)

    def _module_info(self, module_type: str, path: str) -> dict:
        mod = self._find_module(module_type, path)
        if mod is None:
            return _error("Invalid Module")
        if module_type == "payload":
            return {"name": mod.name, "description": mod.description, "references": []}
        return {
            "name": mod.name,
            "description": mod.description,
            "references": list(mod.references),
            "rank": mod.rank,
            "disclosuredate": mod.disclosure_date or "",
        }

    def _module_options(self, module_type: str, path: str) -> dict:
        mod = self._find_module(module_type, path)
        if mod is None:
            return _error("Invalid Module")
        out = {}
        for name, opt in mod.options.items():
            entry: dict = {"type": opt.type, "required": opt.required, "desc": opt.description}
            if opt.default is not None:
                entry["default"] = opt.default
            out[name] = entry
        return out

    def _compatible_payloads(self, path: str) -> dict:
        mod = self.fixture.msf.module_by_path(path, "exploit")
        if mod is None:
            return _error("Invalid Module")
        return {"payloads": list(self.fixture.msf.payload_compat.get(path, ()))}

    def _module_execute(self, module_type: str, path: str, options: dict) -> dict:
        mod = self._find_module(module_type, path)
        if mod is None:
            return _error("Invalid Module")
        self.last_execute_options = dict(options)
        self._next_job_id += 1
        result: dict = {"job_id": self._next_job_id, "uuid": f"uuid-{self._next_job_id}"}

        for rule in self.fixture.msf.exploit_rules:
            if rule.module != path:
                continue
            if rule.console:
                # mock-only: fixture-scripted framework console lines
                result["console"] = list(rule.console)
            if self._rule_satisfied(rule, options):
                self._open_session(rule, options)
            break
        return result

    def _rule_satisfied(self, rule, options: dict) -> bool:
        for key, expected in rule.option_predicates.items():
            if str(options.get(key, "")) != expected:
                return False
        rhosts = str(options.get("RHOSTS", ""))
        if self.fixture.host(rhosts) is None:
            return False
        payload = str(options.get("PAYLOAD", ""))
        compat = self.fixture.msf.payload_compat.get(rule.module, ())
        return payload in compat

    def _open_session(self, rule, options: dict) -> None:
        values = _Template({k: str(v) for k, v in options.items()})
        record = {
            key: template.format_map(values)
            for key, template in rule.session.items()
        }
        record.setdefault("via_exploit", f"exploit/{rule.module}")
        record.setdefault("via_payload", f"payload/{options.get('PAYLOAD', '')}")
        record.setdefault("info", "")
        sid = self._next_session_id
        self._next_session_id += 1
        self._sessions[sid] = record
        self._buffers[sid] = ""

    # -- sessions -------------------------------------------------------------

    def _session_list(self) -> dict:
        return {sid: dict(rec) for sid, rec in self._sessions.items()}

    def _session_read(self, channel: str, sid) -> dict:
        record = self._sessions.get(sid)
        if record is None:
            return _error("Unknown Session ID")
        self.channel_log.append((channel, sid))
        if record["type"] != channel:
            return _error(f"Session is not of type {channel}")
        data = self._buffers.get(sid, "")
        self._buffers[sid] = ""
        return {"seq": 0, "data": data}

    def _session_write(self, channel: str, sid, data: str) -> dict:
        record = self._sessions.get(sid)
        if record is None:
            return _error("Unknown Session ID")
        self.channel_log.append((channel, sid))
        if record["type"] != channel:
            return _error(f"Session is not of type {channel}")
        command = str(data).rstrip("\n")
        table = self.fixture.msf.session_commands.get(record["type"], {})
        if command in table:
            output = table[command]
        else:
            fallback = SHELL_FALLBACK if channel == "shell" else METERPRETER_FALLBACK
            output = fallback.format(cmd=command)
        self._buffers[sid] = self._buffers.get(sid, "") + output
        return {"write_count": str(len(data))}


class _DaemonHandler(BaseHTTPRequestHandler):
    daemon_instance: FakeMsfDaemon

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length)
        try:
            reply = self.daemon_instance.handle_request(body)
        except msgpackio.MsgpackError as exc:
            self.send_response(500)
            self.end_headers()
            self.wfile.write(str(exc).encode())
            return
        self.send_response(200)
        self.send_header("Content-Type", "binary/message-pack")
        self.send_header("Content-Length", str(len(reply)))
        self.end_headers()
        self.wfile.write(reply)

    def log_message(self, fmt, *args):
        pass


def make_http_server(daemon: FakeMsfDaemon, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Wrap a daemon in an HTTP server bound to a loopback port."""
    handler = type("BoundHandler", (_DaemonHandler,), {"daemon_instance": daemon})
    return ThreadingHTTPServer((host, port), handler)


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="pentestmcp-mock-msf", description="fake Metasploit RPC daemon over HTTP"
    )
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--listen", default="127.0.0.1:55553", help="host:port to bind")
    args = parser.parse_args(argv)
    host, _, port = args.listen.rpartition(":")
    daemon = FakeMsfDaemon(load_scenario(resolve_scenario(args.scenario)))
    server = make_http_server(daemon, host or "127.0.0.1", int(port))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
