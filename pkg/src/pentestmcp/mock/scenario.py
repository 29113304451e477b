"""Scenario fixtures: the declarative mock world behind the mock backend.

One YAML file describes a scenario: the attacker address, the target
hosts with their services, vulnerability findings, script output and
HTTP routes, and the Metasploit side (modules, payload compatibility,
exploit rules, and per-session-type command output tables). Everything
is validated at load; violations name the offending field path.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..scanners.nmap import ServiceRecord
from ..scanners.nuclei import VulnFinding


class ScenarioError(ValueError):
    """Fixture file violates the documented format; names the field path."""


@dataclass(frozen=True)
class HttpRoute:
    method: str
    path: str
    status: int
    reason: str
    headers: dict[str, str]
    body: str


@dataclass(frozen=True)
class HostFixture:
    address: str
    services: tuple[ServiceRecord, ...]
    os: str | None = None
    nuclei_findings: tuple[VulnFinding, ...] = ()
    # script-set key (the --script argument, or "default" for -sC) -> script id -> output
    nmap_script_results: dict[str, dict[str, str]] = field(default_factory=dict)
    http_routes: tuple[HttpRoute, ...] = ()

    def route(self, method: str, path: str) -> HttpRoute | None:
        for r in self.http_routes:
            if r.method == method and r.path == path:
                return r
        return None


@dataclass(frozen=True)
class MsfOption:
    type: str = "string"
    required: bool = False
    default: object = None
    description: str = ""


@dataclass(frozen=True)
class MsfModule:
    type: str
    path: str
    name: str
    description: str
    rank: str = "normal"
    disclosure_date: str | None = None
    references: tuple[str, ...] = ()
    options: dict[str, MsfOption] = field(default_factory=dict)

    @property
    def fullname(self) -> str:
        return f"{self.type}/{self.path}"


@dataclass(frozen=True)
class PayloadFixture:
    name: str
    description: str
    options: dict[str, MsfOption] = field(default_factory=dict)


@dataclass(frozen=True)
class ExploitRule:
    module: str
    option_predicates: dict[str, str]
    session: dict[str, str]
    console: tuple[str, ...] = ()


@dataclass(frozen=True)
class MsfFixture:
    modules: tuple[MsfModule, ...] = ()
    payload_compat: dict[str, tuple[str, ...]] = field(default_factory=dict)
    payload_infos: dict[str, PayloadFixture] = field(default_factory=dict)
    exploit_rules: tuple[ExploitRule, ...] = ()
    session_commands: dict[str, dict[str, str]] = field(default_factory=dict)

    def module_by_path(self, path: str, module_type: str | None = None) -> MsfModule | None:
        for mod in self.modules:
            if mod.path == path and (module_type is None or mod.type == module_type):
                return mod
        return None


@dataclass(frozen=True)
class ScenarioFixture:
    name: str
    attacker_ip: str
    hosts: tuple[HostFixture, ...]
    msf: MsfFixture

    def host(self, address: str) -> HostFixture | None:
        for h in self.hosts:
            if h.address == address:
                return h
        return None


def _expect(obj, types, path: str):
    if not isinstance(obj, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ScenarioError(f"{path}: expected {names}, got {type(obj).__name__}")
    return obj


def _parse_service(obj, path: str) -> ServiceRecord:
    _expect(obj, dict, path)
    try:
        return ServiceRecord(
            port=obj.get("port", 0),
            protocol=obj.get("protocol", "tcp"),
            state=obj.get("state", "open"),
            service=obj.get("service", ""),
            product=obj.get("product", ""),
            version=str(obj.get("version", "")),
            extrainfo=obj.get("extrainfo", ""),
        )
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_finding(obj, path: str, address: str) -> VulnFinding:
    _expect(obj, dict, path)
    try:
        finding = VulnFinding(
            template_id=obj["template_id"],
            severity=obj.get("severity", ""),
            matched_at=obj.get("matched_at", ""),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if address not in finding.matched_at:
        raise ScenarioError(f"{path}.matched_at: {finding.matched_at!r} does not refer to host {address}")
    return finding


def _parse_route(obj, path: str) -> HttpRoute:
    _expect(obj, dict, path)
    try:
        return HttpRoute(
            method=str(obj.get("method", "GET")).upper(),
            path=obj["path"],
            status=int(obj.get("status", 200)),
            reason=obj.get("reason", "OK"),
            headers={str(k): str(v) for k, v in (obj.get("headers") or {}).items()},
            body=obj.get("body", ""),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_host(obj, path: str) -> HostFixture:
    _expect(obj, dict, path)
    address = obj.get("address")
    if not isinstance(address, str):
        raise ScenarioError(f"{path}.address: missing or not a string")
    try:
        ipaddress.ip_address(address)
    except ValueError as exc:
        raise ScenarioError(f"{path}.address: {exc}") from exc
    services = tuple(
        _parse_service(svc, f"{path}.services[{i}]")
        for i, svc in enumerate(_expect(obj.get("services", []), list, f"{path}.services"))
    )
    findings = tuple(
        _parse_finding(f, f"{path}.nuclei_findings[{i}]", address)
        for i, f in enumerate(_expect(obj.get("nuclei_findings", []), list, f"{path}.nuclei_findings"))
    )
    raw_scripts = _expect(obj.get("nmap_script_results", {}) or {}, dict, f"{path}.nmap_script_results")
    scripts = {
        str(key): {str(sid): str(out) for sid, out in _expect(val, dict, f"{path}.nmap_script_results.{key}").items()}
        for key, val in raw_scripts.items()
    }
    routes = tuple(
        _parse_route(r, f"{path}.http_routes[{i}]")
        for i, r in enumerate(_expect(obj.get("http_routes", []), list, f"{path}.http_routes"))
    )
    return HostFixture(
        address=address,
        services=services,
        os=obj.get("os"),
        nuclei_findings=findings,
        nmap_script_results=scripts,
        http_routes=routes,
    )


def _parse_options(obj, path: str) -> dict[str, MsfOption]:
    out = {}
    for name, spec in _expect(obj or {}, dict, path).items():
        _expect(spec, dict, f"{path}.{name}")
        out[str(name)] = MsfOption(
            type=spec.get("type", "string"),
            required=bool(spec.get("required", False)),
            default=spec.get("default"),
            description=spec.get("description", ""),
        )
    return out


def _parse_module(obj, path: str) -> MsfModule:
    _expect(obj, dict, path)
    mod_type = obj.get("type")
    if mod_type not in ("exploit", "auxiliary", "post", "payload"):
        raise ScenarioError(f"{path}.type: must be exploit/auxiliary/post/payload, got {mod_type!r}")
    mod_path = obj.get("path")
    if not mod_path or not isinstance(mod_path, str) or mod_path.startswith("/"):
        raise ScenarioError(f"{path}.path: must be a non-empty path with no leading slash")
    return MsfModule(
        type=mod_type,
        path=mod_path,
        name=obj.get("name", mod_path),
        description=obj.get("description", ""),
        rank=obj.get("rank", "normal"),
        disclosure_date=str(obj["disclosure_date"]) if obj.get("disclosure_date") else None,
        references=tuple(str(r) for r in obj.get("references", [])),
        options=_parse_options(obj.get("options"), f"{path}.options"),
    )


def _parse_msf(obj, path: str) -> MsfFixture:
    _expect(obj, dict, path)
    modules = tuple(
        _parse_module(m, f"{path}.modules[{i}]")
        for i, m in enumerate(_expect(obj.get("modules", []), list, f"{path}.modules"))
    )
    module_paths = {m.path for m in modules}

    payload_compat = {
        str(mod): tuple(str(p) for p in _expect(payloads, list, f"{path}.payload_compat.{mod}"))
        for mod, payloads in _expect(obj.get("payload_compat", {}) or {}, dict, f"{path}.payload_compat").items()
    }
    for mod in payload_compat:
        if mod not in module_paths:
            raise ScenarioError(f"{path}.payload_compat.{mod}: unknown module")

    payload_infos = {}
    for name, spec in _expect(obj.get("payload_infos", {}) or {}, dict, f"{path}.payload_infos").items():
        _expect(spec, dict, f"{path}.payload_infos.{name}")
        payload_infos[str(name)] = PayloadFixture(
            name=str(name),
            description=spec.get("description", ""),
            options=_parse_options(spec.get("options"), f"{path}.payload_infos.{name}.options"),
        )

    session_commands = {
        str(stype): {str(cmd): str(out) for cmd, out in _expect(table, dict, f"{path}.session_commands.{stype}").items()}
        for stype, table in _expect(obj.get("session_commands", {}) or {}, dict, f"{path}.session_commands").items()
    }

    rules = []
    for i, rule in enumerate(_expect(obj.get("exploit_rules", []), list, f"{path}.exploit_rules")):
        rule_path = f"{path}.exploit_rules[{i}]"
        _expect(rule, dict, rule_path)
        module = rule.get("module")
        if module not in module_paths:
            raise ScenarioError(f"{rule_path}.module: unknown module {module!r}")
        session = _expect(rule.get("session"), dict, f"{rule_path}.session")
        stype = session.get("type")
        if stype not in ("shell", "meterpreter"):
            raise ScenarioError(f"{rule_path}.session.type: must be shell or meterpreter, got {stype!r}")
        if stype not in session_commands or not session_commands[stype]:
            raise ScenarioError(
                f"{rule_path}.session.type: no session_commands entries for type {stype!r}"
            )
        rules.append(
            ExploitRule(
                module=module,
                option_predicates={str(k): str(v) for k, v in (rule.get("options") or {}).items()},
                session={str(k): str(v) for k, v in session.items()},
                console=tuple(str(line) for line in rule.get("console", [])),
            )
        )

    return MsfFixture(
        modules=modules,
        payload_compat=payload_compat,
        payload_infos=payload_infos,
        exploit_rules=tuple(rules),
        session_commands=session_commands,
    )


def parse_scenario(obj: dict) -> ScenarioFixture:
    """Validate an already-deserialized fixture document."""
    _expect(obj, dict, "scenario")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("name: missing or empty")
    attacker_ip = obj.get("attacker_ip")
    if not isinstance(attacker_ip, str):
        raise ScenarioError("attacker_ip: missing or not a string")
    try:
        ipaddress.ip_address(attacker_ip)
    except ValueError as exc:
        raise ScenarioError(f"attacker_ip: {exc}") from exc

    hosts = tuple(
        _parse_host(h, f"hosts[{i}]")
        for i, h in enumerate(_expect(obj.get("hosts", []), list, "hosts"))
    )
    addresses = [attacker_ip] + [h.address for h in hosts]
    if len(set(addresses)) != len(addresses):
        raise ScenarioError("hosts: attacker and host addresses must be distinct")

    msf = _parse_msf(obj.get("msf", {}) or {}, "msf")
    return ScenarioFixture(name=name, attacker_ip=attacker_ip, hosts=hosts, msf=msf)


def load_scenario(path: str | Path) -> ScenarioFixture:
    """Load and fully validate one scenario fixture file."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario {path} is not valid YAML: {exc}") from exc
    return parse_scenario(doc)
