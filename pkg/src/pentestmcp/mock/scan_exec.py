"""Mock scanner execution: synthesizes nmap/nuclei/curl output from fixtures.

The mock backend honors the same argv contract the real backend gets, so
the servers' parsing and rendering paths are identical in both modes.
Output is deterministic for identical argv against the same fixture.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from urllib.parse import urlsplit

from ..scanners.nmap import ServiceRecord
from .scenario import ScenarioFixture


def build_nmap_xml(
    address: str,
    services: tuple[ServiceRecord, ...] = (),
    scripts: tuple[tuple[str, str], ...] = (),
    os_name: str | None = None,
    host_up: bool = True,
) -> bytes:
    """Generate an nmap XML document for one scanned address."""
    root = ET.Element("nmaprun", scanner="nmap", args="nmap", version="7.94")
    if host_up:
        host = ET.SubElement(root, "host")
        ET.SubElement(host, "status", state="up", reason="syn-ack")
        ET.SubElement(host, "address", addr=address, addrtype="ipv4")
        ports = ET.SubElement(host, "ports")
        for svc in services:
            port = ET.SubElement(ports, "port", protocol=svc.protocol, portid=str(svc.port))
            ET.SubElement(port, "state", state=svc.state, reason="syn-ack")
            attrs = {"name": svc.service, "method": "probed", "conf": "10"}
            if svc.product:
                attrs["product"] = svc.product
            if svc.version:
                attrs["version"] = svc.version
            if svc.extrainfo:
                attrs["extrainfo"] = svc.extrainfo
            ET.SubElement(port, "service", **attrs)
        if scripts:
            hostscript = ET.SubElement(host, "hostscript")
            for script_id, output in scripts:
                ET.SubElement(hostscript, "script", id=script_id, output=output)
        if os_name:
            os_elem = ET.SubElement(host, "os")
            ET.SubElement(os_elem, "osmatch", name=os_name, accuracy="98")
    up = "1" if host_up else "0"
    runstats = ET.SubElement(root, "runstats")
    ET.SubElement(runstats, "hosts", up=up, down="0", total=up)
    return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root)


def _flag_value(tokens: list[str], flag: str) -> str | None:
    for i, tok in enumerate(tokens):
        if tok == flag and i + 1 < len(tokens):
            return tokens[i + 1]
        if tok.startswith(flag + "="):
            return tok.split("=", 1)[1]
    return None


def _port_filter(tokens: list[str]) -> set[int] | None:
    """Extract a -p port spec; None means no restriction."""
    spec = None
    for i, tok in enumerate(tokens):
        if tok == "-p" and i + 1 < len(tokens):
            spec = tokens[i + 1]
        elif tok.startswith("-p") and len(tok) > 2:
            spec = tok[2:]
    if spec is None or spec == "-":
        return None
    ports: set[int] = set()
    for part in spec.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-", 1)
            ports.update(range(int(lo), int(hi) + 1))
        elif part:
            ports.add(int(part))
    return ports


def _mock_nmap(fixture: ScenarioFixture, argv: list[str]) -> tuple[int, bytes, bytes]:
    tokens = argv[1:]
    target = tokens[-1] if tokens else ""
    opts = tokens[:-1]
    host = fixture.host(target)
    if host is None:
        return 0, build_nmap_xml(target, host_up=False), b""

    ports = _port_filter(opts)
    services = tuple(s for s in host.services if ports is None or s.port in ports)

    script_key = _flag_value(opts, "--script")
    if script_key is None and "-sC" in opts:
        script_key = "default"
    scripts: tuple[tuple[str, str], ...] = ()
    if script_key and script_key in host.nmap_script_results:
        scripts = tuple(host.nmap_script_results[script_key].items())

    os_name = host.os if "-O" in opts else None
    return 0, build_nmap_xml(host.address, services, scripts, os_name), b""


def _mock_nuclei(fixture: ScenarioFixture, argv: list[str]) -> tuple[int, bytes, bytes]:
    tokens = argv[1:]
    target = _flag_value(tokens, "-u") or ""
    severities = _flag_value(tokens, "-severity")
    template_ids = _flag_value(tokens, "-id")

    bare_host = urlsplit(target).hostname if "://" in target else target
    host = fixture.host(bare_host or "")
    if host is None:
        return 0, b"", b""

    findings = list(host.nuclei_findings)
    if severities:
        allowed = set(severities.split(","))
        findings = [f for f in findings if f.severity in allowed]
    if template_ids:
        allowed = set(template_ids.split(","))
        findings = [f for f in findings if f.template_id in allowed]

    lines = [
        json.dumps(
            {
                "template-id": f.template_id,
                "info": {"severity": f.severity},
                "matched-at": f.matched_at,
            }
        )
        for f in findings
    ]
    return 0, ("\n".join(lines) + ("\n" if lines else "")).encode(), b""


def _render_http(route_status: int, reason: str, headers: dict[str, str], body: str) -> bytes:
    head = [f"HTTP/1.1 {route_status} {reason}"]
    head += [f"{name}: {value}" for name, value in headers.items()]
    if "Content-Length" not in headers:
        head.append(f"Content-Length: {len(body.encode())}")
    return ("\r\n".join(head) + "\r\n\r\n" + body).encode()


def _mock_curl(fixture: ScenarioFixture, argv: list[str]) -> tuple[int, bytes, bytes]:
    tokens = argv[1:]
    url = tokens[-1] if tokens else ""
    method = (_flag_value(tokens, "-X") or "GET").upper()
    parts = urlsplit(url)
    host = fixture.host(parts.hostname or "")
    if host is None:
        port = parts.port or (443 if parts.scheme == "https" else 80)
        stderr = f"curl: (7) Failed to connect to {parts.hostname} port {port}: Connection refused"
        return 7, b"", stderr.encode()
    path = parts.path or "/"
    route = host.route(method, path)
    if route is None:
        body = "<html><head><title>404 Not Found</title></head><body>Not Found</body></html>"
        return 0, _render_http(404, "Not Found", {"Content-Type": "text/html"}, body), b""
    return 0, _render_http(route.status, route.reason, route.headers, route.body), b""


def mock_exec(fixture: ScenarioFixture, argv: list[str]) -> tuple[int, bytes, bytes]:
    """Dispatch one argv to the matching synthetic scanner."""
    if not argv:
        return 127, b"", b"empty argv"
    prog = argv[0].rsplit("/", 1)[-1]
    if prog == "nmap":
        return _mock_nmap(fixture, argv)
    if prog == "nuclei":
        return _mock_nuclei(fixture, argv)
    if prog == "curl":
        return _mock_curl(fixture, argv)
    return 127, b"", f"{prog}: unsupported binary".encode()


class MockExecBackend:
    """ExecBackend over a scenario fixture; stdin and timeout are ignored."""

    def __init__(self, fixture: ScenarioFixture):
        self.fixture = fixture

    def run(
        self, argv: list[str], stdin: bytes | None = None, timeout: float | None = None
    ) -> tuple[int, bytes, bytes]:
        return mock_exec(self.fixture, argv)
