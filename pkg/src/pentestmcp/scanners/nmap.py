"""The nmap MCP server: command construction, XML parsing, text rendering.

nmap always runs with -oX - so the server gets machine-readable XML on
stdout; the agent-facing text is rendered from the parsed report in the
familiar port-table shape, with the structured report attached as a
second JSON block for programmatic consumers.
"""

from __future__ import annotations

import argparse
import json
import sys
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .. import __version__
from ..backends import ExecBackend, add_backend_args, build_exec_backend
from ..protocol import (
    McpServer,
    ToolCallResult,
    ToolDescriptor,
    ToolError,
    ToolRegistry,
    serve,
)
from ..sanitize import NMAP_FORBIDDEN_FLAGS, OptionsError, TargetError, sanitize_options, validate_host_target

DEFAULT_TIMEOUT_SECS = 600.0

VALID_STATES = ("open", "closed", "filtered")


class NmapXmlError(ValueError):
    """Malformed or inconsistent nmap XML; message names the byte offset."""


@dataclass(frozen=True)
class ServiceRecord:
    port: int
    protocol: str
    state: str
    service: str
    product: str = ""
    version: str = ""
    extrainfo: str = ""

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")
        if self.protocol not in ("tcp", "udp"):
            raise ValueError(f"bad protocol: {self.protocol}")
        if self.state not in VALID_STATES:
            raise ValueError(f"bad state: {self.state}")


@dataclass(frozen=True)
class ScanReport:
    """Structured nmap results for one target."""

    target: str
    services: tuple[ServiceRecord, ...] = ()
    os_guess: str | None = None
    script_results: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = set()
        for svc in self.services:
            key = (svc.port, svc.protocol)
            if key in seen:
                raise ValueError(f"duplicate service entry: {key}")
            seen.add(key)
        ordered = tuple(sorted(self.services, key=lambda s: (s.port, s.protocol)))
        object.__setattr__(self, "services", ordered)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "services": [vars(s) for s in self.services],
            "os_guess": self.os_guess,
            "script_results": [{"id": i, "output": o} for i, o in self.script_results],
        }


def _byte_offset(xml: bytes, line: int, column: int) -> int:
    lines = xml.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def parse_nmap_xml(xml: bytes) -> ScanReport:
    """Extract services, OS match, and script output from nmap XML.

    A report covers one target; documents with several hosts (range
    scans) report the first host element.
    """
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(xml, line, column)
        raise NmapXmlError(f"malformed nmap XML at byte offset {offset}: {exc}") from exc
    if root.tag != "nmaprun":
        raise NmapXmlError("malformed nmap XML at byte offset 0: root element is not nmaprun")

    host = root.find("host")
    if host is None:
        return ScanReport(target="")

    addr_elem = host.find("address")
    target = addr_elem.get("addr", "") if addr_elem is not None else ""

    services = []
    scripts: list[tuple[str, str]] = []
    for port in host.findall(".//ports/port"):
        state_elem = port.find("state")
        service_elem = port.find("service")
        services.append(
            ServiceRecord(
                port=int(port.get("portid", "0")),
                protocol=port.get("protocol", "tcp"),
                state=state_elem.get("state", "open") if state_elem is not None else "open",
                service=service_elem.get("name", "") if service_elem is not None else "",
                product=service_elem.get("product", "") if service_elem is not None else "",
                version=service_elem.get("version", "") if service_elem is not None else "",
                extrainfo=service_elem.get("extrainfo", "") if service_elem is not None else "",
            )
        )
        for script in port.findall("script"):
            scripts.append((script.get("id", ""), script.get("output", "")))

    for script in host.findall(".//hostscript/script"):
        scripts.append((script.get("id", ""), script.get("output", "")))

    os_guess = None
    osmatch = host.find(".//os/osmatch")
    if osmatch is not None:
        os_guess = osmatch.get("name")

    try:
        return ScanReport(
            target=target,
            services=tuple(services),
            os_guess=os_guess,
            script_results=tuple(scripts),
        )
    except ValueError as exc:
        raise NmapXmlError(f"inconsistent nmap XML: {exc}") from exc


def _version_column(svc: ServiceRecord) -> str:
    parts = [p for p in (svc.product, svc.version) if p]
    text = " ".join(parts)
    if svc.extrainfo:
        text = f"{text} ({svc.extrainfo})" if text else f"({svc.extrainfo})"
    return text


def render_scan_report(report: ScanReport) -> str:
    """Render the port table, scripts, and OS line the way nmap prints them."""
    if not report.target:
        return "0 hosts up (host seems down or did not resolve)"
    lines = [f"Nmap scan report for {report.target}"]
    if not report.services and not report.script_results:
        lines.append("no open ports reported")
        if report.os_guess:
            lines.append(f"OS details: {report.os_guess}")
        return "\n".join(lines)
    if report.services:
        lines.append("PORT     STATE SERVICE      VERSION")
        for svc in report.services:
            row = f"{svc.port}/{svc.protocol} {svc.state:<5} {svc.service:<12} {_version_column(svc)}"
            lines.append(row.rstrip())
    if report.script_results:
        lines.append("")
        lines.append("Host script results:")
        for script_id, output in report.script_results:
            lines.append(f"| {script_id}:")
            for out_line in output.splitlines():
                lines.append(f"|   {out_line}")
    if report.os_guess:
        lines.append("")
        lines.append(f"OS details: {report.os_guess}")
    return "\n".join(lines)


def nmap_scan(backend: ExecBackend, target: str, options: str, timeout: float) -> ToolCallResult:
    """Run one scan and return the rendered report plus its JSON form."""
    try:
        validate_host_target(target)
        tokens = sanitize_options(options, NMAP_FORBIDDEN_FLAGS)
    except (TargetError, OptionsError) as exc:
        raise ToolError(str(exc)) from exc
    argv = ["nmap", *tokens, "-oX", "-", target]
    code, stdout, stderr = backend.run(argv, timeout=timeout)
    if code != 0:
        raise ToolError(f"nmap exited with status {code}: {stderr.decode(errors='replace').strip()}")
    report = parse_nmap_xml(stdout)
    return ToolCallResult.text(render_scan_report(report), json.dumps(report.to_dict()))


NMAP_SCAN_DESCRIPTOR = ToolDescriptor(
    name="nmap_scan",
    description=(
        "Run an nmap scan against a single target. Parameters: 'target' is an IPv4/IPv6 "
        "address, hostname, or CIDR range; 'options' is an optional string of nmap "
        "command-line options such as '-sV -sC -p-' (output-format flags are rejected). "
        "Returns a text report listing each discovered port as "
        "'<port>/<proto> <state> <service> <product> <version>', any script results, and "
        "an OS guess when requested, followed by a JSON block with the same data."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "target": {"type": "string", "description": "Address, hostname, or CIDR range to scan"},
            "options": {"type": "string", "description": "nmap options, whitespace separated"},
        },
        "required": ["target"],
    },
)


def build_registry(backend: ExecBackend, timeout: float) -> ToolRegistry:
    registry = ToolRegistry()

    def handler(args: dict) -> ToolCallResult:
        return nmap_scan(backend, args["target"], args.get("options", ""), timeout)

    registry.register(NMAP_SCAN_DESCRIPTOR, handler)
    return registry


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="pentestmcp-nmap", description="nmap MCP server on stdio")
    add_backend_args(parser, DEFAULT_TIMEOUT_SECS)
    args = parser.parse_args(argv)
    backend = build_exec_backend(args)
    server = McpServer("pentestmcp-nmap", __version__, build_registry(backend, args.timeout_secs))
    serve(server, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    main()
