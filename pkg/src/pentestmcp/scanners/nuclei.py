"""The nuclei MCP server: template-driven vulnerability scanning.

nuclei runs in JSONL output mode; findings are parsed and rendered one
per line as '[template-id] [severity] matched-at', the shape agents see
in scan traces.
"""

from __future__ import annotations

import argparse
import json
import sys
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
from ..sanitize import (
    NUCLEI_FORBIDDEN_FLAGS,
    OptionsError,
    TargetError,
    sanitize_options,
    validate_scan_target,
)

DEFAULT_TIMEOUT_SECS = 600.0

SEVERITY_LEVELS = ("info", "low", "medium", "high", "critical")


class NucleiParseError(ValueError):
    """Malformed findings output; message names the line number."""


@dataclass(frozen=True)
class VulnFinding:
    template_id: str
    severity: str
    matched_at: str

    def __post_init__(self):
        if self.severity not in SEVERITY_LEVELS:
            raise ValueError(f"bad severity: {self.severity}")


def parse_nuclei_jsonl(lines: bytes) -> list[VulnFinding]:
    """Parse JSONL findings; blank lines are skipped, order preserved."""
    findings = []
    for number, raw in enumerate(lines.decode(errors="replace").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
            finding = VulnFinding(
                template_id=record["template-id"],
                severity=record["info"]["severity"],
                matched_at=record["matched-at"],
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise NucleiParseError(f"malformed nuclei finding at line {number}: {exc}") from exc
        findings.append(finding)
    return findings


def render_findings(findings: list[VulnFinding]) -> str:
    if not findings:
        return "no findings"
    return "\n".join(f"[{f.template_id}] [{f.severity}] {f.matched_at}" for f in findings)


def nuclei_scan(
    backend: ExecBackend,
    target: str,
    severity: str | None = None,
    templates: str | None = None,
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> ToolCallResult:
    try:
        validate_scan_target(target)
        filters: list[str] = []
        if severity:
            filters += ["-severity", *sanitize_options(severity, NUCLEI_FORBIDDEN_FLAGS)]
        if templates:
            filters += ["-id", *sanitize_options(templates, NUCLEI_FORBIDDEN_FLAGS)]
    except (TargetError, OptionsError) as exc:
        raise ToolError(str(exc)) from exc
    argv = ["nuclei", "-u", target, "-jsonl", "-silent", *filters]
    code, stdout, stderr = backend.run(argv, timeout=timeout)
    if code != 0:
        raise ToolError(f"nuclei exited with status {code}: {stderr.decode(errors='replace').strip()}")
    return ToolCallResult.text(render_findings(parse_nuclei_jsonl(stdout)))


NUCLEI_SCAN_DESCRIPTOR = ToolDescriptor(
    name="nuclei_scan",
    description=(
        "Run a nuclei vulnerability scan against a target URL or host. Parameters: "
        "'target' is a URL, address, or hostname; 'severity' optionally restricts "
        "findings to a comma-separated severity list (info,low,medium,high,critical); "
        "'templates' optionally restricts to comma-separated template ids. Returns one "
        "line per finding as '[template-id] [severity] matched-at', or 'no findings'."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "target": {"type": "string", "description": "URL, address, or hostname to scan"},
            "severity": {"type": "string", "description": "Severity filter, comma separated"},
            "templates": {"type": "string", "description": "Template id filter, comma separated"},
        },
        "required": ["target"],
    },
)


def build_registry(backend: ExecBackend, timeout: float) -> ToolRegistry:
    registry = ToolRegistry()

    def handler(args: dict) -> ToolCallResult:
        return nuclei_scan(
            backend,
            args["target"],
            severity=args.get("severity"),
            templates=args.get("templates"),
            timeout=timeout,
        )

    registry.register(NUCLEI_SCAN_DESCRIPTOR, handler)
    return registry


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="pentestmcp-nuclei", description="nuclei MCP server on stdio")
    add_backend_args(parser, DEFAULT_TIMEOUT_SECS)
    args = parser.parse_args(argv)
    backend = build_exec_backend(args)
    server = McpServer("pentestmcp-nuclei", __version__, build_registry(backend, args.timeout_secs))
    serve(server, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    main()
