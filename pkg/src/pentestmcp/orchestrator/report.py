"""Trace reports: what a plan run executed and how each step fared."""

from __future__ import annotations

import json
from dataclasses import dataclass

STATUSES = ("pass", "expectation-failed", "tool-error")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    server: str
    tool: str
    arguments: dict
    response: str
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status: {self.status}")


@dataclass(frozen=True)
class TraceReport:
    plan_name: str
    records: tuple[TraceRecord, ...]
    outcome: str

    def __post_init__(self):
        for i, record in enumerate(self.records, start=1):
            if record.step != i:
                raise ValueError(f"record {i} carries step index {record.step}")

    @property
    def tool_call_count(self) -> int:
        return len(self.records)

    @property
    def completed(self) -> bool:
        return self.outcome == "completed"


def render_text(report: TraceReport) -> bytes:
    """Step/tool-call/response rows, the way traces read in a writeup."""
    lines = [
        f"Plan: {report.plan_name}",
        f"Outcome: {report.outcome}",
        f"tool calls: {report.tool_call_count}",
    ]
    for record in report.records:
        lines.append("")
        lines.append(f"Step {record.step} [{record.status}]")
        lines.append(f"  Tool call: {record.server}.{record.tool}({json.dumps(record.arguments)})")
        lines.append("  Response:")
        for response_line in record.response.splitlines() or [""]:
            lines.append(f"    {response_line}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_structured(report: TraceReport) -> bytes:
    doc = {
        "plan": report.plan_name,
        "outcome": report.outcome,
        "tool_call_count": report.tool_call_count,
        "records": [
            {
                "step": r.step,
                "server": r.server,
                "tool": r.tool,
                "arguments": r.arguments,
                "response": r.response,
                "status": r.status,
            }
            for r in report.records
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def parse_structured(data: bytes) -> TraceReport:
    doc = json.loads(data.decode("utf-8"))
    records = tuple(
        TraceRecord(
            step=r["step"],
            server=r["server"],
            tool=r["tool"],
            arguments=r["arguments"],
            response=r["response"],
            status=r["status"],
        )
        for r in doc["records"]
    )
    report = TraceReport(plan_name=doc["plan"], records=records, outcome=doc["outcome"])
    if doc.get("tool_call_count") != report.tool_call_count:
        raise ValueError("tool_call_count does not match the record list")
    return report
