"""MCP client and deterministic kill-chain plan runner."""

from .client import McpClientError, McpStartupError, ServerHandle, spawn_servers
from .plan import Plan, PlanError, PlanStep, extract_binding, load_plan, run_plan
from .report import TraceRecord, TraceReport, parse_structured, render_structured, render_text

__all__ = [
    "McpClientError",
    "McpStartupError",
    "Plan",
    "PlanError",
    "PlanStep",
    "ServerHandle",
    "TraceRecord",
    "TraceReport",
    "extract_binding",
    "load_plan",
    "parse_structured",
    "render_structured",
    "render_text",
    "run_plan",
    "spawn_servers",
]
