"""Plan loading and the deterministic step runner.

A plan is a scripted tool-call trace: each step names a server and tool,
gives arguments that may reference ${variable} bindings, lists substrings
the response must contain, and may extract new bindings from the response
(session ids, for example). Execution stops at the first failing step.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .client import McpClientError, ServerHandle
from .report import TraceRecord, TraceReport

SERVERS = ("nmap", "curl", "nuclei", "metasploit")

PLACEHOLDER = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

_CONVERTERS = {"str": str, "int": int}


class PlanError(ValueError):
    """Plan file violates the format or references unbound variables."""


class BindingNotFound(ValueError):
    """An extraction pattern found no match in the response."""


@dataclass(frozen=True)
class BindSpec:
    var: str
    pattern: str
    convert: str = "str"


@dataclass(frozen=True)
class PlanStep:
    server: str
    tool: str
    arguments: dict
    expect: tuple[str, ...] = ()
    expect_error: bool = False
    bind: tuple[BindSpec, ...] = ()


@dataclass(frozen=True)
class Plan:
    name: str
    steps: tuple[PlanStep, ...]
    bindings: dict = field(default_factory=dict)
    targets: tuple[str, ...] = ()


def placeholders_in(value) -> set[str]:
    """Every ${var} referenced anywhere inside a value tree."""
    if isinstance(value, str):
        return set(PLACEHOLDER.findall(value))
    if isinstance(value, dict):
        return set().union(*(placeholders_in(v) for v in value.values()), set())
    if isinstance(value, list):
        return set().union(*(placeholders_in(v) for v in value), set())
    return set()


def substitute(value, bindings: dict):
    """Resolve placeholders; a string that is exactly one placeholder takes
    the bound value with its type intact."""
    if isinstance(value, str):
        whole = PLACEHOLDER.fullmatch(value)
        if whole:
            return bindings[whole.group(1)]
        return PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), value)
    if isinstance(value, dict):
        return {k: substitute(v, bindings) for k, v in value.items()}
    if isinstance(value, list):
        return [substitute(v, bindings) for v in value]
    return value


def extract_binding(pattern: str, text: str) -> str:
    """First match of a single-capture-group pattern over response text."""
    compiled = re.compile(pattern)
    if compiled.groups != 1:
        raise PlanError(f"extraction pattern must have exactly one capture group: {pattern!r}")
    match = compiled.search(text)
    if match is None:
        raise BindingNotFound(f"pattern {pattern!r} matched nothing")
    return match.group(1)


def _parse_step(obj, index: int) -> PlanStep:
    path = f"steps[{index}]"
    if not isinstance(obj, dict):
        raise PlanError(f"{path}: expected a mapping")
    server = obj.get("server")
    if server not in SERVERS:
        raise PlanError(f"{path}.server: must be one of {', '.join(SERVERS)}, got {server!r}")
    tool = obj.get("tool")
    if not isinstance(tool, str) or not tool:
        raise PlanError(f"{path}.tool: missing or empty")
    arguments = obj.get("arguments") or {}
    if not isinstance(arguments, dict):
        raise PlanError(f"{path}.arguments: expected a mapping")
    expect = obj.get("expect") or []
    if not isinstance(expect, list) or not all(isinstance(e, str) for e in expect):
        raise PlanError(f"{path}.expect: expected a list of strings")
    binds = []
    for j, spec in enumerate(obj.get("bind") or []):
        if not isinstance(spec, dict) or "var" not in spec or "pattern" not in spec:
            raise PlanError(f"{path}.bind[{j}]: needs var and pattern")
        convert = spec.get("convert", "str")
        if convert not in _CONVERTERS:
            raise PlanError(f"{path}.bind[{j}].convert: must be str or int")
        try:
            if re.compile(spec["pattern"]).groups != 1:
                raise PlanError(f"{path}.bind[{j}].pattern: needs exactly one capture group")
        except re.error as exc:
            raise PlanError(f"{path}.bind[{j}].pattern: {exc}") from exc
        binds.append(BindSpec(var=spec["var"], pattern=spec["pattern"], convert=convert))
    return PlanStep(
        server=server,
        tool=tool,
        arguments=arguments,
        expect=tuple(expect),
        expect_error=bool(obj.get("expect_error", False)),
        bind=tuple(binds),
    )


def load_plan(path: str | Path) -> Plan:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise PlanError(f"cannot load plan {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise PlanError(f"plan {path}: expected a mapping at top level")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise PlanError("name: missing or empty")
    steps = tuple(_parse_step(s, i) for i, s in enumerate(doc.get("steps") or []))
    bindings = doc.get("bindings") or {}
    if not isinstance(bindings, dict):
        raise PlanError("bindings: expected a mapping")
    targets = doc.get("targets") or []
    if not isinstance(targets, list):
        raise PlanError("targets: expected a list")
    return Plan(name=name, steps=steps, bindings=dict(bindings), targets=tuple(targets))


def check_bindings(plan: Plan, bindings: dict) -> None:
    """Reject plans referencing variables no earlier step or binding provides."""
    known = set(bindings)
    for i, step in enumerate(plan.steps, start=1):
        missing = placeholders_in(step.arguments) - known
        if missing:
            raise PlanError(f"steps[{i - 1}]: unbound variables: {', '.join(sorted(missing))}")
        known |= {spec.var for spec in step.bind}
    missing = set().union(*(placeholders_in(t) for t in plan.targets), set()) - set(bindings)
    if missing:
        raise PlanError(f"targets: unbound variables: {', '.join(sorted(missing))}")


def _run_step(handle: ServerHandle, step: PlanStep, arguments: dict, bindings: dict) -> tuple[str, str]:
    """Execute one resolved step; returns (status, response text)."""
    text, is_error = handle.call_tool(step.tool, arguments)
    if is_error != step.expect_error:
        status = "tool-error" if is_error else "expectation-failed"
        return status, text
    for needle in step.expect:
        if needle not in text:
            return "expectation-failed", text
    for spec in step.bind:
        try:
            value = extract_binding(spec.pattern, text)
        except BindingNotFound:
            return "expectation-failed", text
        bindings[spec.var] = _CONVERTERS[spec.convert](value)
    return "pass", text


def run_plan(handles: dict[str, ServerHandle], plan: Plan, bindings: dict | None = None) -> TraceReport:
    """Execute a plan's steps in order, stopping at the first failure."""
    resolved_bindings = dict(plan.bindings)
    resolved_bindings.update(bindings or {})
    check_bindings(plan, resolved_bindings)

    records: list[TraceRecord] = []
    outcome = "completed"
    for index, step in enumerate(plan.steps, start=1):
        handle = handles.get(step.server)
        if handle is None:
            raise PlanError(f"no server handle for {step.server!r}")
        arguments = substitute(step.arguments, resolved_bindings)
        try:
            status, response = _run_step(handle, step, arguments, resolved_bindings)
        except McpClientError as exc:
            status, response = "tool-error", str(exc)
        records.append(
            TraceRecord(
                step=index,
                server=step.server,
                tool=step.tool,
                arguments=arguments,
                response=response,
                status=status,
            )
        )
        if status != "pass":
            outcome = f"failed-at-step {index}"
            break
    return TraceReport(plan_name=plan.name, records=tuple(records), outcome=outcome)
