"""pentestmcp-run: spawn the four servers and replay a kill-chain plan.

Mock mode needs only a scenario fixture. Real mode is interlocked: it
refuses to start unless --i-have-authorization is set and every target
the plan touches appears in the allowlist file, and it checks that before
any server is spawned or any tool is called.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import client
from .plan import PlanError, load_plan, run_plan, substitute
from .report import render_structured, render_text
from ..resources import resolve_plan, resolve_scenario

SCANNER_MODULES = {
    "nmap": "pentestmcp.scanners.nmap",
    "curl": "pentestmcp.scanners.curl",
    "nuclei": "pentestmcp.scanners.nuclei",
}
MSF_MODULE = "pentestmcp.msf.server"


def build_server_config(backend: str, scenario_path: Path | None) -> dict[str, list[str]]:
    """Command lines for the four servers."""
    config = {}
    for name, module in SCANNER_MODULES.items():
        argv = [sys.executable, "-m", module, "--backend", backend]
        if scenario_path is not None:
            argv += ["--scenario", str(scenario_path)]
        config[name] = argv
    msf = [sys.executable, "-m", MSF_MODULE, "--backend", backend]
    if scenario_path is not None:
        msf += ["--scenario", str(scenario_path)]
    config["metasploit"] = msf
    return config


def _parse_bindings(pairs: list[str]) -> dict:
    bindings = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"--bind needs key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        bindings[key] = value
    return bindings


def _load_allowlist(path: str) -> set[str]:
    entries = set()
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line)
    return entries


def _authorize_real_run(args, plan, bindings) -> str | None:
    """Returns a refusal message, or None when the run may proceed."""
    if not args.i_have_authorization:
        return "refusing --backend real without --i-have-authorization"
    if not args.allowlist:
        return "refusing --backend real without --allowlist"
    try:
        allowed = _load_allowlist(args.allowlist)
    except OSError as exc:
        return f"cannot read allowlist: {exc}"
    targets = [str(substitute(t, bindings)) for t in plan.targets]
    if not targets:
        return "plan declares no targets; refusing a real run"
    rogue = [t for t in targets if t not in allowed]
    if rogue:
        return f"targets not in allowlist: {', '.join(rogue)}"
    return None


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pentestmcp-run", description="deterministic kill-chain plan runner")
    parser.add_argument("--plan", required=True, help="plan name or path")
    parser.add_argument("--scenario", default=None, help="scenario name or path (mock backend)")
    parser.add_argument("--backend", choices=("mock", "real"), default="mock")
    parser.add_argument("--bind", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--report", choices=("text", "structured"), default="text")
    parser.add_argument("--out", default=None, help="write the report here instead of stdout")
    parser.add_argument("--i-have-authorization", action="store_true")
    parser.add_argument("--allowlist", default=None, help="file of permitted targets, one per line")
    args = parser.parse_args(argv)

    try:
        plan = load_plan(resolve_plan(args.plan))
    except (PlanError, FileNotFoundError) as exc:
        print(f"pentestmcp-run: {exc}", file=sys.stderr)
        return 2
    bindings = dict(plan.bindings)
    bindings.update(_parse_bindings(args.bind))

    scenario_path = None
    if args.backend == "real":
        refusal = _authorize_real_run(args, plan, bindings)
        if refusal is not None:
            print(f"pentestmcp-run: {refusal}", file=sys.stderr)
            return 2
    else:
        if not args.scenario:
            print("pentestmcp-run: mock backend needs --scenario", file=sys.stderr)
            return 2
        try:
            scenario_path = resolve_scenario(args.scenario)
        except FileNotFoundError as exc:
            print(f"pentestmcp-run: {exc}", file=sys.stderr)
            return 2

    config = build_server_config(args.backend, scenario_path)
    try:
        handles = client.spawn_servers(config)
    except client.McpStartupError as exc:
        print(f"pentestmcp-run: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_plan(handles, plan, bindings)
    except PlanError as exc:
        print(f"pentestmcp-run: {exc}", file=sys.stderr)
        return 2
    finally:
        client.shutdown_servers(handles)

    rendered = render_text(report) if args.report == "text" else render_structured(report)
    if args.out:
        Path(args.out).write_bytes(rendered)
    else:
        sys.stdout.buffer.write(rendered)
        sys.stdout.buffer.flush()
    return 0 if report.completed else 1


if __name__ == "__main__":
    sys.exit(main())
