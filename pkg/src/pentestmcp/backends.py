"""Execution backends for the scanner servers.

A backend runs a scanner argv and returns (exit code, stdout, stderr).
The real backend shells out to the installed tools (never via a shell);
the mock backend synthesizes output from a scenario fixture so the whole
chain runs with no network and no targets.
"""

from __future__ import annotations

import argparse
import os
import subprocess
from typing import Protocol

from .resources import resolve_scenario

SCENARIO_ENV = "PENTESTMCP_MOCK_SCENARIO"


class ExecBackend(Protocol):
    def run(
        self, argv: list[str], stdin: bytes | None = None, timeout: float | None = None
    ) -> tuple[int, bytes, bytes]: ...


class SubprocessBackend:
    """Runs scanner argv vectors directly; argv only, never a shell."""

    def run(
        self, argv: list[str], stdin: bytes | None = None, timeout: float | None = None
    ) -> tuple[int, bytes, bytes]:
        try:
            proc = subprocess.run(
                argv,
                input=stdin,
                capture_output=True,
                timeout=timeout,
                shell=False,
            )
        except FileNotFoundError:
            return 127, b"", f"{argv[0]}: not found".encode()
        except subprocess.TimeoutExpired:
            return 124, b"", f"{argv[0]}: timed out after {timeout}s".encode()
        return proc.returncode, proc.stdout, proc.stderr


def add_backend_args(parser: argparse.ArgumentParser, default_timeout: float) -> None:
    parser.add_argument("--backend", choices=("real", "mock"), default="mock")
    parser.add_argument(
        "--scenario",
        default=None,
        help=f"scenario fixture name or path for the mock backend ({SCENARIO_ENV} as fallback)",
    )
    parser.add_argument("--timeout-secs", type=float, default=default_timeout)


def build_exec_backend(args: argparse.Namespace) -> ExecBackend:
    """Construct the backend selected by --backend/--scenario flags."""
    if args.backend == "real":
        return SubprocessBackend()
    scenario = args.scenario or os.environ.get(SCENARIO_ENV)
    if not scenario:
        raise SystemExit(f"mock backend needs --scenario or {SCENARIO_ENV}")
    from .mock.scan_exec import MockExecBackend
    from .mock.scenario import load_scenario

    return MockExecBackend(load_scenario(resolve_scenario(scenario)))
