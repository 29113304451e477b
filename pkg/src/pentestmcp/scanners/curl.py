"""The curl MCP server: raw HTTP requests with response headers included.

curl runs with -i -s, so the tool returns the status line, headers, and
body verbatim. A non-2xx status is data, not an error; only transport
failures (connection refused, DNS) surface as tool errors.
"""

from __future__ import annotations

import argparse
import sys

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
    CURL_FORBIDDEN_FLAGS,
    OptionsError,
    TargetError,
    sanitize_options,
    validate_header,
    validate_url_target,
)

DEFAULT_TIMEOUT_SECS = 30.0


def curl_request(
    backend: ExecBackend,
    url: str,
    method: str = "GET",
    headers: list[str] | None = None,
    body: str | None = None,
    options: str = "",
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> ToolCallResult:
    try:
        validate_url_target(url)
        tokens = sanitize_options(options, CURL_FORBIDDEN_FLAGS)
        checked_headers = [validate_header(h) for h in (headers or [])]
    except (TargetError, OptionsError) as exc:
        raise ToolError(str(exc)) from exc
    if body is not None and "\x00" in body:
        raise ToolError("request body contains NUL byte")

    argv = ["curl", "-i", "-s", "-X", method.upper()]
    for header in checked_headers:
        argv += ["-H", header]
    if body is not None:
        argv += ["--data", body]
    argv += [*tokens, url]

    code, stdout, stderr = backend.run(argv, timeout=timeout)
    if code != 0:
        raise ToolError(f"curl exited with status {code}: {stderr.decode(errors='replace').strip()}")
    return ToolCallResult.text(stdout.decode(errors="replace"))


CURL_REQUEST_DESCRIPTOR = ToolDescriptor(
    name="curl_request",
    description=(
        "Send one HTTP request with curl. Parameters: 'url' is an http/https URL; "
        "'method' defaults to GET; 'headers' is an optional list of 'Name: value' "
        "strings; 'body' is an optional request body; 'options' is an optional string "
        "of extra curl options. Returns the raw response: status line, headers, and "
        "body. A non-2xx status is returned as data, not as an error."
    ),
    input_schema={
        "type": "object",
        "properties": {
            "url": {"type": "string", "description": "Request URL (http or https)"},
            "method": {"type": "string", "description": "HTTP method, default GET"},
            "headers": {"type": "array", "description": "Header lines, 'Name: value' each"},
            "body": {"type": "string", "description": "Request body"},
            "options": {"type": "string", "description": "Extra curl options"},
        },
        "required": ["url"],
    },
)


def build_registry(backend: ExecBackend, timeout: float) -> ToolRegistry:
    registry = ToolRegistry()

    def handler(args: dict) -> ToolCallResult:
        return curl_request(
            backend,
            args["url"],
            method=args.get("method", "GET"),
            headers=args.get("headers"),
            body=args.get("body"),
            options=args.get("options", ""),
            timeout=timeout,
        )

    registry.register(CURL_REQUEST_DESCRIPTOR, handler)
    return registry


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="pentestmcp-curl", description="curl MCP server on stdio")
    add_backend_args(parser, DEFAULT_TIMEOUT_SECS)
    args = parser.parse_args(argv)
    backend = build_exec_backend(args)
    server = McpServer("pentestmcp-curl", __version__, build_registry(backend, args.timeout_secs))
    serve(server, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    main()
