import io

import pytest

from pentestmcp import protocol
from pentestmcp.mock.scenario import load_scenario
from pentestmcp.resources import resolve_scenario


@pytest.fixture(scope="session")
def struts_fixture():
    return load_scenario(resolve_scenario("struts-5638"))


@pytest.fixture(scope="session")
def blue_fixture():
    return load_scenario(resolve_scenario("blue-0144"))


def run_loopback(server: protocol.McpServer, payload: bytes) -> list[protocol.RpcMessage]:
    """Drive a server over in-memory pipes; returns its decoded replies."""
    stdin = io.BytesIO(payload)
    stdout = io.BytesIO()
    protocol.serve(server, stdin, stdout)
    return [protocol.decode_message(line + b"\n") for line in stdout.getvalue().splitlines()]


def echo_server(name: str = "pentestmcp-echo") -> protocol.McpServer:
    """One-tool server used by protocol-level tests."""
    registry = protocol.ToolRegistry()
    descriptor = protocol.ToolDescriptor(
        name="echo",
        description="Echoes the 'text' argument back.",
        input_schema={
            "type": "object",
            "properties": {"text": {"type": "string", "description": "Text to echo"}},
            "required": ["text"],
        },
    )
    registry.register(descriptor, lambda args: protocol.ToolCallResult.text(args["text"]))
    return protocol.McpServer(name, "0.0.1", registry)
