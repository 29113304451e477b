"""Transport-agnostic MCP server core shared by all pentestmcp servers.

Speaks JSON-RPC 2.0, one UTF-8 message per line. A server is a registry
of tools plus a sequential request loop: initialize, then tools/list and
tools/call until the input stream closes. Tool-level failures (argument
validation, backend errors) come back as is_error results so an agent can
replan; only malformed traffic produces protocol-level errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, BinaryIO, Callable, Iterable

PROTOCOL_VERSION = "2024-11-05"

# Reserved JSON-RPC error codes.
PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
# Application code: request arrived before the initialize handshake.
NOT_INITIALIZED = -32002

MAX_RESULT_BYTES = 64 * 1024
TRUNCATION_MARKER = "[truncated]"

_TYPE_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "object": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
    "null": lambda v: v is None,
}


class ProtocolError(Exception):
    """Malformed JSON-RPC traffic."""

    def __init__(self, code: int, message: str, msg_id: Any = None):
        super().__init__(message)
        self.code = code
        self.msg_id = msg_id


class ToolError(Exception):
    """Tool-level failure, reported to the agent as an is_error result."""


class UnknownToolError(Exception):
    """tools/call named a tool that is not registered (protocol-level)."""


@dataclass(frozen=True)
class ErrorObject:
    code: int
    message: str
    data: Any = None


@dataclass(frozen=True)
class RpcMessage:
    """One JSON-RPC message: request, response, or notification."""

    kind: str
    id: int | str | None = None
    method: str | None = None
    params: Any = None
    result: Any = None
    error: ErrorObject | None = None

    def __post_init__(self):
        if self.kind == "request":
            if self.method is None or self.id is None:
                raise ValueError("request needs method and id")
        elif self.kind == "notification":
            if self.method is None or self.id is not None:
                raise ValueError("notification needs method and no id")
        elif self.kind == "response":
            if (self.error is None) == (self.result is _ABSENT):
                raise ValueError("response carries exactly one of result or error")
        else:
            raise ValueError(f"unknown message kind: {self.kind!r}")


class _Absent:
    """Marker distinguishing an absent result from a null one."""

    def __repr__(self):
        return "<absent>"


_ABSENT = _Absent()


def request(msg_id: int | str, method: str, params: Any = None) -> RpcMessage:
    return RpcMessage(kind="request", id=msg_id, method=method, params=params)


def notification(method: str, params: Any = None) -> RpcMessage:
    return RpcMessage(kind="notification", method=method, params=params)


def response(msg_id: int | str | None, result: Any) -> RpcMessage:
    return RpcMessage(kind="response", id=msg_id, result=result)


def error_response(msg_id: int | str | None, code: int, message: str, data: Any = None) -> RpcMessage:
    return RpcMessage(
        kind="response", id=msg_id, result=_ABSENT, error=ErrorObject(code, message, data)
    )


def encode_message(msg: RpcMessage) -> bytes:
    """Serialize one message to a single newline-terminated JSON line."""
    obj: dict[str, Any] = {"jsonrpc": "2.0"}
    if msg.kind in ("request", "notification"):
        obj["method"] = msg.method
        if msg.params is not None:
            obj["params"] = msg.params
        if msg.kind == "request":
            obj["id"] = msg.id
    else:
        obj["id"] = msg.id
        if msg.error is not None:
            err: dict[str, Any] = {"code": msg.error.code, "message": msg.error.message}
            if msg.error.data is not None:
                err["data"] = msg.error.data
            obj["error"] = err
        else:
            obj["result"] = msg.result
    return json.dumps(obj, ensure_ascii=False).encode("utf-8") + b"\n"


def decode_message(line: bytes) -> RpcMessage:
    """Parse one JSON line into an RpcMessage.

    Raises ProtocolError with PARSE_ERROR for invalid JSON and
    INVALID_REQUEST for JSON that is not a well-formed JSON-RPC message.
    """
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(PARSE_ERROR, f"parse error: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError(INVALID_REQUEST, "message is not an object")
    if obj.get("jsonrpc") != "2.0":
        raise ProtocolError(INVALID_REQUEST, "missing jsonrpc version", obj.get("id"))
    msg_id = obj.get("id")
    if msg_id is not None and not isinstance(msg_id, (int, str)):
        raise ProtocolError(INVALID_REQUEST, "id must be an integer or string")
    if "method" in obj:
        method = obj["method"]
        if not isinstance(method, str):
            raise ProtocolError(INVALID_REQUEST, "method must be a string", msg_id)
        kind = "request" if "id" in obj and msg_id is not None else "notification"
        return RpcMessage(kind=kind, id=msg_id, method=method, params=obj.get("params"))
    if "error" in obj:
        err = obj["error"]
        if not isinstance(err, dict) or not isinstance(err.get("code"), int):
            raise ProtocolError(INVALID_REQUEST, "malformed error object", msg_id)
        if "result" in obj:
            raise ProtocolError(INVALID_REQUEST, "response carries both result and error", msg_id)
        return RpcMessage(
            kind="response",
            id=msg_id,
            result=_ABSENT,
            error=ErrorObject(err["code"], err.get("message", ""), err.get("data")),
        )
    if "result" in obj:
        return RpcMessage(kind="response", id=msg_id, result=obj["result"])
    raise ProtocolError(INVALID_REQUEST, "message is neither request nor response", msg_id)


def validate_arguments(schema: dict, args: dict) -> str | None:
    """Check args against a tool input schema; None means ok.

    Reports the first missing required property in schema declaration
    order, with the exact message shape agents see in traces.
    """
    props = schema.get("properties", {})
    required = set(schema.get("required", ()))
    for name in props:
        if name in required and name not in args:
            return f"Input validation error: '{name}' is a required property"
    for name, value in args.items():
        spec = props.get(name)
        if spec is None:
            continue
        expected = spec.get("type")
        check = _TYPE_CHECKS.get(expected)
        if check is not None and not check(value):
            return f"Input validation error: '{name}' is not of type '{expected}'"
    return None


@dataclass(frozen=True)
class ToolDescriptor:
    """A tool's name, contract text, and declarative input schema."""

    name: str
    description: str
    input_schema: dict

    def __post_init__(self):
        if not self.name or not all(c.islower() or c.isdigit() or c == "_" for c in self.name):
            raise ValueError(f"tool name must be lowercase/underscore: {self.name!r}")
        if not self.description.strip():
            raise ValueError(f"tool {self.name}: description must not be empty")
        props = self.input_schema.get("properties", {})
        for req in self.input_schema.get("required", ()):
            if req not in props:
                raise ValueError(f"tool {self.name}: required property {req!r} not declared")

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "inputSchema": self.input_schema,
        }


@dataclass(frozen=True)
class ToolCallResult:
    """Ordered text blocks plus a tool-level error flag."""

    content: tuple[str, ...]
    is_error: bool = False

    def __post_init__(self):
        if not self.content:
            raise ValueError("result needs at least one content block")

    @classmethod
    def text(cls, *blocks: str) -> "ToolCallResult":
        return cls(content=tuple(blocks))

    @classmethod
    def fail(cls, message: str) -> "ToolCallResult":
        return cls(content=(message,), is_error=True)

    def joined(self) -> str:
        return "\n".join(self.content)


ToolHandler = Callable[[dict], ToolCallResult]


class ToolRegistry:
    """Immutable-once-built mapping of tool names to handlers.

    A tool may carry hidden aliases: callable via tools/call but never
    reported by tools/list.
    """

    def __init__(self):
        self._descriptors: list[ToolDescriptor] = []
        self._handlers: dict[str, tuple[ToolDescriptor, ToolHandler]] = {}

    def register(
        self,
        descriptor: ToolDescriptor,
        handler: ToolHandler,
        aliases: Iterable[str] = (),
    ) -> None:
        for name in (descriptor.name, *aliases):
            if name in self._handlers:
                raise ValueError(f"duplicate tool name: {name}")
            self._handlers[name] = (descriptor, handler)
        self._descriptors.append(descriptor)

    def descriptors(self) -> tuple[ToolDescriptor, ...]:
        return tuple(self._descriptors)

    def resolve(self, name: str) -> tuple[ToolDescriptor, ToolHandler]:
        try:
            return self._handlers[name]
        except KeyError:
            raise UnknownToolError(name) from None

    def __len__(self) -> int:
        return len(self._descriptors)


def _truncate_blocks(blocks: tuple[str, ...]) -> tuple[str, ...]:
    """Cap total result text at MAX_RESULT_BYTES, marking the cut."""
    budget = MAX_RESULT_BYTES
    out: list[str] = []
    for block in blocks:
        size = len(block.encode("utf-8"))
        if size <= budget:
            out.append(block)
            budget -= size
            continue
        cut = block.encode("utf-8")[:budget].decode("utf-8", errors="ignore")
        out.append(cut + TRUNCATION_MARKER)
        break
    if not out:
        out.append(TRUNCATION_MARKER)
    return tuple(out)


class McpServer:
    """Tool registry plus JSON-RPC method dispatch for one server process."""

    def __init__(self, name: str, version: str, registry: ToolRegistry):
        if not len(registry):
            raise ValueError("registry must not be empty")
        self.name = name
        self.version = version
        self.registry = registry
        self.initialized = False

    def handle_initialize(self, params: Any) -> dict:
        self.initialized = True
        return {
            "protocolVersion": PROTOCOL_VERSION,
            "capabilities": {"tools": {}},
            "serverInfo": {"name": self.name, "version": self.version},
        }

    def handle_tools_list(self) -> dict:
        return {"tools": [d.to_wire() for d in self.registry.descriptors()]}

    def handle_tools_call(self, name: str, arguments: dict) -> ToolCallResult:
        """Validate arguments, run the handler, wrap failures as data."""
        descriptor, handler = self.registry.resolve(name)
        failure = validate_arguments(descriptor.input_schema, arguments)
        if failure is not None:
            return ToolCallResult.fail(failure)
        try:
            result = handler(arguments)
        except ToolError as exc:
            return ToolCallResult.fail(str(exc))
        except Exception as exc:  # tool bugs are data for the agent, not crashes
            return ToolCallResult.fail(f"internal tool error: {exc}")
        return ToolCallResult(content=_truncate_blocks(result.content), is_error=result.is_error)

    def handle_message(self, msg: RpcMessage) -> RpcMessage | None:
        """Dispatch one message; None means nothing to send back."""
        if msg.kind == "notification":
            return None
        if msg.kind != "request":
            return None
        if msg.method == "initialize":
            return response(msg.id, self.handle_initialize(msg.params))
        if msg.method == "ping":
            return response(msg.id, {})
        if not self.initialized:
            return error_response(msg.id, NOT_INITIALIZED, "server not initialized")
        if msg.method == "tools/list":
            return response(msg.id, self.handle_tools_list())
        if msg.method == "tools/call":
            params = msg.params if isinstance(msg.params, dict) else {}
            name = params.get("name")
            arguments = params.get("arguments") or {}
            if not isinstance(name, str) or not isinstance(arguments, dict):
                return error_response(msg.id, INVALID_PARAMS, "tools/call needs name and arguments")
            try:
                result = self.handle_tools_call(name, arguments)
            except UnknownToolError:
                return error_response(msg.id, INVALID_PARAMS, f"unknown tool: {name}")
            return response(
                msg.id,
                {
                    "content": [{"type": "text", "text": block} for block in result.content],
                    "isError": result.is_error,
                },
            )
        return error_response(msg.id, METHOD_NOT_FOUND, f"method not found: {msg.method}")


def serve(server: McpServer, stdin: BinaryIO, stdout: BinaryIO) -> None:
    """Run the sequential request loop until the input stream closes."""
    while True:
        line = stdin.readline()
        if not line:
            return
        if not line.strip():
            continue
        try:
            msg = decode_message(line)
        except ProtocolError as exc:
            reply = error_response(exc.msg_id, exc.code, str(exc))
            stdout.write(encode_message(reply))
            stdout.flush()
            continue
        reply = server.handle_message(msg)
        if reply is not None:
            stdout.write(encode_message(reply))
            stdout.flush()
