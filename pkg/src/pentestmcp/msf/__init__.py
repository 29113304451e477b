"""The metasploit MCP server and its MessagePack-RPC client."""

from .client import HttpTransport, InProcessTransport, MsfRpcClient, MsfRpcError, MsfTransportError, RpcEndpoint

__all__ = [
    "HttpTransport",
    "InProcessTransport",
    "MsfRpcClient",
    "MsfRpcError",
    "MsfTransportError",
    "RpcEndpoint",
]
