"""MCP tool servers for penetration-testing workflows.

Four servers (nmap, curl, nuclei, metasploit) expose their tools over
newline-delimited JSON-RPC on stdio, a mocked scenario backend lets the
full kill chain run with no live targets, and a deterministic plan runner
replays scripted tool-call traces against the servers.
"""

__version__ = "0.1.0"
