"""The nmap, curl, and nuclei MCP servers."""
