"""Input sanitization for scanner targets and command-line options.

Scanner invocations never touch a shell (argv vectors only), but option
strings arrive verbatim from agents, so every token is whitelisted before
it reaches an argv. Output-redirection flags are rejected outright: the
servers own the output format of the tools they wrap.
"""

from __future__ import annotations

import ipaddress
import re
from urllib.parse import urlsplit

SAFE_TOKEN = re.compile(r"^[A-Za-z0-9._,:/=+@%-]+$")

_HOSTNAME = re.compile(
    r"^(?=.{1,253}$)[A-Za-z0-9]([A-Za-z0-9-]{0,61}[A-Za-z0-9])?"
    r"(\.[A-Za-z0-9]([A-Za-z0-9-]{0,61}[A-Za-z0-9])?)*$"
)

# Flags that would redirect scanner output to files, per wrapped tool.
NMAP_FORBIDDEN_FLAGS = ("-oN", "-oG", "-oA", "-oX", "-oS")
NUCLEI_FORBIDDEN_FLAGS = ("-o",)
CURL_FORBIDDEN_FLAGS = ("-o", "--output", "-O", "--remote-name")


class OptionsError(ValueError):
    """An option string failed sanitization; message names the token."""


class TargetError(ValueError):
    """A target value is not one of the admitted syntaxes."""


def sanitize_options(options: str, forbidden_flags: tuple[str, ...] = ()) -> list[str]:
    """Split an option string into vetted argv tokens.

    Splits on whitespace and accepts only tokens drawn from a safe
    character set; anything carrying shell metacharacters, NUL bytes, or
    a forbidden flag prefix raises OptionsError naming the token.
    """
    tokens = options.split()
    for token in tokens:
        if "\x00" in token:
            raise OptionsError(f"rejected option token {token!r}: contains NUL byte")
        if not SAFE_TOKEN.match(token):
            raise OptionsError(f"rejected option token {token!r}: contains unsafe characters")
        for flag in forbidden_flags:
            if token == flag or token.startswith(flag):
                raise OptionsError(
                    f"rejected option token {token!r}: output redirection is controlled by the server"
                )
    return tokens


def _reject_raw(value: str) -> None:
    if not value:
        raise TargetError("target must not be empty")
    if any(c.isspace() for c in value) or "\x00" in value:
        raise TargetError(f"target {value!r} contains whitespace or NUL")
    if any(c in value for c in ";|&$`><()\\\"'"):
        raise TargetError(f"target {value!r} contains shell metacharacters")


def validate_host_target(value: str) -> str:
    """Admit an IPv4/IPv6 address, hostname, or CIDR range."""
    _reject_raw(value)
    try:
        ipaddress.ip_address(value)
        return value
    except ValueError:
        pass
    if "/" in value:
        try:
            ipaddress.ip_network(value, strict=False)
            return value
        except ValueError:
            raise TargetError(f"target {value!r} is not a valid CIDR range") from None
    if _HOSTNAME.match(value):
        return value
    raise TargetError(f"target {value!r} is not an address, hostname, or CIDR range")


def validate_url_target(value: str, schemes: tuple[str, ...] = ("http", "https")) -> str:
    """Admit an http/https URL with a concrete host part."""
    _reject_raw(value)
    parts = urlsplit(value)
    if parts.scheme not in schemes:
        raise TargetError(f"unsupported scheme {parts.scheme!r} in target {value!r}")
    if not parts.hostname:
        raise TargetError(f"target {value!r} has no host")
    return value


def validate_scan_target(value: str) -> str:
    """Admit what nuclei takes: a URL or a bare host."""
    if "://" in value:
        return validate_url_target(value)
    return validate_host_target(value)


def validate_header(value: str) -> str:
    """Admit one HTTP header line, blocking CRLF injection."""
    if "\r" in value or "\n" in value or "\x00" in value:
        raise TargetError(f"header {value!r} contains control characters")
    if ":" not in value:
        raise TargetError(f"header {value!r} is not of the form 'Name: value'")
    return value
