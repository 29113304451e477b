"""Lookup of shipped scenario fixtures and plans by bare name or path."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def _resolve(kind: str, name_or_path: str) -> Path:
    candidate = Path(name_or_path)
    if candidate.exists():
        return candidate
    packaged = resources.files("pentestmcp") / kind / f"{name_or_path}.yaml"
    if packaged.is_file():
        return Path(str(packaged))
    shipped = sorted(p.name.removesuffix(".yaml") for p in (resources.files("pentestmcp") / kind).iterdir())
    raise FileNotFoundError(
        f"no {kind[:-1]} named {name_or_path!r}; shipped: {', '.join(shipped)}"
    )


def resolve_scenario(name_or_path: str) -> Path:
    return _resolve("scenarios", name_or_path)


def resolve_plan(name_or_path: str) -> Path:
    return _resolve("plans", name_or_path)
