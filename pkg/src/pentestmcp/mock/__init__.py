"""Deterministic stand-ins for the scanners and the Metasploit daemon."""

from .scenario import ScenarioError, ScenarioFixture, load_scenario

__all__ = ["ScenarioError", "ScenarioFixture", "load_scenario"]
