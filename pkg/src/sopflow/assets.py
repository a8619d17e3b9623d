"""Loaders for packaged data: workflows, the action repository, prompts, fixtures."""

from __future__ import annotations

import json
from importlib import resources

from .parser import SopWorkflow, parse_sop

_DATA = resources.files("sopflow") / "data"


def _read_text(relative: str) -> str:
    return (_DATA / relative).read_text(encoding="utf-8")


def workflow_names() -> list[str]:
    folder = _DATA / "sops"
    return sorted(p.name.removesuffix(".sop") for p in folder.iterdir() if p.name.endswith(".sop"))


def load_workflow(name: str) -> SopWorkflow:
    """Parse one of the shipped SOPs by bare name (no extension)."""
    return parse_sop(_read_text(f"sops/{name}.sop"), name=name)


def load_repository():
    from .gar import load_repository_json

    return load_repository_json(_read_text("gar.json"))


def load_prompt(role: str) -> str:
    """Raw prompt template for one of the roles: state, action, user."""
    return _read_text(f"prompts/{role}_prompt.txt")


def load_knowledge() -> dict[str, str]:
    return json.loads(_read_text("knowledge.json"))


def load_registry_blueprint() -> dict:
    return json.loads(_read_text("registry.json"))


def load_default_config() -> dict:
    return json.loads(_read_text("config.json"))


def load_suite(name: str) -> dict:
    return json.loads(_read_text(f"suites/{name}.json"))


def suite_names() -> list[str]:
    folder = _DATA / "suites"
    return sorted(p.name.removesuffix(".json") for p in folder.iterdir() if p.name.endswith(".json"))


def load_script(name: str) -> dict:
    return json.loads(_read_text(f"scripts/{name}.json"))
