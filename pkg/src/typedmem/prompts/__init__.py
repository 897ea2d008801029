"""Prompt templates, loaded from editable text files.

Placeholders are ``{name}`` tokens. Rendering replaces only the names it is
given, so literal JSON braces inside a template survive untouched.
"""

from __future__ import annotations

import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

TEMPLATE_NAMES = ("router", "episodic", "semantic", "procedural", "answer", "judge")

# Output contracts appended after templates whose text does not pin a format.
ROUTER_FORMAT = (
    '\n\nRespond with only a JSON object: '
    '{"episodic": true|false, "semantic": true|false, "procedural": true|false}'
)
PROCEDURAL_FORMAT = '\n\nReturn only a JSON object: {"title": "...", "content": "..." or ["step", ...]}'

PROMPT_DIR_ENV = "TYPEDMEM_PROMPT_DIR"


@lru_cache(maxsize=None)
def _load(name: str, directory: str | None) -> str:
    if directory is not None:
        text = (Path(directory) / f"{name}.txt").read_text(encoding="utf-8")
    else:
        text = resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text.rstrip("\n")


def load_template(name: str, directory: str | os.PathLike[str] | None = None) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    if directory is None:
        directory = os.environ.get(PROMPT_DIR_ENV) or None
    return _load(name, str(directory) if directory is not None else None)


def render(template: str, **values: str) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out
