"""Versioned prompt assets shipped with the package.

Templates are plain text files next to this module; edit them in place to
iterate on prompt engineering.  The VERSION file changes whenever any
template changes meaningfully, and its value is folded into run digests so
result files are self-describing.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    """Read a prompt asset (e.g. 'classifier.txt', 'critic/generic.txt')."""
    root = resources.files(__package__)
    path = root
    for piece in name.split("/"):
        path = path / piece
    return path.read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def prompt_version() -> str:
    return load_prompt("VERSION").strip()


def render(template: str, **slots: str) -> str:
    """Fill {name} slots without touching the literal JSON braces templates
    often contain (str.format would choke on those)."""
    for name, value in slots.items():
        template = template.replace("{" + name + "}", str(value))
    return template
