"""Deterministic YAML emission for the small subset the pipeline writes.

Every output file must be byte-stable across runs and platforms, so instead
of a general-purpose YAML library this module renders a tiny document model
with fixed rules: two-space indentation, block style everywhere except an
explicit flow list, and single-quoting exactly when a plain scalar would be
misread.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_NUMBER = re.compile(r"^[+-]?(\d+|\d*\.\d+|\d+\.\d*)([eE][+-]?\d+)?$")
_BOOLISH = {
    "true", "false", "yes", "no", "on", "off", "null", "none", "y", "n", "~",
}
_LEAD_FORBIDDEN = set("-?:,[]{}#&*!|>'\"%@` \t")


def quote_scalar(value: str) -> str:
    """Return the scalar as written in output: plain, or single-quoted."""
    if _needs_quote(value):
        return "'" + value.replace("'", "''") + "'"
    return value


def _needs_quote(value: str) -> bool:
    if value == "" or value != value.strip():
        return True
    if value[0] in _LEAD_FORBIDDEN:
        return True
    if value.endswith(":"):
        return True
    if ": " in value or " #" in value:
        return True
    if "\n" in value or "\t" in value:
        return True
    if value.lower() in _BOOLISH:
        return True
    if _NUMBER.match(value):
        return True
    return False


@dataclass
class Comment:
    text: str


@dataclass
class FlowList:
    items: list[str]


@dataclass
class YMap:
    # entries are (key, value) pairs; value None emits a bare "key:" line
    entries: list = field(default_factory=list)

    def add(self, key: str, value=None) -> "YMap":
        self.entries.append((key, value))
        return self

    def comment(self, text: str) -> "YMap":
        self.entries.append(Comment(text))
        return self


@dataclass
class YSeq:
    items: list = field(default_factory=list)

    def add(self, item) -> "YSeq":
        self.items.append(item)
        return self


def render_document(root, doc_start: bool = False) -> str:
    lines: list[str] = []
    if doc_start:
        lines.append("---")
    _render(root, 0, lines)
    return "\n".join(lines) + "\n"


def _render(value, indent: int, lines: list[str]) -> None:
    pad = " " * indent
    if isinstance(value, YMap):
        for entry in value.entries:
            if isinstance(entry, Comment):
                lines.append(f"{pad}# {entry.text}")
                continue
            key, val = entry
            if val is None:
                lines.append(f"{pad}{key}:")
            elif isinstance(val, str):
                lines.append(f"{pad}{key}: {quote_scalar(val)}")
            elif isinstance(val, FlowList):
                inner = ", ".join(quote_scalar(i) for i in val.items)
                lines.append(f"{pad}{key}: [ {inner} ]")
            elif isinstance(val, (YMap, YSeq)):
                lines.append(f"{pad}{key}:")
                _render(val, indent + 2, lines)
            else:
                raise TypeError(f"unsupported value type {type(val).__name__}")
    elif isinstance(value, YSeq):
        for item in value.items:
            if isinstance(item, str):
                lines.append(f"{pad}- {quote_scalar(item)}")
            elif isinstance(item, YMap):
                _render_seq_map(item, indent, lines)
            else:
                raise TypeError(f"unsupported sequence item {type(item).__name__}")
    else:
        raise TypeError(f"unsupported document root {type(value).__name__}")


def _render_seq_map(item: YMap, indent: int, lines: list[str]) -> None:
    pad = " " * indent
    first = True
    for entry in item.entries:
        if isinstance(entry, Comment):
            lines.append(f"{pad}  # {entry.text}")
            continue
        key, val = entry
        lead = f"{pad}- " if first else f"{pad}  "
        if val is None:
            lines.append(f"{lead}{key}:")
        elif isinstance(val, str):
            lines.append(f"{lead}{key}: {quote_scalar(val)}")
        elif isinstance(val, FlowList):
            inner = ", ".join(quote_scalar(i) for i in val.items)
            lines.append(f"{lead}{key}: [ {inner} ]")
        elif isinstance(val, (YMap, YSeq)):
            lines.append(f"{lead}{key}:")
            _render(val, indent + 4, lines)
        else:
            raise TypeError(f"unsupported value type {type(val).__name__}")
        first = False
