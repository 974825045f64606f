"""Diagnostic records shared by every pipeline stage.

A diagnostic couples a severity and a stable machine-readable code with a
message, optionally anchored to a source position.  Validating operations
return lists of diagnostics; constructive operations raise
:class:`PipelineError` (one diagnostic) or :class:`ScenarioSyntaxError`
(parse failure) instead of returning partial results.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from typing import IO, Iterable

ERROR = "error"
WARNING = "warning"

_COLORS = {ERROR: "\x1b[31m", WARNING: "\x1b[33m"}
_RESET = "\x1b[0m"


@dataclass(frozen=True)
class Span:
    """1-based line/column source position."""

    line: int
    col: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: Span | None = None

    def render(self, color: bool = False) -> str:
        where = f"{self.span.line}:{self.span.col}" if self.span else "-"
        sev = self.severity
        if color:
            sev = f"{_COLORS.get(self.severity, '')}{sev}{_RESET}"
        return f"{sev} {self.code} {where} {self.message}"


def error(code: str, message: str, span: Span | None = None) -> Diagnostic:
    return Diagnostic(ERROR, code, message, span)


def warning(code: str, message: str, span: Span | None = None) -> Diagnostic:
    return Diagnostic(WARNING, code, message, span)


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diagnostics)


def use_color(stream: IO[str]) -> bool:
    if os.environ.get("ATTACKFORGE_NO_COLOR"):
        return False
    isatty = getattr(stream, "isatty", None)
    return bool(isatty and isatty())


def emit(diagnostics: Iterable[Diagnostic], stream: IO[str] | None = None) -> None:
    """Print diagnostics one per line, colorized when the stream is a tty."""
    out = sys.stderr if stream is None else stream
    color = use_color(out)
    for d in diagnostics:
        print(d.render(color=color), file=out)


class ScenarioSyntaxError(Exception):
    """Scenario source could not be parsed; carries the parse diagnostics."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0].message if self.diagnostics else "syntax error"
        super().__init__(first)


class PipelineError(Exception):
    """A constructive stage hit a condition it cannot proceed past."""

    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(f"{diagnostic.code}: {diagnostic.message}")

    @property
    def code(self) -> str:
        return self.diagnostic.code
