"""Shared diagnostic types: source spans and the error hierarchy."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    """Byte range in an input, plus the line/column where it starts."""

    origin: str
    start: int
    end: int
    line: int = 1
    col: int = 1

    def label(self) -> str:
        return f"{self.origin}:{self.line}:{self.col}"


class SemtexError(Exception):
    """Base class for all diagnostics, optionally tied to a source span."""

    def __init__(self, message: str, span: SourceSpan | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def diagnostic(self) -> str:
        if self.span is not None:
            return f"{self.span.label()}: {self.message}"
        return self.message


class LexError(SemtexError):
    pass


class ParseError(SemtexError):
    pass


class ModuleError(SemtexError):
    pass


class ScopeError(ModuleError):
    pass


class ExpandError(SemtexError):
    pass


class NotationError(SemtexError):
    pass


class EmitError(SemtexError):
    pass


class RdfaError(SemtexError):
    pass


class OwlExportError(SemtexError):
    pass


class StoreError(SemtexError):
    pass
