"""Figures from published CSV tables, decoupled from the solver package."""

from .render import KIND_COLUMNS, FigureSpec, SchemaMismatch, render

__all__ = ["FigureSpec", "KIND_COLUMNS", "SchemaMismatch", "render"]
