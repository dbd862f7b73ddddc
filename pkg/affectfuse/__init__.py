"""
Package marker for affectfuse.

Pipeline components live under the top-level `core` package.
"""

__all__ = []
