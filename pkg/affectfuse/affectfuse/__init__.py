"""
affectfuse application package.

Holds the CLI command handlers and the logging setup shared by the
pipeline library under `core/`.
"""

__all__ = [
    "commands",
    "logger",
]
