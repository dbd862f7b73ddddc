"""
Pipeline library for affectfuse: one module per stage plus file I/O,
input validation, digests and reporting.
"""
