"""
Label vocabularies, domain records and the config schema shared by every stage.
"""

__all__ = [
    "config_schema",
    "label_sets",
    "records",
]
