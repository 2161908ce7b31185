"""Unified semantic parsing for question answering over knowledge bases
(S-expressions) and databases (SQL subset): enumerate primitives, rank them,
compose logical forms, execute."""

__version__ = "0.1.0"
