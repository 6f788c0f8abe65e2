"""Compilation-based symbolic execution over an explicit SSA mini-IR."""

__version__ = "0.1.0"
REPORT_SCHEMA_VERSION = "v1"
