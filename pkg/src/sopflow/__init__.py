"""Workflow automation engine for indented-text standard operating procedures."""

__version__ = "0.1.0"
