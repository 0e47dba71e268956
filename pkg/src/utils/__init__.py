"""Argument parsing and validation helpers."""
