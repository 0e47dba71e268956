"""Codes, channel model and configuration."""
