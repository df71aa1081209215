"""Deliberately vulnerable web training platform with per-weakness modes."""

__version__ = "0.1.0"
