"""Quake decision-support engine: warehouse, OLAP, planning, escalation."""

__version__ = "0.1.0"
