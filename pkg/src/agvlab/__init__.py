"""Desk-scale AGV line-following lab: simulator, edge perception, services."""

__version__ = "0.1.0"
