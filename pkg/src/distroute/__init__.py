"""Districting-and-routing toolkit: learned district cost oracles and partition search."""
from __future__ import annotations

__version__ = "0.1.0"
