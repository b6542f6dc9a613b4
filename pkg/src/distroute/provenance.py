"""Provenance records embedded in every artifact (no timestamps, so reruns are byte-identical)."""
from __future__ import annotations

import platform

import numpy as np

from . import __version__


def provenance(command: str, **config) -> dict:
    return {"tool": "distroute", "version": __version__, "command": command,
            "python": platform.python_version(), "numpy": np.__version__,
            "config": {k: config[k] for k in sorted(config)}}
