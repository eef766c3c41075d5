"""Atomic file output and the run manifest."""

from __future__ import annotations

import json
import os
import platform
import tempfile
from importlib import metadata
from pathlib import Path

from ._accel import backend


def write_atomic(path, text):
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_lines(path, header, rows):
    lines = [header, *rows]
    return write_atomic(path, "\n".join(lines) + "\n")


def write_json(path, obj):
    return write_atomic(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def versions():
    out = {"python": platform.python_version()}
    for pkg in ("entroflux", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    out["backend"] = backend()
    return out


def manifest(job, status, config_sha256, files, summary, seed):
    return {"job": job, "status": status, "config_sha256": config_sha256, "seed": seed,
            "versions": versions(), "files": sorted(files), "summary": summary}
