"""Flat ``key = value`` experiment files.

Blank lines and lines starting with ``#`` are ignored.  Keys may use dashes
or underscores; values stay strings and are converted by the command-line
parser, so a file behaves exactly like the corresponding flags.
"""

from __future__ import annotations

from pathlib import Path

from crackstab.errors import OutOfRangeError


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise OutOfRangeError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise OutOfRangeError(f"{source}:{lineno}: empty key")
        key = key.replace("-", "_")
        if key in out:
            raise OutOfRangeError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OutOfRangeError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))
