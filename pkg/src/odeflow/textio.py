"""Line-oriented text formats: sectioned key=value files and atomic writes.

The config grammar is deliberately small: full-line ``#`` comments, blank
lines, ``[section]`` headers, and ``key = value`` pairs.  Parsing reports
1-based line numbers on every rejection so config mistakes are locatable.
"""

from __future__ import annotations

import os
import re
import tempfile

from .errors import ConfigError

_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_-]*)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """Parse sectioned key=value text.

    Returns {section: {key: (raw_value, line_number)}}.  Duplicate sections,
    duplicate keys within a section, pairs outside any section, and malformed
    lines are all rejected with their line number.
    """
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", line=lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' or '[section]', got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"bad key {key!r}", line=lineno)
        if current is None:
            raise ConfigError(f"key {key!r} appears before any [section]", line=lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in section [{current}]", line=lineno)
        sections[current][key] = (value, lineno)
    return sections


def format_sections(sections: list[tuple[str, list[tuple[str, str]]]]) -> str:
    """Render sections back to canonical text (one blank line between sections)."""
    blocks = []
    for name, items in sections:
        lines = [f"[{name}]"]
        lines.extend(f"{k} = {v}" for k, v in items)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write text to ``path`` via a same-directory temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def coerce(section: str, key: str, raw: str, line: int, kind: str):
    """Convert a raw config value, reporting the offending line on failure."""
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        pass
    raise ConfigError(f"bad {kind} value {raw!r} for [{section}] {key}", line=line)
