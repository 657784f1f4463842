"""Extract a power (W) from free-text model replies."""

from __future__ import annotations

import math
import re

_NUM = r"[-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][-+]?[0-9]+)?"

# ASCII digits only: \d would also accept other scripts' digits
_LABELED = re.compile(r"\bpower\s*[:=]\s*(" + _NUM + r")", re.IGNORECASE)
_WITH_UNIT = re.compile(r"(?<![\w.])(" + _NUM + r")\s*(?:W\b|watts?\b)", re.IGNORECASE)
_BARE = re.compile(r"(?<![\w.])(" + _NUM + r")(?!\w)(?!\.[0-9])")


class PowerParseError(ValueError):
    """No usable power in a reply. ``rule`` names the cascade step that gave up."""

    def __init__(self, message: str, text: str = "", rule: str = ""):
        super().__init__(message)
        self.text = text
        self.rule = rule


def parse_power_reply(text: str) -> float:
    """Parse a power from ``text`` using a three-step cascade.

    1. a labeled field ``power: <number>`` (last occurrence)
    2. the last number followed by ``W`` / ``watt(s)``
    3. the last bare number
    """
    if not isinstance(text, str):
        raise PowerParseError(f"reply must be text, got {type(text).__name__}")
    for rule, pattern in (("labeled", _LABELED), ("unit", _WITH_UNIT), ("bare", _BARE)):
        matches = pattern.findall(text)
        if not matches:
            continue
        raw = matches[-1]
        try:
            value = float(raw)
        except ValueError:  # pragma: no cover - the regex only admits float syntax
            raise PowerParseError(f"unreadable number {raw!r}", text, rule)
        if not math.isfinite(value):
            raise PowerParseError(f"non-finite power {raw!r}", text, rule)
        if value < 0:
            raise PowerParseError(f"negative power {raw!r}", text, rule)
        return value + 0.0  # normalizes -0.0
    raise PowerParseError("no number found in reply", text, "none")
