"""Parsing and formatting of unit-tagged quantity strings.

Configuration files and CSV headers carry physical quantities as strings
like ``"5 ms"``, ``"40 kcps"``, ``"820 nW"`` or ``"46.2 kcps/uW"``.  Every
physical quantity must carry a unit tag; a bare number is accepted only
for dimensionless values.  Unknown units are rejected at parse time
rather than silently misread.

Canonical internal units are SI seconds and counts per second.  Optical
powers are kept in microwatts internally because every saturation law in
this package is parameterized that way.
"""

from __future__ import annotations

import re

from .errors import UnitError

# scale factors to the canonical unit of each kind
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_POWER = {"W": 1e6, "mW": 1e3, "uW": 1.0, "µW": 1.0, "nW": 1e-3}
_RATE = {"cps": 1.0, "kcps": 1e3, "Mcps": 1e6, "/s": 1.0, "1/s": 1.0, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6}

_KINDS = {
    "time": (_TIME, "s"),
    "power": (_POWER, "uW"),
    "rate": (_RATE, "cps"),
}

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


def _split(text: str):
    text = text.strip()
    m = _NUMBER.match(text)
    if not m:
        raise UnitError(f"cannot parse a number from {text!r}")
    return float(m.group(0)), text[m.end():].strip()


def parse_quantity(text, kind: str) -> float:
    """Parse a tagged quantity string into its canonical unit.

    Parameters
    ----------
    text : str or float
        Quantity string such as ``"5 ms"``.  For ``kind="none"`` a bare
        number (or numeric type) is accepted.
    kind : {"time", "power", "rate", "none"}
        Dimension the value must carry.  Canonical units are seconds,
        microwatts, and counts per second.

    Returns
    -------
    float
        Value converted to the canonical unit of ``kind``.
    """
    if kind == "none":
        if isinstance(text, (int, float)):
            return float(text)
        value, unit = _split(str(text))
        if unit:
            raise UnitError(f"dimensionless value carries a unit tag: {text!r}")
        return value
    if kind not in _KINDS:
        raise UnitError(f"unknown quantity kind {kind!r}")
    if isinstance(text, (int, float)):
        raise UnitError(f"{kind} quantity {text!r} must carry a unit tag (e.g. '5 ms')")
    table, canon = _KINDS[kind]
    value, unit = _split(str(text))
    if not unit:
        raise UnitError(f"{kind} quantity {text!r} is missing a unit tag (e.g. '1 {canon}')")
    if unit not in table:
        raise UnitError(f"unknown {kind} unit {unit!r} in {text!r} (known: {', '.join(sorted(table))})")
    return value * table[unit]


def parse_coefficient(text, kind: str) -> float:
    """Parse a saturation-law coefficient like ``"46.2 kcps/uW"``.

    ``kind`` is ``"rate/power"`` or ``"rate/power^2"``; the result is in
    cps per uW (respectively cps per uW^2).
    """
    if isinstance(text, (int, float)):
        raise UnitError(f"coefficient {text!r} must carry a unit tag (e.g. '1 cps/uW')")
    power_part = {"rate/power": 1, "rate/power^2": 2}.get(kind)
    if power_part is None:
        raise UnitError(f"unknown coefficient kind {kind!r}")
    value, unit = _split(str(text))
    m = re.fullmatch(r"([A-Za-z/1]+)\s*/\s*([a-zA-Zµ]+)(\^2|²)?", unit)
    if not m:
        raise UnitError(f"cannot parse coefficient unit {unit!r} in {text!r}")
    num, den, sq = m.group(1), m.group(2), m.group(3)
    got_power = 2 if sq else 1
    if got_power != power_part:
        raise UnitError(f"coefficient {text!r} has power exponent {got_power}, expected {power_part}")
    if num not in _RATE:
        raise UnitError(f"unknown rate unit {num!r} in {text!r}")
    if den not in _POWER:
        raise UnitError(f"unknown power unit {den!r} in {text!r}")
    return value * _RATE[num] / _POWER[den] ** power_part


def format_quantity(value: float, unit: str) -> str:
    """Format a canonical-unit value back into a tagged string.

    The unit must be known; the value is scaled accordingly.  Used when
    writing config-like output so files stay self-describing.
    """
    for table in (_TIME, _POWER, _RATE):
        if unit in table:
            return f"{value / table[unit]:g} {unit}"
    raise UnitError(f"unknown unit {unit!r}")
