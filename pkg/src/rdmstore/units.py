"""Physical quantities: parsing, dimensional analysis, affine conversion.

Units are described by a 7-exponent dimension vector over the SI base
dimensions plus an affine map (scale, offset) to the coherent SI unit.
The offset is only ever non-zero for temperature units (°C, °F).

Comparison between quantities is tri-state: ``True``, ``False``, or
``None`` when the dimensions are incompatible. Incomparability is a
value, not an error, because heterogeneous stores must survive a
mistyped record during search.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import IncompatibleDimensionError, UnitError

#: Exponent vector over (length, mass, time, current, temperature, amount,
#: luminosity).
Dimension = tuple[int, int, int, int, int, int, int]

DIMENSIONLESS: Dimension = (0, 0, 0, 0, 0, 0, 0)
LENGTH: Dimension = (1, 0, 0, 0, 0, 0, 0)
MASS: Dimension = (0, 1, 0, 0, 0, 0, 0)
TIME: Dimension = (0, 0, 1, 0, 0, 0, 0)
CURRENT: Dimension = (0, 0, 0, 1, 0, 0, 0)
TEMPERATURE: Dimension = (0, 0, 0, 0, 1, 0, 0)
AMOUNT: Dimension = (0, 0, 0, 0, 0, 1, 0)
LUMINOSITY: Dimension = (0, 0, 0, 0, 0, 0, 1)
FREQUENCY: Dimension = (0, 0, -1, 0, 0, 0, 0)
VOLTAGE: Dimension = (2, 1, -3, -1, 0, 0, 0)
VOLUME: Dimension = (3, 0, 0, 0, 0, 0, 0)


@dataclass(frozen=True)
class Unit:
    """A named unit: symbol, dimension, and affine map to coherent SI.

    ``to_si(x) = x * scale + offset``. scale must be positive; offset is
    non-zero only for temperature units.
    """

    symbol: str
    dimension: Dimension
    scale: float
    offset: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"unit scale must be positive, got {self.scale}")
        if self.offset != 0.0 and self.dimension != TEMPERATURE:
            raise ValueError("affine offset is only legal for temperature units")


@dataclass(frozen=True)
class Quantity:
    """A finite magnitude paired with a unit."""

    magnitude: float
    unit: Unit

    def __post_init__(self):
        if not math.isfinite(self.magnitude):
            raise ValueError("quantity magnitude must be finite")


class UnitRegistry:
    """Symbol → Unit lookup, immutable after startup by convention."""

    def __init__(self):
        self._units: dict[str, Unit] = {}

    def register(self, unit: Unit, *aliases: str) -> None:
        self._units[unit.symbol] = unit
        for a in aliases:
            self._units[a] = unit

    def get(self, symbol: str) -> Unit:
        try:
            return self._units[symbol]
        except KeyError:
            raise UnitError(symbol) from None

    def known(self, symbol: str) -> bool:
        return symbol in self._units

    def load_extension_file(self, path: str | Path) -> None:
        """Load extra units: one per line, ``symbol<TAB>d0,..,d6<TAB>scale<TAB>offset``."""
        for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            symbol, dims, scale, offset = parts
            vec = tuple(int(x) for x in dims.split(","))
            if len(vec) != 7:
                raise ValueError(f"{path}:{lineno}: dimension vector must have 7 entries")
            self.register(Unit(symbol, vec, float(scale), float(offset)))


DIMENSIONLESS_UNIT = Unit("", DIMENSIONLESS, 1.0)


def _default_registry() -> UnitRegistry:
    reg = UnitRegistry()
    reg.register(DIMENSIONLESS_UNIT)
    # SI base
    reg.register(Unit("m", LENGTH, 1.0))
    reg.register(Unit("kg", MASS, 1.0))
    reg.register(Unit("s", TIME, 1.0))
    reg.register(Unit("A", CURRENT, 1.0))
    reg.register(Unit("K", TEMPERATURE, 1.0))
    reg.register(Unit("mol", AMOUNT, 1.0))
    reg.register(Unit("cd", LUMINOSITY, 1.0))
    # common prefixed variants
    reg.register(Unit("mm", LENGTH, 1e-3))
    reg.register(Unit("cm", LENGTH, 1e-2))
    reg.register(Unit("km", LENGTH, 1e3))
    reg.register(Unit("g", MASS, 1e-3))
    reg.register(Unit("mg", MASS, 1e-6))
    reg.register(Unit("ms", TIME, 1e-3))
    reg.register(Unit("µs", TIME, 1e-6), "us")
    reg.register(Unit("min", TIME, 60.0))
    reg.register(Unit("h", TIME, 3600.0))
    # derived
    reg.register(Unit("Hz", FREQUENCY, 1.0))
    reg.register(Unit("V", VOLTAGE, 1.0))
    reg.register(Unit("L", VOLUME, 1e-3), "l")
    # affine temperatures
    reg.register(Unit("°C", TEMPERATURE, 1.0, 273.15), "C")
    reg.register(Unit("°F", TEMPERATURE, 5.0 / 9.0, 459.67 * 5.0 / 9.0), "F")
    return reg


DEFAULT_REGISTRY = _default_registry()

_QUANTITY_RE = re.compile(
    r"""^\s*
        (?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
        \s*
        (?P<unit>\S*)
        \s*$""",
    re.VERBOSE,
)


def parse_quantity(text: str, registry: UnitRegistry = DEFAULT_REGISTRY) -> Quantity:
    """Parse ``<number>[whitespace]<unit-symbol>``; a bare number is dimensionless."""
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ValueError(f"malformed quantity literal {text!r}")
    magnitude = float(m.group("num"))
    symbol = m.group("unit")
    unit = registry.get(symbol) if symbol else DIMENSIONLESS_UNIT
    return Quantity(magnitude, unit)


def to_si(q: Quantity) -> float:
    return q.magnitude * q.unit.scale + q.unit.offset


def convert(q: Quantity, target: Unit) -> Quantity:
    """Convert through the affine chain; raises on dimension mismatch."""
    if q.unit.dimension != target.dimension:
        raise IncompatibleDimensionError(
            f"cannot convert {q.unit.symbol or 'dimensionless'} "
            f"to {target.symbol or 'dimensionless'}"
        )
    return Quantity((to_si(q) - target.offset) / target.scale, target)


_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def compare(lhs: Quantity, op: str, rhs: Quantity) -> bool | None:
    """Tri-state comparison: ``None`` means incomparable dimensions."""
    if op not in _OPS:
        raise ValueError(f"unknown comparison operator {op!r}")
    if lhs.unit.dimension != rhs.unit.dimension:
        return None
    return _OPS[op](lhs.magnitude, convert(rhs, lhs.unit).magnitude)
