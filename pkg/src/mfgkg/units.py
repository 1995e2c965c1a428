"""Unit table and quantity arithmetic for formula evaluation.

Units are modeled as a scale factor plus a vector of exponents over the
(kg, m, s) base dimensions, which is just enough to convert inputs to SI,
reject dimensionally bogus additions, and recognize common derived results
(N / m^2 reports as Pa).  Combinations with no registered symbol are
reported with the unit string "derived".
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

Dims = tuple[int, int, int]  # exponents of (kg, m, s)

DIMENSIONLESS: Dims = (0, 0, 0)
DERIVED_UNIT = "derived"


class UnknownUnitError(ValueError):
    """Unit symbol is not in the table."""


class IncompatibleUnitsError(ValueError):
    """Conversion or addition across different dimensions."""


@dataclass(frozen=True)
class UnitDef:
    symbol: str
    factor: float  # multiplier into SI base units
    dims: Dims


def _build_table() -> dict[str, UnitDef]:
    defs = [
        UnitDef("dimensionless", 1.0, DIMENSIONLESS),
        UnitDef("%", 0.01, DIMENSIONLESS),
        UnitDef("kg", 1.0, (1, 0, 0)),
        UnitDef("s", 1.0, (0, 0, 1)),
        UnitDef("m", 1.0, (0, 1, 0)),
        UnitDef("cm", 0.01, (0, 1, 0)),
        UnitDef("mm", 0.001, (0, 1, 0)),
        UnitDef("m^2", 1.0, (0, 2, 0)),
        UnitDef("cm^2", 1.0e-4, (0, 2, 0)),
        UnitDef("mm^2", 1.0e-6, (0, 2, 0)),
        UnitDef("N", 1.0, (1, 1, -2)),
        UnitDef("Pa", 1.0, (1, -1, -2)),
        UnitDef("kPa", 1.0e3, (1, -1, -2)),
        UnitDef("MPa", 1.0e6, (1, -1, -2)),
        UnitDef("GPa", 1.0e9, (1, -1, -2)),
    ]
    table = {d.symbol: d for d in defs}
    # unicode superscript spellings accepted as input
    table["m²"] = table["m^2"]
    table["cm²"] = table["cm^2"]
    table["mm²"] = table["mm^2"]
    return table


UNIT_TABLE: dict[str, UnitDef] = _build_table()

# preferred display symbol per dimension vector (SI-base scale)
_DISPLAY: dict[Dims, str] = {
    DIMENSIONLESS: "",
    (1, 0, 0): "kg",
    (0, 0, 1): "s",
    (0, 1, 0): "m",
    (0, 2, 0): "m^2",
    (1, 1, -2): "N",
    (1, -1, -2): "Pa",
}


def is_registered_unit(symbol: str) -> bool:
    return symbol == "" or symbol == DERIVED_UNIT or symbol in UNIT_TABLE


def resolve_unit(symbol: str) -> UnitDef:
    if symbol == "":
        return UNIT_TABLE["dimensionless"]
    try:
        return UNIT_TABLE[symbol]
    except KeyError:
        raise UnknownUnitError(f"unknown unit {symbol!r}") from None


def display_unit(dims: Dims) -> str:
    return _DISPLAY.get(dims, DERIVED_UNIT)


@dataclass(frozen=True)
class Quantity:
    """A finite numeric value with an optional registered unit."""

    value: float
    unit: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"quantity value must be finite, got {self.value!r}")
        if not is_registered_unit(self.unit):
            raise UnknownUnitError(f"unknown unit {self.unit!r}")

    def to_si(self) -> tuple[float, Dims]:
        """SI-base value and dimension vector."""
        if self.unit == DERIVED_UNIT:
            # already an SI-base value from a previous evaluation; the exact
            # dimensions were not representable, treat as opaque base value
            return self.value, DIMENSIONLESS
        d = resolve_unit(self.unit)
        return self.value * d.factor, d.dims


def si_quantity(value: float, dims: Dims) -> Quantity:
    """Quantity in SI base scale with the preferred display symbol."""
    return Quantity(value, display_unit(dims))


def convert(q: Quantity, target_unit: str) -> Quantity:
    """Convert a quantity to another unit of the same dimensions."""
    src = resolve_unit(q.unit)
    dst = resolve_unit(target_unit)
    if src.dims != dst.dims:
        raise IncompatibleUnitsError(
            f"cannot convert {q.unit or 'dimensionless'} to {target_unit or 'dimensionless'}")
    return Quantity(q.value * src.factor / dst.factor, target_unit)


def parse_quantity(text: str) -> Quantity | None:
    """Parse "<number> [unit]" (e.g. "0.2 %", "200GPa"); None if it isn't one."""
    m = re.fullmatch(
        r"\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S+)?\s*", text)
    if not m:
        return None
    value = float(m.group(1))
    unit = m.group(2) or ""
    if not math.isfinite(value):
        return None
    if unit and unit not in UNIT_TABLE:
        return None
    return Quantity(value, unit)
