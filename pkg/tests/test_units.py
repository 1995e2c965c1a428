"""Unit table, conversions, and quantity parsing."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfgkg.units import (
    DERIVED_UNIT,
    DIMENSIONLESS,
    IncompatibleUnitsError,
    Quantity,
    UnknownUnitError,
    convert,
    display_unit,
    is_registered_unit,
    parse_quantity,
    resolve_unit,
    si_quantity,
)


# Hand-computed conversions, frozen.
FROZEN_CONVERSIONS = [
    (Quantity(1.0, "cm^2"), "m^2", 1.0e-4),
    (Quantity(200.0, "GPa"), "Pa", 2.0e11),
    (Quantity(1.0, "MPa"), "kPa", 1.0e3),
    (Quantity(2500.0, "mm"), "m", 2.5),
    (Quantity(50.0, "%"), "", 0.5),
    (Quantity(0.25, ""), "%", 25.0),
    (Quantity(3.0, "N"), "N", 3.0),
]


@pytest.mark.parametrize("q, target, expected", FROZEN_CONVERSIONS)
def test_convert_frozen(q, target, expected):
    out = convert(q, target)
    assert out.unit == target
    assert math.isclose(out.value, expected, rel_tol=1e-12)


def test_convert_rejects_dimension_mismatch():
    with pytest.raises(IncompatibleUnitsError):
        convert(Quantity(1.0, "Pa"), "m")
    with pytest.raises(IncompatibleUnitsError):
        convert(Quantity(1.0, "m^2"), "m")


def test_unknown_unit_rejected():
    with pytest.raises(UnknownUnitError):
        Quantity(1.0, "furlong")
    with pytest.raises(UnknownUnitError):
        resolve_unit("psi")


def test_non_finite_values_rejected():
    with pytest.raises(ValueError):
        Quantity(float("nan"))
    with pytest.raises(ValueError):
        Quantity(float("inf"), "Pa")


def test_unicode_superscripts_accepted():
    assert resolve_unit("m²").dims == (0, 2, 0)
    assert convert(Quantity(1.0, "cm²"), "m^2").value == pytest.approx(1e-4)


def test_to_si():
    value, dims = Quantity(200.0, "GPa").to_si()
    assert value == pytest.approx(2.0e11)
    assert dims == (1, -1, -2)
    value, dims = Quantity(40.0, "%").to_si()
    assert value == pytest.approx(0.4)
    assert dims == DIMENSIONLESS


def test_display_unit_prefers_named_symbols():
    assert display_unit((1, -1, -2)) == "Pa"
    assert display_unit((1, 1, -2)) == "N"
    assert display_unit(DIMENSIONLESS) == ""
    # no registered name for kg*m/s
    assert display_unit((1, 1, -1)) == DERIVED_UNIT


def test_si_quantity_round_trips_display():
    q = si_quantity(5.0, (1, -1, -2))
    assert q == Quantity(5.0, "Pa")


def test_is_registered_unit():
    assert is_registered_unit("")
    assert is_registered_unit(DERIVED_UNIT)
    assert is_registered_unit("GPa")
    assert not is_registered_unit("psi")


class TestParseQuantity:
    @pytest.mark.parametrize(
        "text, value, unit",
        [
            ("0.2 %", 0.2, "%"),
            ("200GPa", 200.0, "GPa"),
            ("1.2e3 MPa", 1200.0, "MPa"),
            ("-4 mm", -4.0, "mm"),
            ("3.5", 3.5, ""),
            ("  7 N  ", 7.0, "N"),
            (".5 cm^2", 0.5, "cm^2"),
        ],
    )
    def test_accepts(self, text, value, unit):
        q = parse_quantity(text)
        assert q == Quantity(value, unit)

    @pytest.mark.parametrize(
        "text",
        ["", "fast", "12 furlong", "1 2 m", "Pa 3", "1e999"],
    )
    def test_rejects(self, text):
        assert parse_quantity(text) is None


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_convert_round_trip(value):
    q = Quantity(value, "MPa")
    back = convert(convert(q, "Pa"), "MPa")
    assert math.isclose(back.value, value, rel_tol=1e-12, abs_tol=1e-12)
