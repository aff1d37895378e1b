import math

import pytest

from piezobeam.config import (
    DEFAULT_COMPOSITE,
    BeamCoefficients,
    RawMaterialConstants,
    default_composite_map,
    derive_coefficients,
    reference_coefficients,
    time_scale,
)
from piezobeam.errors import MissingCoefficient, NonPositiveCoefficient


def test_time_scale_matches_quoted_value(coeffs):
    # the source quotes A1 ~ 0.82
    assert coeffs.A1 == pytest.approx(0.82, abs=5e-3)
    assert time_scale(coeffs) == pytest.approx(coeffs.A1, rel=1e-15)


def test_layer_map_by_hand():
    raw = RawMaterialConstants()
    out = default_composite_map(raw)
    assert out["m"] == pytest.approx(7600 * 0.1 * 2 + 5000 * 0.01)
    assert out["A"] == pytest.approx(2 * 1.4e7 * 0.1**3 / 12)
    assert out["sigma"] == pytest.approx(1e11 * 0.01 / (0.01 * 2 * 1.4e6))


def test_tilde_formulas():
    c = reference_coefficients()
    g, b = c.gamma, c.beta
    B2, B3, B4 = DEFAULT_COMPOSITE["B2"], DEFAULT_COMPOSITE["B3"], DEFAULT_COMPOSITE["B4"]
    assert c.A_tilde == pytest.approx(c.A - g**2 * b * B3**2 / B4, rel=1e-15)
    assert c.B_tilde == pytest.approx(DEFAULT_COMPOSITE["B1"] - g * B2 * B3 / B4, rel=1e-15)
    assert c.C_tilde == pytest.approx(DEFAULT_COMPOSITE["C"] + g * c.h2 * c.h3 * B2**2 / B4, rel=1e-15)


def test_overrides_take_priority():
    c = reference_coefficients(A_tilde=1000.0, m=10.0)
    assert c.A_tilde == 1000.0
    assert c.A1 == pytest.approx(math.sqrt(10.0 / 1000.0))


@pytest.mark.parametrize(
    "field, message",
    [("A_tilde", "Ã <= 0"), ("B_tilde", "B̃ <= 0"), ("C_tilde", "C̃ <= 0"), ("m", "m <= 0"), ("sigma", "ς <= 0")],
)
def test_positivity_guards(field, message):
    with pytest.raises(NonPositiveCoefficient, match=message):
        reference_coefficients(**{field: -1.0})


def test_tilde_A_from_large_B3_is_rejected():
    with pytest.raises(NonPositiveCoefficient, match="Ã"):
        reference_coefficients(B3=1e3)


def test_missing_coefficient():
    with pytest.raises(MissingCoefficient):
        derive_coefficients(None, {"m": 1.0}, composite_defaults=None)


def test_raw_constants_positive():
    with pytest.raises(NonPositiveCoefficient):
        RawMaterialConstants(h2=0.0)


def test_as_dict_round_trip(coeffs):
    again = BeamCoefficients(**coeffs.as_dict())
    assert again == coeffs
