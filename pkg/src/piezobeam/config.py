"""Material constants, composite beam coefficients and the time scale.

The layer-to-composite map implemented in :func:`default_composite_map` is
an engineering approximation, not an exact derivation: only ``m`` and ``A``
follow classical sandwich theory, the shear parameter is a dimensionless
ratio proportional to ``G2/h2``, and ``B1..B4, C`` are shipped as plain
defaults in :data:`DEFAULT_COMPOSITE`.  Anything requiring exact provenance
should pass the composite coefficients directly through ``overrides``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import MissingCoefficient, NonPositiveCoefficient


@dataclass(frozen=True)
class RawMaterialConstants:
    """Layer geometry and material data in SI units (layer 3 is piezoelectric)."""

    L: float = 1.0
    h1: float = 0.1
    h2: float = 0.01
    h3: float = 0.1
    rho1: float = 7600.0
    rho2: float = 5000.0
    rho3: float = 7600.0
    alpha1: float = 1.4e7
    alpha2: float = 1.0e5
    alpha3: float = 1.4e7
    gamma: float = 1.0e-3
    beta: float = 1.0e6
    G2: float = 100.0e9

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise NonPositiveCoefficient(f"{f.name} <= 0 (got {value!r})")


# Composite constants the layer map does not provide.
DEFAULT_COMPOSITE = {
    "B1": 11.0,
    "B2": 0.01,
    "B3": 0.02,
    "B4": 1.0,
    "C": 1.0,
}

# Fields that must be known, one way or another, to build BeamCoefficients.
_PRIMARY = ("m", "A", "B1", "B2", "B3", "B4", "C", "sigma")
_TILDE = ("A_tilde", "B_tilde", "C_tilde")
_PASSTHROUGH = ("beta", "gamma", "h2", "h3", "L")


@dataclass(frozen=True)
class BeamCoefficients:
    m: float
    A_tilde: float
    B_tilde: float
    C_tilde: float
    sigma: float
    B2: float
    B3: float
    B4: float
    beta: float
    gamma: float
    h2: float
    h3: float
    L: float
    A: Optional[float] = None
    B1: Optional[float] = None
    C: Optional[float] = None
    kappa: Optional[float] = None
    A1: float = field(init=False)

    def __post_init__(self):
        checks = (
            ("m", self.m, "m <= 0"),
            ("A_tilde", self.A_tilde, "Ã <= 0"),
            ("B_tilde", self.B_tilde, "B̃ <= 0"),
            ("C_tilde", self.C_tilde, "C̃ <= 0"),
            ("sigma", self.sigma, "ς <= 0"),
            ("beta", self.beta, "β <= 0"),
            ("gamma", self.gamma, "γ <= 0"),
            ("h2", self.h2, "h2 <= 0"),
            ("h3", self.h3, "h3 <= 0"),
            ("L", self.L, "L <= 0"),
            ("B4", self.B4, "B4 <= 0"),
        )
        for _, value, message in checks:
            if not value > 0:
                raise NonPositiveCoefficient(f"{message} (got {value!r})")
        if self.kappa is not None and self.kappa < 0:
            raise NonPositiveCoefficient(f"kappa < 0 (got {self.kappa!r})")
        object.__setattr__(self, "A1", self.L * math.sqrt(self.m / self.A_tilde))

    @property
    def sigma_C(self) -> float:
        """Kernel parameter ςC̃ (1/m²)."""
        return self.sigma * self.C_tilde

    @property
    def shear_coupling(self) -> float:
        """βγςh₂h₃B̃, the coefficient of φ²_x in the bending equation."""
        return self.beta * self.gamma * self.sigma * self.h2 * self.h3 * self.B_tilde

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("A1")
        return out


def default_composite_map(raw: RawMaterialConstants) -> dict:
    """Approximate composite coefficients ``m``, ``A`` and ``sigma`` from layer data.

    ``m`` is the lineal mass density, ``A`` the sum of the outer layers' own
    bending stiffnesses (the core only carries shear), and
    ``sigma = G2 h1 h3 / (h2 (alpha1 h1 + alpha3 h3))``.
    """
    m = raw.rho1 * raw.h1 + raw.rho2 * raw.h2 + raw.rho3 * raw.h3
    A = (raw.alpha1 * raw.h1**3 + raw.alpha3 * raw.h3**3) / 12.0
    sigma = raw.G2 * raw.h1 * raw.h3 / (raw.h2 * (raw.alpha1 * raw.h1 + raw.alpha3 * raw.h3))
    return {"m": m, "A": A, "sigma": sigma}


def derive_coefficients(
    raw: Optional[RawMaterialConstants] = None,
    overrides: Optional[Mapping[str, float]] = None,
    composite_defaults: Optional[Mapping[str, float]] = DEFAULT_COMPOSITE,
) -> BeamCoefficients:
    """Build validated :class:`BeamCoefficients`.

    Values come from, in increasing priority: ``composite_defaults``, the
    layer map applied to ``raw``, and ``overrides``.  ``overrides`` may carry
    the tilde coefficients directly, in which case they are not recomputed.

    Raises
    ------
    MissingCoefficient
        A required value is supplied by none of the sources.
    NonPositiveCoefficient
        One of the positivity conditions on Ã, B̃, C̃, m, ς fails.
    """
    overrides = dict(overrides or {})
    values: dict = dict(composite_defaults or {})
    if raw is not None:
        values.update(default_composite_map(raw))
        values.update({k: getattr(raw, k) for k in _PASSTHROUGH})
    values.update({k: v for k, v in overrides.items() if v is not None})

    def need(name):
        if name not in values:
            raise MissingCoefficient(name)
        return float(values[name])

    gamma, beta = need("gamma"), need("beta")
    B2, B3, B4 = need("B2"), need("B3"), need("B4")
    if not B4 > 0:
        raise NonPositiveCoefficient(f"B4 <= 0 (got {B4!r})")
    h2, h3 = need("h2"), need("h3")

    if "A_tilde" in values:
        A_tilde = float(values["A_tilde"])
    else:
        A_tilde = need("A") - gamma**2 * beta * B3**2 / B4
    if "B_tilde" in values:
        B_tilde = float(values["B_tilde"])
    else:
        B_tilde = need("B1") - gamma * B2 * B3 / B4
    if "C_tilde" in values:
        C_tilde = float(values["C_tilde"])
    else:
        C_tilde = need("C") + gamma * h2 * h3 * B2**2 / B4

    return BeamCoefficients(
        m=need("m"),
        A_tilde=A_tilde,
        B_tilde=B_tilde,
        C_tilde=C_tilde,
        sigma=need("sigma"),
        B2=B2,
        B3=B3,
        B4=B4,
        beta=beta,
        gamma=gamma,
        h2=h2,
        h3=h3,
        L=need("L"),
        A=values.get("A"),
        B1=values.get("B1"),
        C=values.get("C"),
        kappa=values.get("kappa"),
    )


def time_scale(coeffs: BeamCoefficients) -> float:
    """Return A1 = L sqrt(m / Ã), so that real time t = A1 t*."""
    return coeffs.L * math.sqrt(coeffs.m / coeffs.A_tilde)


def reference_coefficients(**overrides) -> BeamCoefficients:
    """Coefficients for the default three-layer beam, with optional overrides."""
    return derive_coefficients(RawMaterialConstants(), overrides)
