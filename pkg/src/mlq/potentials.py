"""Holomorphic potential families.

Each potential is a matrix-valued 1-form xi(z) dz whose coefficient matrix is
a Laurent polynomial in the spectral parameter lam.  ``eval_xi`` returns that
coefficient as a :class:`~mlq.loops.LaurentLoop`; the surface pipeline
integrates dPhi = Phi xi from the family's base point.

Families
--------
sphere       lam^{-1} E_12, entire, base 0
torus        lam^{-1} (E_12 + E_21), entire, base 0
equivariant  D(lam)/z with D = [[c, a lam^{-1} + b lam], [a lam + b lam^{-1}, -c]],
             simple pole at 0, base 1
radial       lam^{-1} [[0, 1], [c z^k, 0]], entire, base 0
trinoid      [[0, lam^{-1}], [lam h(lam) q(z), 0]] with
             h(lam) = lam^{-1}(lam - lam0)(lam - lam0^{-1}) and
             q(z) = (vinf z^2 + (v1 - v0 - vinf) z + v0) / (16 z^2 (z-1)^2),
             poles at 0, 1 (and infinity), base 1/2; untwisted
custom       finite sum of lam^k terms with rational z-coefficients and
             explicitly declared poles; caller supplies the base point
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial import polynomial as npp

from .loops import LaurentLoop


class PoleError(ValueError):
    """Raised when a potential is evaluated at (or a path runs into) a pole."""


_E12 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
_E21 = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)

_VARIANTS = ("sphere", "torus", "equivariant", "radial", "trinoid", "custom")


@dataclass(frozen=True)
class CustomTerm:
    """One lam^k term of a custom potential with a rational z-coefficient.

    ``num`` and ``den`` are polynomial coefficients in ascending order, so the
    matrix coefficient of lam^k is  (num_ij(z) / den_ij(z))  entrywise; here a
    single rational scalar multiplies a constant matrix.
    """

    lam_power: int
    matrix: tuple[tuple[complex, complex], tuple[complex, complex]]
    num: tuple[complex, ...] = (1.0 + 0.0j,)
    den: tuple[complex, ...] = (1.0 + 0.0j,)


@dataclass(frozen=True)
class PotentialSpec:
    """Declarative description of a potential; validated by make_potential."""

    variant: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Potential:
    """A validated potential: spec plus its singular set and base point."""

    spec: PotentialSpec
    singular_points: tuple[complex, ...]
    base_point: complex
    singular_at_infinity: bool = False

    @property
    def variant(self) -> str:
        return self.spec.variant


def sphere_spec() -> PotentialSpec:
    return PotentialSpec("sphere")


def torus_spec() -> PotentialSpec:
    return PotentialSpec("torus")


def equivariant_spec(a: float, b: float, c: float = 0.0) -> PotentialSpec:
    return PotentialSpec("equivariant", {"a": float(a), "b": float(b), "c": float(c)})


def radial_spec(c: complex, k: int) -> PotentialSpec:
    return PotentialSpec("radial", {"c": complex(c), "k": int(k)})


def trinoid_spec(lambda0: complex, v0: float, v1: float, vinf: float) -> PotentialSpec:
    return PotentialSpec(
        "trinoid",
        {"lambda0": complex(lambda0), "v0": float(v0), "v1": float(v1), "vinf": float(vinf)},
    )


def custom_spec(
    terms: list[CustomTerm],
    poles: list[complex],
    base_point: complex,
) -> PotentialSpec:
    return PotentialSpec(
        "custom",
        {
            "terms": tuple(terms),
            "poles": tuple(complex(p) for p in poles),
            "base_point": complex(base_point),
        },
    )


def make_potential(spec: PotentialSpec) -> Potential:
    """Validate a spec and attach its singular set and base point.

    Raises ValueError naming the violated constraint for invalid parameters.
    """
    v = spec.variant
    p = spec.params
    if v not in _VARIANTS:
        raise ValueError(f"unknown potential variant {v!r}; expected one of {_VARIANTS}")
    if v == "sphere" or v == "torus":
        return Potential(spec, (), 0.0 + 0.0j)
    if v == "equivariant":
        a, b, c = p["a"], p["b"], p["c"]
        for name, val in (("a", a), ("b", b), ("c", c)):
            if not np.isreal(val):
                raise ValueError(f"equivariant parameter {name} must be real, got {val!r}")
        return Potential(spec, (0.0 + 0.0j,), 1.0 + 0.0j)
    if v == "radial":
        c, k = complex(p["c"]), p["k"]
        if c == 0 or abs(abs(c) - 1.0) < 1e-12:
            raise ValueError(f"radial parameter c must avoid the unit circle and 0, got {c}")
        if not isinstance(k, int) or k < 1:
            raise ValueError(f"radial exponent k must be a positive integer, got {k!r}")
        return Potential(spec, (), 0.0 + 0.0j)
    if v == "trinoid":
        lam0 = complex(p["lambda0"])
        if abs(lam0 - 1j) > 1e-12 and abs(lam0 + 1j) > 1e-12:
            raise ValueError(f"trinoid lambda0 must be +i or -i, got {lam0}")
        for name in ("v0", "v1", "vinf"):
            val = p[name]
            if not np.isreal(val) or val == 0:
                raise ValueError(f"trinoid weight {name} must be real and nonzero, got {val!r}")
        return Potential(spec, (0.0 + 0.0j, 1.0 + 0.0j), 0.5 + 0.0j, singular_at_infinity=True)
    # custom
    terms = p.get("terms", ())
    if not terms:
        raise ValueError("custom potential needs at least one term")
    for t in terms:
        if len(t.den) == 0 or all(abs(c) == 0 for c in t.den):
            raise ValueError("custom term denominator must be a nonzero polynomial")
    base = complex(p["base_point"])
    poles = tuple(complex(q) for q in p.get("poles", ()))
    for q in poles:
        if abs(base - q) < 1e-9:
            raise ValueError(f"custom base point {base} coincides with declared pole {q}")
    return Potential(spec, poles, base)


def _check_regular(pot: Potential, z: complex) -> None:
    for s in pot.singular_points:
        if abs(z - s) < 1e-12:
            raise PoleError(f"potential {pot.variant} evaluated at singular point z = {z}")


def eval_xi(pot: Potential, z: complex) -> LaurentLoop:
    """Coefficient matrix of the 1-form xi at z (the form is result * dz)."""
    z = complex(z)
    _check_regular(pot, z)
    v = pot.variant
    p = pot.spec.params
    if v == "sphere":
        return LaurentLoop.from_terms({-1: _E12})
    if v == "torus":
        return LaurentLoop.from_terms({-1: _E12 + _E21})
    if v == "equivariant":
        a, b, c = p["a"], p["b"], p["c"]
        return LaurentLoop.from_terms(
            {
                -1: np.array([[0, a], [b, 0]], dtype=np.complex128) / z,
                0: np.array([[c, 0], [0, -c]], dtype=np.complex128) / z,
                1: np.array([[0, b], [a, 0]], dtype=np.complex128) / z,
            }
        )
    if v == "radial":
        c, k = complex(p["c"]), p["k"]
        return LaurentLoop.from_terms({-1: np.array([[0, 1], [c * z**k, 0]], dtype=np.complex128)})
    if v == "trinoid":
        q = trinoid_q(z, p["v0"], p["v1"], p["vinf"])
        lam0 = complex(p["lambda0"])
        # lam * h(lam) = (lam - lam0)(lam - 1/lam0) = lam^2 - (lam0 + 1/lam0) lam + 1
        s = lam0 + 1.0 / lam0
        return LaurentLoop.from_terms(
            {
                -1: _E12,
                0: q * _E21,
                1: -s * q * _E21,
                2: q * _E21,
            }
        )
    # custom
    terms: dict[int, np.ndarray] = {}
    for t in p["terms"]:
        num = npp.polyval(z, np.asarray(t.num, dtype=np.complex128))
        den = npp.polyval(z, np.asarray(t.den, dtype=np.complex128))
        if abs(den) < 1e-14:
            raise PoleError(f"custom term denominator vanishes at z = {z}")
        mat = np.asarray(t.matrix, dtype=np.complex128) * (num / den)
        terms[t.lam_power] = terms.get(t.lam_power, 0) + mat
    return LaurentLoop.from_terms(terms)


def trinoid_q(z: complex, v0: float, v1: float, vinf: float) -> complex:
    """The rational weight q(z) of the trinoid potential."""
    z = complex(z)
    return (vinf * z**2 + (v1 - v0 - vinf) * z + v0) / (16.0 * z**2 * (z - 1.0) ** 2)


def trinoid_h(lam: complex, lambda0: complex) -> complex:
    """h(lam) = lam^{-1} (lam - lam0)(lam - lam0^{-1})."""
    lam = complex(lam)
    lam0 = complex(lambda0)
    return (lam - lam0) * (lam - 1.0 / lam0) / lam


# ---------------------------------------------------------------------------
# JSON round-trip (used by the CLI config schema)


def _c2l(c: complex) -> list[float]:
    c = complex(c)
    return [float(c.real), float(c.imag)]


def _l2c(v: Any) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    return complex(v[0], v[1])


def spec_to_dict(spec: PotentialSpec) -> dict[str, Any]:
    """Serialize a spec to JSON-compatible primitives (complex -> [re, im])."""
    v = spec.variant
    p = spec.params
    if v in ("sphere", "torus"):
        return {"variant": v}
    if v == "equivariant":
        return {"variant": v, "a": p["a"], "b": p["b"], "c": p["c"]}
    if v == "radial":
        return {"variant": v, "c": _c2l(p["c"]), "k": p["k"]}
    if v == "trinoid":
        return {
            "variant": v,
            "lambda0": _c2l(p["lambda0"]),
            "v0": p["v0"],
            "v1": p["v1"],
            "vinf": p["vinf"],
        }
    return {
        "variant": "custom",
        "base_point": _c2l(p["base_point"]),
        "poles": [_c2l(q) for q in p["poles"]],
        "terms": [
            {
                "lam_power": t.lam_power,
                "matrix": [[_c2l(t.matrix[0][0]), _c2l(t.matrix[0][1])],
                           [_c2l(t.matrix[1][0]), _c2l(t.matrix[1][1])]],
                "num": [_c2l(c) for c in t.num],
                "den": [_c2l(c) for c in t.den],
            }
            for t in p["terms"]
        ],
    }


def spec_from_dict(d: dict[str, Any]) -> PotentialSpec:
    """Inverse of spec_to_dict; raises ValueError on malformed input."""
    try:
        v = d["variant"]
    except (KeyError, TypeError):
        raise ValueError("potential dict needs a 'variant' key") from None
    if v == "sphere":
        return sphere_spec()
    if v == "torus":
        return torus_spec()
    if v == "equivariant":
        return equivariant_spec(d["a"], d["b"], d.get("c", 0.0))
    if v == "radial":
        return radial_spec(_l2c(d["c"]), int(d["k"]))
    if v == "trinoid":
        return trinoid_spec(_l2c(d["lambda0"]), d["v0"], d["v1"], d["vinf"])
    if v == "custom":
        terms = [
            CustomTerm(
                lam_power=int(t["lam_power"]),
                matrix=tuple(tuple(_l2c(x) for x in row) for row in t["matrix"]),
                num=tuple(_l2c(c) for c in t.get("num", [1.0])),
                den=tuple(_l2c(c) for c in t.get("den", [1.0])),
            )
            for t in d["terms"]
        ]
        return custom_spec(terms, [_l2c(q) for q in d.get("poles", [])], _l2c(d["base_point"]))
    raise ValueError(f"unknown potential variant {v!r}")
