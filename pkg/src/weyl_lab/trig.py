"""Complex trigonometric polynomials on the circle.

Coefficient functions of the operators, radial sector profiles and sampled
potentials are all finite trigonometric polynomials

    f(x) = sum_k c_k cos(kx) + sum_k s_k sin(kx),    c_k, s_k complex,

so evaluation, differentiation and conversion to exponential (Fourier)
coefficients can be exact.  This module keeps those operations in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class TrigPoly:
    """A complex trigonometric polynomial given by cosine/sine coefficients.

    ``cos_coeffs[k]`` multiplies cos(kx) for k = 0..degree and
    ``sin_coeffs[k]`` multiplies sin(kx); ``sin_coeffs[0]`` is ignored and
    kept zero.  Coefficients may be complex (imaginary parts enter through
    the ``*_imag`` arrays of the JSON form).
    """

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        cos_c = np.atleast_1d(np.asarray(self.cos_coeffs, dtype=complex))
        sin_c = np.atleast_1d(np.asarray(self.sin_coeffs, dtype=complex))
        d = max(cos_c.size, sin_c.size)
        cos_c = np.pad(cos_c, (0, d - cos_c.size))
        sin_c = np.pad(sin_c, (0, d - sin_c.size))
        sin_c[0] = 0.0
        object.__setattr__(self, "cos_coeffs", cos_c)
        object.__setattr__(self, "sin_coeffs", sin_c)

    @classmethod
    def constant(cls, value: complex) -> "TrigPoly":
        return cls(np.array([value], dtype=complex), np.array([0.0], dtype=complex))

    @classmethod
    def from_json(cls, obj: dict) -> "TrigPoly":
        """Build from ``{"cos": [...], "sin": [...], "cos_imag": [...], "sin_imag": [...]}``.

        All four lists are optional and may have different lengths; missing
        entries are zero.
        """
        if not isinstance(obj, dict):
            raise ConfigError(f"trig polynomial must be a JSON object, got {type(obj).__name__}")
        parts = {}
        for key in ("cos", "sin", "cos_imag", "sin_imag"):
            raw = obj.get(key, [])
            try:
                parts[key] = np.asarray(raw, dtype=float)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"coefficient list {key!r} is not numeric: {raw!r}") from exc
        d = max((p.size for p in parts.values()), default=0)
        d = max(d, 1)
        cos_c = np.zeros(d, dtype=complex)
        sin_c = np.zeros(d, dtype=complex)
        cos_c[: parts["cos"].size] += parts["cos"]
        sin_c[: parts["sin"].size] += parts["sin"]
        cos_c[: parts["cos_imag"].size] += 1j * parts["cos_imag"]
        sin_c[: parts["sin_imag"].size] += 1j * parts["sin_imag"]
        return cls(cos_c, sin_c)

    def to_json(self) -> dict:
        return {
            "cos": self.cos_coeffs.real.tolist(),
            "sin": self.sin_coeffs.real.tolist(),
            "cos_imag": self.cos_coeffs.imag.tolist(),
            "sin_imag": self.sin_coeffs.imag.tolist(),
        }

    @property
    def degree(self) -> int:
        nz = np.flatnonzero((self.cos_coeffs != 0) | (self.sin_coeffs != 0))
        return int(nz[-1]) if nz.size else 0

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    @property
    def is_real(self) -> bool:
        return bool(
            np.all(self.cos_coeffs.imag == 0) and np.all(self.sin_coeffs.imag == 0)
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(self.cos_coeffs.size)
        kx = np.multiply.outer(x, k)
        out = np.cos(kx) @ self.cos_coeffs + np.sin(kx) @ self.sin_coeffs
        return out if out.shape else complex(out)

    def derivative(self, order: int = 1) -> "TrigPoly":
        """Exact derivative: cos(kx) -> -k sin(kx), sin(kx) -> k cos(kx)."""
        cos_c, sin_c = self.cos_coeffs, self.sin_coeffs
        k = np.arange(cos_c.size)
        for _ in range(order):
            cos_c, sin_c = k * sin_c, -k * cos_c
        return TrigPoly(cos_c, sin_c)

    def exponential_coeffs(self) -> tuple[np.ndarray, int]:
        """Return ``(coeffs, d)`` with ``coeffs[d + nu]`` the coefficient of e^{i nu x}.

        cos(kx) = (e^{ikx} + e^{-ikx})/2 and sin(kx) = -i(e^{ikx} - e^{-ikx})/2.
        """
        d = self.cos_coeffs.size - 1
        out = np.zeros(2 * d + 1, dtype=complex)
        out[d] = self.cos_coeffs[0]
        for k in range(1, d + 1):
            out[d + k] = (self.cos_coeffs[k] - 1j * self.sin_coeffs[k]) / 2.0
            out[d - k] = (self.cos_coeffs[k] + 1j * self.sin_coeffs[k]) / 2.0
        return out, d

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        d = max(self.cos_coeffs.size, other.cos_coeffs.size)
        cos_c = np.zeros(d, dtype=complex)
        sin_c = np.zeros(d, dtype=complex)
        cos_c[: self.cos_coeffs.size] += self.cos_coeffs
        sin_c[: self.sin_coeffs.size] += self.sin_coeffs
        cos_c[: other.cos_coeffs.size] += other.cos_coeffs
        sin_c[: other.sin_coeffs.size] += other.sin_coeffs
        return TrigPoly(cos_c, sin_c)

    def scaled(self, factor: complex) -> "TrigPoly":
        return TrigPoly(factor * self.cos_coeffs, factor * self.sin_coeffs)


def as_profile(g) -> TrigPoly:
    """Coerce a sector profile (number, TrigPoly or JSON object) to a TrigPoly."""
    if isinstance(g, TrigPoly):
        return g
    if isinstance(g, (int, float)):
        return TrigPoly.constant(float(g))
    if isinstance(g, dict):
        return TrigPoly.from_json(g)
    raise ConfigError(f"cannot interpret {g!r} as a radial profile")


def wrap_0_2pi(theta):
    """Reduce angles to [0, 2*pi)."""
    return np.mod(theta, 2.0 * np.pi)


def wrap_pm_pi(theta):
    """Reduce angle differences to (-pi, pi]."""
    out = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    out = np.where(out == -np.pi, np.pi, out)
    return out if out.shape else float(out)
