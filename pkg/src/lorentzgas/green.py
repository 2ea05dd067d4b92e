"""Free-space Green functions in arbitrary dimension, gas geometry, and the
pair-distance distribution of points in a d-ball.

Conventions
-----------
Wavenumbers are measured in units of the inverse mean inter-scatterer
distance ``1/sigma`` and lengths in units of ``sigma``.  The outgoing
Green function ``G+`` is

    G+(k, r) = -(1/2pi) (-ik / 2pi r)^((d-2)/2) K_{(d-2)/2}(-ikr)

with principal-branch powers, which places its branch cut (present only in
even dimensions) on the ray ``arg k = -pi/2``; the incoming ``G-`` has the
mirror cut at ``arg k = +pi/2``.  In odd dimensions the half-integer-order
closed form is rewritten in integer powers of ``-ik``, so the function is
evaluated analytically everywhere except ``k = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp

from .errors import DomainError
from .specfun import _half_integer_coeffs

__all__ = [
    "GasGeometry",
    "ball_constants",
    "gas_radius",
    "green_fn",
    "green_I",
    "i_zero",
    "pair_distance_pdf",
]


def ball_constants(d: int) -> tuple[float, float]:
    """Volume ``V_d`` and surface area ``S_d`` of the unit ball in ``R^d``."""
    if d < 1:
        raise DomainError(f"ball_constants: d={d} must be >= 1")
    v = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
    return v, v * d


def gas_radius(d: int, n_scatter: int, sigma: float) -> float:
    """Ball radius giving unit scatterer density in units of ``sigma``."""
    if n_scatter < 1:
        raise DomainError(f"gas_radius: N={n_scatter} must be >= 1")
    v_d, _ = ball_constants(d)
    return (n_scatter / v_d) ** (1.0 / d) * sigma


@dataclass(frozen=True)
class GasGeometry:
    """Dimension, scatterer count, unit length and the derived ball radius."""

    d: int
    n_scatter: int
    sigma: float = 1.0
    radius: float = field(init=False)

    def __post_init__(self):
        if self.d < 1 or self.n_scatter < 1 or self.sigma <= 0:
            raise DomainError(f"invalid geometry: d={self.d}, N={self.n_scatter}, sigma={self.sigma}")
        object.__setattr__(self, "radius", gas_radius(self.d, self.n_scatter, self.sigma))

    @property
    def density(self) -> float:
        return self.sigma ** (-self.d)


def green_fn(sign: int, d: int, k, r):
    """Outgoing (+1) or incoming (-1) Green function ``G^(sign)(k, r)``.

    ``k`` and ``r`` may be scalars or broadcastable arrays; ``r`` must be
    strictly positive (use :func:`green_I` for the finite ``r = 0`` value).
    """
    if sign not in (+1, -1):
        raise DomainError(f"green_fn: sign={sign!r} must be +1 or -1")
    if d < 1:
        raise DomainError(f"green_fn: d={d} must be >= 1")
    scalar = np.ndim(k) == 0 and np.ndim(r) == 0
    # Always compute on >=1-d arrays: scalar numpy/python arithmetic takes
    # different complex-division code paths and would break bit-for-bit
    # agreement between scalar and batched evaluation.
    k_arr = np.atleast_1d(np.asarray(k, dtype=complex))
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(k_arr == 0):
        raise DomainError("green_fn: k = 0 is singular")
    if np.any(r_arr <= 0.0):
        raise DomainError("green_fn: r must be positive (use green_I for the r = 0 value)")
    if d % 2 == 0:
        on_cut = (k_arr.real == 0.0) & (sign * k_arr.imag < 0.0)
        if np.any(on_cut):
            raise DomainError(
                f"green_fn: k touches the branch cut arg k = {'-' if sign > 0 else '+'}pi/2 for d={d}"
            )

    w = (-sign * 1j) * k_arr
    nu = (d - 2) / 2.0
    if d % 2 == 1:
        m = (d - 3) // 2 if d >= 3 else 0
        q = (d - 3) // 2  # nu - 1/2, integer (q = -1 for d = 1)
        acc = 0.0
        for j, c in enumerate(_half_integer_coeffs(m)):
            acc = acc + c * w ** (q - j) * r_arr ** float(-j)
        pref = -(1.0 / (2.0 * np.pi)) * (2.0 * np.pi * r_arr) ** (-nu) * math.sqrt(np.pi / 2.0)
        out = pref * r_arr ** (-0.5) * np.exp(-w * r_arr) * acc
    else:
        out = -(1.0 / (2.0 * np.pi)) * (w / (2.0 * np.pi * r_arr)) ** nu * _sp.kv(nu, w * r_arr)
    return complex(out[0]) if scalar else out


def i_zero(d: int, k):
    """``I(k, 0) = (pi/2) S_d / (2 pi)^d * k^(d-2)``, broadcast over ``k``."""
    scalar = np.ndim(k) == 0
    k_arr = np.atleast_1d(np.asarray(k, dtype=complex))
    if d == 1 and np.any(k_arr == 0):
        raise DomainError("i_zero: k = 0 is singular in d = 1")
    _, s_d = ball_constants(d)
    out = (np.pi / 2.0) * s_d / (2.0 * np.pi) ** d * k_arr ** (d - 2)
    return complex(out[0]) if scalar else out


def green_I(d: int, k, r):
    """``I(k, r) = -(G+ - G-)/(2i)``, with the finite limit value at ``r = 0``.

    For real ``k`` this equals ``-Im G+(k, r)``.  Broadcasts over ``k`` and
    ``r``; entries with ``r = 0`` take the closed limit value.
    """
    scalar = np.ndim(k) == 0 and np.ndim(r) == 0
    k_arr = np.atleast_1d(np.asarray(k, dtype=complex))
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0.0):
        raise DomainError("green_I: r must be >= 0")
    k_b, r_b = np.broadcast_arrays(k_arr, r_arr)
    out = np.empty(k_b.shape, dtype=complex)
    pos = r_b > 0.0
    if np.any(pos):
        gp = green_fn(+1, d, k_b[pos], r_b[pos])
        gm = green_fn(-1, d, k_b[pos], r_b[pos])
        out[pos] = -(gp - gm) / 2j
    if np.any(~pos):
        out[~pos] = i_zero(d, k_b[~pos])
    return complex(out[0]) if scalar else out


def pair_distance_pdf(s, geom: GasGeometry):
    """Probability density of the distance between two uniform points in the d-ball.

    Supported on ``[0, 2R]``; behaves as ``O(s^(d-1))`` at small ``s`` and
    vanishes at ``s = 2R``.
    """
    d, big_r = geom.d, geom.radius
    s_arr = np.asarray(s, dtype=float)
    scalar = s_arr.ndim == 0
    if np.any((s_arr < 0.0) | (s_arr > 2.0 * big_r)):
        raise DomainError(f"pair_distance_pdf: s outside [0, {2.0 * big_r}]")
    z = 1.0 - s_arr**2 / (4.0 * big_r**2)
    z = np.clip(z, 0.0, 1.0)
    reg = _sp.betainc((d + 1) / 2.0, 0.5, z)
    out = d * s_arr ** (d - 1) / big_r**d * reg
    return float(out) if scalar else out
