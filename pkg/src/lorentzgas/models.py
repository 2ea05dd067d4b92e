"""Single-scatterer models: inverse amplitude, cross sections, mean free path.

Two s-wave models are supported.  The resonant model has a Breit-Wigner
pole ``p`` in the lower half plane; the hard-sphere model is parametrized
by a scattering length ``alpha`` and is physically valid for
``|k| <~ 1/alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy import special as _sp

from .errors import DomainError, PoleError
from .green import GasGeometry, green_I, green_fn, i_zero

__all__ = [
    "Resonant",
    "HardSphere",
    "f_inverse",
    "cross_section",
    "mean_free_path",
    "real_f_zeros",
    "model_label",
    "model_from_label",
]


@dataclass(frozen=True)
class Resonant:
    """Breit-Wigner profile with pole ``p``, ``Im p < 0``."""

    pole: complex

    def __post_init__(self):
        if not complex(self.pole).imag < 0:
            raise DomainError(f"Resonant: pole {self.pole} must lie in the lower half plane")

    def validity_window(self) -> tuple[float, float]:
        """Real-k window |k - Re p| <= |Im p| where the profile is meaningful."""
        p = complex(self.pole)
        return (p.real - abs(p.imag), p.real + abs(p.imag))


@dataclass(frozen=True)
class HardSphere:
    """s-wave hard-sphere scatterer of scattering length ``alpha > 0``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"HardSphere: alpha={self.alpha} must be positive")

    def validity_window(self) -> tuple[float, float]:
        """Real-k window |k| <= 1/alpha of physical validity."""
        return (0.0, 1.0 / self.alpha)


def f_inverse(model, d: int, k):
    """Inverse scattering amplitude ``F(k)^-1``; broadcasts over ``k``.

    Resonant:    F^-1 = I(k,0) (i - (k - Re p)/Im p)
    Hard sphere: F^-1 = -I(k,0) G+(k, alpha) / I(k, alpha)
    """
    scalar = np.ndim(k) == 0
    k_arr = np.atleast_1d(np.asarray(k, dtype=complex))
    i0 = i_zero(d, k_arr)
    if isinstance(model, Resonant):
        p = complex(model.pole)
        out = i0 * (1j - (k_arr - p.real) / p.imag)
    elif isinstance(model, HardSphere):
        ia = green_I(d, k_arr, model.alpha)
        if np.any(ia == 0):
            raise PoleError(f"f_inverse: I(k, alpha) = 0 (amplitude zero) for k={k!r}")
        out = -i0 * green_fn(+1, d, k_arr, model.alpha) / ia
    else:
        raise TypeError(f"unknown scattering model {model!r}")
    return complex(out[0]) if scalar else out


def cross_section(model, d: int, k: float) -> tuple[float, float]:
    """Total cross section ``sigma_pt`` and the unitarity bound ``sigma_max``.

    For real positive ``k``; ``sigma_pt <= sigma_max`` always holds.
    """
    if not (np.isreal(k) and np.real(k) > 0):
        raise DomainError(f"cross_section: k={k} must be real and positive")
    kf = float(np.real(k))
    i0 = float(np.real(i_zero(d, kf)))
    finv = f_inverse(model, d, kf)
    sigma_max = 1.0 / (kf * i0)
    if finv == 0:
        raise PoleError(f"cross_section: F(k)^-1 = 0 at k={kf} (amplitude pole)")
    sigma_pt = i0 / (kf * abs(finv) ** 2)
    return sigma_pt, sigma_max


def mean_free_path(model, geom: GasGeometry, k: float) -> float:
    """Scattering mean free path ``ell = 1/(n sigma_pt)``; ``inf`` when sigma_pt = 0."""
    sigma_pt, _ = cross_section(model, geom.d, k)
    if sigma_pt == 0.0:
        return math.inf
    return geom.sigma**geom.d / sigma_pt


def model_label(model) -> str:
    """Round-trippable one-line description used in file headers."""
    if isinstance(model, Resonant):
        p = complex(model.pole)
        return f"resonant re_p={p.real!r} im_p={p.imag!r}"
    if isinstance(model, HardSphere):
        return f"hard_sphere alpha={model.alpha!r}"
    raise TypeError(f"unknown scattering model {model!r}")


def model_from_label(label: str):
    """Inverse of :func:`model_label`."""
    parts = label.split()
    kv = dict(p.split("=", 1) for p in parts[1:])
    if parts[0] == "resonant":
        return Resonant(complex(float(kv["re_p"]), float(kv["im_p"])))
    if parts[0] == "hard_sphere":
        return HardSphere(float(kv["alpha"]))
    raise ValueError(f"unknown model label {label!r}")


def real_f_zeros(model, d: int, k_min: float, k_max: float) -> list[float]:
    """Real wavenumbers in ``[k_min, k_max]`` where the amplitude ``F`` vanishes.

    These points are excluded from the analyticity domain of the
    multiple-scattering determinant, so grid builders mask cells around
    them.  The resonant model has none; for the hard-sphere model they sit
    at ``k = j/alpha`` with ``j`` running over the positive zeros of
    ``J_{(d-2)/2}``.
    """
    if isinstance(model, Resonant):
        return []
    if not isinstance(model, HardSphere):
        raise TypeError(f"unknown scattering model {model!r}")
    if k_max <= 0 or k_max < k_min:
        return []
    k_min = max(k_min, 0.0)
    nu = (d - 2) / 2.0
    x_max = k_max * model.alpha
    zeros: list[float] = []
    # Zeros of J_nu are asymptotically pi-spaced; a 0.05 step cannot skip one.
    step = 0.05
    x = max(1e-9, nu * 0.5)
    f_prev = _sp.jv(nu, x)
    while x < x_max:
        x_next = min(x + step, x_max)
        f_next = _sp.jv(nu, x_next)
        if f_prev == 0.0:
            zeros.append(x / model.alpha)
        elif f_prev * f_next < 0.0:
            root = optimize.brentq(lambda t: _sp.jv(nu, t), x, x_next, xtol=1e-13)
            zeros.append(root / model.alpha)
        x, f_prev = x_next, f_next
    return [z for z in zeros if k_min <= z <= k_max]
