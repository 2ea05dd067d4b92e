"""Analytic bounds and diagnostics for the resonance band.

Collects the closed forms for the ball-averaged squared Green function,
the trace upper bound on the resonance potential, the width-density
approximation ``(d+3)/(4 Im k^2)``, the diffusive escape depth, and the
numerical-validity depth, packaged for cross-section plots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .fields import validity_bound
from .green import GasGeometry, pair_distance_pdf
from .models import f_inverse, mean_free_path
from .specfun import bessel_j_first_zero

__all__ = [
    "avg_green_sq",
    "potential_upper_bound",
    "width_density_approx",
    "diffusion_rate",
    "BandDiagnostics",
    "band_diagnostics",
]

#: Im(k) * R at or below which the deep-plane asymptotic form applies
ASYMPTOTIC_DEPTH = -5.0


def _series_prefactor(d: int) -> float:
    # Expansion coefficient of the pair-distance density at the far edge
    # s = 2R (non-normalized by construction).
    beta = math.gamma((d + 1) / 2.0) * math.gamma(0.5) / math.gamma(d / 2.0 + 1.0)
    return d * 2.0 ** ((3.0 * d + 1.0) / 2.0) / (((d + 1.0) / 2.0) * beta)


def _green_sq_far_field(d: int, k: complex, s) -> np.ndarray:
    # |G+(k, s)|^2 for |k| s >> 1; exact in d = 1 and d = 3.
    return abs(k) ** (d - 3) / (4.0 * (2.0 * np.pi * np.asarray(s)) ** (d - 1)) * np.exp(
        -2.0 * k.imag * np.asarray(s)
    )


def avg_green_sq(d: int, k: complex, radius: float, mode: str = "closed_real") -> float:
    """Ball average of ``|G+(k, s)|^2`` over uniform point pairs.

    Modes:

    ``closed_real``
        Exact real-k closed form
        ``d Gamma((d+2)/2) / (2 sqrt(pi) Gamma((d+3)/2)) |k|^(d-3) / (2 pi R)^(d-1)``;
        requires ``Im k = 0``.
    ``quadrature``
        Numeric integral of the far-field ``|G+|^2`` against the
        pair-distance density; valid for any ``Im k <= 0``.
    ``asymptotic_complex``
        Deep-plane form with the edge-expansion prefactor; requires
        ``Im k * R <= -5``.
    """
    k = complex(k)
    if radius <= 0:
        raise DomainError(f"avg_green_sq: radius={radius} must be positive")
    if mode == "closed_real":
        if k.imag != 0.0:
            raise DomainError("avg_green_sq: closed_real requires Im k = 0")
        num = d * math.gamma((d + 2) / 2.0)
        den = 2.0 * math.sqrt(math.pi) * math.gamma((d + 3) / 2.0)
        return num / den * abs(k) ** (d - 3) / (2.0 * math.pi * radius) ** (d - 1)
    if mode == "quadrature":
        geom_like = _BallGeom(d, radius)
        val, err = integrate.quad(
            lambda s: float(_green_sq_far_field(d, k, s)) * pair_distance_pdf(s, geom_like),
            0.0,
            2.0 * radius,
            limit=400,
        )
        return val
    if mode == "asymptotic_complex":
        if k.imag * radius > ASYMPTOTIC_DEPTH:
            raise DomainError(
                f"avg_green_sq: asymptotic_complex needs Im k * R <= {ASYMPTOTIC_DEPTH}"
            )
        a = _series_prefactor(d)
        x = -4.0 * k.imag * radius
        return (
            a * abs(k) ** (d - 3) / (4.0 * (4.0 * math.pi * radius) ** (d - 1))
            * math.gamma((d + 3) / 2.0) * math.exp(x) / x ** ((d + 3) / 2.0)
        )
    raise ValueError(f"avg_green_sq: unknown mode {mode!r}")


class _BallGeom:
    """Minimal stand-in with the attributes pair_distance_pdf needs."""

    def __init__(self, d, radius):
        self.d = d
        self.radius = radius


def _best_avg_mode(k: complex, radius: float) -> str:
    if k.imag == 0.0:
        return "closed_real"
    if k.imag * radius <= ASYMPTOTIC_DEPTH:
        return "asymptotic_complex"
    return "quadrature"


def potential_upper_bound(d: int, model, geom: GasGeometry, k: complex) -> float:
    """Trace bound on the resonance potential:

    ``Phi(k) <= (1/2) ln( |F^-1|^2 + (N-1) <|G+|^2> )``.

    The Green-function average uses the best applicable mode for ``k``.
    """
    k = complex(k)
    n = geom.n_scatter
    g2 = avg_green_sq(d, k, geom.radius, _best_avg_mode(k, geom.radius))
    finv = f_inverse(model, d, k)
    return 0.5 * math.log(abs(finv) ** 2 + (n - 1) * g2)


def width_density_approx(d: int, im_k: float) -> float:
    """Band-region density approximation ``(d+3) / (4 Im k^2)``."""
    if im_k >= 0:
        raise DomainError(f"width_density_approx: im_k={im_k} must be negative")
    return (d + 3) / (4.0 * im_k**2)


def diffusion_rate(d: int, ell: float, radius: float) -> float:
    """Imaginary wavenumber of the classical diffusive escape mode:

    ``k_idiff = -(ell / 2d) (j_{(d-2)/2} / R)^2`` with ``j`` the first
    Bessel-J zero.  Always negative; vanishes as the gas grows.
    """
    if ell <= 0 or radius <= 0:
        raise DomainError("diffusion_rate: ell and radius must be positive")
    j = bessel_j_first_zero((d - 2) / 2.0)
    return -(ell / (2.0 * d)) * (j / radius) ** 2


@dataclass(frozen=True)
class BandDiagnostics:
    """Markers and reference curves for a vertical cut at fixed ``Re k``."""

    k_imax: float  # numerical-validity depth (> 0)
    k_idiff: float  # diffusive escape position (< 0)
    ell: float  # scattering mean free path at the cut
    bound_curve: np.ndarray  # rows (im_k, Phi upper bound)
    approx_density: np.ndarray  # rows (im_k, (d+3)/(4 im_k^2))


def band_diagnostics(
    model,
    geom: GasGeometry,
    re_k: float,
    im_axis,
    machine_eps: float = 1e-16,
) -> BandDiagnostics:
    """Assemble the analytic overlays for a cut along ``Re k = re_k``."""
    im_axis = np.asarray(im_axis, dtype=float)
    ell = mean_free_path(model, geom, re_k)
    k_imax = validity_bound(geom.radius, machine_eps)
    k_idiff = diffusion_rate(geom.d, ell, geom.radius)
    bound = np.array(
        [potential_upper_bound(geom.d, model, geom, complex(re_k, im)) for im in im_axis]
    )
    approx = np.array(
        [width_density_approx(geom.d, im) if im < 0 else np.nan for im in im_axis]
    )
    return BandDiagnostics(
        k_imax=k_imax,
        k_idiff=k_idiff,
        ell=ell,
        bound_curve=np.column_stack([im_axis, bound]),
        approx_density=np.column_stack([im_axis, approx]),
    )
