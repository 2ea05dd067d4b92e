"""Resonance families of two scatterers at separation ``s``.

The exact resonances solve ``G+(k, s) = +/- F(k)^-1``; the symmetric (+)
and antisymmetric (-) branches interleave along the real axis, one root
per band index ``n`` near ``Re(ks) = n pi``.  Two one-shot approximations
are provided: a general one built from the envelope
``A(k, s) = G+(k, s) exp(-iks)``,

    k_n s = n pi - i log( F(n pi/s)^-1 / A(n pi/s, s) ),

and a small-``alpha k`` hard-sphere simplification

    k_n s = n pi - i (d-1)/2 log(s/alpha) - i/(2d) (alpha n pi / s)^2.

The principal branch of the logarithm is used, aligned so that the band
index keeps ``Re(k_n s)`` near ``n pi`` (the sign needed for the alignment
fixes the parity of the branch).
"""

from __future__ import annotations

import cmath
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .green import green_fn
from .models import HardSphere, f_inverse

__all__ = [
    "ResonanceBranch",
    "envelope",
    "approx_resonances",
    "exact_resonances",
    "escape_rate",
    "band_escape_rate",
]

logger = logging.getLogger("lorentzgas")

#: |F^-1 / A| outside this window voids the band approximation assumptions
ENVELOPE_RATIO_WINDOW = (1e-6, 1e6)


@dataclass(frozen=True)
class ResonanceBranch:
    """One resonance of the two-scatterer system."""

    n: int
    k: complex
    parity: int  # +1 symmetric (superradiant), -1 antisymmetric (subradiant)
    method: str  # 'exact' | 'approx_general' | 'approx_hs'
    residual: float = 0.0


def envelope(d: int, k: complex, s: float) -> complex:
    """Slowly varying envelope ``A(k, s) = G+(k, s) exp(-iks)``."""
    return green_fn(+1, d, k, s) * cmath.exp(-1j * complex(k) * s)


def _ratio_and_parity(model, d: int, s: float, n: int) -> tuple[complex, int]:
    """log argument ``c`` (branch-aligned) and the parity of band ``n``."""
    k_eval = n * np.pi / s
    x = f_inverse(model, d, k_eval) / envelope(d, k_eval, s)
    mag = abs(x)
    if not (ENVELOPE_RATIO_WINDOW[0] <= mag <= ENVELOPE_RATIO_WINDOW[1]):
        warnings.warn(
            f"band approximation degenerate at n={n}: |F^-1/A| = {mag:.3e} "
            f"(amplitude zero or pole nearby)",
            stacklevel=3,
        )
    # Root of branch sigma near n*pi satisfies e^{i delta} = (-1)^n sigma X
    # with small delta; pick the sign that makes the argument principal-small.
    if abs(cmath.phase(x)) <= np.pi / 2.0:
        return x, (-1) ** n
    return -x, (-1) ** (n + 1)


def approx_resonances(d: int, model, s: float, n: int, variant: str = "general") -> complex:
    """One-shot band approximation for the resonance of band index ``n >= 1``."""
    if n < 1:
        raise ValueError(f"approx_resonances: n={n} must be >= 1")
    if s <= 0:
        raise ValueError(f"approx_resonances: s={s} must be positive")
    if variant == "general":
        c, _ = _ratio_and_parity(model, d, s, n)
        return (n * np.pi - 1j * cmath.log(c)) / s
    if variant == "hard_sphere":
        if not isinstance(model, HardSphere):
            raise TypeError("variant 'hard_sphere' requires a HardSphere model")
        alpha = model.alpha
        ka = n * np.pi * alpha / s
        if ka > 0.5:
            warnings.warn(f"hard-sphere band formula used outside alpha*k << 1 (alpha*k = {ka:.2f})")
        val = n * np.pi - 1j * (d - 1) / 2.0 * np.log(s / alpha) - 1j / (2.0 * d) * ka**2
        return val / s
    raise ValueError(f"approx_resonances: unknown variant {variant!r}")


def _newton_branch(d, model, s, sigma, k_start, tol, max_iter=80):
    """Newton iteration on ``G+(k, s) - sigma F(k)^-1`` from ``k_start``."""

    def h(kk):
        return green_fn(+1, d, kk, s) - sigma * f_inverse(model, d, kk)

    k = complex(k_start)
    for _ in range(max_iter):
        val = h(k)
        if abs(val) <= tol:
            return k, abs(val)
        dk = 1e-7 * max(abs(k), 1.0)
        dh = (h(k + dk) - h(k - dk)) / (2.0 * dk)
        if dh == 0 or not np.isfinite(abs(dh)):
            return None
        k_new = k - val / dh
        if not np.isfinite(abs(k_new)):
            return None
        k = k_new
    val = h(k)
    if abs(val) <= tol:
        return k, abs(val)
    return None


def exact_resonances(d: int, model, s: float, n_range, tol: float = 1e-9) -> list[ResonanceBranch]:
    """Newton-refined roots of ``G+(k, s) = +/- F(k)^-1`` for bands ``n_range``.

    Each band is seeded by the one-shot approximations; a root is accepted
    when its residual is below ``tol``, it lies in the lower half plane and
    within half a band spacing of its seed slot.  Bands whose solve fails
    (e.g. on top of an amplitude zero) are reported and skipped.
    """
    out: list[ResonanceBranch] = []
    for n in n_range:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, sigma = _ratio_and_parity(model, d, s, n)
            seeds = [approx_resonances(d, model, s, n, "general")]
            if isinstance(model, HardSphere):
                seeds.append(approx_resonances(d, model, s, n, "hard_sphere"))
            seeds.append((n * np.pi - 0.5j) / s)
        found = None
        for seed in seeds:
            res = _newton_branch(d, model, s, sigma, seed, tol)
            if res is None:
                continue
            k_root, resid = res
            if k_root.imag < 0 and abs(k_root.real * s - n * np.pi) < np.pi:
                found = (k_root, resid)
                break
        if found is None:
            logger.warning("exact_resonances: band n=%d (sigma=%+d) unsolved", n, sigma)
            continue
        out.append(
            ResonanceBranch(n=n, k=found[0], parity=sigma, method="exact", residual=found[1])
        )
    return out


def escape_rate(k: complex, v: float) -> float:
    """Escape rate ``Gamma = 2 v |Im k|`` of a resonant state ``Im k < 0``."""
    k = complex(k)
    if k.imag >= 0:
        raise ValueError(f"escape_rate: Im k = {k.imag} must be negative")
    return 2.0 * v * abs(k.imag)


def band_escape_rate(d: int, alpha: float, s: float, v: float, n: int) -> float:
    """Hard-sphere band escape rate; purely quadratic in ``n`` when d = 1."""
    ka = alpha * n * np.pi / s
    return (v / s) * (d - 1) * np.log(s / alpha) + (v / (s * d)) * ka**2
