"""Special functions used throughout the package.

Only the orders that occur in d-dimensional wave problems are supported:
``nu = (d - 2)/2`` with ``d >= 1``, i.e. half-integers and non-negative
integers (``2*nu`` is an integer ``>= -1``).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy import special as _sp

from .errors import ConvergenceError, DomainError

__all__ = ["bessel_k", "bessel_j_first_zero", "regularized_beta", "check_order"]

#: Real part of z below which exp(-z) overflows even with the subnormal range.
OVERFLOW_RE_Z = -745.0


def check_order(nu: float) -> float:
    """Validate that ``2*nu`` is an integer ``>= -1`` and return ``nu`` as float.

    Raises :class:`DomainError` otherwise.
    """
    two_nu = 2.0 * nu
    if not math.isfinite(two_nu) or round(two_nu) != two_nu or two_nu < -1:
        raise DomainError(f"unsupported order nu={nu!r}: 2*nu must be an integer >= -1")
    return float(nu)


@lru_cache(maxsize=None)
def _half_integer_coeffs(m: int) -> tuple[float, ...]:
    # K_{m+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_{j=0}^{m} c_j z^{-j},
    # c_j = (m+j)! / (j! (m-j)! 2^j)
    return tuple(
        math.factorial(m + j) / (math.factorial(j) * math.factorial(m - j) * 2.0**j)
        for j in range(m + 1)
    )


def _bessel_k_half_integer(mu: float, z):
    """K of half-integer order ``mu > 0`` by its exact finite closed form."""
    m = int(round(mu - 0.5))
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for j, c in enumerate(_half_integer_coeffs(m)):
        acc = acc + c * z ** (-j)
    return np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) * acc


def bessel_k(nu: float, z: complex) -> complex:
    """Modified Bessel function ``K_nu(z)`` on the principal branch.

    ``z`` must lie off the cut on the negative real axis.  Half-integer
    orders use the exact finite closed form; integer orders are delegated
    to the AMOS routine behind :func:`scipy.special.kv`, which covers the
    whole accuracy window ``1e-8 <= |z| <= 700`` at better than 1e-10
    relative error.
    """
    nu = check_order(nu)
    zc = complex(z)
    if zc == 0:
        raise DomainError("bessel_k: z = 0 is a singular point")
    if zc.imag == 0.0 and zc.real < 0.0:
        raise DomainError(f"bessel_k: z={zc} lies on the branch cut (negative real axis)")
    if zc.real < OVERFLOW_RE_Z:
        raise OverflowError(
            f"bessel_k: Re z = {zc.real} < {OVERFLOW_RE_Z}; result overflows double precision"
        )
    mu = abs(nu)  # K_{-nu} = K_{nu}
    if mu % 1.0 == 0.5:
        return complex(_bessel_k_half_integer(mu, zc))
    return complex(_sp.kv(mu, zc))


@lru_cache(maxsize=None)
def bessel_j_first_zero(nu: float) -> float:
    """Smallest positive root of ``J_nu``, to 1e-12 absolute.

    Requires ``nu >= -1/2``; results are memoized per order.
    """
    nu = check_order(nu)
    if nu < -0.5:
        raise DomainError(f"bessel_j_first_zero: nu={nu} < -1/2")
    if nu == -0.5:
        return math.pi / 2.0
    if nu == 0.5:
        return math.pi
    # Scan for the first sign change of J_nu beyond x=0, then polish.
    # The first zero lies in (nu, nu + pi + 2) for the orders supported here.
    x = max(nu, 0.5)
    step = 0.1
    f_prev = _sp.jv(nu, x)
    while f_prev == 0.0:
        x += 1e-9
        f_prev = _sp.jv(nu, x)
    for _ in range(10_000):
        x_next = x + step
        f_next = _sp.jv(nu, x_next)
        if f_prev * f_next < 0.0:
            root = optimize.brentq(lambda t: _sp.jv(nu, t), x, x_next, xtol=1e-13, rtol=8.9e-16)
            return float(root)
        x, f_prev = x_next, f_next
    raise ConvergenceError(f"no sign change found for J_{nu} within the scan range")


def regularized_beta(z: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_z(a, b)`` for ``z`` in [0, 1]."""
    if not (0.0 <= z <= 1.0):
        raise DomainError(f"regularized_beta: z={z} outside [0, 1]")
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"regularized_beta: a={a}, b={b} must be positive")
    return float(_sp.betainc(a, b, z))
