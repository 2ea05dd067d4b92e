"""Random scatterer configurations and the multiple-scattering linear algebra.

The multiple-scattering matrix at wavenumber ``k`` is

    M_ij = F(k)^-1 delta_ij - G+(k, r_ij) (1 - delta_ij)

and its model-independent dimensionless companion is

    N_ij = i delta_ij - G+(k, r_ij)/I(k, 0) (1 - delta_ij).

Both are complex symmetric (never Hermitian for real ``k``).  Everything
here is deterministic: configuration ``c`` of a run with master seed ``m``
uses the derived seed ``config_seed(m, c)``, so ensemble averages do not
depend on scheduling order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg as _sla

from .errors import ConvergenceError, DomainError, SingularMatrixError
from .green import GasGeometry, green_fn, i_zero
from .models import f_inverse

__all__ = [
    "ScattererConfig",
    "MSMatrix",
    "config_seed",
    "sample_config",
    "build_matrix",
    "build_matrices",
    "log_abs_det",
    "log_abs_det_batch",
    "eigen_spectrum",
    "smallest_eigenpair",
    "refine_root",
    "scattered_amplitudes",
]

logger = logging.getLogger("lorentzgas")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
#: pairs closer than this (in units of sigma) trigger a resample
DEGENERATE_DISTANCE = 1e-9


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def config_seed(master_seed: int, index: int) -> int:
    """Per-configuration seed, independent of evaluation order."""
    return _splitmix64((master_seed & _MASK64) + (index + 1) * _GOLDEN)


@dataclass(frozen=True)
class ScattererConfig:
    """Scatterer positions in the d-ball plus the pairwise distance matrix."""

    positions: np.ndarray  # (N, d)
    distances: np.ndarray  # (N, N), symmetric, zero diagonal
    seed: int

    @property
    def n_scatter(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def sample_config(geom: GasGeometry, seed: int) -> ScattererConfig:
    """Draw positions i.i.d. uniform in the ball of radius ``geom.radius``.

    Points are generated as (uniform direction) * R * u^(1/d) with
    ``u ~ U(0, 1)``.  Deterministic for a fixed seed.  Configurations with
    a pair distance below ``DEGENERATE_DISTANCE * sigma`` are resampled
    from a derived seed (logged).
    """
    n, d = geom.n_scatter, geom.d
    attempt_seed = int(seed) & _MASK64
    for _ in range(100):
        rng = np.random.default_rng(attempt_seed)
        vec = rng.standard_normal((n, d))
        norms = np.linalg.norm(vec, axis=1)
        while np.any(norms == 0.0):  # probability zero, but stay safe
            bad = norms == 0.0
            vec[bad] = rng.standard_normal((int(bad.sum()), d))
            norms = np.linalg.norm(vec, axis=1)
        directions = vec / norms[:, None]
        radii = geom.radius * rng.random(n) ** (1.0 / d)
        pos = directions * radii[:, None]
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        if n == 1 or dist[np.triu_indices(n, 1)].min() >= DEGENERATE_DISTANCE * geom.sigma:
            pos.setflags(write=False)
            dist.setflags(write=False)
            return ScattererConfig(positions=pos, distances=dist, seed=int(seed))
        logger.warning("degenerate configuration for seed %d; resampling", attempt_seed)
        attempt_seed = _splitmix64(attempt_seed)
    raise ConvergenceError("sample_config: could not draw a non-degenerate configuration")


@dataclass(frozen=True)
class MSMatrix:
    """Dense complex symmetric multiple-scattering matrix and its metadata."""

    values: np.ndarray
    kind: str  # 'M' or 'N'
    k: complex

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def norm(self) -> float:
        """Frobenius norm, the scale used in residual contracts."""
        return float(np.linalg.norm(self.values))


def build_matrix(kind: str, config: ScattererConfig, model, d: int, k: complex) -> MSMatrix:
    """Assemble M(k) or N(k) for one configuration.

    Each off-diagonal entry is computed once and mirrored, so the result is
    symmetric bit-for-bit.  The model is ignored for kind 'N'.
    """
    kind = kind.upper()
    if kind not in ("M", "N"):
        raise ValueError(f"build_matrix: kind={kind!r} must be 'M' or 'N'")
    n = config.n_scatter
    k = complex(k)
    try:
        if kind == "M":
            diag = f_inverse(model, d, k)
            scale = 1.0
        else:
            diag = 1j
            scale = i_zero(d, k)
        a = np.zeros((n, n), dtype=complex)
        iu = np.triu_indices(n, 1)
        if iu[0].size:
            g = green_fn(+1, d, k, config.distances[iu])
            a[iu] = -g / scale
        a = a + a.T
        np.fill_diagonal(a, diag)
    except DomainError as exc:
        raise type(exc)(f"build_matrix(kind={kind}, k={k}): {exc}") from exc
    a.setflags(write=False)
    return MSMatrix(values=a, kind=kind, k=k)


def build_matrices(kind: str, config: ScattererConfig, model, d: int, ks) -> np.ndarray:
    """Stacked matrices for many wavenumbers at once: shape (len(ks), N, N).

    Hot path for grid sweeps; raises the same domain errors as
    :func:`build_matrix`.
    """
    kind = kind.upper()
    if kind not in ("M", "N"):
        raise ValueError(f"build_matrices: kind={kind!r} must be 'M' or 'N'")
    ks = np.asarray(ks, dtype=complex).ravel()
    n = config.n_scatter
    iu = np.triu_indices(n, 1)
    rvec = config.distances[iu]
    out = np.zeros((ks.size, n, n), dtype=complex)
    if rvec.size:
        g = green_fn(+1, d, ks[:, None], rvec[None, :])  # (nk, npairs)
        if kind == "N":
            g = g / i_zero(d, ks)[:, None]
        out[:, iu[0], iu[1]] = -g
        out[:, iu[1], iu[0]] = -g
    if kind == "M":
        diag = f_inverse(model, d, ks)
    else:
        diag = np.full(ks.shape, 1j)
    idx = np.arange(n)
    out[:, idx, idx] = diag[:, None]
    return out


def log_abs_det(mat: MSMatrix) -> float:
    """``ln |det|`` via LU with partial pivoting (sum of log pivot moduli).

    The determinant itself is never formed, so no overflow occurs; an
    exactly singular matrix yields ``-inf``.
    """
    values = mat.values if isinstance(mat, MSMatrix) else np.asarray(mat)
    if not np.all(np.isfinite(values)):
        raise DomainError("log_abs_det: matrix has non-finite entries")
    sign, logabs = np.linalg.slogdet(values)
    if sign == 0:
        return float("-inf")
    return float(logabs)


def log_abs_det_batch(stack: np.ndarray) -> np.ndarray:
    """Batched ``ln |det|`` over a stack of matrices; singular entries give -inf."""
    sign, logabs = np.linalg.slogdet(stack)
    logabs = np.asarray(logabs, dtype=float)
    logabs[np.asarray(sign) == 0] = -np.inf
    return logabs


def eigen_spectrum(mat: MSMatrix, vectors: bool = False):
    """Eigenvalues (and optionally right eigenvectors) of the dense matrix."""
    try:
        if vectors:
            w, v = np.linalg.eig(mat.values)
            return w, v
        return np.linalg.eigvals(mat.values)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigen_spectrum: QR iteration failed: {exc}") from exc


def _lu_null_vector(lu: np.ndarray, piv_col: int) -> np.ndarray:
    """Null vector of U from an LU factorization with U[j,j] = 0 at piv_col."""
    n = lu.shape[0]
    x = np.zeros(n, dtype=complex)
    x[piv_col] = 1.0
    if piv_col:
        u = np.triu(lu)[:piv_col, :piv_col]
        rhs = -lu[:piv_col, piv_col]
        x[:piv_col] = _sla.solve_triangular(u, rhs)
    return x / np.linalg.norm(x)


def smallest_eigenpair(mat: MSMatrix, tol: float = 1e-8, max_iter: int = 80):
    """Minimum-modulus eigenvalue and eigenvector via inverse power iteration.

    A small block (3 vectors) is iterated on the LU factors so that nearly
    tied smallest moduli are resolved by a Rayleigh-Ritz projection instead
    of stalling a single-vector iteration; the minimum-modulus Ritz pair is
    polished with Rayleigh-shifted steps when needed.  Converged when
    ``||A v - mu v|| <= tol * ||A||_F``.  An exactly singular matrix
    returns ``(0, null vector)``.
    """
    a = mat.values
    n = a.shape[0]
    norm_a = float(np.linalg.norm(a))
    if n == 1:
        return complex(a[0, 0]), np.ones(1, dtype=complex)
    lu, piv = _sla.lu_factor(a, check_finite=False)
    diag_u = np.abs(np.diag(lu))
    if np.any(diag_u == 0.0):
        col = int(np.argmin(diag_u))
        return 0j, _lu_null_vector(lu, col)
    rng = np.random.default_rng(0x5EED)
    b = min(4, n)
    v_blk = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
    v_blk, _ = np.linalg.qr(v_blk)
    tol_abs = tol * norm_a
    mu, v, res = 0j, v_blk[:, 0], np.inf
    for it in range(1, max_iter + 1):
        y = _sla.lu_solve((lu, piv), v_blk, check_finite=False)
        if not np.all(np.isfinite(y)):
            raise ConvergenceError("smallest_eigenpair: inverse iteration broke down", it)
        v_blk, _ = np.linalg.qr(y)
        # Rayleigh-Ritz on the block; take the Ritz pair of smallest modulus.
        t = v_blk.conj().T @ (a @ v_blk)
        theta, y_small = np.linalg.eig(t)
        j = int(np.argmin(np.abs(theta)))
        v = v_blk @ y_small[:, j]
        v /= np.linalg.norm(v)
        mu = complex(theta[j])
        av = a @ v
        res = float(np.linalg.norm(av - mu * v))
        if res <= tol_abs:
            return mu, v
    # Polish with Rayleigh-shifted steps (quadratic near the target).
    eye = np.eye(n)
    for it in range(1, 9):
        try:
            lu_s, piv_s = _sla.lu_factor(a - mu * eye, check_finite=False)
        except _sla.LinAlgError:
            break
        diag_s = np.abs(np.diag(lu_s))
        if np.any(diag_s == 0.0):
            v = _lu_null_vector(lu_s, int(np.argmin(diag_s)))
            return mu, v
        y = _sla.lu_solve((lu_s, piv_s), v, check_finite=False)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            break
        v = y / ny
        av = a @ v
        mu = complex(v.conj() @ av)
        res = float(np.linalg.norm(av - mu * v))
        if res <= tol_abs:
            return mu, v
    raise ConvergenceError(
        f"smallest_eigenpair: no convergence (residual {res:.3e} > {tol_abs:.3e})",
        max_iter,
    )


def _in_domain(model, d: int, k: complex) -> bool:
    # Analyticity domain of det M: excludes the arg k = -pi/2 ray in even d.
    # (Isolated real amplitude zeros are poles of F^-1, handled by overflow.)
    if d % 2 == 0 and abs(k.real) < 1e-14 * max(1.0, abs(k)) and k.imag < 0:
        return False
    return True


def refine_root(
    config: ScattererConfig,
    model,
    d: int,
    k0: complex,
    tol: float = 1e-10,
    max_iter: int = 50,
):
    """Newton-refine a root of ``det M(k) = 0`` from the guess ``k0``.

    The iteration runs on the smallest eigenvalue of M(k) (never on the
    determinant, which varies exponentially); the derivative is a central
    difference with step ``1e-6 * |k|``.  Converged when
    ``|mu_min| <= tol * ||M||_F``.  Raises on non-convergence or when the
    iterates leave the analyticity domain.
    """
    k = complex(k0)
    if not _in_domain(model, d, k):
        raise DomainError(f"refine_root: k0={k0} outside the analyticity domain")

    def mu_of(kk: complex) -> complex:
        m = build_matrix("M", config, model, d, kk)
        mu, _ = smallest_eigenpair(m)
        return mu

    for it in range(1, max_iter + 1):
        m = build_matrix("M", config, model, d, k)
        mu, _ = smallest_eigenpair(m)
        if abs(mu) <= tol * m.norm():
            return k
        h = 1e-6 * max(abs(k), 1.0)
        dmu = (mu_of(k + h) - mu_of(k - h)) / (2.0 * h)
        if dmu == 0 or not np.isfinite(abs(dmu)):
            raise ConvergenceError(f"refine_root: derivative breakdown at k={k}", it)
        k = k - mu / dmu
        if not np.isfinite(abs(k)):
            raise ConvergenceError("refine_root: iterate diverged", it)
        if not _in_domain(model, d, k):
            raise DomainError(f"refine_root: iterate {k} escaped the analyticity domain")
    raise ConvergenceError(
        f"refine_root: no convergence after {max_iter} iterations (|mu|={abs(mu):.3e})",
        max_iter,
    )


def scattered_amplitudes(
    config: ScattererConfig,
    model,
    d: int,
    k: float,
    direction,
) -> tuple[np.ndarray, Callable]:
    """Solve the self-consistent amplitude system ``M(k) a = phi``.

    ``phi_i = exp(i k dir . x_i)`` is the incident plane wave on each site.
    Returns the amplitudes and a callable evaluating the total wave
    ``psi(r) = phi(r) + sum_i a_i G+(k, |r - x_i|)`` at points off the
    scatterer positions.
    """
    kf = float(k)
    omega = np.asarray(direction, dtype=float)
    if omega.shape != (d,):
        raise ValueError(f"direction must be a {d}-vector")
    nrm = np.linalg.norm(omega)
    if not np.isclose(nrm, 1.0, rtol=1e-12, atol=1e-12):
        raise ValueError("direction must be a unit vector")
    m = build_matrix("M", config, model, d, kf)
    phi = np.exp(1j * kf * (config.positions @ omega))
    try:
        a = _sla.solve(m.values, phi, assume_a="gen")
    except _sla.LinAlgError as exc:
        raise SingularMatrixError(f"scattered_amplitudes: M(k) singular at k={kf}") from exc
    res = np.linalg.norm(m.values @ a - phi) / np.linalg.norm(phi)
    if not res <= 1e-10:
        raise SingularMatrixError(
            f"scattered_amplitudes: solve residual {res:.3e} exceeds 1e-10 (near-singular M)"
        )

    positions = config.positions

    def psi_at(r) -> complex:
        r_arr = np.asarray(r, dtype=float)
        single = r_arr.ndim == 1
        pts = r_arr[None, :] if single else r_arr
        dist = np.linalg.norm(pts[:, None, :] - positions[None, :, :], axis=-1)
        vals = np.exp(1j * kf * (pts @ omega)) + np.sum(
            a[None, :] * green_fn(+1, d, kf, dist), axis=1
        )
        return complex(vals[0]) if single else vals

    return a, psi_at
