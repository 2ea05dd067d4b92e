"""Eigenvalue clouds of the dimensionless scattering matrix and their statistics.

At a real wavenumber the eigenvalues of N(k) all lie in the upper half
plane with per-configuration mean exactly ``i``; the cloud they form over
an ensemble is summarized here: circular-law radius, the pair-proximity
spiral curves, a Marchenko-Pastur fit of the imaginary-part marginal, the
log-log marginal slope, and the affine map sending eigenvalues to
resonances near a narrow single-scatterer pole.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np
from scipy import integrate, optimize

from . import __version__
from .ensemble import build_matrix, config_seed, eigen_spectrum, sample_config
from .errors import ConvergenceError
from .fields import default_workers
from .green import GasGeometry, green_fn, i_zero
from .models import Resonant

__all__ = [
    "EigenCloud",
    "MPParams",
    "collect_cloud",
    "spiral_curves",
    "map_to_resonances",
    "cloud_radius_estimate",
    "mp_pdf",
    "mp_fit",
    "marginal_slope",
    "eigenvalue_method_validity",
    "cloud_to_csv",
    "cloud_from_csv",
]

logger = logging.getLogger("lorentzgas")

#: ratio below which the "much smaller" criterion is considered satisfied
VALIDITY_RATIO = 0.1


@dataclass
class EigenCloud:
    """Eigenvalues of N(k) aggregated over configurations."""

    samples: np.ndarray  # complex, all configurations concatenated
    config_index: np.ndarray  # int, same length
    k: float
    geom: GasGeometry
    master_seed: int
    n_configs: int


_CLOUD_WORK: dict = {}


def _cloud_init(payload):
    _CLOUD_WORK.update(payload)


def _cloud_one(cidx: int):
    geom = _CLOUD_WORK["geom"]
    k = _CLOUD_WORK["k"]
    seed = config_seed(_CLOUD_WORK["master_seed"], cidx)
    cfg = sample_config(geom, seed)
    mat = build_matrix("N", cfg, None, geom.d, k)
    try:
        return eigen_spectrum(mat)
    except ConvergenceError as exc:
        logger.warning("collect_cloud: configuration %d failed: %s", cidx, exc)
        return None


def collect_cloud(
    geom: GasGeometry,
    k: float,
    n_configs: int,
    master_seed: int,
    workers: int | None = None,
) -> EigenCloud:
    """Eigenvalues of N(k) over ``n_configs`` derived-seed configurations."""
    if n_configs < 1:
        raise ValueError("collect_cloud: n_configs must be >= 1")
    workers = default_workers() if workers is None else max(1, workers)
    payload = {"geom": geom, "k": float(k), "master_seed": int(master_seed)}
    chunks: list[np.ndarray] = []
    idx: list[np.ndarray] = []

    def _absorb(cidx, w):
        if w is None:
            return
        chunks.append(w)
        idx.append(np.full(w.size, cidx, dtype=int))

    if workers == 1 or n_configs == 1:
        _cloud_init(payload)
        for cidx in range(n_configs):
            _absorb(cidx, _cloud_one(cidx))
        _CLOUD_WORK.clear()
    else:
        with Pool(workers, initializer=_cloud_init, initargs=(payload,)) as pool:
            chunksize = max(1, n_configs // (4 * workers))
            for cidx, w in enumerate(pool.imap(_cloud_one, range(n_configs), chunksize=chunksize)):
                _absorb(cidx, w)
    samples = np.concatenate(chunks) if chunks else np.empty(0, dtype=complex)
    config_index = np.concatenate(idx) if idx else np.empty(0, dtype=int)
    return EigenCloud(
        samples=samples, config_index=config_index, k=float(k), geom=geom,
        master_seed=int(master_seed), n_configs=n_configs,
    )


def spiral_curves(d: int, k: float, s_values) -> tuple[np.ndarray, np.ndarray]:
    """Pair-proximity eigenvalue branches ``nu_pm(s) = i -/+ G+(k, s)/I(k, 0)``.

    Traced over the separations ``s_values``; both branches tend to ``i``
    at large separation, and for d >= 2 the imaginary parts approach 2
    (symmetric) and 0 (antisymmetric) as ``s -> 0``.
    """
    s = np.asarray(s_values, dtype=float)
    ratio = green_fn(+1, d, float(k), s) / i_zero(d, float(k))
    return 1j - ratio, 1j + ratio


def map_to_resonances(nu, pole: complex) -> np.ndarray:
    """Affine eigenvalue-to-resonance map ``k = Re p + Im p * nu``.

    Valid near a narrow single-scatterer pole; being affine it preserves
    the shape of the cloud exactly (up to scaling by ``|Im p|`` and a
    point reflection when ``Im p < 0``).
    """
    p = complex(pole)
    return p.real + p.imag * np.asarray(nu, dtype=complex)


def cloud_radius_estimate(geom: GasGeometry, k: float) -> float:
    """Circular-law radius ``rho = sqrt((N-1) <|G+|^2>) / I(k, 0)`` at real k.

    Uses the exact ball average of ``|G+|^2``; good for ``k sigma >> 1``.
    """
    from .bounds import avg_green_sq

    g2 = avg_green_sq(geom.d, float(k), geom.radius, "closed_real")
    i0 = abs(i_zero(geom.d, float(k)))
    return float(np.sqrt((geom.n_scatter - 1) * g2) / i0)


@dataclass(frozen=True)
class MPParams:
    """Support edges of a Marchenko-Pastur density, ``0 <= lambda_minus < lambda_plus``."""

    lambda_minus: float
    lambda_plus: float

    def __post_init__(self):
        if not (0.0 <= self.lambda_minus < self.lambda_plus):
            raise ValueError(f"degenerate MP parameters: {self.lambda_minus}, {self.lambda_plus}")

    @property
    def norm(self) -> float:
        return (np.pi / 2.0) * (np.sqrt(self.lambda_plus) - np.sqrt(self.lambda_minus)) ** 2


def mp_pdf(x, params: MPParams):
    """Marchenko-Pastur density ``sqrt((l+ - x)(x - l-)) / (C x)`` on its support."""
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    lm, lp = params.lambda_minus, params.lambda_plus
    out = np.zeros(x_arr.shape, dtype=float)
    inside = (x_arr >= lm) & (x_arr <= lp) & (x_arr > 0)
    xi = x_arr[inside]
    out[inside] = np.sqrt((lp - xi) * (xi - lm)) / (params.norm * xi)
    return float(out[0]) if scalar else out


def mp_fit(samples, bins: int | str = "fd") -> MPParams:
    """Least-squares Marchenko-Pastur fit to the histogram of ``Im nu`` samples.

    Support edges start at the 1st/99th percentiles; raises on degenerate
    results (``lambda_plus <= lambda_minus``).
    """
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 10:
        raise ValueError("mp_fit: need at least 10 samples")
    if np.any(x <= 0):
        raise ValueError("mp_fit: samples must be positive")
    hist, edges = np.histogram(x, bins=bins, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    lm0, lp0 = np.percentile(x, [1.0, 99.0])

    def resid(theta):
        lm, width = theta
        params = MPParams(max(lm, 0.0), max(lm, 0.0) + max(width, 1e-12))
        return mp_pdf(centers, params) - hist

    sol = optimize.least_squares(
        resid,
        x0=[max(lm0, 1e-6), max(lp0 - lm0, 1e-3)],
        bounds=([0.0, 1e-9], [np.inf, np.inf]),
        xtol=1e-12,
    )
    lm, width = sol.x
    if not np.isfinite(lm) or not np.isfinite(width) or width <= 1e-9:
        raise ValueError("mp_fit: degenerate fit (lambda_plus <= lambda_minus)")
    return MPParams(float(lm), float(lm + width))


def mp_sample(params: MPParams, n: int, seed: int) -> np.ndarray:
    """Draw from the MP density by inverse-CDF on a dense table (testing aid)."""
    xs = np.linspace(params.lambda_minus, params.lambda_plus, 20001)
    pdf = mp_pdf(xs, params)
    cdf = integrate.cumulative_trapezoid(pdf, xs, initial=0.0)
    cdf /= cdf[-1]
    u = np.random.default_rng(seed).random(n)
    return np.interp(u, cdf, xs)


def marginal_slope(samples, window: tuple[float, float], n_bins: int = 24) -> float:
    """Log-log least-squares slope of the ``Im nu`` histogram over ``window``.

    Uses logarithmically spaced bins; empty bins are dropped.  Raises when
    fewer than 100 samples fall inside the window.
    """
    lo, hi = window
    if not (0 < lo < hi):
        raise ValueError(f"marginal_slope: bad window {window}")
    x = np.asarray(samples, dtype=float)
    x = x[(x >= lo) & (x <= hi)]
    if x.size < 100:
        raise ValueError(f"marginal_slope: only {x.size} samples inside the window")
    edges = np.geomspace(lo, hi, n_bins + 1)
    hist, _ = np.histogram(x, bins=edges, density=True)
    centers = np.sqrt(edges[:-1] * edges[1:])
    keep = hist > 0
    if keep.sum() < 3:
        raise ValueError("marginal_slope: not enough occupied bins")
    slope, _ = np.polyfit(np.log(centers[keep]), np.log(hist[keep]), 1)
    return float(slope)


def eigenvalue_method_validity(
    model: Resonant,
    geom: GasGeometry,
    rho: float,
    escape_rate: float,
    v: float | None = None,
) -> bool:
    """Whether the eigenvalue route to resonances is trustworthy.

    Requires the resonance cluster to stay well above the multiple-
    scattering band: ``|Im p| rho`` must be below ``VALIDITY_RATIO`` times
    ``Gamma_esc / (2 v(Re p))``.  The boundary ratio itself counts as
    invalid.  Group velocity defaults to ``v(k) = k``.
    """
    if not isinstance(model, Resonant):
        raise TypeError("eigenvalue_method_validity applies to the resonant model")
    p = complex(model.pole)
    v_val = p.real if v is None else float(v)
    lhs = abs(p.imag) * rho
    rhs = escape_rate / (2.0 * v_val)
    return lhs < VALIDITY_RATIO * rhs


# -- serialization -----------------------------------------------------------

_CLOUD_TAG = "lorentzgas-cloud-v1"


def cloud_to_csv(cloud: EigenCloud, path) -> None:
    """Rows ``re_nu, im_nu, config_index`` under a '#' provenance header."""
    lines = [
        f"# {_CLOUD_TAG}",
        f"# d = {cloud.geom.d}",
        f"# n_scatter = {cloud.geom.n_scatter}",
        f"# sigma = {cloud.geom.sigma!r}",
        f"# k = {cloud.k!r}",
        f"# n_configs = {cloud.n_configs}",
        f"# master_seed = {cloud.master_seed}",
        f"# code_version = {__version__}",
        "re_nu,im_nu,config_index",
    ]
    for nu, ci in zip(cloud.samples, cloud.config_index):
        lines.append(f"{float(nu.real)!r},{float(nu.imag)!r},{int(ci)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cloud_from_csv(path) -> EigenCloud:
    """Inverse of :func:`cloud_to_csv`."""
    meta: dict = {}
    re_l, im_l, ci_l = [], [], []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {_CLOUD_TAG}":
            raise ValueError(f"{path}: not a {_CLOUD_TAG} file")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("re_nu"):
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
                continue
            a, b, c = line.split(",")
            re_l.append(float(a))
            im_l.append(float(b))
            ci_l.append(int(c))
    geom = GasGeometry(int(meta["d"]), int(meta["n_scatter"]), float(meta["sigma"]))
    return EigenCloud(
        samples=np.array(re_l) + 1j * np.array(im_l),
        config_index=np.array(ci_l, dtype=int),
        k=float(meta["k"]),
        geom=geom,
        master_seed=int(meta["master_seed"]),
        n_configs=int(meta["n_configs"]),
    )
