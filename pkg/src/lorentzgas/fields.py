"""Resonance potential on a complex-wavenumber lattice and its Laplacian.

The resonance potential is the configuration average

    Phi(k) = (1/N) < ln |det M(k)| >

evaluated cell by cell on a rectangular lattice in the complex k plane;
its discrete 5-point Laplacian equals ``2 pi rho2(k)``, the joint density
of resonances per scatterer.  Cells where det M(k) is not analytic (the
``arg k = -pi/2`` ray in even dimensions, the real zeros of the amplitude,
the origin) are masked, as are cells whose evaluation failed; Laplacian
cells adjacent to masked cells are masked rather than one-sided.

Ensemble reduction is performed in configuration-index order with plain
float64 accumulation, so serial and parallel runs of the same seed are
bit-identical (reduction tolerance versus any other summation order is at
the 1e-13 level).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from . import __version__
from .ensemble import build_matrices, config_seed, log_abs_det_batch, sample_config
from .errors import DomainError
from .green import GasGeometry
from .models import model_label, real_f_zeros

__all__ = [
    "ComplexGrid",
    "ScalarField",
    "default_workers",
    "potential_map",
    "density_from_potential",
    "vertical_cut",
    "validity_bound",
    "field_to_csv",
    "field_from_csv",
]

WORKERS_ENV = "LORENTZGAS_WORKERS"


def default_workers() -> int:
    """Worker-count default: the LORENTZGAS_WORKERS variable or the CPU count."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ComplexGrid:
    """Rectangular lattice in the complex k plane (units of 1/sigma)."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nx: int
    ny: int

    def __post_init__(self):
        for name in ("re_min", "re_max", "im_min", "im_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("nx", "ny"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid must be at least 3x3, got {self.nx}x{self.ny}")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("grid bounds must be ordered")

    @property
    def h_re(self) -> float:
        return (self.re_max - self.re_min) / (self.nx - 1)

    @property
    def h_im(self) -> float:
        return (self.im_max - self.im_min) / (self.ny - 1)

    @property
    def re_axis(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.nx)

    @property
    def im_axis(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.ny)

    def k_values(self) -> np.ndarray:
        """Complex lattice points, shape (nx, ny)."""
        return self.re_axis[:, None] + 1j * self.im_axis[None, :]

    def interior(self) -> "ComplexGrid":
        return ComplexGrid(
            self.re_min + self.h_re,
            self.re_max - self.h_re,
            self.im_min + self.h_im,
            self.im_max - self.h_im,
            self.nx - 2,
            self.ny - 2,
        )


@dataclass
class ScalarField:
    """Real-valued samples on a grid: potential Phi or density 2 pi rho2."""

    grid: ComplexGrid
    values: np.ndarray  # (nx, ny) float64; NaN on masked cells
    mask: np.ndarray  # (nx, ny) bool; True = excluded
    n_configs: int
    kind: str  # 'potential' | 'density'
    meta: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None  # per-cell ensemble standard error

    @property
    def n_masked(self) -> int:
        return int(self.mask.sum())


def _domain_mask(grid: ComplexGrid, geom: GasGeometry, model, mask_radius: float) -> np.ndarray:
    """Cells excluded from the analyticity domain of det M(k)."""
    ks = grid.k_values()
    mask = np.abs(ks) <= mask_radius  # origin
    if geom.d % 2 == 0:
        mask |= (np.abs(ks.real) <= mask_radius) & (ks.imag < 0.0)
    if model is not None:
        pad = 2.0 * mask_radius
        for kz in real_f_zeros(model, geom.d, grid.re_min - pad, grid.re_max + pad):
            mask |= np.abs(ks - kz) <= mask_radius
    return mask


# -- worker plumbing ---------------------------------------------------------

_WORK: dict = {}


def _worker_init(payload):
    _WORK.update(payload)


def _config_potential(cidx: int) -> np.ndarray:
    """ln|det M|/N over the unmasked cells for configuration ``cidx``."""
    geom = _WORK["geom"]
    model = _WORK["model"]
    ks = _WORK["ks"]
    seed = config_seed(_WORK["master_seed"], cidx)
    cfg = sample_config(geom, seed)
    n = geom.n_scatter
    out = np.empty(ks.size, dtype=float)
    chunk = max(1, 4_000_000 // (n * n))
    for lo in range(0, ks.size, chunk):
        sl = slice(lo, min(lo + chunk, ks.size))
        try:
            mats = build_matrices("M", cfg, model, geom.d, ks[sl])
            out[sl] = log_abs_det_batch(mats) / n
        except DomainError:
            out[sl] = np.nan
    return out


def potential_map(
    geom: GasGeometry,
    model,
    grid: ComplexGrid,
    n_configs: int,
    master_seed: int,
    workers: int | None = None,
    mask_radius: float | None = None,
) -> ScalarField:
    """Ensemble-averaged resonance potential on ``grid``.

    ``mask_radius`` defaults to the larger grid spacing; cells within it of
    the even-d branch-cut ray, of a real amplitude zero, or of the origin
    are skipped.  Failed evaluations (non-finite ln|det|) mask their cell.
    Deterministic for fixed ``master_seed`` regardless of ``workers``.
    """
    if n_configs < 1:
        raise ValueError("potential_map: n_configs must be >= 1")
    if mask_radius is None:
        mask_radius = max(grid.h_re, grid.h_im)
    workers = default_workers() if workers is None else max(1, workers)
    mask = _domain_mask(grid, geom, model, mask_radius)
    ks_all = grid.k_values()
    live = ~mask
    ks_live = ks_all[live]

    payload = {"geom": geom, "model": model, "ks": ks_live, "master_seed": int(master_seed)}
    acc = np.zeros(ks_live.size, dtype=float)
    acc_sq = np.zeros(ks_live.size, dtype=float)
    fail = np.zeros(ks_live.size, dtype=int)

    def _reduce(vals: np.ndarray):
        bad = ~np.isfinite(vals)
        fail[bad] += 1
        safe = np.where(bad, 0.0, vals)
        np.add(acc, safe, out=acc)
        np.add(acc_sq, safe * safe, out=acc_sq)

    if workers == 1 or n_configs == 1:
        _worker_init(payload)
        for cidx in range(n_configs):
            _reduce(_config_potential(cidx))
        _WORK.clear()
    else:
        with Pool(workers, initializer=_worker_init, initargs=(payload,)) as pool:
            chunksize = max(1, n_configs // (4 * workers))
            for vals in pool.imap(_config_potential, range(n_configs), chunksize=chunksize):
                _reduce(vals)

    mean = acc / n_configs
    if n_configs > 1:
        var = np.maximum(acc_sq / n_configs - mean * mean, 0.0)
        se_live = np.sqrt(var / (n_configs - 1))
    else:
        se_live = np.zeros_like(mean)
    mean[fail > 0] = np.nan

    values = np.full(ks_all.shape, np.nan)
    values[live] = mean
    stderr = np.full(ks_all.shape, np.nan)
    stderr[live] = se_live
    full_mask = mask.copy()
    live_idx = np.where(live)
    failed_cells = fail > 0
    full_mask[live_idx[0][failed_cells], live_idx[1][failed_cells]] = True
    values[full_mask] = np.nan

    meta = {
        "d": geom.d,
        "n_scatter": geom.n_scatter,
        "sigma": geom.sigma,
        "model": model_label(model) if model is not None else "none",
        "master_seed": int(master_seed),
        "mask_radius": mask_radius,
        "n_failed_cells": int(failed_cells.sum()),
    }
    return ScalarField(
        grid=grid, values=values, mask=full_mask, n_configs=n_configs,
        kind="potential", meta=meta, stderr=stderr,
    )


def density_from_potential(fld: ScalarField) -> ScalarField:
    """Discrete Laplacian of the potential: the density ``2 pi rho2``.

    Five-point stencil on the interior lattice; cells lacking four unmasked
    neighbours are masked (no one-sided stencils).  Negative values are
    kept as they stand; they flag non-analytic regions, not actual density.
    """
    if fld.kind != "potential":
        raise ValueError(f"density_from_potential: field kind is {fld.kind!r}, not 'potential'")
    g = fld.grid
    phi = fld.values
    m = fld.mask
    lap = (
        (phi[2:, 1:-1] + phi[:-2, 1:-1] - 2.0 * phi[1:-1, 1:-1]) / g.h_re**2
        + (phi[1:-1, 2:] + phi[1:-1, :-2] - 2.0 * phi[1:-1, 1:-1]) / g.h_im**2
    )
    out_mask = m[1:-1, 1:-1] | m[2:, 1:-1] | m[:-2, 1:-1] | m[1:-1, 2:] | m[1:-1, :-2]
    lap = np.where(out_mask, np.nan, lap)
    meta = dict(fld.meta)
    return ScalarField(
        grid=g.interior(), values=lap, mask=out_mask, n_configs=fld.n_configs,
        kind="density", meta=meta, stderr=None,
    )


def vertical_cut(fld: ScalarField, re_k: float) -> np.ndarray:
    """Field values along ``Re k = re_k`` as rows ``(im_k, value)``.

    Exact column when ``re_k`` sits on the lattice, linear interpolation
    between the two neighbouring columns otherwise.
    """
    g = fld.grid
    if not (g.re_min <= re_k <= g.re_max):
        raise DomainError(f"vertical_cut: Re k = {re_k} outside [{g.re_min}, {g.re_max}]")
    x = (re_k - g.re_min) / g.h_re
    j = int(math.floor(x))
    frac = x - j
    if j == g.nx - 1:
        j, frac = j - 1, 1.0
    tol = 1e-9
    if frac <= tol:
        col = fld.values[j]
    elif frac >= 1.0 - tol:
        col = fld.values[j + 1]
    else:
        col = (1.0 - frac) * fld.values[j] + frac * fld.values[j + 1]
    return np.column_stack([g.im_axis, col])


def validity_bound(radius: float, machine_eps: float) -> float:
    """Depth ``k_imax = -ln(eps)/(2R)`` below which round-off dominates.

    The matrix condition number grows like ``exp(-Im k * 2R)``; cells with
    ``Im k < -k_imax`` should be masked or flagged by consumers.
    """
    if radius <= 0:
        raise DomainError(f"validity_bound: radius={radius} must be positive")
    if not (0.0 < machine_eps < 1.0):
        raise DomainError(f"validity_bound: machine_eps={machine_eps} outside (0, 1)")
    return -math.log(machine_eps) / (2.0 * radius)


# -- serialization -----------------------------------------------------------

_CSV_TAG = "lorentzgas-field-v1"


def field_to_csv(fld: ScalarField, path) -> None:
    """Write the field with a '#' metadata header; round-trips bit-exactly."""
    g = fld.grid
    lines = [f"# {_CSV_TAG}"]
    meta = {
        "kind": fld.kind,
        "re_min": repr(g.re_min), "re_max": repr(g.re_max),
        "im_min": repr(g.im_min), "im_max": repr(g.im_max),
        "nx": g.nx, "ny": g.ny,
        "n_configs": fld.n_configs,
        "code_version": __version__,
    }
    meta.update({k: v for k, v in fld.meta.items()})
    for key, val in meta.items():
        lines.append(f"# {key} = {val!r}" if isinstance(val, float) else f"# {key} = {val}")
    lines.append("# mask_flag 1 marks excluded cells")
    lines.append("re_k,im_k,value,mask_flag")
    re_ax, im_ax = g.re_axis, g.im_axis
    for i in range(g.nx):
        re_s = repr(float(re_ax[i]))
        for j in range(g.ny):
            lines.append(
                f"{re_s},{float(im_ax[j])!r},{float(fld.values[i, j])!r},{int(fld.mask[i, j])}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def field_from_csv(path) -> ScalarField:
    """Inverse of :func:`field_to_csv`."""
    meta: dict = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {_CSV_TAG}":
            raise ValueError(f"{path}: not a {_CSV_TAG} file")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if line.startswith("re_k"):
                continue
            rows.append(line.split(","))
    nx, ny = int(meta.pop("nx")), int(meta.pop("ny"))
    grid = ComplexGrid(
        float(meta.pop("re_min")), float(meta.pop("re_max")),
        float(meta.pop("im_min")), float(meta.pop("im_max")),
        nx, ny,
    )
    kind = meta.pop("kind")
    n_configs = int(meta.pop("n_configs"))
    data = np.array([[float(r[2]), float(r[3])] for r in rows])
    if data.shape[0] != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} rows, found {data.shape[0]}")
    values = data[:, 0].reshape(nx, ny)
    mask = data[:, 1].reshape(nx, ny).astype(bool)
    return ScalarField(grid=grid, values=values, mask=mask, n_configs=n_configs, kind=kind, meta=meta)
