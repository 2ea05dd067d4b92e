"""Command-line front end: deterministic runs, CSV emission, manifests.

Every subcommand writes its outputs plus a ``manifest.txt`` with SHA-256
digests into ``--out``.  A flat ``key = value`` config file can predefine
any flag; explicit flags win.  Identical configuration and seed produce
byte-identical files, whatever the worker count.

Exit codes: 0 success, 1 configuration error, 2 numerical-domain error,
3 partial result (masked-cell fraction exceeded ``--max-masked``).
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import __version__
from .bounds import avg_green_sq, band_diagnostics
from .errors import ConfigError, DomainError
from .fields import (
    ComplexGrid,
    density_from_potential,
    field_to_csv,
    potential_map,
    validity_bound,
    vertical_cut,
)
from .green import GasGeometry
from .models import HardSphere, Resonant, cross_section, model_label
from .rmtstats import cloud_radius_estimate, cloud_to_csv, collect_cloud, mp_fit
from .twoscat import approx_resonances, exact_resonances

__all__ = ["main", "run", "RunConfig"]


@dataclass
class RunConfig:
    """Parsed options of one run; one instance per subcommand invocation."""

    subcommand: str
    d: int = 3
    n_scatter: int = 100
    sigma: float = 1.0
    model: str = "hard-sphere"
    alpha: float = 0.1
    pole_re: float = 10.0
    pole_im: float = -0.1
    grid: str = "9:11:101,-1:-0.02:50"
    n_configs: int = 16
    master_seed: int = 1
    workers: int | None = None
    out: str = "."
    max_masked: float = 0.5
    # subcommand-specific knobs
    k_min: float = 0.01
    k_max: float = 2.0
    n_k: int = 400
    separation: float = 1.0
    n_lo: int = 1
    n_hi: int = 10
    k: float = 10.0
    re_cut: float = 10.0
    im_min: float = -0.5
    im_max: float = -0.01
    ny: int = 50
    nx: int = 5
    radius: float = 2.0
    k_im_values: str = "0,-1,-2,-5,-20"
    machine_eps: float = 1e-16


def _scattering_model(cfg: RunConfig):
    if cfg.model == "hard-sphere":
        return HardSphere(cfg.alpha)
    if cfg.model == "resonant":
        return Resonant(complex(cfg.pole_re, cfg.pole_im))
    raise ConfigError(f"unknown model {cfg.model!r}")


def _parse_grid(spec: str) -> ComplexGrid:
    try:
        re_part, im_part = spec.split(",")
        re_min, re_max, nx = re_part.split(":")
        im_min, im_max, ny = im_part.split(":")
        return ComplexGrid(float(re_min), float(re_max), float(im_min), float(im_max), int(nx), int(ny))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid spec {spec!r} (want remin:remax:nx,immin:immax:ny)") from exc


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_table(path, tag: str, header: dict, columns: list[str], rows) -> None:
    lines = [f"# {tag}"]
    for key, val in header.items():
        lines.append(f"# {key} = {_fmt(val)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _provenance(cfg: RunConfig) -> dict:
    keep = {f.name: getattr(cfg, f.name) for f in dc_fields(cfg)}
    keep["code_version"] = __version__
    return keep


def _write_manifest(out_dir: str, names: list[str]) -> None:
    lines = []
    for name in sorted(names):
        digest = hashlib.sha256(open(os.path.join(out_dir, name), "rb").read()).hexdigest()
        lines.append(f"{digest}  {name}")
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- subcommands ---------------------------------------------------------------


def _run_cross_section(cfg: RunConfig) -> int:
    res = Resonant(complex(cfg.pole_re, cfg.pole_im))
    hs = HardSphere(cfg.alpha)
    ks = np.linspace(cfg.k_min, cfg.k_max, cfg.n_k)
    rows = []
    for k in ks:
        sp_r, smax = cross_section(res, cfg.d, float(k))
        sp_h, _ = cross_section(hs, cfg.d, float(k))
        rows.append((float(k), sp_r, sp_h, smax))
    _write_table(
        os.path.join(cfg.out, "cross_section.csv"),
        "lorentzgas-cross-section-v1",
        _provenance(cfg),
        ["k", "sigma_pt_resonant", "sigma_pt_hard_sphere", "sigma_max"],
        rows,
    )
    _write_manifest(cfg.out, ["cross_section.csv"])
    return 0


def _run_two_scatterer(cfg: RunConfig) -> int:
    model = _scattering_model(cfg)
    s = cfg.separation
    n_range = range(cfg.n_lo, cfg.n_hi + 1)
    rows = []
    import warnings

    for n in n_range:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kg = approx_resonances(cfg.d, model, s, n, "general")
            rows.append((n, 0, "approx_general", float(kg.real * s), float(kg.imag * s), math.nan))
            if isinstance(model, HardSphere):
                kh = approx_resonances(cfg.d, model, s, n, "hard_sphere")
                rows.append((n, 0, "approx_hs", float(kh.real * s), float(kh.imag * s), math.nan))
    for br in exact_resonances(cfg.d, model, s, n_range):
        rows.append(
            (br.n, br.parity, "exact", float(br.k.real * s), float(br.k.imag * s), br.residual)
        )
    rows.sort(key=lambda r: (r[0], r[2]))
    _write_table(
        os.path.join(cfg.out, "two_scatterer.csv"),
        "lorentzgas-two-scatterer-v1",
        _provenance(cfg),
        ["n", "parity", "method", "re_ks", "im_ks", "residual"],
        rows,
    )
    _write_manifest(cfg.out, ["two_scatterer.csv"])
    return 0


def _run_eigencloud(cfg: RunConfig) -> int:
    geom = GasGeometry(cfg.d, cfg.n_scatter, cfg.sigma)
    cloud = collect_cloud(geom, cfg.k, cfg.n_configs, cfg.master_seed, workers=cfg.workers)
    cloud_path = os.path.join(cfg.out, "eigencloud.csv")
    cloud_to_csv(cloud, cloud_path)
    nu = cloud.samples
    var = float(np.mean(np.abs(nu) ** 2) - abs(nu.mean()) ** 2)
    report = {
        "n_samples": nu.size,
        "mean_re": float(nu.real.mean()),
        "mean_im": float(nu.imag.mean()),
        "min_im": float(nu.imag.min()),
        "radius_empirical": math.sqrt(2.0 * var),
        "radius_estimate": cloud_radius_estimate(geom, cfg.k),
    }
    try:
        fit = mp_fit(nu.imag)
        report["lambda_minus"] = fit.lambda_minus
        report["lambda_plus"] = fit.lambda_plus
    except ValueError as exc:
        report["mp_fit_error"] = str(exc)
    head = _provenance(cfg)
    head.update(report)
    with open(os.path.join(cfg.out, "eigencloud_fit.txt"), "w", encoding="utf-8", newline="\n") as fh:
        for key, val in head.items():
            fh.write(f"{key} = {_fmt(val)}\n")
    _write_manifest(cfg.out, ["eigencloud.csv", "eigencloud_fit.txt"])
    return 0


def _check_validity_window(cfg: RunConfig, model, grid: ComplexGrid) -> None:
    lo, hi = model.validity_window()
    if grid.re_max > hi or grid.re_min < lo:
        import warnings

        warnings.warn(
            f"grid Re k range [{grid.re_min}, {grid.re_max}] leaves the model "
            f"validity window [{lo:.3g}, {hi:.3g}]"
        )


def _run_density(cfg: RunConfig) -> int:
    geom = GasGeometry(cfg.d, cfg.n_scatter, cfg.sigma)
    model = _scattering_model(cfg)
    grid = _parse_grid(cfg.grid)
    _check_validity_window(cfg, model, grid)
    pot = potential_map(geom, model, grid, cfg.n_configs, cfg.master_seed, workers=cfg.workers)
    pot.meta.update({"subcommand": cfg.subcommand, "code_version": __version__})
    den = density_from_potential(pot)
    field_to_csv(pot, os.path.join(cfg.out, "potential.csv"))
    field_to_csv(den, os.path.join(cfg.out, "density.csv"))
    _write_manifest(cfg.out, ["potential.csv", "density.csv"])
    frac = pot.n_masked / pot.values.size
    return 3 if frac > cfg.max_masked else 0


def _run_cut(cfg: RunConfig) -> int:
    geom = GasGeometry(cfg.d, cfg.n_scatter, cfg.sigma)
    model = _scattering_model(cfg)
    half = (cfg.nx - 1) // 2
    h = (cfg.im_max - cfg.im_min) / (cfg.ny - 1)
    grid = ComplexGrid(
        cfg.re_cut - half * h, cfg.re_cut + half * h, cfg.im_min, cfg.im_max, cfg.nx, cfg.ny
    )
    pot = potential_map(geom, model, grid, cfg.n_configs, cfg.master_seed, workers=cfg.workers)
    den = density_from_potential(pot)
    diag = band_diagnostics(model, geom, cfg.re_cut, grid.im_axis, cfg.machine_eps)
    pot_cut = vertical_cut(pot, cfg.re_cut)
    den_cut = vertical_cut(den, cfg.re_cut)
    se_col = pot.stderr[grid.nx // 2] if pot.stderr is not None else np.full(cfg.ny, np.nan)

    rows = []
    for j, (im, phi) in enumerate(pot_cut):
        # density lives on the interior lattice: row j of the potential
        # corresponds to row j-1 of the density cut
        den_val = float(den_cut[j - 1, 1]) if 1 <= j <= cfg.ny - 2 else math.nan
        rows.append(
            (
                float(im),
                float(phi),
                float(se_col[j]),
                den_val,
                float(diag.bound_curve[j, 1]),
                float(diag.approx_density[j, 1]),
            )
        )
    header = _provenance(cfg)
    header.update({"k_imax": diag.k_imax, "k_idiff": diag.k_idiff, "ell": diag.ell})
    _write_table(
        os.path.join(cfg.out, "cut.csv"),
        "lorentzgas-cut-v1",
        header,
        ["im_k", "potential", "potential_se", "density", "bound", "width_approx"],
        rows,
    )
    field_to_csv(pot, os.path.join(cfg.out, "potential.csv"))
    field_to_csv(den, os.path.join(cfg.out, "density.csv"))
    _write_manifest(cfg.out, ["cut.csv", "potential.csv", "density.csv"])
    frac = pot.n_masked / pot.values.size
    return 3 if frac > cfg.max_masked else 0


def _run_avg_green(cfg: RunConfig) -> int:
    rows = []
    for im_str in cfg.k_im_values.split(","):
        im = float(im_str)
        k = complex(cfg.k, im)
        closed = quadr = asym = math.nan
        if im == 0.0:
            closed = avg_green_sq(cfg.d, k, cfg.radius, "closed_real")
        quadr = avg_green_sq(cfg.d, k, cfg.radius, "quadrature")
        if im * cfg.radius <= -5.0:
            asym = avg_green_sq(cfg.d, k, cfg.radius, "asymptotic_complex")
        rows.append((cfg.k, im, closed, quadr, asym))
    _write_table(
        os.path.join(cfg.out, "avg_green.csv"),
        "lorentzgas-avg-green-v1",
        _provenance(cfg),
        ["re_k", "im_k", "closed_real", "quadrature", "asymptotic_complex"],
        rows,
    )
    _write_manifest(cfg.out, ["avg_green.csv"])
    return 0


_SUBCOMMANDS = {
    "cross-section": _run_cross_section,
    "two-scatterer": _run_two_scatterer,
    "eigencloud": _run_eigencloud,
    "density": _run_density,
    "cut": _run_cut,
    "avg-green": _run_avg_green,
}


def run(cfg: RunConfig) -> int:
    """Execute one subcommand; returns the process exit code."""
    if cfg.subcommand not in _SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {cfg.subcommand!r}")
    for name in ("sigma", "alpha", "n_scatter", "d", "n_configs"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(cfg, name)}")
    os.makedirs(cfg.out, exist_ok=True)
    return _SUBCOMMANDS[cfg.subcommand](cfg)


def _load_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: bad line {raw!r}")
                key, _, val = line.partition("=")
                out[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return out


_INT_KEYS = {"d", "n_scatter", "n_configs", "workers", "n_k", "n_lo", "n_hi", "ny", "nx"}
_FLOAT_KEYS = {
    "sigma", "alpha", "pole_re", "pole_im", "max_masked", "k_min", "k_max",
    "separation", "k", "re_cut", "im_min", "im_max", "radius", "machine_eps",
}


def _coerce(key: str, val):
    if val is None or not isinstance(val, str):
        return val
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return float(val)
    if key == "master_seed":
        return int(val, 0)
    return val


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorentzgas",
        description="Resonance distributions of a random point-scatterer gas",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--seed", dest="master_seed", help="master seed")
        p.add_argument("--configs", dest="n_configs", help="number of random configurations")
        p.add_argument("--workers", help="worker processes (default $LORENTZGAS_WORKERS or CPUs)")
        p.add_argument("-d", dest="d", help="spatial dimension")
        p.add_argument("-N", dest="n_scatter", help="number of scatterers")
        p.add_argument("--sigma", help="mean inter-scatterer distance (unit length)")
        p.add_argument("--model", choices=["hard-sphere", "resonant"], help="scattering model")
        p.add_argument("--alpha", help="hard-sphere scattering length")
        p.add_argument("--pole-re", dest="pole_re", help="resonant pole, real part")
        p.add_argument("--pole-im", dest="pole_im", help="resonant pole, imaginary part")
        p.add_argument("--max-masked", dest="max_masked", help="masked-cell fraction for exit 3")

    p = sub.add_parser("cross-section", help="single-scatterer cross sections vs k")
    add_common(p)
    p.add_argument("--k-min", dest="k_min")
    p.add_argument("--k-max", dest="k_max")
    p.add_argument("--n-k", dest="n_k")

    p = sub.add_parser("two-scatterer", help="exact and approximate two-scatterer resonances")
    add_common(p)
    p.add_argument("--separation", help="pair separation s")
    p.add_argument("--n-lo", dest="n_lo", help="first band index")
    p.add_argument("--n-hi", dest="n_hi", help="last band index")

    p = sub.add_parser("eigencloud", help="eigenvalue cloud of N(k) plus fits")
    add_common(p)
    p.add_argument("--k", help="real wavenumber")

    p = sub.add_parser("density", help="resonance potential and density maps")
    add_common(p)
    p.add_argument("--grid", help="remin:remax:nx,immin:immax:ny")

    p = sub.add_parser("cut", help="vertical cross-section with bound and markers")
    add_common(p)
    p.add_argument("--re-cut", dest="re_cut", help="Re k of the cut")
    p.add_argument("--im-min", dest="im_min")
    p.add_argument("--im-max", dest="im_max")
    p.add_argument("--ny", help="points along Im k")
    p.add_argument("--nx", help="columns around the cut (odd)")
    p.add_argument("--machine-eps", dest="machine_eps", help="epsilon for the validity depth")

    p = sub.add_parser("avg-green", help="ball-averaged |G+|^2 validation table")
    add_common(p)
    p.add_argument("--k", help="Re k")
    p.add_argument("--radius", help="ball radius R")
    p.add_argument("--k-im-values", dest="k_im_values", help="comma list of Im k")

    return parser


def build_config(argv) -> RunConfig:
    """Merge defaults, config file, and explicit flags into a RunConfig."""
    ns = _build_parser().parse_args(argv)
    values = {"subcommand": ns.subcommand}
    file_vals = _load_config_file(ns.config) if getattr(ns, "config", None) else {}
    valid = {f.name for f in dc_fields(RunConfig)}
    for key, val in file_vals.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val)
    for key, val in vars(ns).items():
        if key in ("config", "subcommand") or val is None:
            continue
        values[key] = _coerce(key, val)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> None:
    try:
        cfg = build_config(argv if argv is not None else sys.argv[1:])
        code = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    except DomainError as exc:
        print(f"numerical-domain error: {exc}", file=sys.stderr)
        sys.exit(2)
    sys.exit(code)


if __name__ == "__main__":
    main()
