"""Command line interface.

Subcommands: ``simulate`` (forward data from a phantom), ``reconstruct``
(simulate then invert), ``predict-artifacts`` (artifact curve, mirror
support sets and visibility map for a target point), ``reproduce``
(re-run a recorded manifest, byte-identical outputs), and ``render``
(grid file to PGM/PPM).

Every data-producing run writes ``manifest.txt``, a flat key=value file
holding the resolved geometry and run parameters; feeding it to
``reproduce`` repeats the run exactly.  Assembled operators are cached
on disk keyed by a checksum of the geometry and kernel backend.

Exit codes: 0 success, 2 bad configuration or arguments, 3 solver
stopped before convergence (outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys

import numpy as np
import scipy.sparse as sp

from . import __version__, kernels
from .geometry import (
    ImageGrid,
    ScannerConfig,
    default_toric_grid,
    load_config,
)
from .gridio import load_grid, load_points, render_overlay_ppm, render_pgm, save_grid
from .metrics import report
from .microlocal import artifact_support_sets, lambda_curve_points, visibility_map
from .operators import Image
from .phantoms import phantom_by_name
from .solvers import build_system, noisy_data, reconstruct

__all__ = ["main"]

GRID_EXTENTS = {
    "default": (-2.0, 2.0, -3.0, 1.0),
    "extended": (-3.0, 3.0, -4.0, 2.0),
}

_GEOMETRY_KEYS = (
    "a", "r_m", "r_M", "x1_min", "x1_max", "x2_min", "x2_max",
    "n1", "n2", "n_r", "n_x0", "n_theta",
)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# run options: a flat dict of strings, identical to the manifest content


def _resolve_options(args) -> dict:
    opts = {}
    extents = GRID_EXTENTS[getattr(args, "grid", "default")]
    for key, val in zip(("x1_min", "x1_max", "x2_min", "x2_max"), extents):
        opts[key] = repr(val)
    opts.update(
        a=repr(4.0), r_m=repr(7.0), r_M=repr(9.0),
        n1="200", n2="200", n_r="400", n_x0="200", n_theta="180",
    )
    if getattr(args, "config", None):
        try:
            cfg, img, toric, n_theta, extras = load_config(args.config)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc))
        opts.update(
            a=repr(cfg.a), r_m=repr(cfg.r_m), r_M=repr(cfg.r_M),
            x1_min=repr(img.x1_min), x1_max=repr(img.x1_max),
            x2_min=repr(img.x2_min), x2_max=repr(img.x2_max),
            n1=str(img.n1), n2=str(img.n2),
            n_r=str(toric.n_r), n_x0=str(toric.n_x0), n_theta=str(n_theta),
        )
        opts.update(extras)
    for key in ("phantom", "method", "eta", "seed", "alpha", "point",
                "max_iters", "deriv_order", "nu", "beta"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = str(val)
    opts["command"] = args.command
    opts["backend"] = kernels.BACKEND
    opts["version"] = __version__
    return opts


def _geometry_from(opts):
    try:
        cfg = ScannerConfig(
            float(opts["a"]), float(opts["r_m"]), float(opts["r_M"])
        )
        img = ImageGrid(
            float(opts["x1_min"]), float(opts["x1_max"]),
            float(opts["x2_min"]), float(opts["x2_max"]),
            int(opts["n1"]), int(opts["n2"]),
        )
        toric = default_toric_grid(int(opts["n_r"]), int(opts["n_x0"]))
        return cfg, img, toric, int(opts["n_theta"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad geometry options: {exc}")


def _write_manifest(opts, out_dir):
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        for key in sorted(opts):
            fh.write(f"{key} = {opts[key]}\n")


def _read_manifest(path):
    opts = {}
    try:
        with open(path) as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                key, val = (part.strip() for part in line.split("=", 1))
                opts[key] = val
    except OSError as exc:
        raise ConfigError(str(exc))
    if "command" not in opts:
        raise ConfigError("manifest has no command")
    return opts


def _write_csv(path, header, rows):
    # repr keeps float round-trips exact, so reruns are byte-identical
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# operator cache


def _cache_dir(opts):
    return opts.get("cache_dir") or os.path.join(
        os.path.expanduser("~"), ".cache", "jointct"
    )


def _system_cached(opts, cfg, img, toric, n_theta):
    tag = repr((
        (cfg.a, cfg.r_m, cfg.r_M),
        (img.x1_min, img.x1_max, img.x2_min, img.x2_max, img.n1, img.n2),
        (toric.n_r, toric.n_x0), n_theta,
        kernels.BACKEND, __version__,
    ))
    key = hashlib.sha256(tag.encode()).hexdigest()[:16]
    cache = _cache_dir(opts)
    paths = {name: os.path.join(cache, f"{key}.{name}.npz")
             for name in ("radon", "toric", "coupling")}
    system = None
    if all(os.path.exists(p) for p in paths.values()):
        system = _system_from_cache(cfg, img, toric, n_theta, paths)
    if system is None:
        system = build_system(img, cfg, toric_grid=toric, n_theta=n_theta)
        os.makedirs(cache, exist_ok=True)
        sp.save_npz(paths["radon"], system.radon.matrix)
        sp.save_npz(paths["toric"], system.toric.matrix)
        sp.save_npz(paths["coupling"], system.coupling)
    return system


def _system_from_cache(cfg, img, toric, n_theta, paths):
    from .geometry import default_line_grid
    from .operators import SparseLinearOperator, spectral_norm
    from .solvers import JointSystem

    try:
        radon = SparseLinearOperator(sp.load_npz(paths["radon"]))
        toric_op = SparseLinearOperator(sp.load_npz(paths["toric"]))
        coupling = sp.load_npz(paths["coupling"]).tocsr()
    except (OSError, ValueError):
        return None
    line_grid = default_line_grid(img, cfg, n_theta=n_theta)
    # row labels are a pure function of the grids, so rebuild them
    radon.row_labels = [
        (s, th)
        for si, s in enumerate(line_grid.s_samples)
        for ti, th in enumerate(line_grid.theta_samples)
        if line_grid.mask[si, ti]
    ]
    toric_op.row_labels = [
        (r, x0) for r in toric.r_samples for x0 in toric.x0_samples
    ]
    if len(radon.row_labels) != radon.n_rows or len(toric_op.row_labels) != toric_op.n_rows:
        return None
    norm_r = spectral_norm(radon, tol=1e-3)
    norm_t = spectral_norm(toric_op, tol=1e-3)
    return JointSystem(
        cfg=cfg, img=img, line_grid=line_grid, toric_grid=toric,
        radon=radon, toric=toric_op, coupling=coupling,
        weight=norm_t / norm_r, norms={"radon": norm_r, "toric": norm_t},
    )


# ---------------------------------------------------------------------------
# subcommand bodies (shared by the parsed command line and by reproduce)


def _simulated_data(opts, system, phantom):
    eta = float(opts.get("eta", "0"))
    seed = int(opts.get("seed", "0"))
    return noisy_data(system, phantom, eta, seed)


def run_simulate(opts, out_dir):
    cfg, img, toric, n_theta = _geometry_from(opts)
    name = opts.get("phantom", "simple")
    phantom = phantom_by_name(name, img)
    system = _system_cached(opts, cfg, img, toric, n_theta)
    data = _simulated_data(opts, system, phantom)
    os.makedirs(out_dir, exist_ok=True)
    rows = [(s, th, v) for (s, th), v in zip(system.radon.row_labels, data.b1)]
    _write_csv(os.path.join(out_dir, "transmission.csv"), ("s", "theta", "value"), rows)
    rows = [(r, x0, v) for (r, x0), v in zip(system.toric.row_labels, data.b2)]
    _write_csv(os.path.join(out_dir, "scatter.csv"), ("r", "x0", "value"), rows)
    save_grid(phantom.n_e, os.path.join(out_dir, "true_n_e.grid"))
    save_grid(phantom.mu_E, os.path.join(out_dir, "true_mu_E.grid"))
    _write_manifest(opts, out_dir)
    return 0


def run_reconstruct(opts, out_dir):
    cfg, img, toric, n_theta = _geometry_from(opts)
    name = opts.get("phantom", "simple")
    phantom = phantom_by_name(name, img)
    system = _system_cached(opts, cfg, img, toric, n_theta)
    data = _simulated_data(opts, system, phantom)
    method = opts.get("method", "jlam")
    alpha = opts.get("alpha", "auto")
    kwargs = {}
    if "max_iters" in opts:
        kwargs["final_iters" if alpha == "auto" else "max_iters"] = int(opts["max_iters"])
    if method == "jlam" and "nu" in opts:
        kwargs["nu"] = float(opts["nu"])
    if method in ("tv", "jtv", "lpls") and "beta" in opts:
        kwargs["beta"] = float(opts["beta"])
    try:
        rec = reconstruct(method, system, data,
                          alpha=alpha if alpha == "auto" else float(alpha),
                          phantom=phantom, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc))
    os.makedirs(out_dir, exist_ok=True)
    save_grid(rec.n_e, os.path.join(out_dir, "recon_n_e.grid"))
    save_grid(rec.mu_E, os.path.join(out_dir, "recon_mu_E.grid"))
    render_pgm(rec.n_e, os.path.join(out_dir, "recon_n_e.pgm"))
    render_pgm(rec.mu_E, os.path.join(out_dir, "recon_mu_E.pgm"))
    rep = report(phantom, rec)
    rows = [(k, getattr(rep, k)) for k in vars(rep)]
    _write_csv(os.path.join(out_dir, "metrics.csv"), ("metric", "value"), rows)
    _write_manifest(opts, out_dir)
    if not rec.info.get("converged", True):
        print("warning: solver stopped before convergence", file=sys.stderr)
        return 3
    return 0


def run_predict(opts, out_dir):
    cfg, img, toric, n_theta = _geometry_from(opts)
    try:
        x1, x2 = (float(tok) for tok in opts["point"].split(","))
    except (KeyError, ValueError):
        raise ConfigError("predict-artifacts needs --point x1,x2")
    y = np.array([x1, x2])
    curve = lambda_curve_points(y, cfg, img=img)
    s12, s21 = artifact_support_sets(y, img, cfg)
    vis = visibility_map(img, cfg)
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "artifact_curve.csv"), ("x1", "x2"),
               [tuple(p) for p in curve])
    save_grid(Image(img, s12.values.astype(float)), os.path.join(out_dir, "mirror_set_12.grid"))
    save_grid(Image(img, s21.values.astype(float)), os.path.join(out_dir, "mirror_set_21.grid"))
    save_grid(vis, os.path.join(out_dir, "visibility.grid"))
    render_pgm(vis, os.path.join(out_dir, "visibility.pgm"), vmin=0.0, vmax=1.0)
    _write_manifest(opts, out_dir)
    return 0


def run_render(args):
    image = load_grid(args.infile)
    if args.points:
        pts = load_points(args.points)
        render_overlay_ppm(image, pts, args.out)
    else:
        render_pgm(image, args.out)
    return 0


_RUNNERS = {
    "simulate": run_simulate,
    "reconstruct": run_reconstruct,
    "predict-artifacts": run_predict,
}


def run_reproduce(manifest_path, out_dir):
    opts = _read_manifest(manifest_path)
    command = opts["command"]
    if command not in _RUNNERS:
        raise ConfigError(f"manifest command {command!r} is not reproducible")
    if opts.get("backend", kernels.BACKEND) != kernels.BACKEND:
        raise ConfigError(
            f"manifest was produced with the {opts['backend']} kernel "
            f"backend but {kernels.BACKEND} is active"
        )
    return _RUNNERS[command](opts, out_dir)


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--config", help="key=value geometry file")
    p.add_argument("--grid", choices=("default", "extended"), default="default")
    p.add_argument("--out", default="out", help="output directory")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="jointct",
        description="joint transmission/scatter tomography toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward data from a phantom")
    _add_common(p)
    p.add_argument("--phantom", choices=("simple", "complex", "bar"), default="simple")
    p.add_argument("--eta", type=float, default=0.0, help="relative noise level")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("reconstruct", help="simulate then invert")
    _add_common(p)
    p.add_argument("--phantom", choices=("simple", "complex", "bar"), default="simple")
    p.add_argument("--method", choices=("jlam", "tv", "jtv", "lpls"), default="jlam")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", default="auto", help="'auto' or a positive number")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--nu", type=float, help="coupling slope (jlam)")
    p.add_argument("--beta", type=float, help="penalty smoothing (tv/jtv/lpls)")

    p = sub.add_parser("predict-artifacts",
                       help="artifact curve and visibility for a point")
    _add_common(p)
    p.add_argument("--point", required=True, help="target point 'x1,x2'")

    p = sub.add_parser("reproduce", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default="out")

    p = sub.add_parser("render", help="grid file to PGM (PPM with overlay)")
    p.add_argument("infile")
    p.add_argument("--points", help="overlay point list file")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "render":
            return run_render(args)
        if args.command == "reproduce":
            return run_reproduce(args.manifest, args.out)
        opts = _resolve_options(args)
        return _RUNNERS[args.command](opts, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
