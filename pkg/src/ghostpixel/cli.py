"""Command-line experiment runner: basis export, acquisition simulation,
reconstruction, metric evaluation, and CNR-vs-exposures sweeps.

Every command is deterministic given its config and seed.  Exit codes:
0 success (including reported solver non-convergence), 2 usage error,
3 I/O error, 4 configuration inconsistency.  Any key of the flat config
schema can be given as a dotted flag, e.g. ``--noise.photon_scale 1e6``.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import (
    OPERATOR_MODES,
    PHANTOM_PARAM_PREFIX,
    RECON_METHODS,
    SCHEMA,
    ConfigError,
    ExperimentConfig,
    load_config_file,
    parse_arm,
)
from .formats import (
    FormatError,
    format_float,
    load_float_matrix,
    load_pgm,
    load_series,
    save_diagnostics,
    save_float_matrix,
    save_pgm,
    save_series,
)
from .hadamard import ORDERINGS, compress, make_basis, make_pattern_pair, save_basis
from .metrics import DegenerateImageError, RegionMask, cnr, mse_psnr_ncorr
from .optics import (
    MeasurementSeries,
    acquire_speckle,
    random_speckle_patterns,
    render_intensity,
    run_acquisition,
    source_blur,
)
from .phantoms import PHANTOM_KINDS, PhantomSpec, generate
from .reconstruct import (
    build_operator,
    correlation_gi,
    differential_gi,
    nominal_patterns,
    normalize_unit,
    operator_from_patterns,
    series_buckets,
    tv_admm,
    wavelet_fista,
)

CSV_COLUMNS = ("M", "method", "seed", "cnr", "mse", "ncorr", "wall_time",
               "cnr_std", "mse_std", "ncorr_std", "wall_time_std")

CSV_HELP = """\
sweep CSV columns (floats at 9 significant digits):
  M          number of exposures in the cell
  method     sweep arm: METHOD, MODULATION, or MODULATION:METHOD
  seed       per-run seed, or "agg" on the per-cell aggregate row
  cnr        contrast-to-noise ratio of the normalized reconstruction
  mse        mean squared error against the phantom
  ncorr      normalized correlation against the phantom
  wall_time  reconstruction wall time in seconds (0 unless --timing)
  *_std      population std over seeds; filled only on "agg" rows
Rows are sorted by (M, method, seed); each cell's aggregate row follows
its per-seed rows.  GHOSTPIXEL_THREADS caps sweep parallelism."""


class UsageError(Exception):
    """Invalid command-line arguments (exit code 2)."""


def _log(message: str) -> None:
    print(message, file=sys.stderr)


# ------------------------------------------------------------- config plumbing

def collect_overrides(extra) -> dict:
    """Turn leftover ``--dotted.key value`` (or ``--dotted.key=value``)
    arguments into a raw config mapping; anything else is a usage error."""
    overrides = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--"):
            raise UsageError(f"unrecognized argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, _, value = key.partition("=")
        else:
            i += 1
            if i >= len(extra):
                raise UsageError(f"flag {token!r} expects a value")
            value = extra[i]
        if key not in SCHEMA and not key.startswith(PHANTOM_PARAM_PREFIX):
            raise UsageError(f"unknown configuration key {key!r}")
        overrides[key] = value
        i += 1
    return overrides


def build_config(args, overrides) -> ExperimentConfig:
    raw = load_config_file(args.config) if getattr(args, "config", None) else {}
    raw.update(overrides)
    return ExperimentConfig.from_mapping(raw)


def thread_cap() -> int:
    raw = os.environ.get("GHOSTPIXEL_THREADS", "").strip()
    if not raw:
        return min(8, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError("GHOSTPIXEL_THREADS", f"not an integer: {raw!r}") from None
    if value < 1:
        raise ConfigError("GHOSTPIXEL_THREADS", f"must be >= 1, got {value}")
    return value


def _load_image(path) -> np.ndarray:
    return load_pgm(path) if str(path).endswith(".pgm") else load_float_matrix(path)


def _save_image(path, image: np.ndarray) -> None:
    """PGM gets the [0,1]-normalized view; any other extension gets the raw
    float-text matrix (lossless)."""
    if str(path).endswith(".pgm"):
        save_pgm(path, normalize_unit(image))
    else:
        save_float_matrix(path, image)


# ----------------------------------------------------------------- simulation

def _generate_phantom(cfg: ExperimentConfig):
    try:
        return generate(cfg.phantom_spec())
    except ValueError as exc:
        raise ConfigError("phantom", str(exc)) from None


def simulate_series(cfg: ExperimentConfig, seed: int, progress=None) -> MeasurementSeries:
    """Run the acquisition described by cfg with the given noise seed."""
    phantom = _generate_phantom(cfg)
    imp = cfg.imperfection()
    src = cfg.source()
    noise = cfg.noise(seed=seed)
    if cfg["modulation"] == "hadamard":
        basis = make_basis(cfg["basis.k"], cfg["basis.ordering"])
        indices = compress(basis.permutation, cfg["basis.rate"])
        return run_acquisition(basis, indices, phantom, imp, src, noise,
                               bool(cfg["differential"]), progress=progress)
    patterns = random_speckle_patterns(phantom.side, cfg["speckle.count"],
                                       cfg["speckle.size_px"], noise.seed)
    return acquire_speckle(patterns, phantom, imp, src, noise,
                           cfg["speckle.size_px"], progress=progress)


# ------------------------------------------------------------- reconstruction

def regenerate_speckle(series: MeasurementSeries) -> np.ndarray:
    """Speckle patterns are never stored; they are replayed from the seed."""
    return random_speckle_patterns(series.n, len(series),
                                   series.speckle_size_px, series.seed)


def patterns_for_series(series: MeasurementSeries) -> np.ndarray:
    """Nominal pattern stack for correlation GI: binary (or signed, when
    differential) Hadamard patterns, or the regenerated speckle stack."""
    if series.modulation == "speckle":
        return regenerate_speckle(series)
    basis = make_basis(series.basis_k, series.ordering)
    return nominal_patterns(basis, series.indices, signed=series.differential)


def operator_for_series(series: MeasurementSeries, mode: str = "auto"):
    """Sensing operator for model-based solvers.

    auto: the fast ideal-Hadamard operator when the series really is ideal
    differential Hadamard, otherwise the explicit rendered-pattern stack
    (true deterministic model; per-exposure jitter is random and stays out).
    ideal: the nominal signed-Hadamard operator regardless of recorded
    imperfections — reconstruct as if the mask were perfect.
    """
    if mode == "auto":
        ideal_series = (series.modulation == "hadamard" and series.differential
                        and series.imperfection.ideal and series.source is None)
        mode = "ideal" if ideal_series else "explicit"
    if mode == "ideal":
        if series.modulation != "hadamard" or not series.differential:
            raise ConfigError("recon.operator",
                              "ideal operator needs a differential hadamard series")
        basis = make_basis(series.basis_k, series.ordering)
        return build_operator(basis, series.indices, mode="ideal_hadamard")
    if mode != "explicit":
        raise ConfigError("recon.operator", f"unknown operator mode {mode!r}")
    if series.modulation == "hadamard":
        basis = make_basis(series.basis_k, series.ordering)
        return build_operator(basis, series.indices, imp=series.imperfection,
                              src=series.source, mode="explicit",
                              differential=series.differential,
                              pixel_pitch=series.pixel_pitch)
    stack = np.stack([render_intensity(p, series.imperfection)
                      for p in regenerate_speckle(series)])
    if series.source is not None:
        stack = np.stack([source_blur(p, series.source, series.pixel_pitch)
                          for p in stack])
    return operator_from_patterns(stack)


def run_reconstruction(series: MeasurementSeries, method: str, hp: dict,
                       timing: bool = False):
    """Dispatch one reconstruction; returns (ReconResult, wall_time)."""
    if method == "dgi" and not (series.modulation == "hadamard" and series.differential):
        raise ConfigError("recon.method", "dgi needs a differential hadamard series")
    start = time.perf_counter() if timing else None
    if method == "gi":
        result = correlation_gi(series, patterns_for_series(series))
    elif method == "dgi":
        result = differential_gi(series)
    elif method in ("tv", "wfista"):
        op = operator_for_series(series, hp["operator"])
        buckets = series_buckets(series)
        if method == "tv":
            result = tv_admm(op, buckets, mu=hp["mu"], beta=hp["beta"],
                             max_iters=hp["max_iters"], tol=hp["tol"])
        else:
            result = wavelet_fista(op, buckets, lam=hp["lam"], levels=hp["levels"],
                                   max_iters=hp["max_iters"], tol=hp["tol"])
    else:
        raise ConfigError("recon.method", f"must be one of {RECON_METHODS}")
    wall = time.perf_counter() - start if timing else 0.0
    return result, wall


def _recon_hyperparams(cfg: ExperimentConfig) -> dict:
    return {
        "operator": cfg["recon.operator"],
        "mu": cfg["recon.mu"],
        "beta": cfg["recon.beta"],
        "lam": cfg["recon.lam"],
        "levels": cfg["recon.levels"],
        "max_iters": cfg["recon.max_iters"],
        "tol": cfg["recon.tol"],
    }


# ------------------------------------------------------------------- commands

def cmd_basis(args, extra) -> int:
    if extra:
        raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
    try:
        basis = make_basis(args.k, args.ordering)
        indices = compress(basis.permutation, args.rate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    count = None if args.rate == 1.0 else len(indices)
    save_basis(basis, args.out, count=count)
    _log(f"wrote {args.out} ({len(indices)} of {basis.size} rows, "
         f"ordering={basis.ordering})")
    if args.patterns:
        os.makedirs(args.patterns, exist_ok=True)
        for pos, idx in enumerate(indices):
            pair = make_pattern_pair(basis, int(idx), basis.n)
            save_pgm(os.path.join(args.patterns, f"pattern_{pos:04d}.pgm"),
                     pair.positive.astype(np.float64))
        _log(f"wrote {len(indices)} pattern images under {args.patterns}")
    return 0


def cmd_simulate(args, extra) -> int:
    cfg = build_config(args, collect_overrides(extra))
    progress = None
    if not args.quiet:
        def progress(t, total):
            _log(f"exposure {t}/{total}")
    series = simulate_series(cfg, seed=cfg["seed"], progress=progress)
    out = args.out or os.path.join(cfg["out.dir"], "series.txt")
    save_series(series, out)
    _log(f"wrote {out} ({len(series)} records, seed={cfg['seed']})")
    return 0


def _recon_hp_from_overrides(overrides: dict) -> dict:
    """Typed recon hyperparameters from dotted recon.* flag values."""
    hp = {name: SCHEMA[f"recon.{name}"][1]
          for name in ("operator", "mu", "beta", "lam", "levels", "max_iters", "tol")}
    for key, raw in overrides.items():
        if key == "recon.method" or not key.startswith("recon."):
            raise UsageError(f"only recon.* hyperparameter keys apply here, got {key!r}")
        parser = SCHEMA[key][0]
        try:
            hp[key[len("recon."):]] = parser(raw)
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw!r} as {parser.__name__}") from None
    if hp["operator"] not in OPERATOR_MODES:
        raise ConfigError("recon.operator", f"must be one of {OPERATOR_MODES}")
    if hp["mu"] <= 0 or hp["beta"] <= 0:
        raise ConfigError("recon.mu", "mu and beta must be positive")
    if hp["lam"] < 0:
        raise ConfigError("recon.lam", "lam must be >= 0")
    if hp["levels"] < 1:
        raise ConfigError("recon.levels", "need at least one level")
    if hp["max_iters"] < 1:
        raise ConfigError("recon.max_iters", "need at least one iteration")
    return hp


def cmd_reconstruct(args, extra) -> int:
    hp = _recon_hp_from_overrides(collect_overrides(extra))
    series = load_series(args.series)
    if args.operator:
        hp["operator"] = args.operator
    try:
        result, wall = run_reconstruction(series, args.method, hp, timing=args.timing)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("recon", str(exc)) from None
    _save_image(args.out, result.image)
    diag_path = args.diagnostics or args.out + ".diag.txt"
    save_diagnostics(diag_path, {
        "command": "reconstruct",
        "method": args.method,
        "operator": hp["operator"],
        "seed": series.seed,
        "n": series.n,
        "exposures": len(series),
        "iterations": result.iterations,
        "final_residual": float(result.final_residual),
        "converged": int(result.converged),
        "wall_time": float(wall),
    })
    state = "converged" if result.converged else "did not converge (reported, not fatal)"
    _log(f"wrote {args.out} and {diag_path}; {args.method} {state} "
         f"after {result.iterations} iterations")
    return 0


def cmd_sweep(args, extra) -> int:
    cfg = build_config(args, collect_overrides(extra))
    exposures = cfg.sweep_exposures()
    rates = cfg.sweep_rates()
    if bool(exposures) == bool(rates):
        raise ConfigError("sweep.exposures",
                          "exactly one of sweep.exposures / sweep.rates must be set")
    basis = make_basis(cfg["basis.k"], cfg["basis.ordering"])
    if rates:
        exposures = [len(compress(basis.permutation, rate)) for rate in rates]
    for m in exposures:
        if not 1 <= m <= basis.size:
            raise ConfigError("sweep.exposures",
                              f"M={m} outside [1, {basis.size}] for basis.k={cfg['basis.k']}")
    arms = cfg.sweep_methods()
    seeds = cfg.sweep_seeds()
    phantom = _generate_phantom(cfg)
    truth = phantom.transmission
    regions = RegionMask.from_image(truth)
    imp = cfg.imperfection()
    src = cfg.source()
    hp = _recon_hyperparams(cfg)

    def run_cell(cell):
        m, arm, seed = cell
        modulation, method = parse_arm(arm, cfg["modulation"])
        differential = bool(cfg["differential"]) if modulation == "hadamard" else False
        if method == "dgi" and not differential:
            raise ConfigError("sweep.methods", "dgi arm needs differential=1")
        noise = cfg.noise(seed=seed)
        if modulation == "hadamard":
            series = run_acquisition(basis, basis.permutation[:m], phantom,
                                     imp, src, noise, differential)
        else:
            patterns = random_speckle_patterns(phantom.side, m,
                                               cfg["speckle.size_px"], noise.seed)
            series = acquire_speckle(patterns, phantom, imp, src, noise,
                                     cfg["speckle.size_px"])
        result, wall = run_reconstruction(series, method, hp, timing=args.timing)
        image = normalize_unit(result.image)
        mse, _, ncorr = mse_psnr_ncorr(image, truth)
        try:
            contrast = cnr(image, regions)
        except DegenerateImageError:
            contrast = float("nan")
        _log(f"cell M={m} method={arm} seed={seed}: cnr={contrast:.4g} ncorr={ncorr:.4g}")
        return {"cnr": contrast, "mse": mse, "ncorr": ncorr, "wall_time": wall}

    cells = [(m, arm, seed) for m in exposures for arm in arms for seed in seeds]
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        rows = dict(zip(cells, pool.map(run_cell, cells)))

    out = args.out or os.path.join(cfg["out.dir"], "sweep.csv")
    lines = [
        "# ghostpixel sweep",
        f"# seed={cfg['seed']}",
        f"# seeds={','.join(str(s) for s in seeds)}",
        f"# phantom={cfg['phantom.kind']} side={cfg['phantom.side']}",
        f"# modulation={cfg['modulation']} differential={cfg['differential']}",
        ",".join(CSV_COLUMNS),
    ]
    metric_keys = ("cnr", "mse", "ncorr", "wall_time")
    for m in sorted(set(exposures)):
        for arm in sorted(set(arms)):
            group = [rows[(m, arm, seed)] for seed in sorted(seeds)]
            for seed, row in zip(sorted(seeds), group):
                values = ",".join(format_float(row[k], 9) for k in metric_keys)
                lines.append(f"{m},{arm},{seed},{values},,,,")
            means = ",".join(
                format_float(float(np.mean([r[k] for r in group])), 9)
                for k in metric_keys)
            stds = ",".join(
                format_float(float(np.std([r[k] for r in group])), 9)
                for k in metric_keys)
            lines.append(f"{m},{arm},agg,{means},{stds}")
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _log(f"wrote {out} ({len(cells)} cells)")
    return 0


def cmd_evaluate(args, extra) -> int:
    if extra:
        raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
    image = _load_image(args.image)
    reference = _load_image(args.reference)
    mse, psnr, ncorr = mse_psnr_ncorr(image, reference)
    entries = {"mse": float(mse), "psnr": float(psnr), "ncorr": float(ncorr)}
    try:
        entries["cnr"] = float(cnr(image, RegionMask.from_image(reference)))
    except DegenerateImageError as exc:
        # zero in-region variance: perfect (or constant) image; nan, not inf
        entries["cnr"] = float("nan")
        _log(f"cnr undefined for these images: {exc}")
    for key, value in entries.items():
        print(f"{key}={format_float(value)}")
    if args.out:
        save_diagnostics(args.out, entries)
    return 0


def cmd_phantom(args, extra) -> int:
    if extra:
        raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects name=value, got {item!r}")
        name, _, value = item.partition("=")
        for cast in (int, float):
            try:
                value = cast(value)
                break
            except ValueError:
                continue
        params[name] = value
    try:
        spec = PhantomSpec(kind=args.kind, side=args.side,
                           pixel_pitch=args.pitch, parameters=params)
        phantom = generate(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _save_image(args.out, phantom.transmission)
    _log(f"wrote {args.out} ({args.kind}, {args.side}x{args.side})")
    return 0


# -------------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostpixel",
        description=__doc__,
        epilog=CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("basis", help="export a measurement basis (and optional pattern images)")
    p.add_argument("--k", type=int, required=True, help="per-side log2; the grid is 2^k x 2^k")
    p.add_argument("--ordering", choices=ORDERINGS, default="natural")
    p.add_argument("--rate", type=float, default=1.0, help="sampling rate in (0, 1]")
    p.add_argument("--out", required=True, help="basis export file")
    p.add_argument("--patterns", help="directory for per-row pattern images (PGM)")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("simulate", help="acquire a measurement series from a config")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="series file (default: <out.dir>/series.txt)")
    p.add_argument("--quiet", action="store_true", help="suppress per-exposure progress")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a series file")
    p.add_argument("--series", required=True, help="measurement series file")
    p.add_argument("--method", required=True, choices=RECON_METHODS)
    p.add_argument("--operator", choices=("auto", "ideal", "explicit"),
                   help="sensing model for tv/wfista (default auto)")
    p.add_argument("--out", required=True,
                   help=".pgm for a normalized image, anything else for raw float text")
    p.add_argument("--diagnostics", help="sidecar path (default: <out>.diag.txt)")
    p.add_argument("--timing", action="store_true", help="record wall time (non-deterministic)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="CNR/mse/ncorr over exposures x methods x seeds")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="CSV path (default: <out.dir>/sweep.csv)")
    p.add_argument("--timing", action="store_true", help="record wall times (non-deterministic)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="metrics of an image against a reference image")
    p.add_argument("image", help=".pgm or float-text image")
    p.add_argument("reference", help=".pgm or float-text reference (defines CNR regions)")
    p.add_argument("--out", help="also write the metrics as a key=value file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("phantom", help="emit a phantom image")
    p.add_argument("--kind", required=True, choices=PHANTOM_KINDS)
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--pitch", type=float, default=1.0, help="pixel pitch (microns/px)")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="kind-specific parameter; repeatable")
    p.add_argument("--out", required=True, help=".pgm or float-text output")
    p.set_defaults(func=cmd_phantom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except UsageError as exc:
        print(f"ghostpixel: usage error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"ghostpixel: config error: {exc}", file=sys.stderr)
        return 4
    except FormatError as exc:
        print(f"ghostpixel: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"ghostpixel: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
