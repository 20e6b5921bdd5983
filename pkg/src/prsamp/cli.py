"""Command line pipeline: generate a medium, calibrate it, image through it.

Subcommands wrap the library staying byte-deterministic: identical flags
and input files always produce identical output files. Exit codes: 0 on
success, 1 on runtime or I/O failures, 2 on usage errors.
"""

import argparse
import math
import os
import sys

import numpy as np

from .calibration import calibrate, load_report
from .dataio import (
    FormatError,
    load_idx,
    load_matrix,
    make_d2,
    save_image_pgm,
    save_matrix,
)
from .experiments import (
    alpha_sweep,
    m_sweep,
    visual_grid,
    write_curve_csv,
)
from .imaging import reconstruct
from .medium import generate_tm
from .metrics import dependence, pearson_correlation
from .model import (
    BinaryPrior,
    MeasurementSet,
    PatternSet,
    SolverOptions,
    TransmissionMatrix,
)

__all__ = ["main"]

_DEFAULTS = SolverOptions()


class UsageError(Exception):
    """Bad flag values or inconsistent user input; exits with code 2."""


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="prsamp",
        description="Phase retrieval through a simulated scattering medium: "
                    "calibrate a transmission matrix from intensity-only "
                    "measurements, then image sparse binary patterns through it.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "medium-gen", help="generate a synthetic complex transmission matrix",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--rows", type=int, required=True, help="output pixels M")
    p.add_argument("--cols", type=int, required=True, help="input pixels N")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", required=True, help="output matrix file")

    p = sub.add_parser(
        "calibrate", help="estimate the medium from patterns and measurements",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--patterns", required=True, help="binary pattern matrix (P x N)")
    p.add_argument("--measurements", required=True,
                   help="amplitude measurement matrix (M x P)")
    p.add_argument("--sigma2", type=float, default=_DEFAULTS.sigma2,
                   help="assumed channel noise variance")
    p.add_argument("--sweeps", type=int, default=_DEFAULTS.max_sweeps,
                   help="sweep budget per restart")
    p.add_argument("--tol", type=float, default=_DEFAULTS.tol,
                   help="convergence threshold on the estimate change")
    p.add_argument("--restarts", type=int, default=_DEFAULTS.restarts,
                   help="independent initializations per row")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads across rows (0 = one per core)")
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed,
                   help="base seed; row m solves with seed + m")
    p.add_argument("--out", required=True, help="estimated matrix file")
    p.add_argument("--report", default=None,
                   help="write a summary here and per-row CSV alongside")

    p = sub.add_parser(
        "reconstruct", help="image a sparse binary pattern through the medium",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--tm", required=True, help="transmission matrix file")
    p.add_argument("--y", required=True,
                   help="measured amplitude vector (matrix file, one row or column)")
    p.add_argument("--prior", required=True,
                   help="global:RHO for a uniform sparsity level, or local:PATH "
                        "to a per-pixel probability matrix")
    p.add_argument("--sigma2", type=float, default=_DEFAULTS.sigma2,
                   help="assumed channel noise variance")
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed, help="solver seed")
    p.add_argument("--out-pgm", required=True, help="binary image output (P5)")
    p.add_argument("--out-soft", default=None,
                   help="posterior mean output (real matrix file)")
    p.add_argument("--report", default=None,
                   help="calibration report path; flagged rows are excluded")
    p.add_argument("--truth", default=None,
                   help="true binary image file; prints dependence and correlation")

    p = sub.add_parser(
        "experiment", help="run a named end-to-end experiment",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--name", required=True,
                   choices=("alpha-sweep", "m-sweep", "visual-grid"),
                   help="which experiment to run")
    p.add_argument("--config", default=None,
                   help="key=value file ('#' comments); flags override it")
    p.add_argument("--out-dir", required=True, help="directory for CSV/PGM outputs")
    p.add_argument("--mnist-dir", default=None,
                   help="directory with MNIST IDX files; switches the image "
                        "corpus from the synthetic model to digit images")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (overrides the config file)")
    p.add_argument("--seed", type=int, default=None,
                   help="experiment seed (overrides the config file)")
    return parser


def _as_image(vec):
    """Flat vector to a displayable 2-D array: square if possible, else a row."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    side = int(round(math.sqrt(vec.shape[0])))
    if side * side == vec.shape[0]:
        return vec.reshape(side, side)
    return vec[None, :]


def _cmd_medium_gen(args):
    if args.rows < 1:
        raise UsageError("--rows must be at least 1")
    if args.cols < 1:
        raise UsageError("--cols must be at least 1")
    tm = generate_tm(args.rows, args.cols, args.seed)
    save_matrix(args.out, tm.entries)
    variance = float(np.mean(np.abs(tm.entries) ** 2))
    print(f"rows={args.rows} cols={args.cols} entry_variance={variance:.6g}")
    print(f"wrote {args.out}")
    return 0


def _cmd_calibrate(args):
    patterns = PatternSet(bits=load_matrix(args.patterns))
    measurements = MeasurementSet(values=load_matrix(args.measurements))
    options = SolverOptions(sigma2=args.sigma2, max_sweeps=args.sweeps,
                            tol=args.tol, restarts=args.restarts, seed=args.seed)
    h_est, report = calibrate(patterns, measurements, options, threads=args.threads)
    save_matrix(args.out, h_est.entries)
    if args.report is not None:
        report.save(args.report)
    for line in report.summary_lines():
        print(line)
    print(f"wrote {args.out}")
    return 0


def _parse_prior(text, n):
    if text.startswith("global:"):
        try:
            rho = float(text[len("global:"):])
        except ValueError:
            raise UsageError(f"--prior global level {text[7:]!r} is not a number")
        if not 0.0 <= rho <= 1.0:
            raise UsageError("--prior global level must lie in [0, 1]")
        return BinaryPrior(rho=rho)
    if text.startswith("local:"):
        rho = np.asarray(load_matrix(text[len("local:"):]),
                         dtype=np.float64).ravel()
        if rho.shape[0] != n:
            raise UsageError(
                f"--prior local file has {rho.shape[0]} values, expected {n}")
        return BinaryPrior(rho=rho)
    raise UsageError("--prior must be global:RHO or local:PATH")


def _cmd_reconstruct(args):
    h = TransmissionMatrix(entries=load_matrix(args.tm))
    y = np.asarray(load_matrix(args.y), dtype=np.float64).ravel()
    prior = _parse_prior(args.prior, h.cols)
    report = load_report(args.report) if args.report is not None else None
    options = SolverOptions(sigma2=args.sigma2, seed=args.seed)
    result = reconstruct(h, y, prior, options=options, report=report)
    save_image_pgm(args.out_pgm, _as_image(result.x_bin))
    if args.out_soft is not None:
        save_matrix(args.out_soft, _as_image(result.x_soft))
    print(f"residual={result.residual!r}")
    if args.truth is not None:
        truth = np.asarray(load_matrix(args.truth), dtype=np.float64).ravel()
        dep = (dependence(result.x_bin, truth)
               if np.any(result.x_bin != 0) and np.any(truth != 0) else 0.0)
        corr = (pearson_correlation(result.x_bin, truth)
                if np.ptp(result.x_bin) > 0 and np.ptp(truth) > 0 else 0.0)
        print(f"dependence={dep!r}")
        print(f"correlation={corr!r}")
    print(f"wrote {args.out_pgm}")
    return 0


def _read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _cfg_int(cfg, key, default):
    try:
        return int(cfg.get(key, default))
    except ValueError:
        raise UsageError(f"config key {key!r} must be an integer, got {cfg[key]!r}")


def _cfg_float(cfg, key, default):
    try:
        return float(cfg.get(key, default))
    except ValueError:
        raise UsageError(f"config key {key!r} must be a number, got {cfg[key]!r}")


def _cfg_list(cfg, key, default, kind):
    raw = cfg.get(key, default)
    if isinstance(raw, str):
        parts = [p for p in raw.split(",") if p.strip()]
    else:
        parts = raw
    try:
        return tuple(kind(p) for p in parts)
    except ValueError:
        raise UsageError(f"config key {key!r} must be comma-separated values, got {raw!r}")


def _load_mnist_images(mnist_dir):
    """Binary 32x32 digit images (flattened) from standard IDX file names."""
    for name in ("train-images-idx3-ubyte", "train-images.idx3-ubyte"):
        path = os.path.join(mnist_dir, name)
        if os.path.exists(path):
            raw = load_idx(path)
            images = make_d2(raw)
            return images.reshape(images.shape[0], -1)
    raise UsageError(f"no MNIST image file found under {mnist_dir}")


def _cmd_experiment(args):
    cfg = _read_config(args.config) if args.config is not None else {}
    seed = args.seed if args.seed is not None else _cfg_int(cfg, "seed", 0)
    threads = args.threads if args.threads is not None else _cfg_int(cfg, "threads", 1)
    sigma2 = _cfg_float(cfg, "sigma2", _DEFAULTS.sigma2)
    os.makedirs(args.out_dir, exist_ok=True)

    digits = _load_mnist_images(args.mnist_dir) if args.mnist_dir is not None else None

    if args.name == "alpha-sweep":
        result = alpha_sweep(
            n=_cfg_int(cfg, "n", 64),
            m_rows=_cfg_int(cfg, "m", 128),
            alphas=_cfg_list(cfg, "alphas", "1,2,3,5", float),
            seeds=_cfg_list(cfg, "seeds", "0,1,2,3,4", int),
            holdout=_cfg_int(cfg, "holdout", 64),
            sigma2=sigma2, threads=threads)
        dep_path = os.path.join(args.out_dir, "alpha_sweep.csv")
        write_curve_csv(dep_path, "alpha", result.alphas,
                        result.dependence_per_seed, value_label="seed")
        write_curve_csv(os.path.join(args.out_dir, "alpha_sweep_recovery.csv"),
                        "alpha", result.alphas,
                        result.recovery_median_per_seed, value_label="seed")
        for alpha, mean in zip(result.alphas, result.dependence_mean):
            print(f"alpha={alpha:g} heldout_dependence={float(mean)!r}")
        print(f"wrote {dep_path}")
        return 0

    if args.name == "m-sweep":
        count = _cfg_int(cfg, "images", 20)
        images = digits[:count] if digits is not None else None
        result = m_sweep(
            n=_cfg_int(cfg, "n", 256),
            ratios=_cfg_list(cfg, "ratios", "0.3,0.5,0.7", float),
            image_count=count,
            alpha=_cfg_float(cfg, "alpha", 5.0),
            rho=_cfg_float(cfg, "rho", 0.15),
            sigma2=sigma2, seed=seed, threads=threads, images=images)
        dep_path = os.path.join(args.out_dir, "m_sweep.csv")
        write_curve_csv(dep_path, "ratio", result.ratios,
                        result.dependences, value_label="img")
        write_curve_csv(os.path.join(args.out_dir, "m_sweep_correlation.csv"),
                        "ratio", result.ratios,
                        result.correlations, value_label="img")
        for ratio, dep, corr in zip(result.ratios, result.dependence_mean,
                                    result.correlation_mean):
            print(f"ratio={ratio:g} dependence={float(dep)!r} correlation={float(corr)!r}")
        print(f"wrote {dep_path}")
        return 0

    count = _cfg_int(cfg, "images", 8)
    train_count = _cfg_int(cfg, "train", 300)
    if digits is not None:
        test_images = digits[:count]
        train_images = digits[count:count + train_count]
    else:
        test_images = None
        train_images = None
    result = visual_grid(
        n=_cfg_int(cfg, "n", 256),
        m_rows=_cfg_int(cfg, "m", 179),
        image_count=count, train_count=train_count,
        train_images=train_images, test_images=test_images,
        sigma2=sigma2, seed=seed, threads=threads)
    pgm_path = os.path.join(args.out_dir, "visual_grid.pgm")
    save_image_pgm(pgm_path, result.montage)
    write_curve_csv(os.path.join(args.out_dir, "visual_grid.csv"), "prior",
                    ("local", "global"),
                    np.vstack([result.local_dependences, result.global_dependences]),
                    value_label="img")
    print(f"local_dependence_mean={float(result.local_dependences.mean())!r}")
    print(f"global_dependence_mean={float(result.global_dependences.mean())!r}")
    print(f"wrote {pgm_path}")
    return 0


_HANDLERS = {
    "medium-gen": _cmd_medium_gen,
    "calibrate": _cmd_calibrate,
    "reconstruct": _cmd_reconstruct,
    "experiment": _cmd_experiment,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FormatError, OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
