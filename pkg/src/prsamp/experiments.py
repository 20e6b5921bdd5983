"""End-to-end experiment harnesses shared by the CLI and the test suite.

Each harness builds a synthetic medium, runs calibration and/or imaging
through the library API, and returns per-run values so callers can write
curve CSVs or assert trend properties. Everything is deterministic from
the seed argument: sub-stages draw from derived child seeds and per-image
work is seeded by image index, so thread counts do not change results.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import calibrate, gen_bernoulli_patterns
from .imaging import reconstruct, reconstruct_batch
from .medium import NoiseModel, generate_tm, measure_batch
from .metrics import dependence, held_out_dependence, pearson_correlation, row_recovery
from .model import (
    BinaryPrior,
    PatternSet,
    SolverOptions,
    derive_seed,
    seeded_rng,
)
from .priors import local_prior_estimate

__all__ = [
    "AlphaSweepResult", "alpha_sweep",
    "TrueMediumSuiteResult", "true_medium_suite",
    "MSweepResult", "m_sweep",
    "PriorComparisonResult", "prior_comparison",
    "VisualGridResult", "visual_grid",
    "synthetic_rho_map", "image_montage", "write_curve_csv",
]

_NOISELESS = NoiseModel()


def write_curve_csv(path, x_label, xs, per_run, value_label="v"):
    """Curve CSV: one row per x with mean, std, and the per-run values."""
    per_run = np.asarray(per_run, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([x_label, "mean", "std"]
                        + [f"{value_label}{j}" for j in range(per_run.shape[1])])
        for x, row in zip(xs, per_run):
            writer.writerow([x, repr(float(row.mean())), repr(float(row.std()))]
                            + [repr(float(v)) for v in row])


def _parallel_map(fn, jobs, threads):
    """Map preserving order; threads == 1 stays serial, 0 means per-core."""
    if threads == 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads if threads > 0 else None) as pool:
        return list(pool.map(fn, jobs))


def _safe_dependence(estimate, truth):
    """dependence, with an all-zero estimate scored 0 instead of erroring."""
    if not np.any(np.asarray(estimate) != 0):
        return 0.0
    return dependence(estimate, truth)


def _safe_correlation(estimate, truth):
    est = np.asarray(estimate, dtype=np.float64)
    if np.ptp(est) == 0 or np.ptp(np.asarray(truth, dtype=np.float64)) == 0:
        return 0.0
    return pearson_correlation(est, truth)


def binary_images(count, n, ones, seed):
    """count binary images of n pixels with exactly `ones` active pixels."""
    rng = seeded_rng(seed, 0)
    out = np.zeros((count, n))
    for k in range(count):
        out[k, rng.permutation(n)[:ones]] = 1.0
    return out


def _calibration_options(sigma2, seed, restarts, early_exit=1e-2):
    return SolverOptions(sigma2=sigma2, restarts=restarts, seed=seed,
                         early_exit_residual=early_exit)


@dataclass(frozen=True)
class AlphaSweepResult:
    """Held-out dependence and per-row recovery vs oversampling ratio."""

    alphas: tuple
    seeds: tuple
    dependence_per_seed: np.ndarray       # (len(alphas), len(seeds))
    recovery_median_per_seed: np.ndarray  # (len(alphas), len(seeds))

    @property
    def dependence_mean(self):
        return self.dependence_per_seed.mean(axis=1)

    @property
    def recovery_median(self):
        return np.median(self.recovery_median_per_seed, axis=1)


def alpha_sweep(n=64, m_rows=128, alphas=(1, 2, 3, 5), seeds=(0, 1, 2, 3, 4),
                holdout=64, sigma2=1e-3, restarts=3, threads=1) -> AlphaSweepResult:
    """Calibrate a fresh medium per (alpha, seed) and score the estimate.

    Per seed: a synthetic medium, ceil(alpha N) Bernoulli patterns, and a
    held-out pattern set. Scores are the mean held-out dependence and the
    median per-row recovery against the true rows.
    """
    alphas = tuple(alphas)
    seeds = tuple(seeds)
    dep = np.zeros((len(alphas), len(seeds)))
    rec = np.zeros_like(dep)
    for si, seed in enumerate(seeds):
        tm = generate_tm(m_rows, n, seed=derive_seed(seed, 0))
        test = gen_bernoulli_patterns(holdout, n, seed=derive_seed(seed, 4))
        test_meas = measure_batch(tm, test, _NOISELESS, seed=derive_seed(seed, 5))
        for ai, alpha in enumerate(alphas):
            pats = gen_bernoulli_patterns(int(math.ceil(alpha * n)), n,
                                          seed=derive_seed(seed, 10 + ai))
            meas = measure_batch(tm, pats, _NOISELESS, seed=derive_seed(seed, 2))
            opts = _calibration_options(sigma2, derive_seed(seed, 3), restarts)
            h_est, _ = calibrate(pats, meas, opts, threads=threads)
            dep[ai, si] = held_out_dependence(h_est, test, test_meas)
            rec[ai, si] = float(np.median(
                [row_recovery(h_est.entries[m], tm.entries[m]) for m in range(m_rows)]))
    return AlphaSweepResult(alphas=alphas, seeds=seeds,
                            dependence_per_seed=dep, recovery_median_per_seed=rec)


@dataclass(frozen=True)
class TrueMediumSuiteResult:
    """Reconstruction quality through the exactly known medium at M = N."""

    dependences: np.ndarray
    correlations: np.ndarray
    residuals: np.ndarray

    def success_fraction(self, threshold=0.99):
        return float(np.mean(self.dependences >= threshold))


def true_medium_suite(n=256, count=50, rho=0.15, sigma2=1e-3, seed=0,
                      threads=1) -> TrueMediumSuiteResult:
    """Upper-bound regime: true H, noiseless amplitudes, M = N, global prior."""
    ones = int(round(rho * n))
    tm = generate_tm(n, n, seed=derive_seed(seed, 0))
    images = binary_images(count, n, ones, seed=derive_seed(seed, 1))
    meas = measure_batch(tm, PatternSet(bits=images), _NOISELESS,
                         seed=derive_seed(seed, 2))
    options = SolverOptions(sigma2=sigma2, seed=derive_seed(seed, 3))
    results = reconstruct_batch(tm, meas, BinaryPrior(rho=ones / n),
                                options=options, threads=threads)
    dep = np.array([_safe_dependence(r.x_bin, images[k]) for k, r in enumerate(results)])
    cor = np.array([_safe_correlation(r.x_bin, images[k]) for k, r in enumerate(results)])
    res = np.array([r.residual for r in results])
    return TrueMediumSuiteResult(dependences=dep, correlations=cor, residuals=res)


@dataclass(frozen=True)
class MSweepResult:
    """Double phase retrieval: imaging quality vs measurement rate M/N."""

    ratios: tuple
    dependences: np.ndarray   # (len(ratios), image_count)
    correlations: np.ndarray
    calibration_mean_residual: float

    @property
    def dependence_mean(self):
        return self.dependences.mean(axis=1)

    @property
    def correlation_mean(self):
        return self.correlations.mean(axis=1)


def m_sweep(n=256, ratios=(0.3, 0.5, 0.7), image_count=20, alpha=5, rho=0.15,
            sigma2=1e-3, seed=0, threads=1, use_true_h=False,
            images=None) -> MSweepResult:
    """Calibrate once at the given alpha, then image at several rates M/N.

    The calibration stage estimates all N output rows; each rate keeps the
    M rows with the smallest calibration residuals (an observable ranking,
    no ground truth involved) and reconstructs every test image from those
    rows alone. Test images default to synthetic draws with exactly
    round(rho n) active pixels; pass `images` (count x n binary) to image a
    dataset instead. The global prior for an image is its own sparsity.
    use_true_h=True skips calibration for baseline runs.
    """
    ratios = tuple(ratios)
    if images is not None:
        images = np.asarray(images, dtype=np.float64)
        image_count, n = images.shape
    tm = generate_tm(n, n, seed=derive_seed(seed, 0))
    if use_true_h:
        h_all = tm.entries
        order = np.arange(n)
        mean_resid = 0.0
    else:
        pats = gen_bernoulli_patterns(int(math.ceil(alpha * n)), n,
                                      seed=derive_seed(seed, 1))
        meas = measure_batch(tm, pats, _NOISELESS, seed=derive_seed(seed, 2))
        opts = _calibration_options(sigma2, derive_seed(seed, 3), restarts=6)
        h_est, report = calibrate(pats, meas, opts, threads=threads)
        h_all = h_est.entries
        order = np.argsort(np.asarray(report.residuals), kind="stable")
        mean_resid = report.mean_residual
    if images is None:
        images = binary_images(image_count, n, int(round(rho * n)),
                               seed=derive_seed(seed, 4))
    meas_full = measure_batch(tm, PatternSet(bits=images), _NOISELESS,
                              seed=derive_seed(seed, 5))
    dep = np.zeros((len(ratios), image_count))
    cor = np.zeros_like(dep)
    for ri, ratio in enumerate(ratios):
        rows = np.sort(order[:int(round(ratio * n))])
        rate_seed = derive_seed(seed, 6 + ri)

        def run(k):
            options = SolverOptions(sigma2=sigma2, seed=derive_seed(rate_seed, k))
            return reconstruct(h_all[rows], meas_full.values[rows, k],
                               BinaryPrior(rho=float(images[k].mean())),
                               options=options)

        results = _parallel_map(run, range(image_count), threads)
        for k, r in enumerate(results):
            dep[ri, k] = _safe_dependence(r.x_bin, images[k])
            cor[ri, k] = _safe_correlation(r.x_bin, images[k])
    return MSweepResult(ratios=ratios, dependences=dep, correlations=cor,
                        calibration_mean_residual=mean_resid)


def synthetic_rho_map(side=16):
    """Smooth two-bump per-pixel activation map on a side x side grid.

    Stands in for the pixel statistics of a digit corpus: a bright central
    blob plus a secondary lobe over a dim background, clipped away from the
    degenerate probabilities 0 and 1. Returned flat (length side^2).
    """
    rr, cc = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    rho = (0.02
           + 0.50 * np.exp(-((rr - 5.5) ** 2 + (cc - 8.0) ** 2) / 18.0)
           + 0.35 * np.exp(-((rr - 11.0) ** 2 + (cc - 6.0) ** 2) / 8.0))
    return np.clip(rho, 1e-3, 1.0 - 1e-3).ravel()


def _rho_model_images(count, rho_map, seed):
    """Independent Bernoulli(rho_i) draws; an empty draw gets one pixel lit."""
    rng = seeded_rng(seed, 0)
    images = (rng.random((count, rho_map.shape[0])) < rho_map).astype(np.float64)
    for k in np.flatnonzero(images.sum(axis=1) == 0):
        images[k, int(np.argmax(rho_map))] = 1.0
    return images


@dataclass(frozen=True)
class PriorComparisonResult:
    """Local (per-pixel) vs global (scalar) prior at several rates."""

    m_list: tuple
    local_dependences: np.ndarray    # (len(m_list), image_count)
    global_dependences: np.ndarray
    local_correlations: np.ndarray
    global_correlations: np.ndarray

    @property
    def local_mean(self):
        return self.local_dependences.mean(axis=1)

    @property
    def global_mean(self):
        return self.global_dependences.mean(axis=1)


def prior_comparison(n=256, m_list=(128, 154, 179), image_count=12,
                     train_count=300, rho_map=None, train_images=None,
                     test_images=None, sigma2=1e-3, seed=0,
                     threads=1) -> PriorComparisonResult:
    """Reconstruct each test image twice, with local and global priors.

    Default corpus: images drawn from the synthetic per-pixel activation
    model. Callers with a real dataset pass train_images/test_images (flat
    binary arrays) instead. The local prior is the per-pixel training mean;
    the global prior is each image's own sparsity. Both runs of an image
    share the solver seed, so the prior is the only difference.
    """
    m_list = tuple(m_list)
    if test_images is None:
        if rho_map is None:
            side = int(round(math.sqrt(n)))
            if side * side != n:
                raise ValueError("default rho model needs a square pixel count")
            rho_map = synthetic_rho_map(side)
        test_images = _rho_model_images(image_count, rho_map, derive_seed(seed, 1))
    else:
        test_images = np.asarray(test_images, dtype=np.float64)
        image_count = test_images.shape[0]
    if train_images is None:
        if rho_map is None:
            raise ValueError("need train_images or a rho model to fit the local prior")
        train_images = _rho_model_images(train_count, rho_map, derive_seed(seed, 2))
    rho_local = local_prior_estimate(train_images)
    n = test_images.shape[1]

    tm = generate_tm(max(m_list), n, seed=derive_seed(seed, 0))
    shape = (len(m_list), image_count)
    dep_l, dep_g = np.zeros(shape), np.zeros(shape)
    cor_l, cor_g = np.zeros(shape), np.zeros(shape)
    for mi, m_rows in enumerate(m_list):
        h = tm.entries[:m_rows]
        meas = measure_batch(h, PatternSet(bits=test_images), _NOISELESS,
                             seed=derive_seed(seed, 3))

        def run(job):
            k, use_local = job
            prior = BinaryPrior(rho=rho_local if use_local
                                else float(test_images[k].mean()))
            options = SolverOptions(sigma2=sigma2,
                                    seed=derive_seed(seed, 100 + 37 * k))
            return reconstruct(h, meas.values[:, k], prior, options=options)

        jobs = [(k, use_local) for k in range(image_count) for use_local in (True, False)]
        outs = _parallel_map(run, jobs, threads)
        for (k, use_local), r in zip(jobs, outs):
            dep = _safe_dependence(r.x_bin, test_images[k])
            cor = _safe_correlation(r.x_bin, test_images[k])
            if use_local:
                dep_l[mi, k], cor_l[mi, k] = dep, cor
            else:
                dep_g[mi, k], cor_g[mi, k] = dep, cor
    return PriorComparisonResult(m_list=m_list,
                                 local_dependences=dep_l, global_dependences=dep_g,
                                 local_correlations=cor_l, global_correlations=cor_g)


def image_montage(image_rows, side, pad=2, pad_value=0.5):
    """Tile flat [0,1] images into a grid; image_rows is a list of rows."""
    cols = max(len(row) for row in image_rows)
    height = len(image_rows) * (side + pad) + pad
    width = cols * (side + pad) + pad
    canvas = np.full((height, width), pad_value)
    for i, row in enumerate(image_rows):
        for j, img in enumerate(row):
            tile = np.asarray(img, dtype=np.float64).reshape(side, side)
            r0 = pad + i * (side + pad)
            c0 = pad + j * (side + pad)
            canvas[r0:r0 + side, c0:c0 + side] = tile
    return canvas


@dataclass(frozen=True)
class VisualGridResult:
    montage: np.ndarray
    local_dependences: np.ndarray
    global_dependences: np.ndarray


def visual_grid(n=256, m_rows=179, image_count=8, train_count=300,
                rho_map=None, train_images=None, test_images=None,
                sigma2=1e-3, seed=0, threads=1) -> VisualGridResult:
    """Three-row montage at one rate: originals, local prior, global prior."""
    if test_images is None:
        if rho_map is None:
            side = int(round(math.sqrt(n)))
            if side * side != n:
                raise ValueError("default rho model needs a square pixel count")
            rho_map = synthetic_rho_map(side)
        test_images = _rho_model_images(image_count, rho_map, derive_seed(seed, 1))
    else:
        test_images = np.asarray(test_images, dtype=np.float64)
        image_count = test_images.shape[0]
    if train_images is None:
        if rho_map is None:
            raise ValueError("need train_images or a rho model to fit the local prior")
        train_images = _rho_model_images(train_count, rho_map, derive_seed(seed, 2))
    rho_local = local_prior_estimate(train_images)
    n = test_images.shape[1]
    side = int(round(math.sqrt(n)))

    tm = generate_tm(m_rows, n, seed=derive_seed(seed, 0))
    meas = measure_batch(tm, PatternSet(bits=test_images), _NOISELESS,
                         seed=derive_seed(seed, 3))

    def run(job):
        k, use_local = job
        prior = BinaryPrior(rho=rho_local if use_local
                            else float(test_images[k].mean()))
        options = SolverOptions(sigma2=sigma2, seed=derive_seed(seed, 100 + 37 * k))
        return reconstruct(tm, meas.values[:, k], prior, options=options)

    jobs = [(k, use_local) for k in range(image_count) for use_local in (True, False)]
    outs = _parallel_map(run, jobs, threads)
    rows = [[test_images[k] for k in range(image_count)],
            [None] * image_count, [None] * image_count]
    dep_l = np.zeros(image_count)
    dep_g = np.zeros(image_count)
    for (k, use_local), r in zip(jobs, outs):
        dep = _safe_dependence(r.x_bin, test_images[k])
        if use_local:
            rows[1][k] = r.x_bin
            dep_l[k] = dep
        else:
            rows[2][k] = r.x_bin
            dep_g[k] = dep
    return VisualGridResult(montage=image_montage(rows, side),
                            local_dependences=dep_l,
                            global_dependences=dep_g)
