"""Input denoisers: per-coefficient posterior mean/variance under the prior.

Each denoiser receives the Gaussian pseudo-measurement (r, s) produced by
the sweep and returns the posterior mean x_a and variance x_v of the
coefficient. Both are vectorized over coefficients.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

__all__ = ["binary_denoiser", "complex_gaussian_denoiser", "local_prior_estimate"]


def _check_pos(name, s):
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError(f"{name}: s must be positive and finite")
    return s


def binary_denoiser(r, s, rho):
    """Posterior mean/variance of x in {0,1} under Bernoulli(rho).

    The two-point posterior reduces to a logistic form,
        x_a = expit(logit(rho) + (2 Re r - 1)/(2 s)),
    since |r|^2 - |1 - r|^2 = 2 Re r - 1; this is the log-domain evaluation
    that stays exact as s -> 0 where the naive exponentials underflow.
    x_v = x_a (1 - x_a) identically. rho in {0, 1} pins the output constant.
    """
    s = _check_pos("binary_denoiser", s)
    r = np.asarray(r, dtype=np.complex128)
    if not (np.all(np.isfinite(r.real)) and np.all(np.isfinite(r.imag))):
        raise ValueError("binary_denoiser: non-finite r")
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("binary_denoiser: rho must lie in [0, 1]")
    scalar = r.ndim == 0 and np.ndim(s) == 0 and rho.ndim == 0
    with np.errstate(divide="ignore"):
        logit = np.log(rho) - np.log1p(-rho)  # +-inf at the degenerate ends
    x_a = expit(logit + (2.0 * np.real(r) - 1.0) / (2.0 * s))
    x_v = x_a * (1.0 - x_a)
    if scalar:
        return float(x_a), float(x_v)
    shape = np.broadcast_shapes(np.shape(x_a), np.shape(x_v))
    return (np.broadcast_to(x_a, shape).astype(np.float64, copy=True),
            np.broadcast_to(x_v, shape).astype(np.float64, copy=True))


def complex_gaussian_denoiser(r, s, v0):
    """Posterior under a zero-mean circular complex Gaussian prior.

    Conjugate closed form: x_a = r v0/(v0 + s), x_v = v0 s/(v0 + s).
    """
    s = _check_pos("complex_gaussian_denoiser", s)
    v0 = np.asarray(v0, dtype=np.float64)
    if np.any(v0 <= 0) or not np.all(np.isfinite(v0)):
        raise ValueError("complex_gaussian_denoiser: v0 must be positive and finite")
    r = np.asarray(r, dtype=np.complex128)
    if not (np.all(np.isfinite(r.real)) and np.all(np.isfinite(r.imag))):
        raise ValueError("complex_gaussian_denoiser: non-finite r")
    scalar = r.ndim == 0 and np.ndim(s) == 0 and v0.ndim == 0
    x_a = r * (v0 / (v0 + s))
    x_v = v0 * s / (v0 + s)
    if scalar:
        return complex(x_a), float(x_v)
    shape = np.broadcast_shapes(np.shape(x_a), np.shape(x_v))
    return (np.broadcast_to(x_a, shape).astype(np.complex128, copy=True),
            np.broadcast_to(x_v, shape).astype(np.float64, copy=True))


def local_prior_estimate(training, floor=1e-3):
    """Per-pixel activation probabilities from a binary training set.

    rho_i is the mean of pixel i over the training images, clamped to
    [floor, 1 - floor] so that pixels never observed active (or never
    inactive) are not hard-killed by the prior.
    """
    if hasattr(training, "bits"):
        arr = training.bits
    else:
        arr = np.asarray(training, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("local_prior_estimate: need at least one training image")
    return np.clip(arr.mean(axis=0), floor, 1.0 - floor)
