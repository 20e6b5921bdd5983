"""Output channels: score functions g, g' of the measurement likelihood.

Each channel maps (y, omega, v, sigma2) to the pair (g, g_prime) that the
AMP sweep consumes: g is the scaled posterior mean shift of the noiseless
measurement z given y, and g_prime its derivative (the posterior variance
correction). Both accept scalars or arrays and broadcast elementwise.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .bessel import bessel_ratio

__all__ = ["ChannelOutputs", "pr_output", "gaussian_output"]


class ChannelOutputs(NamedTuple):
    """Per-measurement channel scores, unpackable as (g, g_prime).

    g_prime is real and negative in the typical regime, but can turn
    positive when y exceeds |omega| at small variance, which is why the
    sweep clamps its s-message denominator.
    """

    g: np.ndarray
    g_prime: np.ndarray


def _check_finite(name, *vals):
    for v in vals:
        a = np.asarray(v)
        if np.iscomplexobj(a):
            ok = np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))
        else:
            ok = np.all(np.isfinite(a))
        if not ok:
            raise ValueError(f"{name}: non-finite input")


def pr_output(y, omega, v, sigma2, omega_guard=1e-12):
    """Phase retrieval (amplitude) channel: y = |z + w|, w complex Gaussian.

    With vs = v + sigma2, aw = max(|omega|, omega_guard) and
    phi = 2 y aw / vs, the scores are

        g  = omega/vs * (r0(phi) * y/aw - 1)
        g' = (1 - r0(phi)^2) * y^2 / vs^2 - 1/vs

    where r0 = I1/I0. g is collinear with omega and finite for all
    admissible inputs, including |omega| ~ 0 and very large phi.
    """
    _check_finite("pr_output", y, omega, v, sigma2)
    y = np.asarray(y, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.complex128)
    v = np.asarray(v, dtype=np.float64)
    scalar = y.ndim == 0 and omega.ndim == 0
    vs = v + sigma2
    aw = np.maximum(np.abs(omega), omega_guard)
    phi = 2.0 * y * aw / vs
    r0 = bessel_ratio(phi)
    g = (omega / vs) * (r0 * y / aw - 1.0)
    g_prime = (1.0 - r0 * r0) * (y * y) / (vs * vs) - 1.0 / vs
    if scalar:
        return ChannelOutputs(g=complex(g), g_prime=float(g_prime))
    return ChannelOutputs(g=np.asarray(g, dtype=np.complex128),
                          g_prime=np.asarray(g_prime, dtype=np.float64))


def gaussian_output(y, omega, v, sigma2):
    """Additive Gaussian channel: g = (y - omega)/(v + sigma2), g' = -1/(v + sigma2)."""
    _check_finite("gaussian_output", y, omega, v, sigma2)
    y = np.asarray(y, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.complex128)
    v = np.asarray(v, dtype=np.float64)
    scalar = y.ndim == 0 and omega.ndim == 0
    vs = v + sigma2
    g = (y - omega) / vs
    g_prime = -1.0 / vs
    if scalar:
        return ChannelOutputs(g=complex(g), g_prime=float(g_prime))
    return ChannelOutputs(
        g=np.asarray(g, dtype=np.complex128),
        g_prime=np.broadcast_to(np.asarray(g_prime, dtype=np.float64), g.shape).copy())
