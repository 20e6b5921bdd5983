"""Simulated scattering medium: transmission matrices and intensity capture.

The medium is an i.i.d. circular complex Gaussian matrix with entry variance
1/N, so amplitudes |Hx| stay O(1) for binary inputs with about half the
pixels lit. Measurement returns amplitudes (square roots of camera
intensities); optional noise models act in the amplitude or the intensity
domain, both clamped to keep amplitudes nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MeasurementSet, PatternSet, TransmissionMatrix, seeded_rng

__all__ = ["NoiseModel", "generate_tm", "measure", "measure_batch"]


@dataclass(frozen=True)
class NoiseModel:
    """kind: "none" | "amplitude" (additive on |Hx|) | "intensity"
    (additive on |Hx|^2 before the square root)."""

    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "amplitude", "intensity"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be nonnegative")


def generate_tm(m: int, n: int, seed: int) -> TransmissionMatrix:
    """i.i.d. CN(0, 1/N) transmission matrix of shape (m, n)."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be at least 1")
    rng = seeded_rng(seed, 0)
    scale = np.sqrt(1.0 / (2.0 * n))
    h = rng.normal(0.0, scale, (m, n)) + 1j * rng.normal(0.0, scale, (m, n))
    return TransmissionMatrix(entries=h)


def _entries(h):
    return h.entries if isinstance(h, TransmissionMatrix) else np.asarray(h)


def measure(h, x, noise: NoiseModel = NoiseModel(), seed: int = 0) -> np.ndarray:
    """Amplitude vector observed at the output for one input pattern.

    Noiseless: y = |Hx|. Amplitude noise: y = max(|Hx| + w, 0). Intensity
    noise: y = sqrt(max(|Hx|^2 + w, 0)), matching a camera that adds noise
    before the pipeline takes square roots.
    """
    hm = _entries(h)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != hm.shape[1]:
        raise ValueError(f"pattern length {x.shape[0]} does not match matrix cols {hm.shape[1]}")
    amp = np.abs(hm @ x)
    if noise.kind == "none" or noise.sigma == 0.0:
        return amp
    rng = seeded_rng(seed, 0)
    w = rng.normal(0.0, noise.sigma, amp.shape)
    if noise.kind == "amplitude":
        return np.maximum(amp + w, 0.0)
    return np.sqrt(np.maximum(amp * amp + w, 0.0))


def measure_batch(h, patterns: PatternSet, noise: NoiseModel = NoiseModel(),
                  seed: int = 0) -> MeasurementSet:
    """Measure every pattern; column p uses the derived seed (seed xor p).

    Equivalent to looping measure() with those seeds, so batch and loop are
    bit-identical.
    """
    bits = patterns.bits if isinstance(patterns, PatternSet) else np.asarray(patterns, float)
    hm = _entries(h)
    if bits.shape[1] != hm.shape[1]:
        raise ValueError("pattern dimension does not match matrix columns")
    cols = [measure(hm, bits[p], noise, seed ^ p) for p in range(bits.shape[0])]
    return MeasurementSet(values=np.stack(cols, axis=1))
