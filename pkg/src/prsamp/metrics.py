"""Evaluation metrics: dependence, row recovery, held-out prediction quality.

dependence is the normalized cross-correlation WITHOUT mean removal, the
natural score for nonnegative amplitude vectors. row_recovery scores a
calibrated row against the truth modulo the invariances of amplitude-only
calibration with real patterns: a global phase factor and complex
conjugation both leave every observable |X h| unchanged, so the metric takes
the best overlap over that group.
"""

from __future__ import annotations

import numpy as np

__all__ = ["dependence", "row_recovery", "held_out_dependence", "pearson_correlation"]


def dependence(a, b) -> float:
    """Inner product of the unit-normalized vectors; 1 iff positively
    proportional. Symmetric and invariant to positive scaling."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("dependence: length mismatch")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("dependence: zero vector")
    return float(np.clip((a @ b) / (na * nb), 0.0, 1.0))


def row_recovery(h_est, h_true) -> float:
    """Modulus of the normalized overlap, maximized over conjugation.

    Invariant to unit-modulus scaling of either argument. The conjugate
    branch matters because real calibration patterns cannot distinguish h
    from conj(h).
    """
    h_est = np.asarray(h_est, dtype=np.complex128).ravel()
    h_true = np.asarray(h_true, dtype=np.complex128).ravel()
    if h_est.shape != h_true.shape:
        raise ValueError("row_recovery: length mismatch")
    ne = np.linalg.norm(h_est)
    nt = np.linalg.norm(h_true)
    if ne == 0 or nt == 0:
        raise ValueError("row_recovery: zero vector")
    direct = abs(np.vdot(h_est, h_true))
    conjug = abs(np.vdot(np.conj(h_est), h_true))
    return float(min(max(direct, conjug) / (ne * nt), 1.0))


def held_out_dependence(h_est, test_patterns, test_measurements) -> float:
    """Mean dependence between observed and predicted output amplitudes.

    One dependence value per held-out pattern, comparing the measured
    amplitude vector with |H_est x|.
    """
    hm = h_est.entries if hasattr(h_est, "entries") else np.asarray(h_est)
    bits = test_patterns.bits if hasattr(test_patterns, "bits") else np.asarray(test_patterns, float)
    meas = test_measurements.values if hasattr(test_measurements, "values") else np.asarray(test_measurements, float)
    if bits.shape[1] != hm.shape[1]:
        raise ValueError("held_out_dependence: pattern dimension mismatch")
    if meas.shape != (hm.shape[0], bits.shape[0]):
        raise ValueError("held_out_dependence: measurement shape mismatch")
    pred = np.abs(hm @ bits.T)
    vals = [dependence(meas[:, p], pred[:, p]) for p in range(bits.shape[0])]
    return float(np.mean(vals))


def pearson_correlation(a, b) -> float:
    """Mean-removed correlation, reported alongside dependence for
    reconstructions (constant vectors are undefined and rejected)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("pearson_correlation: length mismatch")
    a = a - a.mean()
    b = b - b.mean()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("pearson_correlation: constant vector")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
