"""Simulated medium: matrix statistics, capture model, noise handling."""

import numpy as np
import pytest

from prsamp import (
    MeasurementSet,
    NoiseModel,
    PatternSet,
    TransmissionMatrix,
    generate_tm,
    measure,
    measure_batch,
)


def test_tm_moments():
    tm = generate_tm(1000, 100, seed=0)
    h = tm.entries
    assert h.shape == (1000, 100)
    assert abs(h.mean()) < 0.005
    # entry variance 1/N keeps |Hx| O(1) for half-lit binary inputs
    var = np.mean(np.abs(h) ** 2)
    assert 0.0095 < var < 0.0105
    # circularity: real and imaginary parts carry half the variance each
    assert np.var(h.real) == pytest.approx(np.var(h.imag), rel=0.05)


def test_tm_deterministic_and_seed_sensitive():
    a = generate_tm(16, 8, seed=3).entries
    b = generate_tm(16, 8, seed=3).entries
    c = generate_tm(16, 8, seed=4).entries
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_tm_degenerate_shapes():
    assert generate_tm(1, 1, seed=0).entries.shape == (1, 1)
    with pytest.raises(ValueError):
        generate_tm(0, 4, seed=0)
    with pytest.raises(ValueError):
        generate_tm(4, 0, seed=0)


def test_measure_identity_pattern():
    tm = generate_tm(12, 6, seed=1)
    e1 = np.zeros(6)
    e1[0] = 1.0
    y = measure(tm, e1)
    assert np.allclose(y, np.abs(tm.entries[:, 0]))


def test_measure_global_phase_invariance():
    tm = generate_tm(10, 5, seed=2)
    x = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    rotated = TransmissionMatrix(np.exp(1j * 0.83) * tm.entries)
    assert np.allclose(measure(tm, x), measure(rotated, x), atol=1e-14)


def test_measure_row_phase_invariance():
    # a per-row phase screen in front of the camera is invisible to
    # intensity capture
    tm = generate_tm(10, 5, seed=6)
    x = np.array([1.0, 1.0, 0.0, 1.0, 0.0])
    phases = np.exp(1j * np.linspace(0.1, 5.9, 10))
    screened = TransmissionMatrix(phases[:, None] * tm.entries)
    assert np.allclose(measure(tm, x), measure(screened, x), atol=1e-14)


def test_noise_models():
    tm = generate_tm(64, 16, seed=5)
    x = (np.arange(16) % 2).astype(float)
    clean = measure(tm, x)
    assert np.array_equal(measure(tm, x, NoiseModel("amplitude", 0.0), seed=9), clean)
    assert np.array_equal(measure(tm, x, NoiseModel("intensity", 0.0), seed=9), clean)
    noisy_a = measure(tm, x, NoiseModel("amplitude", 0.5), seed=9)
    noisy_i = measure(tm, x, NoiseModel("intensity", 0.5), seed=9)
    assert np.all(noisy_a >= 0) and np.all(noisy_i >= 0)
    assert not np.array_equal(noisy_a, clean)
    assert not np.array_equal(noisy_i, clean)
    # same seed reproduces the same draw
    assert np.array_equal(measure(tm, x, NoiseModel("amplitude", 0.5), seed=9), noisy_a)
    with pytest.raises(ValueError):
        NoiseModel("amplitude", -0.1)
    with pytest.raises(ValueError):
        NoiseModel("poisson", 0.1)


def test_measure_validates_pattern_length():
    tm = generate_tm(4, 3, seed=0)
    with pytest.raises(ValueError):
        measure(tm, np.ones(5))


def test_batch_matches_loop_bitwise():
    tm = generate_tm(32, 12, seed=7)
    rng = np.random.default_rng(1)
    bits = (rng.random((9, 12)) < 0.5).astype(float)
    bits[bits.sum(axis=1) == 0, 0] = 1.0
    pats = PatternSet(bits=bits)
    noise = NoiseModel("intensity", 0.2)
    ms = measure_batch(tm, pats, noise, seed=40)
    assert isinstance(ms, MeasurementSet)
    assert ms.values.shape == (32, 9)
    for p in range(9):
        assert np.array_equal(ms.values[:, p], measure(tm, bits[p], noise, seed=40 ^ p))


def test_batch_single_pattern():
    tm = generate_tm(8, 4, seed=2)
    pats = PatternSet(bits=np.array([[1.0, 0.0, 1.0, 0.0]]))
    ms = measure_batch(tm, pats)
    assert ms.values.shape == (8, 1)
    assert np.array_equal(ms.values[:, 0], measure(tm, pats.bits[0]))


def test_marchenko_pastur_edges():
    # Singular values of an i.i.d. variance-1/N ensemble concentrate
    # between sqrt(M/N) -+ 1; at M=1024, N=64 the extremes land within
    # 10% of the limiting edges 3 and 5.
    m, n = 1024, 64
    tm = generate_tm(m, n, seed=11)
    sv = np.linalg.svd(tm.entries, compute_uv=False)
    ratio = np.sqrt(m / n)
    assert sv.max() == pytest.approx(ratio + 1.0, rel=0.10)
    assert sv.min() == pytest.approx(ratio - 1.0, rel=0.10)
