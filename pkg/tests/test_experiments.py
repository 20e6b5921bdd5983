"""Experiment harness plumbing: CSV output, image models, a small sweep."""

import csv

import numpy as np
import pytest

from prsamp.experiments import (
    alpha_sweep,
    binary_images,
    image_montage,
    synthetic_rho_map,
    write_curve_csv,
)


def test_write_curve_csv_round_trip(tmp_path):
    path = tmp_path / "curve.csv"
    xs = [1, 2, 5]
    per_run = np.array([[0.1, 0.2], [0.30000000000000004, 0.4], [0.5, 1.0 / 3.0]])
    write_curve_csv(path, "alpha", xs, per_run, value_label="seed")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["alpha", "mean", "std", "seed0", "seed1"]
    assert len(rows) == 4
    for i, row in enumerate(rows[1:]):
        assert int(row[0]) == xs[i]
        # repr precision makes the round trip exact
        assert float(row[1]) == per_run[i].mean()
        assert float(row[2]) == per_run[i].std()
        assert [float(v) for v in row[3:]] == list(per_run[i])


def test_binary_images_exact_counts():
    imgs = binary_images(12, 64, 10, seed=3)
    assert imgs.shape == (12, 64)
    assert np.all(imgs.sum(axis=1) == 10)
    assert set(np.unique(imgs)) == {0.0, 1.0}
    again = binary_images(12, 64, 10, seed=3)
    assert np.array_equal(imgs, again)
    assert not np.array_equal(imgs, binary_images(12, 64, 10, seed=4))


def test_synthetic_rho_map():
    rho = synthetic_rho_map(16)
    assert rho.shape == (256,)
    assert np.all(rho > 0) and np.all(rho < 1)
    # two-bump structure: the map is far from flat
    assert rho.max() > 0.4 and rho.min() < 0.05
    assert np.array_equal(rho, synthetic_rho_map(16))


def test_image_montage():
    imgs = np.zeros((3, 16))
    imgs[0, 0] = 1.0
    grid = image_montage([[imgs[0], imgs[1]], [imgs[2]]], side=4, pad=1,
                         pad_value=0.5)
    assert grid.shape == (2 * 5 + 1, 2 * 5 + 1)
    assert grid[1, 1] == 1.0      # first pixel of the first tile
    assert grid[0, 0] == 0.5      # padding frame
    assert grid.max() == 1.0


def test_alpha_sweep_smoke():
    # tiny instance: quality improves from strongly undersampled (alpha=1)
    # to oversampled (alpha=4) calibration
    res = alpha_sweep(n=8, m_rows=12, alphas=(1, 4), seeds=(0, 1),
                      holdout=16, sigma2=1e-3, restarts=2)
    assert res.dependence_per_seed.shape == (2, 2)
    assert res.recovery_median_per_seed.shape == (2, 2)
    assert np.all(res.dependence_per_seed > 0)
    assert np.all(res.dependence_per_seed <= 1)
    assert res.dependence_mean[1] >= res.dependence_mean[0]
    assert res.recovery_median[1] >= 0.99
