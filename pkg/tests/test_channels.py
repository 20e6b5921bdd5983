"""Output channel scores for the phase retrieval and Gaussian channels.

The phase retrieval oracle integrates the posterior of the noisy field
z_t = z + w, whose predictive law is CN(omega, v + sigma2). Conditioning on
the observed amplitude |z_t| = y leaves a von Mises angular posterior with
concentration kappa = 2 y |omega| / (v + sigma2); its trigonometric moments
come from plain quadrature, with no Bessel functions anywhere, so the test
is independent of the package's own ratio evaluation. The score identities
    g  = (E[z_t | y] - omega) / (v + sigma2)
    g' = (Var[z_t | y] / (v + sigma2) - 1) / (v + sigma2)
then pin both outputs.
"""

import numpy as np
import pytest

from prsamp import ChannelOutputs, gaussian_output, pr_output


def circle_oracle(y, aw, v, s2):
    """Quadrature moments of the amplitude-conditioned noisy field."""
    vs = v + s2
    kappa = 2.0 * y * aw / vs
    th = np.linspace(-np.pi, np.pi, 200001)
    w = np.exp(kappa * (np.cos(th) - 1.0))
    c = np.trapezoid(np.cos(th) * w, th) / np.trapezoid(w, th)
    g = (y * c - aw) / vs
    gp = (y * y * (1.0 - c * c) / vs - 1.0) / vs
    return g, gp


def test_pr_matches_quadrature_on_grid():
    amps = np.linspace(0.1, 3.0, 3)
    variances = np.linspace(0.01, 1.0, 3)
    for y in amps:
        for aw in amps:
            for v in variances:
                for s2 in variances:
                    go, gpo = circle_oracle(y, aw, v, s2)
                    out = pr_output(y, aw + 0.0j, v, s2)
                    assert out.g.real == pytest.approx(go, abs=1e-6)
                    assert out.g.imag == 0.0
                    assert out.g_prime == pytest.approx(gpo, abs=1e-4)


def test_pr_frozen_value():
    out = pr_output(1.0, 1.0 + 0.0j, 0.1, 0.01)
    assert out.g == pytest.approx(-0.25364498837011135 + 0.0j, abs=1e-12)
    go, gpo = circle_oracle(1.0, 1.0, 0.1, 0.01)
    assert out.g.real == pytest.approx(go, abs=1e-9)
    assert out.g_prime == pytest.approx(gpo, abs=1e-7)


def test_pr_zero_measurement():
    # phi = 0 makes r0 = 0, so g = -omega/(v+sigma2) and g' = -1/(v+sigma2)
    out = pr_output(0.0, 1.0 + 0.0j, 0.5, 0.5)
    assert out.g == -1.0 + 0.0j
    assert out.g_prime == -1.0


def test_pr_small_variance_limit():
    # y = |omega|, v -> 0: the 1/(2 phi) tail of r0 cancels the 1/(v+sigma2)
    # blow-up, leaving g -> -1/(4 y)
    out = pr_output(1.0, 1.0 + 0.0j, 1e-9, 1e-9)
    assert out.g == pytest.approx(-0.25 + 0.0j, abs=1e-6)
    assert np.isfinite(out.g_prime)


def test_pr_phase_covariance():
    rng = np.random.default_rng(5)
    for _ in range(50):
        y = rng.uniform(0.05, 3.0)
        om = rng.normal() + 1j * rng.normal()
        v = rng.uniform(0.01, 1.0)
        s2 = rng.uniform(0.01, 1.0)
        theta = rng.uniform(0, 2 * np.pi)
        base = pr_output(y, om, v, s2)
        rot = pr_output(y, np.exp(1j * theta) * om, v, s2)
        assert rot.g == pytest.approx(np.exp(1j * theta) * base.g, abs=1e-12)
        assert rot.g_prime == pytest.approx(base.g_prime, abs=1e-12)


def test_pr_collinear_with_omega():
    rng = np.random.default_rng(8)
    for _ in range(50):
        om = rng.normal() + 1j * rng.normal()
        out = pr_output(rng.uniform(0.1, 2.0), om, 0.3, 0.2)
        cross = out.g.real * om.imag - out.g.imag * om.real
        assert abs(cross) <= 1e-12 * (abs(out.g) * abs(om) + 1e-30)


def test_pr_finite_at_tiny_omega():
    out = pr_output(1.0, 0.0 + 0.0j, 0.2, 0.1)
    assert np.isfinite(out.g.real) and np.isfinite(out.g.imag)
    assert np.isfinite(out.g_prime)
    out2 = pr_output(2.0, 1e-300 + 0.0j, 0.05, 0.01)
    assert np.isfinite(out2.g.real) and np.isfinite(out2.g_prime)


def test_pr_array_matches_scalar_loop():
    rng = np.random.default_rng(11)
    y = rng.uniform(0.05, 3.0, 40)
    om = rng.normal(size=40) + 1j * rng.normal(size=40)
    v = rng.uniform(0.01, 1.0, 40)
    g_vec, gp_vec = pr_output(y, om, v, 0.05)
    for i in range(40):
        gi, gpi = pr_output(float(y[i]), complex(om[i]), float(v[i]), 0.05)
        assert g_vec[i] == pytest.approx(gi, abs=1e-13)
        assert gp_vec[i] == pytest.approx(gpi, abs=1e-13)


def test_channel_outputs_type():
    out = pr_output(1.0, 1.0 + 0.0j, 0.1, 0.1)
    assert isinstance(out, ChannelOutputs)
    g, gp = out
    assert g == out.g and gp == out.g_prime


def test_pr_rejects_nonfinite():
    with pytest.raises(ValueError):
        pr_output(np.nan, 1.0 + 0.0j, 0.1, 0.1)
    with pytest.raises(ValueError):
        pr_output(1.0, complex(np.inf, 0.0), 0.1, 0.1)
    with pytest.raises(ValueError):
        pr_output(1.0, 1.0 + 0.0j, np.nan, 0.1)


def test_gaussian_closed_form():
    g, gp = gaussian_output(1.0, 1.0 + 0.0j, 1.0, 1.0)
    assert g == 0.0 + 0.0j and gp == -0.5
    g, gp = gaussian_output(2.0, 0.0 + 0.0j, 0.5, 0.5)
    assert g == 2.0 + 0.0j and gp == -1.0


def test_gaussian_gprime_exact_everywhere():
    rng = np.random.default_rng(3)
    y = rng.normal(size=30)
    om = rng.normal(size=30) + 1j * rng.normal(size=30)
    v = rng.uniform(0.01, 2.0, 30)
    g, gp = gaussian_output(y, om, v, 0.3)
    assert np.allclose(g, (y - om) / (v + 0.3), rtol=0, atol=0)
    assert np.allclose(gp, -1.0 / (v + 0.3), rtol=0, atol=0)


def test_gaussian_finite_difference():
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(20):
        y = rng.normal()
        om = rng.normal() + 1j * rng.normal()
        v = rng.uniform(0.05, 1.5)
        s2 = rng.uniform(0.05, 1.5)
        g_hi, _ = gaussian_output(y, om + h, v, s2)
        g_lo, _ = gaussian_output(y, om - h, v, s2)
        fd = (g_hi.real - g_lo.real) / (2 * h)
        _, gp = gaussian_output(y, om, v, s2)
        assert fd == pytest.approx(gp, abs=1e-6)
