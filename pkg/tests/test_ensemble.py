import math

import numpy as np
import pytest

from stirapsim import EnsembleSpec, average
from stirapsim.ensemble import EnsembleNodeError, quadrature_offsets

LN2 = math.log(2.0)


def gauss_profile(fwhm, amplitude=1.0, center=0.0):
    def profile(x):
        return amplitude * math.exp(-4.0 * LN2 * (x - center) ** 2 / fwhm**2)

    return profile


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(fwhm=-0.1)
    with pytest.raises(ValueError):
        EnsembleSpec(fwhm=0.1, n_nodes=4)
    with pytest.raises(ValueError):
        EnsembleSpec(fwhm=0.1, n_nodes=40)
    with pytest.raises(ValueError):
        EnsembleSpec(fwhm=0.1, span=1.0)


def test_weights_normalized():
    spec = EnsembleSpec(fwhm=0.08)
    offsets, weights = quadrature_offsets(spec)
    assert len(offsets) == 41
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert offsets[len(offsets) // 2] == pytest.approx(0.0, abs=1e-15)


def test_zero_width_is_delta_distribution():
    spec = EnsembleSpec(fwhm=0.0, mean=0.37)
    calls = []

    def profile(x):
        calls.append(x)
        return 2.0 * x

    assert average(profile, spec) == pytest.approx(0.74)
    assert calls == [0.37]


def test_constant_profile_preserved():
    spec = EnsembleSpec(fwhm=0.2, mean=-0.1)
    assert average(lambda x: 0.473, spec) == pytest.approx(0.473, abs=1e-12)


def test_gaussian_convolution_identity():
    # averaging a unit Gaussian of FWHM w against an equal-width distribution
    # at zero mean gives peak/sqrt(2); cross-checked against a dense
    # trapezoid quadrature oracle
    w = 0.3
    spec = EnsembleSpec(fwhm=w, mean=0.0, n_nodes=201, span=6.0)
    profile = gauss_profile(w)
    got = average(profile, spec)
    assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=2e-4)

    xs = np.linspace(-8 * w, 8 * w, 20001)
    sigma = w / (2.0 * math.sqrt(2.0 * LN2))
    dens = np.exp(-(xs**2) / (2 * sigma**2))
    dens /= np.trapezoid(dens, xs)
    oracle = np.trapezoid(dens * np.vectorize(profile)(xs), xs)
    assert got == pytest.approx(oracle, abs=2e-4)


def test_node_doubling_convergence():
    profile = gauss_profile(0.25, amplitude=0.9)
    base = average(profile, EnsembleSpec(fwhm=0.1, n_nodes=41))
    doubled = average(profile, EnsembleSpec(fwhm=0.1, n_nodes=83))
    assert abs(doubled - base) < 1e-3


def test_linearity_and_monotonicity():
    spec = EnsembleSpec(fwhm=0.15, mean=0.05)
    f = gauss_profile(0.2)
    g = gauss_profile(0.4, amplitude=0.5)
    a, b = 1.7, -0.3
    combo = average(lambda x: a * f(x) + b * g(x), spec)
    assert combo == pytest.approx(a * average(f, spec) + b * average(g, spec), abs=1e-12)
    # monotone: f <= f + |g| pointwise
    assert average(f, spec) <= average(lambda x: f(x) + abs(g(x)), spec) + 1e-15


def test_convolution_broadens_fwhm():
    # averaged profile width grows with the distribution width
    from stirapsim.analysis import fwhm_xy

    w = 0.3
    profile = gauss_profile(w)
    xs = np.linspace(-1.0, 1.0, 201)
    for gamma in (0.1, 0.2, 0.3):
        spec_fn = lambda mu: average(profile, EnsembleSpec(fwhm=gamma, mean=mu, n_nodes=81, span=4.0))
        ys = [spec_fn(float(x)) for x in xs]
        w_avg = fwhm_xy(xs, ys)
        assert w_avg > w
        # Gaussian convolution: widths add in quadrature
        assert w_avg == pytest.approx(math.hypot(w, gamma), rel=0.02)


def test_nonfinite_profile_reports_node():
    spec = EnsembleSpec(fwhm=0.1, mean=0.0)

    def profile(x):
        return math.inf if x > 0.01 else 1.0

    with pytest.raises(EnsembleNodeError) as err:
        average(profile, spec)
    assert "delta" in str(err.value)
