import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from relaysim.channel import (
    LARGE_ARGUMENT,
    ChannelSpec,
    KnownCsi,
    KnownStats,
    StatsLikelihoodParams,
    ber_first_hop,
    likelihood_csi,
    likelihood_stats,
    llr_csi,
    llr_stats,
    log1p_t_mills,
    log_likelihood_stats,
    q_function,
    sample_fading,
    sample_observation,
    snr_db_to_linear,
)


def direct_density(y, x, sigma_sq, sigma_h_sq=1.0):
    """Gaussian likelihood averaged over the Rayleigh envelope by quadrature."""

    def integrand(h):
        rayleigh = 2 * h / sigma_h_sq * math.exp(-h * h / sigma_h_sq)
        return rayleigh * math.exp(-((y - h * x) ** 2) / (2 * sigma_sq)) / math.sqrt(2 * math.pi * sigma_sq)

    return integrate.quad(integrand, 0, np.inf, epsabs=1e-13, epsrel=1e-11)[0]


def test_snr_conversion():
    assert snr_db_to_linear(0.0) == pytest.approx(1.0)
    assert snr_db_to_linear(10.0) == pytest.approx(10.0)
    assert float(snr_db_to_linear(3.0)) == pytest.approx(1.99526, rel=1e-5)


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert q_function(1.0) == pytest.approx(0.158655254, rel=1e-8)
    assert q_function(10.0) == pytest.approx(7.619853e-24, rel=1e-5)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 8.0])
@pytest.mark.parametrize("y", [-3.0, -0.7, 0.0, 0.4, 2.5])
@pytest.mark.parametrize("x", [-1, 1])
def test_stats_likelihood_matches_fading_average(gamma, y, x):
    sigma_sq = 1.0 / gamma
    params = StatsLikelihoodParams.from_variances(sigma_sq, 1.0)
    assert likelihood_stats(y, x, params, sigma_sq, 1.0) == pytest.approx(direct_density(y, x, sigma_sq), rel=1e-9)


@pytest.mark.parametrize("gamma", [0.5, 2.0, 20.0])
def test_stats_likelihood_normalizes(gamma):
    sigma_sq = 1.0 / gamma
    params = StatsLikelihoodParams.from_variances(sigma_sq, 1.0)
    total = integrate.quad(lambda y: likelihood_stats(y, 1, params, sigma_sq, 1.0), -np.inf, np.inf)[0]
    assert total == pytest.approx(1.0, abs=1e-9)


def test_negative_mass_equals_first_hop_ber_at_gamma_2():
    params = StatsLikelihoodParams.from_variances(0.5, 1.0)
    mass = integrate.quad(lambda y: likelihood_stats(y, 1, params, 0.5, 1.0), -np.inf, 0)[0]
    assert mass == pytest.approx(0.146447, abs=1e-6)
    assert ber_first_hop(ChannelSpec.known_stats(1.0, 0.5)) == pytest.approx(0.1464466, abs=1e-7)


def test_mismatched_params_rejected():
    params = StatsLikelihoodParams.from_variances(0.5, 1.0)
    with pytest.raises(ValueError):
        likelihood_stats(0.1, 1, params, 1.0, 1.0)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_log1p_t_mills_is_finite(s):
    assert np.isfinite(log1p_t_mills(np.array([s]))[0])


def test_log1p_t_mills_continuous_at_series_switch():
    eps = 1e-9
    below = log1p_t_mills(np.array([-(LARGE_ARGUMENT - eps)]))[0]
    above = log1p_t_mills(np.array([-(LARGE_ARGUMENT + eps)]))[0]
    assert below == pytest.approx(above, rel=1e-9)
    # leading behaviour of 1 - u M(u) is 1/u^2
    u = 1e3
    assert log1p_t_mills(np.array([-u]))[0] == pytest.approx(-2 * math.log(u), rel=1e-6)


@given(st.floats(-200, 200, allow_nan=False), st.floats(0.05, 20))
def test_llr_stats_is_odd(y, gamma):
    p = StatsLikelihoodParams.from_variances(1.0 / gamma, 1.0)
    assert llr_stats(y, p) == pytest.approx(-llr_stats(-y, p), rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=20), st.floats(0.1, 10))
def test_llr_stats_monotone(ys, gamma):
    p = StatsLikelihoodParams.from_variances(1.0 / gamma, 1.0)
    ys = np.sort(np.array(ys))
    assert np.all(np.diff(llr_stats(ys, p)) >= -1e-12)


@pytest.mark.parametrize("gamma", [0.5, 2.0, 30.0])
def test_llr_stats_is_log_ratio_of_likelihoods(gamma):
    sigma_sq = 1.0 / gamma
    p = StatsLikelihoodParams.from_variances(sigma_sq, 1.0)
    y = np.linspace(-4, 4, 41)
    ref = log_likelihood_stats(y, 1, p, sigma_sq) - log_likelihood_stats(y, -1, p, sigma_sq)
    np.testing.assert_allclose(llr_stats(y, p), ref, rtol=1e-10, atol=1e-12)


def test_llr_stats_extreme_inputs_are_finite():
    p = StatsLikelihoodParams.from_variances(1e-4, 1.0)
    out = llr_stats(np.array([-1e3, -50.0, 50.0, 1e3]), p)
    assert np.all(np.isfinite(out))
    assert out[0] < 0 < out[-1]


def test_llr_csi():
    assert llr_csi(0.5, 2.0, 0.25) == pytest.approx(8.0)
    y = np.linspace(-2, 2, 9)
    ref = np.log(likelihood_csi(y, 0.8, 1, 0.3)) - np.log(likelihood_csi(y, 0.8, -1, 0.3))
    np.testing.assert_allclose(llr_csi(y, 0.8, 0.3), ref, rtol=1e-12, atol=1e-12)


def test_ber_first_hop_known_csi():
    spec = ChannelSpec.known_csi(1.0, 0.5)
    assert ber_first_hop(spec) == pytest.approx(q_function(math.sqrt(2.0)))


def test_sample_observation_fraction_negative():
    rng = np.random.default_rng(1)
    y2 = sample_observation(np.ones(10**6), ChannelSpec.known_stats(1.0, 0.5), rng)
    assert 0.144 <= np.mean(y2 < 0) <= 0.149
    y1 = sample_observation(np.ones(10**6), ChannelSpec.known_stats(1.0, 1.0), rng)
    expected = ber_first_hop(ChannelSpec.known_stats(1.0, 1.0))
    assert expected == pytest.approx(0.211325, abs=1e-6)
    assert abs(np.mean(y1 < 0) - expected) < 0.002


def test_sample_observation_known_csi_mean():
    rng = np.random.default_rng(2)
    y = sample_observation(-1, ChannelSpec.known_csi(1.5, 0.01), rng, size=20000)
    assert np.mean(y) == pytest.approx(-1.5, abs=0.01)


def test_sample_observation_rejects_bad_symbols():
    with pytest.raises(ValueError):
        sample_observation(0, ChannelSpec.known_stats(1.0, 1.0), np.random.default_rng(0))


def test_sample_fading_second_moment():
    h = sample_fading(ChannelSpec.known_stats(2.0, 1.0), np.random.default_rng(3), size=200000)
    assert np.mean(h * h) == pytest.approx(2.0, rel=0.02)
    with pytest.raises(ValueError):
        sample_fading(ChannelSpec.known_csi(1.0, 1.0), np.random.default_rng(0))


@pytest.mark.parametrize(
    "make",
    [
        lambda: KnownCsi(-1.0),
        lambda: KnownStats(0.0),
        lambda: ChannelSpec(0.0, KnownStats(1.0)),
        lambda: ChannelSpec(float("nan"), KnownStats(1.0)),
        lambda: ChannelSpec(1.0, "csi"),
    ],
)
def test_invalid_channel_specs(make):
    with pytest.raises((ValueError, TypeError)):
        make()


def test_stats_params_only_for_stats():
    with pytest.raises(ValueError):
        ChannelSpec.known_csi(1.0, 1.0).stats_params()
    assert ChannelSpec.known_stats(1.0, 0.5).snr() == pytest.approx(2.0)
