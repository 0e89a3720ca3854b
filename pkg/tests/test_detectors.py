import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scipy import integrate

from oracles import brute_map_log_ratio, id_term_density
from relaysim.channel import ChannelSpec
from relaysim.detectors import (
    DecisionContext,
    Detector,
    DetectorKind,
    PmfSource,
    _dense_log_ratio,
    _exchangeable_log_ratio,
    detect_first_group,
    id_detect,
    id_log_ratio,
    map_detect,
    map_detect_product,
    map_log_ratio,
    mrc_detect,
    mrc_weights,
    pjp_detect,
    sgn,
)
from relaysim.pmf import JointPmf, MarginalSet, compress_symmetric, pjp_pmf, product_pmf

llr_vectors = st.integers(1, 6).flatmap(lambda d: arrays(float, d, elements=st.floats(-40, 40)))


def test_sign_tie_convention():
    np.testing.assert_array_equal(sgn([-0.0, 0.0, -1e-300, 2.0]), [1, 1, -1, 1])
    assert detect_first_group(0.0) == 1


@given(llr_vectors, st.data())
def test_map_matches_brute_force(llr, data):
    d = llr.size
    w = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=2**d, max_size=2**d)))
    pmf = JointPmf.normalized(w)
    assert map_log_ratio(llr, pmf) == pytest.approx(brute_map_log_ratio(llr, pmf.probs), rel=1e-8, abs=1e-8)


@given(llr_vectors, st.data())
def test_exchangeable_path_matches_dense(llr, data):
    d = llr.size
    n_f = data.draw(st.integers(0, d))
    pmf = pjp_pmf(d, n_f)
    fast = _exchangeable_log_ratio(llr[None, :], compress_symmetric(pmf))[0]
    dense = _dense_log_ratio(llr[None, :], pmf.probs)[0]
    if np.isfinite(dense):
        assert fast == pytest.approx(dense, rel=1e-9, abs=1e-9)
    else:
        assert fast == dense


def test_exchangeable_path_extreme_llrs():
    llr = np.array([[800.0, -790.0, 700.0, 650.0]])
    pmf = pjp_pmf(4, 2)
    assert _exchangeable_log_ratio(llr, compress_symmetric(pmf))[0] == pytest.approx(
        _dense_log_ratio(llr, pmf.probs)[0], rel=1e-9
    )


@given(llr_vectors, st.data())
def test_id_equals_map_with_product(llr, data):
    p = np.array(data.draw(st.lists(st.floats(0.001, 0.999), min_size=llr.size, max_size=llr.size)))
    assert id_log_ratio(llr, p) == pytest.approx(map_log_ratio(llr, product_pmf(p)), rel=1e-9, abs=1e-9)


def test_id_handles_certain_sources():
    assert id_log_ratio([1.5, -0.5], [1.0, 1.0]) == pytest.approx(1.0)
    assert id_log_ratio([1.5, -0.5], [0.5, 0.5]) == 0.0


def test_point_mass_reduces_to_llr_sum():
    llr = np.array([0.3, -1.2, 0.4])
    assert map_log_ratio(llr, JointPmf.point_mass(3)) == pytest.approx(llr.sum())


def test_detector_kind_validation():
    DetectorKind(Detector.FULL_MAP, PmfSource.MCS)
    DetectorKind("id", "id", quant_bits=4)
    with pytest.raises(ValueError, match="pmf_scheme"):
        DetectorKind("full_map", None)
    with pytest.raises(ValueError):
        DetectorKind("mrc", "mcs")
    with pytest.raises(ValueError):
        DetectorKind("pjp", "pjp", quant_bits=2)


def test_context_detectors_agree():
    specs = [ChannelSpec.known_stats(1.0, 0.5), ChannelSpec.known_csi(0.7, 0.5)]
    marg = MarginalSet([0.85, 0.7])
    for y in ([0.3, -0.2], [-1.0, 0.1], [0.05, 0.02]):
        ctx = DecisionContext(np.array(y), specs, product_pmf(marg), marg)
        assert id_detect(ctx) == map_detect(ctx) == map_detect_product(ctx)


def test_context_validation():
    with pytest.raises(ValueError):
        DecisionContext([0.1], [ChannelSpec.known_stats(1, 1)] * 2)
    ctx = DecisionContext([0.1, 0.2], [ChannelSpec.known_stats(1, 1)] * 2)
    with pytest.raises(ValueError):
        map_detect(ctx)
    with pytest.raises(ValueError):
        id_detect(ctx)


def test_pjp_and_mrc_detect():
    specs = [ChannelSpec.known_stats(1.0, 0.5)] * 3
    ctx = DecisionContext([0.4, 0.3, -0.2], specs)
    assert pjp_detect(ctx) == 1
    assert pjp_detect(ctx, n_f=0) == 1
    csi = [ChannelSpec.known_csi(h, 0.5) for h in (2.0, 0.1)]
    np.testing.assert_allclose(mrc_weights(csi), [2.0, 0.1])
    assert mrc_detect(DecisionContext([-0.3, 1.0], csi)) == -1


@pytest.mark.parametrize("P, h, sigma", [(0.9, 1.0, 0.7), (0.7, 0.5, 1.0), (0.99, 1.3, 0.5)])
def test_id_term_distribution_matches_density(P, h, sigma):
    edge = np.log(P / (1 - P))
    total = integrate.quad(lambda t: id_term_density(t, P, h, sigma), -edge, edge, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-6)

    rng = np.random.default_rng(10)
    m = 400_000
    x = np.where(rng.random(m) < P, 1.0, -1.0)
    y = h * x + rng.normal(0, sigma, m)
    terms = id_log_ratio((2 * y * h / sigma**2)[:, None], [P])
    for t in np.linspace(-0.8 * edge, 0.8 * edge, 7):
        cdf = integrate.quad(lambda v: id_term_density(v, P, h, sigma), -edge, t, limit=200)[0]
        assert abs(np.mean(terms <= t) - cdf) <= 4 * np.sqrt(cdf * (1 - cdf) / m) + 1e-9
