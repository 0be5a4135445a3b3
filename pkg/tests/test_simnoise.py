import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from lrao import sigmodel, simnoise, spectral, stats
from lrao.simnoise import ArFilter, CauchyNoiseModel

MODERATE = ArFilter(tuple(simnoise.reflection_to_ar([0.5, -0.3, 0.2])))


def recursion_oracle(coeffs, z):
    w = np.zeros_like(z)
    for t in range(z.size):
        w[t] = z[t] + sum(a * w[t - k - 1] for k, a in enumerate(coeffs) if t - k - 1 >= 0)
    return w


class TestFilters:
    def test_zero_reflection_is_identity(self):
        a = simnoise.reflection_to_ar([0.0, 0.0, 0.0])
        assert np.all(a == 0) and ArFilter(tuple(a)).is_identity()

    def test_order_one(self):
        np.testing.assert_array_equal(simnoise.reflection_to_ar([0.37]), [0.37])

    def test_order_two_step_up(self):
        k1, k2 = 0.4, -0.6
        np.testing.assert_allclose(simnoise.reflection_to_ar([k1, k2]), [k1 - k2 * k1, k2])

    @settings(max_examples=50)
    @given(st.integers(0, 2 ** 31), st.integers(1, 6))
    def test_random_filters_stable(self, seed, order):
        ar = simnoise.random_stable_ar(order, np.random.default_rng(seed))
        assert ar.order == order and ar.max_root_radius() < 1

    def test_unstable_rejected(self):
        with pytest.raises(ValueError):
            ArFilter((1.5,))

    def test_psd_matches_periodogram(self):
        # long sequences keep leakage bias well under the tolerance
        z = np.random.default_rng(0).standard_normal((2000, 512 + 300))
        est = spectral.periodogram(simnoise.ar_filter_batch(MODERATE, z)[:, 300:]).mean(axis=0)
        np.testing.assert_allclose(est, MODERATE.psd(512), rtol=0.12)


class TestGenerate:
    def test_identity_equals_raw_draws(self):
        model = CauchyNoiseModel(ArFilter((0.0, 0.0, 0.0)), 16)
        got = simnoise.generate(model, 5, np.random.default_rng(3))
        raw = stats.sample_cauchy(80, np.random.default_rng(3)).reshape(5, 16)
        np.testing.assert_array_equal(got, raw)

    def test_impulse_response(self):
        z = np.zeros(40)
        z[0] = 1.0
        got = simnoise.ar_filter_batch(MODERATE, z[np.newaxis])[0]
        np.testing.assert_allclose(got, recursion_oracle(MODERATE.coeffs, z), rtol=1e-12, atol=1e-15)

    def test_recursion_on_random_input(self):
        z = np.random.default_rng(4).standard_cauchy(30)
        np.testing.assert_allclose(simnoise.ar_filter_batch(MODERATE, z), recursion_oracle(MODERATE.coeffs, z),
                                   rtol=1e-10, atol=1e-10)

    def test_reproducible(self):
        model = CauchyNoiseModel(MODERATE, 32)
        a = simnoise.generate(model, 3, np.random.default_rng(7))
        np.testing.assert_array_equal(a, simnoise.generate(model, 3, np.random.default_rng(7)))

    def test_burn_in_toggle(self):
        assert CauchyNoiseModel(MODERATE, 32).burn_in_length == 30
        assert CauchyNoiseModel(MODERATE, 32, burn_in=False).burn_in_length == 0

    def test_robust_acs_decays(self):
        X = simnoise.generate(CauchyNoiseModel(MODERATE, 256), 400, np.random.default_rng(5))
        r = spectral.robust_acs(X, 20)
        assert np.all(np.abs(r[3 * MODERATE.order + 1:]) < 0.05)

    def test_stationary_halves(self):
        X = simnoise.generate(CauchyNoiseModel(MODERATE, 4000), 200, np.random.default_rng(6))
        first = spectral.robust_acs(X[:, :2000], MODERATE.order)
        second = spectral.robust_acs(X[:, 2000:], MODERATE.order)
        np.testing.assert_allclose(first[1:], second[1:], rtol=0.10)

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            simnoise.generate(CauchyNoiseModel(MODERATE, 8), 0)


class TestAnalyticFi:
    def test_ones_column(self):
        n = 50
        model = CauchyNoiseModel(ArFilter((0.0,)), n)
        fi = simnoise.analytic_fi(model, sigmodel.ObservationMatrix(np.ones((n, 1))))
        assert fi[0, 0] == pytest.approx(n / 2)

    def test_white_periodic(self):
        hm = sigmodel.periodic_observation_matrix(128, 0.1, 4)
        fi = simnoise.analytic_fi(CauchyNoiseModel(ArFilter((0.0,) * 3), 128), hm)
        assert np.max(np.abs(fi - 0.5 * hm.h.T @ hm.h)) <= 1e-10

    def test_dense_oracle_with_filter(self):
        n = 64
        hm = sigmodel.periodic_observation_matrix(n, 0.1, 2)
        a = np.eye(n)
        for k, c in enumerate(MODERATE.coeffs, start=1):
            a -= c * np.eye(n, k=-k)
        fi = simnoise.analytic_fi(CauchyNoiseModel(MODERATE, n), hm)
        np.testing.assert_allclose(fi, 0.5 * (a @ hm.h).T @ (a @ hm.h), atol=1e-10)

    @settings(max_examples=20)
    @given(st.integers(0, 2 ** 31))
    def test_spd(self, seed):
        hm = sigmodel.periodic_observation_matrix(64, 0.1, 3)
        ar = simnoise.random_stable_ar(3, np.random.default_rng(seed))
        fi = simnoise.analytic_fi(CauchyNoiseModel(ar, 64), hm)
        np.testing.assert_allclose(fi, fi.T, atol=1e-12)
        assert np.linalg.eigvalsh(fi).min() > 0

    def test_continuous_in_coefficients(self):
        hm = sigmodel.periodic_observation_matrix(64, 0.1, 2)
        white = 0.5 * hm.h.T @ hm.h
        gaps = [np.abs(simnoise.analytic_fi(CauchyNoiseModel(ArFilter((e, -e, e)), 64), hm) - white).max()
                for e in (1e-1, 1e-2, 1e-3)]
        assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-1

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            simnoise.analytic_fi(CauchyNoiseModel(MODERATE, 64),
                                 sigmodel.periodic_observation_matrix(32, 0.1, 1))


class TestSurrogate:
    def test_no_spikes_is_gaussian(self):
        x = simnoise.spiky_gaussian_surrogate(1000, 1000, spike_rate=0.0, ar=MODERATE,
                                              rng=np.random.default_rng(0)).ravel()
        assert abs(sps.kurtosis(x)) < 0.1
        assert abs(np.var(x) - 1) < 0.05

    def test_spikes_heavy_tailed(self):
        x = simnoise.spiky_gaussian_surrogate(1000, 1000, rng=np.random.default_rng(1)).ravel()
        assert sps.kurtosis(x) > 10

    def test_symmetric(self):
        x = simnoise.spiky_gaussian_surrogate(1000, 1000, rng=np.random.default_rng(2)).ravel()
        assert abs(sps.skew(x)) <= 0.05

    @pytest.mark.parametrize("kw", [{"spike_rate": 1.0}, {"spike_rate": -0.1}, {"spike_scale": 1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            simnoise.spiky_gaussian_surrogate(8, 2, **kw)
