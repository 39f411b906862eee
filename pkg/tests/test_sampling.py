import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from gge_spectra import GGEConfig, ModelKind, build_matrix, sample_direct, sample_mcmc, trace_power
from gge_spectra import sampling
from gge_spectra.errors import ConfigError, NonNormalizable, NotFactorizable
from gge_spectra.models import random_coordinates, site_array
from gge_spectra.sampling import (Current, LocalField, SampleBatch, TracePower, internal_log_density,
                                  log_density, observable_series, parse_observable)
from gge_spectra.timeseries import batch_means_se, geweke_z, integrated_time


class TestConfig:
    def test_type2_maps_to_open_chain(self):
        cfg = GGEConfig("toda", 1.0, "x^2/2", 8, "Type2")
        assert cfg.kind == ModelKind("TodaNonPeriodic")
        assert cfg.boundary is not None

    def test_jacobi_default_exponents(self):
        cfg = GGEConfig("jacobi", 2.0, "0", 8, "Type2")
        assert cfg.jacobi_params == pytest.approx(((-1 + 2.0 / 8) / 2,) * 2)

    @pytest.mark.parametrize("args, exc", [
        (("toda", -1.0, "x^2", 8), ConfigError),
        (("toda", 1.0, "x^2", 8, "Type3"), ConfigError),
        (("cmv", 1.0, "0", 7), ConfigError),
        (("toda", 1.0, "x^3", 8), NonNormalizable),
        (("toda", 1.0, "0", 8), NonNormalizable),
    ])
    def test_rejects(self, args, exc):
        with pytest.raises(exc):
            GGEConfig(*args)

    def test_json_round_trip(self):
        cfg = GGEConfig("jacobi", 1.5, "0", 10, "Type2")
        assert GGEConfig.from_json(cfg.to_json()) == cfg


class TestDirect:
    def test_toda_quadratic_marginals(self):
        alpha = 1.5
        b = sample_direct(GGEConfig("toda", alpha, "x^2/2", 8), 40000, rng_seed=1)
        assert b.sites.shape == (40000, 8, 2)
        # a ~ N(0, 1), b^2 ~ Gamma(alpha, 1)
        assert np.mean(b.sites[..., 1] ** 2) == pytest.approx(alpha, abs=0.02)
        assert np.var(b.sites[..., 0]) == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_circular_modulus(self, alpha):
        b = sample_direct(GGEConfig("cmv", alpha, "0", 8), 40000, rng_seed=2)
        # |a|^2 ~ Beta(1, alpha)
        assert np.mean(np.sum(b.sites ** 2, axis=-1)) == pytest.approx(1 / (1 + alpha), abs=0.005)

    def test_volterra_mean(self):
        b = sample_direct(GGEConfig("volterra", 1.0, "-x^2", 8), 40000, rng_seed=3)
        assert b.sites.mean() == pytest.approx(0.5, abs=0.01)

    def test_not_factorizable(self):
        with pytest.raises(NotFactorizable):
            sample_direct(GGEConfig("toda", 1.0, "x^4", 8), 10)

    def test_trace_moments(self):
        # Tr L^2 = sum a^2 + 2 sum b^2: mean N(1 + 2 alpha), variance N(2 + 4 alpha)
        N, alpha = 16, 0.7
        b = sample_direct(GGEConfig("toda", alpha, "x^2/2", N), 60000, rng_seed=4, observables=[TracePower(2)],
                          store_configs=False)
        x = b.series["TracePower(2)"]
        assert b.sites is None
        assert x.mean() == pytest.approx(N * (1 + 2 * alpha), abs=4 * np.sqrt(N * (2 + 4 * alpha) / len(x)))
        assert x.var() == pytest.approx(N * (2 + 4 * alpha), rel=0.03)

    def test_chunking_keeps_length_and_law(self, monkeypatch):
        monkeypatch.setattr(sampling, "DIRECT_CHUNK", 1000)
        b = sample_direct(GGEConfig("toda", 1.0, "x^2/2", 10), 5001, rng_seed=5, observables=[TracePower(2)],
                          store_configs=False)
        assert len(b) == 5001
        assert b.series["TracePower(2)"].mean() == pytest.approx(30.0, abs=0.5)

    def test_reproducible(self):
        cfg = GGEConfig("toda", 1.0, "x^2/2", 6)
        np.testing.assert_array_equal(sample_direct(cfg, 50, rng_seed=9).sites, sample_direct(cfg, 50, rng_seed=9).sites)


class TestMCMC:
    def test_agrees_with_direct(self):
        cfg = GGEConfig("toda", 1.0, "x^2/2", 8)
        mc = sample_mcmc(cfg, 20000, rng_seed=1, observables=[TracePower(2)], store_configs=False)
        x = mc.series["TracePower(2)"]
        se = batch_means_se(x)
        assert abs(x.mean() - 24.0) < 4 * se
        assert 0.2 < mc.diagnostics["acceptance_rate"] < 0.7

    def test_volterra_mean(self):
        mc = sample_mcmc(GGEConfig("volterra", 1.0, "-x^2", 8), 10000, rng_seed=2)
        a = mc.sites[..., 0].mean(axis=1)
        assert abs(a.mean() - 0.5) < 4 * batch_means_se(a)

    def test_geweke(self):
        mc = sample_mcmc(GGEConfig("toda", 1.0, "x^4/4+x^2/2", 16), 10000, rng_seed=3, observables=[TracePower(2)],
                         store_configs=False)
        assert abs(geweke_z(mc.series["TracePower(2)"])) < 4

    def test_reproducible_and_chain_split(self):
        cfg = GGEConfig("toda", 1.0, "x^4", 8)
        a = sample_mcmc(cfg, 300, burn_in=100, rng_seed=4, chains=2)
        b = sample_mcmc(cfg, 300, burn_in=100, rng_seed=4, chains=2, threads=2)
        np.testing.assert_array_equal(a.sites, b.sites)
        assert len(a) == 300

    def test_sites_exchangeable(self):
        mc = sample_mcmc(GGEConfig("toda", 1.0, "x^4/4", 8), 20000, rng_seed=5)
        x0, x3 = mc.sites[::5, 0, 1], mc.sites[::5, 3, 1]
        assert sps.ks_2samp(x0, x3).statistic < 0.05

    def test_bad_counts(self):
        cfg = GGEConfig("toda", 1.0, "x^2", 8)
        with pytest.raises(ConfigError):
            sample_mcmc(cfg, 0)
        with pytest.raises(ConfigError):
            sample_mcmc(cfg, 10, burn_in=-1)


class TestObservables:
    @pytest.fixture
    def batch(self):
        return sample_direct(GGEConfig("toda", 1.0, "x^2/2", 9), 40, rng_seed=6)

    def test_trace_power_matches_dense(self, batch):
        vals = observable_series(batch, TracePower(3))
        dense = [trace_power(build_matrix(batch.config.kind, c), 3).real for c in batch.configs]
        np.testing.assert_allclose(vals, dense, rtol=1e-11, atol=1e-11)

    def test_current_zero_is_diagonal(self, batch):
        np.testing.assert_allclose(observable_series(batch, Current(0, 4)), batch.sites[:, 4, 0])

    def test_current_one(self, batch):
        # [L L_down]_jj = [L]_{j,j+1} b_j = b_j^2
        np.testing.assert_allclose(observable_series(batch, Current(1, 2)), batch.sites[:, 2, 1] ** 2)

    def test_local_fields_sum_to_trace(self, batch):
        total = sum(observable_series(batch, LocalField(4, j)) for j in range(9))
        np.testing.assert_allclose(total, observable_series(batch, TracePower(4)), rtol=1e-12)

    def test_parse(self):
        assert parse_observable("Current(1)") == Current(1)
        assert parse_observable("LocalField(2, 0)") == LocalField(2, 0)
        with pytest.raises(ValueError):
            parse_observable("Energy(2)")

    def test_binary_round_trip(self, batch, tmp_path):
        b = SampleBatch(batch.config, batch.sites, {"TracePower(2)": observable_series(batch, TracePower(2))},
                        np.arange(40.0), {"sampler": "direct"})
        b.save_binary(tmp_path / "s.bin")
        r = SampleBatch.load_binary(tmp_path / "s.bin")
        np.testing.assert_array_equal(r.sites, b.sites)
        np.testing.assert_array_equal(r.series["TracePower(2)"], b.series["TracePower(2)"])
        np.testing.assert_array_equal(r.weights, b.weights)
        assert r.config == b.config

    def test_csv(self, batch, tmp_path):
        batch.to_csv(tmp_path / "s.csv")
        arr = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(arr.reshape(40, 9, 2), batch.sites)


CONFIGS = [
    ("toda", "Type1", "x^4/4+x^2"), ("toda", "Type2", "x^4/4+x^2"), ("exp-toda", "Type1", "x^2+x"),
    ("laguerre", "Type2", "x^2"), ("volterra", "Type1", "-x^2"), ("antisym", "Type2", "-x^2"),
    ("ablowitz-ladik", "Type1", "z"), ("schur", "Type1", "z^2"), ("circular", "Type2", "z"),
    ("jacobi", "Type2", "0"), ("jacobi", "Type2", "z+z^2"), ("INBAdditive", "Type1", "x^2"),
]


@settings(max_examples=40, deadline=None)
@given(case=st.sampled_from(CONFIGS), alpha=st.floats(0.3, 3.0), s1=st.integers(0, 2**31), s2=st.integers(0, 2**31))
def test_sampler_density_matches_literal_density(case, alpha, s1, s2):
    tag, mt, P = case
    kind = ModelKind.parse(tag, r=1 if tag == "INBAdditive" else None)
    cfg = GGEConfig(kind, alpha, P, 8, mt)
    c1, c2 = (random_coordinates(cfg.kind, 8, s) for s in (s1, s2))
    if mt == "Type2" and cfg.kind.family == "cmv" and cfg.boundary.values:
        c1.a[-1] = c2.a[-1] = cfg.boundary.values[0]
    # both are unnormalised, so only differences between configurations are compared
    d_lit = log_density(cfg, c1) - log_density(cfg, c2)
    d_int = internal_log_density(cfg, site_array(cfg.kind, c1)) - internal_log_density(cfg, site_array(cfg.kind, c2))
    assert abs(d_lit - d_int) <= 1e-8 * (1 + abs(d_lit))


def test_integrated_time_of_ar1():
    rng = np.random.default_rng(0)
    phi, n = 0.8, 200000
    x = np.empty(n)
    x[0] = 0
    e = rng.normal(size=n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    assert integrated_time(x) == pytest.approx((1 + phi) / (1 - phi), rel=0.1)
