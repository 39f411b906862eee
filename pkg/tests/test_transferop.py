import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from gge_spectra import ModelKind, Polynomial
from gge_spectra.errors import GapCollapse, GridTooLarge
from gge_spectra.transferop import (build_kernel, clt_mean_and_variance, discretize, dominant_spectrum,
                                    free_energy_type1, free_energy_type2, jacobi_ensemble_type2,
                                    reweight_coefficient, susceptibility)


class TestClosedForms:
    @pytest.mark.parametrize("alpha", [0.5, 1.3, 3.0])
    def test_toda_quadratic_free_energy(self, alpha):
        # each site carries exp(-a^2/2) b^(2 alpha - 1) exp(-b^2)
        exact = -math.log(math.sqrt(2 * math.pi) * math.gamma(alpha) / 2)
        assert free_energy_type1("toda", "x^2/2", alpha) == pytest.approx(exact, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.5, 1.3])
    def test_volterra_free_energy(self, alpha):
        exact = -math.log(math.gamma(alpha) / 2 ** alpha)
        assert free_energy_type1("volterra", "-x^2", alpha) == pytest.approx(exact, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.7, 2.0])
    def test_disk_weight_total(self, alpha):
        # int_disk (1 - |a|^2)^(alpha - 1) = pi / alpha
        assert free_energy_type1("cmv", "0", alpha) == pytest.approx(-math.log(math.pi / alpha), abs=1e-10)

    def test_quadratic_toda_moments(self):
        q = clt_mean_and_variance("toda", "x^2/2", 2, alpha=1.0)
        assert q.A == pytest.approx(3.0, abs=1e-6)
        assert q.sigma2 == pytest.approx(6.0, abs=1e-5)
        # b^2 ~ Gamma(alpha x): A~ = 1 + 2 * alpha/2, sigma2~ = 2 + 4 * alpha/2
        assert q.A_tilde == pytest.approx(2.0, abs=1e-5)
        assert q.sigma2_tilde == pytest.approx(4.0, abs=1e-4)

    @pytest.mark.parametrize("alpha", [0.5, 1.5])
    def test_circular_first_trace(self, alpha):
        # Re Tr CMV = -sum Re(a_j conj a_{j+1}) with |a|^2 ~ Beta(1, alpha) and uniform phases
        q = clt_mean_and_variance("cmv", "0", 1, "Re", alpha)
        assert abs(q.A) < 1e-10
        assert q.sigma2 == pytest.approx(1 / (2 * (1 + alpha) ** 2), abs=1e-7)
        assert q.sigma2_tilde == pytest.approx(1 / (2 * (1 + alpha)), abs=1e-6)

    def test_volterra_free_energy_type2(self):
        alpha = 1.7
        exact = -integrate.quad(lambda x: math.log(math.gamma(alpha * x) / 2 ** (alpha * x)) if x > 0 else 0.0,
                                0, 1, limit=200)[0]
        # the Gamma(alpha x) pole at x = 0 is handled analytically in the library
        assert free_energy_type2("volterra", "-x^2", alpha) == pytest.approx(exact, abs=1e-6)


class TestDiscretization:
    def test_positive_kernel_has_positive_eigenvector(self):
        D = discretize(build_kernel("toda", "x^4+x^2", 2, t=0.0), 16)
        assert np.all(D >= 0)
        sp = dominant_spectrum(D)
        assert sp.lambda_dom.real > 0 and abs(sp.lambda_dom.imag) < 1e-12 * sp.lambda_dom.real
        v = sp.eigenfunction.real
        assert np.all(v[np.abs(v) > 1e-12] > 0)

    def test_symmetric_seed_gives_symmetric_matrix(self):
        D = discretize(build_kernel("toda", "x^2/2", 2, t=0.0), 20)
        np.testing.assert_allclose(D, D.T, rtol=1e-13, atol=0)

    def test_quadratic_kernel_is_rank_one(self):
        # without cross terms the kernel separates into f(x) f(y)
        D = discretize(build_kernel("volterra", "-x^2", 2, t=0.0), 24)
        sv = np.linalg.svd(D, compute_uv=False)
        assert sv[1] < 1e-12 * sv[0]

    def test_refinement(self):
        coarse = free_energy_type1("toda", "x^4/4+x^2/2", 1.0, nodes_per_dim=32)
        fine = free_energy_type1("toda", "x^4/4+x^2/2", 1.0, nodes_per_dim=64)
        assert abs(coarse - fine) < 1e-6

    def test_grid_limit(self):
        kern = build_kernel("toda", "x^4", 2)
        with pytest.raises(GridTooLarge):
            discretize(kern, 200)

    def test_cmv_index_limit(self):
        with pytest.raises(GridTooLarge):
            build_kernel("cmv", "z^2", 1, "Re")

    def test_type2_kernels_rejected(self):
        with pytest.raises(ValueError):
            build_kernel(ModelKind("TodaNonPeriodic"), "x^2", 2)

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            build_kernel("toda", "x^2", 2, "Im")
        with pytest.raises(ValueError):
            build_kernel(ModelKind("INBMultiplicative", r=2), "x^2", 2)


class TestSpectrum:
    def test_equal_moduli_collapse(self):
        with pytest.raises(GapCollapse):
            dominant_spectrum(np.diag([1.0, -1.0, 0.5]))

    def test_arnoldi_matches_dense(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(700, 700))
        A = A @ A.T / 700
        big = dominant_spectrum(A)
        ref = np.linalg.eigvalsh(A)
        assert big.lambda_dom.real == pytest.approx(ref[-1], rel=1e-10)
        assert abs(big.lambda_2) == pytest.approx(ref[-2], rel=1e-8)

    @settings(max_examples=12, deadline=None)
    @given(t=st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 1e-3))
    def test_modulus_peaks_at_zero(self, t):
        k0 = build_kernel("toda", "x^4/4+x^2/2", 2, t=0.0)
        kt = build_kernel("toda", "x^4/4+x^2/2", 2, t=t)
        l0 = dominant_spectrum(discretize(k0, 24)).lambda_dom
        lt = dominant_spectrum(discretize(kt, 24), check_gap=False).lambda_dom
        assert abs(lt) <= abs(l0) * (1 + 1e-12)


class TestSusceptibility:
    def test_diagonal_is_variance(self):
        q = clt_mean_and_variance("toda", "x^4/4+x^2/2", 2, type2=False, nodes_per_dim=32)
        C = susceptibility("toda", "x^4/4+x^2/2", 2, 2, nodes_per_dim=32)
        assert C == pytest.approx(q.sigma2, abs=1e-6)

    def test_quadratic_independent_sites(self):
        # Tr L and Tr L^2 under x^2/2: Cov(sum a, sum a^2 + 2 sum b^2) = 0 per site
        assert abs(susceptibility("toda", "x^2/2", 1, 2)) < 1e-6
        assert susceptibility("toda", "x^2/2", 1, 1) == pytest.approx(1.0, abs=1e-6)


def test_reweight_coefficient():
    # x^4 - x^2 over |x| >= 1 divided by 2x^2 is (x^2 - 1)/2, smallest at |x| = 1
    assert reweight_coefficient(Polynomial.parse("x^4-x^2")) == 0.0
    assert reweight_coefficient(Polynomial.parse("x^4+3*x^2")) == pytest.approx(2.0)
    assert reweight_coefficient(Polynomial.parse("x^2/2")) == pytest.approx(0.25)


def _jacobi_oracle(alpha, params):
    """Mean and variance per site of -sum a_j a_{j+1} from Beta moments, integrated over depth."""
    at, bt = params

    def moments(em, ep):
        # (1+a)/2 ~ Beta(ep + 1, em + 1)
        p, q = ep + 1, em + 1
        m1 = p / (p + q)
        m2 = p * (p + 1) / ((p + q) * (p + q + 1))
        return 2 * m1 - 1, 4 * m2 - 4 * m1 + 1

    def site(x):
        s = alpha * x
        mo, qo = moments(s + at + bt + 2, s)
        me, qe = moments(s + at + 1, s + bt + 1)
        var = (qo * qe - mo ** 2 * me ** 2) + mo ** 2 * (qe - me ** 2) + me ** 2 * (qo - mo ** 2)
        return -mo * me, var

    A = integrate.quad(lambda x: site(x)[0], 0, 1, epsabs=1e-13)[0]
    V = integrate.quad(lambda x: site(x)[1], 0, 1, epsabs=1e-13)[0]
    return A, V


@pytest.mark.parametrize("alpha, params", [(1.0, (-0.5, -0.5)), (2.0, (0.3, -0.2))])
def test_jacobi_ensemble_against_beta_moments(alpha, params):
    got = jacobi_ensemble_type2("0", 1, "Re", alpha, params, nodes_per_dim=48)
    A, V = _jacobi_oracle(alpha, params)
    assert got["A_tilde"] == pytest.approx(A, abs=1e-6)
    assert got["sigma2_tilde"] == pytest.approx(V, abs=1e-6)


def test_jacobi_free_energy_against_beta_function():
    alpha, (at, bt) = 1.0, (-0.5, -0.5)

    def log_z(x):
        s = alpha * x
        # int (1-a)^em (1+a)^ep da = 2^(em+ep+1) B(em+1, ep+1)
        tot = 0.0
        for em, ep in ((s + at + bt + 2, s), (s + at + 1, s + bt + 1)):
            tot += (em + ep + 1) * math.log(2) + special.betaln(em + 1, ep + 1)
        return tot / 2

    exact = -integrate.quad(log_z, 0, 1)[0]
    assert jacobi_ensemble_type2("0", 1, "Re", alpha, (at, bt), nodes_per_dim=48)["F2"] == pytest.approx(exact, abs=1e-8)
