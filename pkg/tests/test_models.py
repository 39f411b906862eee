import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gge_spectra import Coordinates, DomainError, ModelKind, build_matrix, eigenvalues, trace_power
from gge_spectra.models import random_coordinates

KINDS = [
    ModelKind("TodaPeriodic"), ModelKind("TodaNonPeriodic"), ModelKind("ExpTodaPeriodic"),
    ModelKind("LaguerreNonPeriodic"), ModelKind("VolterraPeriodic"), ModelKind("AntisymNonPeriodic"),
    ModelKind("CMVPeriodic"), ModelKind("CMVNonPeriodic"), ModelKind("CMVPeriodic", real_coeffs=True),
    ModelKind("CMVNonPeriodic", real_coeffs=True), ModelKind("INBAdditive", r=1), ModelKind("INBAdditive", r=2),
    ModelKind("INBAdditive", r=2, unit="b"), ModelKind("INBMultiplicative", r=2),
]
CMV = [k for k in KINDS if k.is_cmv]
ANTISYM = [ModelKind("VolterraPeriodic"), ModelKind("AntisymNonPeriodic")]


def _n_for(kind, n):
    return n + (n % 2) if kind.is_cmv and kind.periodic else n


class TestStructure:
    def test_toda_periodic_zero_diagonal(self):
        M = build_matrix(ModelKind("TodaPeriodic"), Coordinates(np.zeros(3), np.ones(3))).entries
        expected = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=complex)
        np.testing.assert_array_equal(M, expected)

    def test_cmv_zero_coefficients_is_unitary_permutation(self):
        M = build_matrix(ModelKind("CMVPeriodic"), Coordinates(np.zeros(6, dtype=complex))).entries
        np.testing.assert_allclose(M.conj().T @ M, np.eye(6), atol=1e-14)
        assert set(np.round(np.abs(M).ravel(), 12)) <= {0.0, 1.0}
        np.testing.assert_array_equal(np.abs(M).sum(axis=0), np.ones(6))

    def test_volterra_entries(self):
        M = build_matrix(ModelKind("VolterraPeriodic"), Coordinates(np.ones(4))).entries.real
        expected = np.array([[0, 1, 0, -1], [-1, 0, 1, 0], [0, -1, 0, 1], [1, 0, -1, 0]], dtype=float)
        np.testing.assert_array_equal(M, expected)

    def test_antisymmetric_exactly(self, rng):
        for kind in ANTISYM:
            M = build_matrix(kind, random_coordinates(kind, 9, rng)).entries
            np.testing.assert_array_equal(M.T, -M)

    def test_toda_symmetric_tridiagonal_with_corners(self, rng):
        c = random_coordinates(ModelKind("TodaPeriodic"), 7, rng)
        M = build_matrix(ModelKind("TodaPeriodic"), c).entries.real
        np.testing.assert_array_equal(M, M.T)
        np.testing.assert_array_equal(np.diag(M), c.a)
        assert M[0, -1] == c.b[-1]
        band = np.abs(np.subtract.outer(np.arange(7), np.arange(7)))
        assert np.all(M[(band > 1) & (band < 6)] == 0)


class TestTraces:
    def test_toda_trace_square(self):
        M = build_matrix(ModelKind("TodaPeriodic"), Coordinates(np.array([1.0, 2.0, 3.0]), np.ones(3)))
        assert trace_power(M, 2) == pytest.approx(20.0, abs=1e-12)

    def test_single_site(self):
        M = build_matrix(ModelKind("TodaNonPeriodic"), Coordinates(np.array([1.7]), np.zeros(0)))
        for m in range(1, 6):
            assert trace_power(M, m) == pytest.approx(1.7 ** m, rel=1e-14)

    def test_power_limits(self):
        M = build_matrix(ModelKind("TodaPeriodic"), Coordinates(np.zeros(3), np.ones(3)))
        with pytest.raises(ValueError):
            trace_power(M, 0)
        with pytest.raises(ValueError):
            trace_power(M, 65)

    @settings(max_examples=60, deadline=None)
    @given(kind=st.sampled_from(KINDS), n=st.integers(3, 14), m=st.integers(1, 8), seed=st.integers(0, 2**31))
    def test_matches_dense_power(self, kind, n, m, seed):
        n = max(_n_for(kind, n), (kind.r or 0) + 2)
        M = build_matrix(kind, random_coordinates(kind, n, seed))
        dense = np.trace(np.linalg.matrix_power(M.entries, m))
        assert abs(trace_power(M, m) - dense) <= 1e-10 * (1 + abs(dense))

    @settings(max_examples=40, deadline=None)
    @given(kind=st.sampled_from(ANTISYM), n=st.integers(3, 20), m=st.sampled_from([1, 3, 5, 7, 9]),
           seed=st.integers(0, 2**31))
    def test_odd_antisymmetric_traces_vanish(self, kind, n, m, seed):
        M = build_matrix(kind, random_coordinates(kind, n, seed))
        assert abs(trace_power(M, m)) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(2, 12), seed=st.integers(0, 2**31))
    def test_real_inputs_give_real_even_traces(self, n, seed):
        for kind in (ModelKind("TodaPeriodic"), ModelKind("VolterraPeriodic")):
            M = build_matrix(kind, random_coordinates(kind, max(n, 3), seed))
            assert abs(trace_power(M, 4).imag) < 1e-12


class TestSpectra:
    def test_two_by_two(self):
        lam = eigenvalues(build_matrix(ModelKind("TodaNonPeriodic"), Coordinates(np.zeros(2), np.ones(1))))
        np.testing.assert_allclose(np.sort(lam.real), [-1.0, 1.0], atol=1e-14)

    def test_cmv_zero_on_unit_circle(self):
        lam = eigenvalues(build_matrix(ModelKind("CMVPeriodic"), Coordinates(np.zeros(8, dtype=complex))))
        np.testing.assert_allclose(np.abs(lam), 1.0, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(kind=st.sampled_from(CMV), n=st.integers(2, 16), seed=st.integers(0, 2**31))
    def test_cmv_unitary(self, kind, n, seed):
        n = _n_for(kind, n)
        M = build_matrix(kind, random_coordinates(kind, n, seed)).entries
        assert np.max(np.abs(M.conj().T @ M - np.eye(n))) < 1e-10
        assert np.max(np.abs(np.abs(eigenvalues(build_matrix(kind, random_coordinates(kind, n, seed)))) - 1)) < 1e-9

    @settings(max_examples=40, deadline=None)
    @given(kind=st.sampled_from([ModelKind("ExpTodaPeriodic"), ModelKind("LaguerreNonPeriodic")]),
           n=st.integers(3, 16), seed=st.integers(0, 2**31))
    def test_gram_models_positive_semidefinite(self, kind, n, seed):
        lam = eigenvalues(build_matrix(kind, random_coordinates(kind, n, seed)))
        assert lam.real.min() >= -1e-10


class TestDomains:
    @pytest.mark.parametrize("kind, coords", [
        (ModelKind("TodaPeriodic"), Coordinates(np.zeros(3), np.array([1.0, -1.0, 1.0]))),
        (ModelKind("TodaPeriodic"), Coordinates(np.zeros(3), np.array([1.0, 0.0, 1.0]))),
        (ModelKind("ExpTodaPeriodic"), Coordinates(np.array([1.0, -0.5, 1.0]), np.ones(3))),
        (ModelKind("VolterraPeriodic"), Coordinates(np.array([1.0, 0.0, 2.0]))),
        (ModelKind("CMVPeriodic"), Coordinates(np.array([0.5, 1.0, 0.2, 0.1], dtype=complex))),
    ])
    def test_rejects_out_of_range(self, kind, coords):
        with pytest.raises(DomainError):
            build_matrix(kind, coords)

    def test_inb_needs_positive_band(self):
        with pytest.raises(ValueError):
            ModelKind("INBAdditive", r=0)

    def test_aliases_round_trip(self):
        for name in ("toda", "gaussian-beta", "exp-toda", "laguerre", "volterra", "antisym", "cmv",
                     "ablowitz-ladik", "schur", "circular", "jacobi"):
            k = ModelKind.parse(name)
            assert ModelKind.from_json(k.to_json()) == k
