import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gge_spectra import Coordinates, ModelKind, build_matrix, extract_seed, local_field
from gge_spectra.cli import main
from gge_spectra.errors import IncompatibleSeeds, UnsupportedPotential
from gge_spectra.models import random_coordinates, site_array
from gge_spectra.seeds import extract_seeds, motzkin_terms, verify_decomposition

TODA = ModelKind("TodaPeriodic")


def _central_trinomial(m):
    # coefficient of x^0 in (x^-1 + 1 + x)^m
    p = np.array([1])
    for _ in range(m):
        p = np.convolve(p, [1, 1, 1])
    return int(p[m])


def _as_dict(seed):
    return {k: complex(v) for k, v in seed.monomials.items()}


class TestMotzkin:
    def test_first_orders(self):
        one = motzkin_terms(1)
        assert len(one) == 1 and one[0].rho == 1 and sum(one[0].q) == 1
        two = {(t.n, t.q): t.rho for t in motzkin_terms(2)}
        assert sorted(two.values()) == [1, 1, 1]

    @pytest.mark.parametrize("m", range(1, 11))
    def test_multiplicities_count_all_closed_walks(self, m):
        # with a = b = 1 each path contributes 1, so the total is the number of
        # closed walks of length m with steps -1, 0, +1
        assert sum(t.rho for t in motzkin_terms(m)) == _central_trinomial(m)

    @pytest.mark.parametrize("m", range(1, 9))
    def test_structure(self, m):
        for t in motzkin_terms(m):
            assert t.rho >= 1
            assert t.m == m
            assert all(x >= 0 for x in t.n + t.q)

    def test_first_order_field_is_diagonal(self):
        c = random_coordinates(TODA, 7, 1)
        one = motzkin_terms(1)
        assert [local_field(one, j, c) for j in range(7)] == pytest.approx(c.a, abs=0)

    def test_range(self):
        with pytest.raises(ValueError):
            motzkin_terms(0)
        with pytest.raises(ValueError):
            motzkin_terms(13)

    def test_quartic_diagonal_by_hand(self):
        a = np.array([0.3, -1.1, 0.7, 2.0, 0.4, -0.6, 1.2])
        b = np.array([0.9, 1.3, 0.5, 0.8, 1.7, 0.6, 1.1])
        j = 3
        am, a0, ap = a[j - 1], a[j], a[j + 1]
        bmm, bm, b0, bp = b[j - 2], b[j - 1], b[j], b[j + 1]
        # closed length-4 walks from j, enumerated by hand
        expected = (a0 ** 4 + 3 * a0 ** 2 * (b0 ** 2 + bm ** 2)
                    + 2 * a0 * ap * b0 ** 2 + 2 * a0 * am * bm ** 2 + ap ** 2 * b0 ** 2 + am ** 2 * bm ** 2
                    + b0 ** 4 + bm ** 4 + 2 * b0 ** 2 * bm ** 2 + b0 ** 2 * bp ** 2 + bm ** 2 * bmm ** 2)
        val = local_field(motzkin_terms(4), j, Coordinates(a, b))
        assert val == pytest.approx(expected, rel=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(m=st.integers(1, 8), extra=st.integers(1, 6), seed=st.integers(0, 2**31), j=st.integers(0, 100))
    def test_local_field_matches_dense_diagonal(self, m, extra, seed, j):
        N = m + extra
        N = max(N, 3)
        c = random_coordinates(TODA, N, seed)
        j %= N
        L = build_matrix(TODA, c).entries.real
        dense = np.linalg.matrix_power(L, m)[j, j]
        assert abs(local_field(motzkin_terms(m), j, c) - dense) <= 1e-11 * (1 + abs(dense))

    def test_local_field_needs_long_ring(self):
        c = Coordinates(np.ones(4), np.ones(4))
        with pytest.raises(ValueError):
            local_field(motzkin_terms(4), 0, c)
        with pytest.raises(IndexError):
            local_field(motzkin_terms(2), 4, c)


class TestExtraction:
    def test_quadratic_toda(self):
        s = extract_seed(TODA, "x^2/2", 8)
        assert s.k == 1
        assert _as_dict(s) == {((0, "a", 2),): 0.25, ((0, "b", 2),): 0.5, ((1, "a", 2),): 0.25, ((1, "b", 2),): 0.5}

    def test_quartic_toda_cross_terms(self):
        s = extract_seed(TODA, "x^4", 8)
        cross = {k: v for k, v in _as_dict(s).items() if len({site for site, _, _ in k}) == 2}
        assert cross == {((0, "b", 2), (1, "a", 2)): 4, ((0, "a", 1), (0, "b", 2), (1, "a", 1)): 4,
                         ((0, "b", 2), (1, "b", 2)): 4}

    def test_volterra_quadratic(self):
        s = extract_seed(ModelKind("VolterraPeriodic"), "-x^2", 8)
        assert s.k == 1
        assert _as_dict(s) == {((0, "a", 1),): 1, ((1, "a", 1),): 1}

    def test_cmv_needs_two_sites(self):
        s = extract_seed(ModelKind("CMVPeriodic"), "z^2", 8)
        assert s.k == 2
        assert verify_decomposition(s, ModelKind("CMVPeriodic"),
                                    "z^2", random_coordinates(ModelKind("CMVPeriodic"), 8, 3)) < 1e-12

    def test_zero_potential(self):
        s = extract_seed(TODA, "0", 8)
        assert not s.monomials and not s.weed
        assert verify_decomposition(s, TODA, "0", random_coordinates(TODA, 8, 0)) == 0.0

    @pytest.mark.parametrize("P", ["x^3", "-x^2", "x", "x^4-x^6"])
    def test_toda_rejects_non_confining(self, P):
        with pytest.raises(UnsupportedPotential):
            extract_seed(TODA, P, 8)

    def test_observables_skip_validation(self):
        s = extract_seed(TODA, "x^3", 10, validate=False)
        c = random_coordinates(TODA, 10, 4)
        assert verify_decomposition(s, TODA, "x^3", c) < 1e-12

    def test_forced_index(self):
        s = extract_seed(TODA, "x^2", 12, k=3)
        assert s.k == 3 and s.M == 4 and s.ell == 0
        with pytest.raises(IncompatibleSeeds):
            extract_seed(ModelKind("CMVPeriodic"), "z^2", 8, k=1)

    def test_compatible_family(self):
        seeds = extract_seeds(ModelKind("CMVPeriodic", real_coeffs=True), ["z", "z^2"], 12)
        assert {s.k for s in seeds} == {2}

    @settings(max_examples=40, deadline=None)
    @given(N=st.integers(6, 14), seed=st.integers(0, 2**31),
           P=st.sampled_from(["x^2/2", "x^4+x^2", "x^6/6-x^2", "x^4/4+x^3/3+x^2"]))
    def test_seed_plus_weed_is_trace(self, N, seed, P):
        s = extract_seed(TODA, P, N)
        assert verify_decomposition(s, TODA, P, random_coordinates(TODA, N, seed)) < 1e-10

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), shift=st.integers(1, 7))
    def test_trace_is_shift_covariant(self, seed, shift):
        # the seed sum plus weed must follow the trace under a cyclic relabelling
        s = extract_seed(TODA, "x^4+x^2", 8)
        c = random_coordinates(TODA, 8, seed)
        rolled = Coordinates(np.roll(c.a, shift), np.roll(c.b, shift))
        t0 = s.total(site_array(TODA, c)[None])[0]
        t1 = s.total(site_array(TODA, rolled)[None])[0]
        assert abs(t0 - t1) < 1e-10 * (1 + abs(t0))

    def test_lower_bound_below_dense_scan(self):
        s = extract_seed(TODA, "x^4/4-x^2", 8)
        rng = np.random.default_rng(1)
        X = rng.uniform(-3, 3, size=(1_000_000, 2, 2))
        X[..., 1] = np.abs(X[..., 1])
        scan = s.seed_eval(X[:, :1], X[:, 1:]).real.min()
        assert s.lower_bound <= scan + 1e-9
        assert s.lower_bound > scan - 0.05


class TestSeedsPrint:
    def test_json(self, capsys):
        assert main(["seeds", "print", "--model", "toda", "--potential", "x^2/2", "--N", "8", "--json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["k"] == 1 and out["N"] == 8
        assert {"loc", "cross", "weed"} <= set(out)
        term = out["loc"][0]
        assert set(term) == {"coeff", "sites"}
        assert set(term["sites"][0]) == {"offset", "var", "power"}

    def test_text(self, capsys):
        assert main(["seeds", "print", "--model", "cmv", "--potential", "z^2", "--N", "8"]) == 0
        assert "circular index k = 2" in capsys.readouterr().out

    def test_bad_potential(self, capsys):
        assert main(["seeds", "print", "--model", "toda", "--potential", "x^3"]) == 2
        assert "configuration error" in capsys.readouterr().err
