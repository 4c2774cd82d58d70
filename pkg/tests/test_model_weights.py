import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oracles import ball_volume, sphere_mass_quad, talenti_constant
from pzkit import model_weights as mw
from pzkit.errors import ConfigurationError, DomainError, RangeError


class TestCdf:
    def test_gaussian_median(self):
        assert mw.gaussian().cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_sphere2_half(self):
        assert mw.sphere(2).cdf(math.pi / 2) == pytest.approx(0.5, abs=1e-14)

    def test_euclidean2_unit(self):
        assert mw.euclidean(2).cdf(1.0) == pytest.approx(math.pi, rel=1e-14)

    @pytest.mark.parametrize("N", [1.5, 2.0, 3.0, 5.5])
    def test_sphere_against_quadrature(self, N):
        w = mw.sphere(N)
        for x in (0.3, 1.0, 2.0, 2.9):
            assert w.cdf(x) == pytest.approx(sphere_mass_quad(N, 0, x), rel=1e-11, abs=1e-14)

    def test_outside_interval_raises(self):
        with pytest.raises(DomainError):
            mw.sphere(2).cdf(4.0)
        with pytest.raises(DomainError):
            mw.euclidean(3).cdf(0.0)

    def test_double_cone_total_mass(self):
        w = mw.double_cone(2.5, 1.3)
        assert w.total_mass == pytest.approx(2 * ball_volume(2.5) * 1.3**2.5, rel=1e-14)
        val = integrate.quad(w.density, 0, 2.6, points=[1.3], epsabs=0, epsrel=1e-13)[0]
        assert val == pytest.approx(w.total_mass, rel=1e-11)

    def test_totals(self):
        assert mw.sphere(3.7).total_mass == pytest.approx(1.0, abs=1e-12)
        assert mw.gaussian().total_mass == pytest.approx(1.0, abs=1e-12)
        assert math.isinf(mw.exponential(2.0).total_mass)

    def test_log_convex_flat_matches_euclidean(self):
        w = mw.log_convex([0.0], 3)
        assert w.mass_between(0, 1.2) == pytest.approx(mw.euclidean(3).cdf(1.2), rel=1e-10)

    def test_log_convex_growth_has_infinite_mass(self):
        assert math.isinf(mw.log_convex(lambda t: t**2, 2).total_mass)

    def test_custom_constant_density(self):
        w = mw.custom([0.0, 0.5, 1.0, 2.0], [3.0, 3.0, 3.0, 3.0])
        assert w.total_mass == pytest.approx(6.0, rel=1e-12)
        assert w.inv_cdf(1.5) == pytest.approx(0.5, abs=1e-10)


class TestInverse:
    def test_gaussian(self):
        assert mw.gaussian().inv_cdf(0.5) == pytest.approx(0.0, abs=1e-14)

    def test_euclidean(self):
        assert mw.euclidean(2).inv_cdf(math.pi) == pytest.approx(1.0, rel=1e-14)

    def test_exponential(self):
        assert mw.exponential(1.0).inv_cdf(2.0) == pytest.approx(math.log(2), rel=1e-14)

    @pytest.mark.parametrize("v", [0.0, -1.0, 1.0, 2.0])
    def test_range(self, v):
        with pytest.raises(RangeError):
            mw.sphere(3).inv_cdf(v)

    def test_tiny_gaussian_tail(self):
        w = mw.gaussian()
        # reference from a 30-digit root find of the normal tail
        assert w.inv_sf(1e-30) == pytest.approx(11.464024688443616, rel=1e-12)

    @pytest.mark.parametrize(
        "w",
        [mw.sphere(2), mw.sphere(5.5), mw.euclidean(3), mw.gaussian(), mw.exponential(0.7),
         mw.double_cone(3, 0.8), mw.uniform(-1, 4), mw.log_convex([0.0, 0.5], 2),
         mw.custom(np.linspace(0, 2, 9), 1 + np.linspace(0, 2, 9) ** 2)],
        ids=lambda w: w.family["family"],
    )
    def test_round_trip(self, w):
        lo = w.lower if math.isfinite(w.lower) else -6.0
        hi = w.upper if math.isfinite(w.upper) else 6.0
        for x in np.linspace(lo, hi, 23)[1:-1]:
            # skip the far tail where 1 - F(x) is below float resolution
            if w.total_mass - w.cdf(x) < 1e-6 * w.total_mass:
                continue
            assert w.inv_cdf(w.cdf(x)) == pytest.approx(x, rel=1e-10, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(1.1, 8.0), st.floats(1e-4, 1 - 1e-4))
    def test_sphere_inverse_property(self, N, v):
        w = mw.sphere(N)
        assert w.cdf(w.inv_cdf(v)) == pytest.approx(v, abs=1e-11)


class TestProfile:
    def test_gaussian_half(self):
        assert mw.gaussian().profile(0.5) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)

    def test_exponential(self):
        assert mw.exponential(1.0).profile(2.0) == pytest.approx(2.0, rel=1e-13)

    def test_sphere3(self):
        assert mw.sphere(3).profile(0.5) == pytest.approx(2 / math.pi, rel=1e-13)

    def test_zero(self):
        for w in (mw.sphere(2), mw.gaussian(), mw.euclidean(2)):
            assert w.profile(0.0) == 0.0

    @pytest.mark.parametrize("N", [2.0, 3.0, 4.5])
    def test_euclidean_closed_form(self, N):
        w = mw.euclidean(N)
        for v in (0.1, 1.0, 7.0):
            expect = N * ball_volume(N) ** (1 / N) * v ** ((N - 1) / N)
            assert w.profile(v) == pytest.approx(expect, rel=1e-12)

    def test_double_cone_closed_form(self):
        Q, r = 2.5, 1.0
        w = mw.double_cone(Q, r)
        for v in np.linspace(0.05, w.total_mass - 0.05, 9):
            expect = Q * ball_volume(Q) ** (1 / Q) * min(v, w.total_mass - v) ** ((Q - 1) / Q)
            assert w.profile(v) == pytest.approx(expect, rel=1e-10)

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            mw.sphere(2).profile(1.5)


class TestConstants:
    def test_conjugate(self):
        c = mw.ModelConstants(3.0, 4.0)
        assert 1 / c.p + 1 / c.p_conjugate == pytest.approx(1.0)
        assert c.sobolev_exponent == pytest.approx(12.0)

    @pytest.mark.parametrize("N", [1.5, 2.0, 3.0, 7.25])
    def test_bbg_at_pi(self, N):
        assert mw.bbg_factor(N, math.pi) == 1.0

    def test_bbg_quarter(self):
        assert mw.bbg_factor(2, math.pi / 2) == pytest.approx(2**0.25, rel=1e-12)

    def test_bbg_quadrature_oracle(self):
        num = integrate.quad(lambda t: math.cos(t) ** 2, 0, math.pi / 2, epsabs=0, epsrel=1e-13)[0]
        den = integrate.quad(lambda t: math.cos(t) ** 2, 0, math.pi / 4, epsabs=0, epsrel=1e-13)[0]
        assert mw.bbg_factor(3, math.pi / 2) == pytest.approx((num / den) ** (1 / 3), rel=1e-12)

    def test_bbg_monotone(self):
        D = np.linspace(0.05, math.pi, 80)
        vals = [mw.bbg_factor(3.5, d) for d in D]
        assert np.all(np.diff(vals) <= 0)

    @pytest.mark.parametrize("D", [0.0, -1.0, 3.2])
    def test_bbg_range(self, D):
        with pytest.raises(RangeError):
            mw.bbg_factor(2, D)

    def test_sobolev_closed_form(self):
        # 3^{-1/2} (2/pi)^{2/3}
        assert mw.sobolev_constant(2, 3) == pytest.approx(3**-0.5 * (2 / math.pi) ** (2 / 3), rel=1e-14)

    @pytest.mark.parametrize("p,N", [(2, 3), (2, 4), (1.5, 3), (3, 7.5)])
    def test_sobolev_gamma_form(self, p, N):
        assert mw.sobolev_constant(p, N) == pytest.approx(talenti_constant(p, N), rel=1e-12)

    def test_sobolev_blows_up(self):
        vals = [mw.sobolev_constant(p, 3) for p in np.linspace(2.5, 2.999, 20)]
        assert np.all(np.diff(vals) > 0)
        with pytest.raises(DomainError):
            mw.sobolev_constant(3, 3)

    @pytest.mark.parametrize("N", [2, 3, 4.5])
    def test_logsobolev_p2(self, N):
        assert mw.logsobolev_constant(2, N) == pytest.approx(2 / (N * math.pi * math.e), rel=1e-13)


class TestSerialization:
    @pytest.mark.parametrize(
        "w",
        [mw.sphere(2.5), mw.euclidean(3, 0.5), mw.gaussian(), mw.double_cone(2, 1.5),
         mw.uniform(0, 2), mw.log_convex([0.0, 0.0, 1.0], 2)],
    )
    def test_round_trip(self, w):
        back = mw.weight_from_json(w.to_json())
        assert back.mass_between(0.1, 0.9) == pytest.approx(w.mass_between(0.1, 0.9), rel=1e-12)

    def test_restrict_and_scale(self):
        w = mw.sphere(3).restrict(math.pi / 2 - 0.5, math.pi / 2 + 0.5)
        w = w.scaled(1 / w.total_mass)
        back = mw.weight_from_json(w.to_json())
        assert back.total_mass == pytest.approx(1.0, rel=1e-13)
        assert back.cdf(math.pi / 2) == pytest.approx(0.5, rel=1e-12)

    def test_unknown_family(self):
        with pytest.raises(ConfigurationError):
            mw.weight_from_json({"family": "torus"})
