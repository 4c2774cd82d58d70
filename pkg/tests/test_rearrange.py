import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pzkit import model_weights as mw
from pzkit.errors import DegenerateError, PreconditionError, RangeError
from pzkit.rearrange import (
    DistributionFunction,
    MonotoneProfile,
    SampledFunction,
    distribution,
    equimeasurability_report,
    generalized_inverse,
    level_radius,
    mu_derivative_check,
    omega_star,
    rearrange,
)

ATOMS = [(3, 0.2), (1, 0.5), (3, 0.1)]


def atoms_strategy(max_size=30):
    value = st.integers(-6, 6).map(lambda k: k / 2)
    mass = st.floats(1e-3, 1.0)
    return st.lists(st.tuples(value, mass), min_size=1, max_size=max_size)


class TestDistribution:
    @pytest.mark.parametrize("t,expect", [(2, 0.3), (0.5, 0.8), (3, 0.0)])
    def test_examples(self, t, expect):
        assert distribution(SampledFunction.from_atoms(ATOMS), t) == pytest.approx(expect, abs=1e-15)

    def test_right_continuous_non_increasing(self):
        mu = DistributionFunction.of(SampledFunction.from_atoms(ATOMS))
        ts = np.linspace(0, 4, 81)
        vals = [mu(t) for t in ts]
        assert np.all(np.diff(vals) <= 0)
        assert mu(1.0) == mu(1.0 + 1e-12)


class TestGeneralizedInverse:
    @pytest.mark.parametrize("s,expect", [(0.1, 3), (0.5, 1), (0.9, 1)])
    def test_examples(self, s, expect):
        mu = DistributionFunction.of(SampledFunction.from_atoms(ATOMS))
        assert generalized_inverse(mu, s) == expect

    def test_zero_is_ess_sup(self):
        mu = DistributionFunction.of(SampledFunction.from_atoms(ATOMS))
        assert generalized_inverse(mu, 0.0) == 3

    def test_negative(self):
        mu = DistributionFunction.of(SampledFunction.from_atoms(ATOMS))
        with pytest.raises(RangeError):
            generalized_inverse(mu, -0.1)


class TestRearrange:
    def test_euclidean_closed_form(self):
        prof = rearrange(SampledFunction.from_atoms([(3, 0.3), (1, 0.5)]), mw.euclidean(2))
        assert prof.knots[1] == pytest.approx(math.sqrt(0.3 / math.pi), rel=1e-14)
        assert prof.knots[2] == pytest.approx(math.sqrt(0.8 / math.pi), rel=1e-14)
        assert list(prof.values) == [3, 1]
        assert prof(math.sqrt(0.3 / math.pi)) == 3  # left-continuous

    def test_single_atom(self):
        prof = rearrange(SampledFunction.from_atoms([(1.7, 0.4)]), mw.sphere(3))
        assert list(prof.values) == [1.7]
        assert prof(np.linspace(0.01, prof.knots[-1], 5)).tolist() == [1.7] * 5

    def test_lebesgue(self):
        prof = rearrange(SampledFunction.from_atoms([(2, 0.3), (1, 0.7)]), mw.uniform(0, 1))
        assert prof.knots.tolist() == pytest.approx([0, 0.3, 1.0], abs=1e-15)
        assert prof(0.3) == 2 and prof(0.30001) == 1

    def test_mass_incompatible(self):
        with pytest.raises(PreconditionError):
            rearrange(SampledFunction.from_atoms([(1, 0.7), (2, 0.6)]), mw.sphere(2))

    def test_idempotent(self):
        u = SampledFunction.from_atoms([(0.5, 0.1), (2, 0.25), (-1, 0.3), (0.5, 0.05)])
        w = mw.sphere(2.5)
        prof = rearrange(u, w)
        again = rearrange(prof.atomize(), w)
        np.testing.assert_array_equal(again.values, prof.values)
        np.testing.assert_allclose(again.knots, prof.knots, rtol=0, atol=1e-15)

    def test_json_round_trip(self):
        prof = rearrange(SampledFunction.from_atoms(ATOMS), mw.gaussian())
        back = MonotoneProfile.from_json(prof.to_json())
        np.testing.assert_array_equal(back.knots, prof.knots)
        np.testing.assert_array_equal(back.values, prof.values)

    def test_csv(self):
        prof = rearrange(SampledFunction.from_atoms([(2, 0.3), (1, 0.7)]), mw.uniform(0, 1))
        lines = prof.to_csv([0.1, 0.5]).splitlines()
        assert lines == ["x,u_star", "0.10000000000000001,2", "0.5,1"]

    @settings(max_examples=50, deadline=None)
    @given(atoms_strategy(), st.floats(0.0, 0.5))
    def test_order_preservation(self, atoms, shift):
        # v = u + bump on a shared mass partition
        masses = np.array([m for _, m in atoms])
        masses = masses / masses.sum() * 0.9
        values = np.array([v for v, _ in atoms])
        u = SampledFunction(values, masses)
        v = SampledFunction(values + shift * (values > 0), masses)
        w = mw.sphere(2)
        pu, pv = rearrange(u, w), rearrange(v, w)
        xs = np.linspace(1e-3, pu.knots[-1] - 1e-9, 400)
        assert np.all(pu(xs) <= pv(xs) + 1e-15)

    @settings(max_examples=50, deadline=None)
    @given(atoms_strategy())
    def test_superlevel_masses_exact(self, atoms):
        u = SampledFunction.from_atoms(atoms)
        prof = rearrange(u, mw.euclidean(3))
        for t in np.unique(u.values):
            assert prof.superlevel_mass(t) == pytest.approx(distribution(u, t), rel=1e-14, abs=1e-15)


class TestOmegaStar:
    def test_gaussian_full(self):
        assert omega_star(mw.gaussian(), 1.0) == (-math.inf, math.inf)

    def test_euclidean(self):
        lo, hi = omega_star(mw.euclidean(2), math.pi)
        assert lo == 0 and hi == pytest.approx(1.0, rel=1e-14)

    def test_sphere_half(self):
        lo, hi = omega_star(mw.sphere(2), 0.5)
        assert lo == 0 and hi == pytest.approx(math.pi / 2, rel=1e-14)


class TestLevelRadius:
    def test_closed_form(self):
        u = SampledFunction.from_atoms([(3, 0.3), (1, 0.5)])
        assert level_radius(u, mw.euclidean(2), 2.0) == pytest.approx(math.sqrt(0.3 / math.pi), rel=1e-14)

    def test_plateau(self):
        u = SampledFunction.from_atoms([(3, 0.3), (1, 0.5)])
        w = mw.euclidean(2)
        assert level_radius(u, w, 1.0001) == level_radius(u, w, 2.9999)

    def test_gaussian_median(self):
        u = SampledFunction.from_atoms([(1, 0.5), (0, 0.5)])
        assert level_radius(u, mw.gaussian(), 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_outside(self):
        u = SampledFunction.from_atoms([(3, 0.3), (1, 0.5)])
        with pytest.raises(RangeError):
            level_radius(u, mw.euclidean(2), 3.0)


class TestMuDerivative:
    def test_exponential_profile(self):
        prof = MonotoneProfile.sample(lambda x: np.exp(-x), mw.uniform(0, 20), np.linspace(0, 20, 1001),
                                      lambda x: -np.exp(-x))
        for t in (0.7, 0.3, 0.05):
            lhs, rhs = mu_derivative_check(prof, t)
            assert lhs == pytest.approx(1 / t, rel=1e-5)
            assert lhs == pytest.approx(rhs, rel=1e-6)

    def test_linear_identity(self):
        prof = MonotoneProfile.sample(lambda x: 1 - x, mw.uniform(0, 1), np.linspace(0, 1, 101))
        lhs, rhs = mu_derivative_check(prof, 0.3333)
        assert lhs == pytest.approx(1.0, rel=1e-9) and rhs == pytest.approx(1.0, rel=1e-9)

    def test_cos_on_sphere(self):
        prof = MonotoneProfile.sample(np.cos, mw.sphere(2), np.linspace(0, math.pi, 1000), lambda x: -np.sin(x))
        for t in (0.0, 0.5, -0.8):
            lhs, rhs = mu_derivative_check(prof, t)
            assert lhs == pytest.approx(0.5, rel=1e-6)
            assert rhs == pytest.approx(0.5, rel=1e-12)

    def test_piecewise_linear_agreement(self):
        # without the attached function both sides come from the same secant
        prof = MonotoneProfile(mw.sphere(2), "linear", np.linspace(0, math.pi, 1000),
                               np.cos(np.linspace(0, math.pi, 1000)))
        lhs, rhs = mu_derivative_check(prof, 0.123)
        assert lhs == pytest.approx(rhs, rel=1e-6)

    def test_flat_level_refused(self):
        prof = MonotoneProfile(mw.uniform(0, 3), "linear", [0, 1, 2, 3], [2, 1, 1, 0])
        with pytest.raises(DegenerateError):
            mu_derivative_check(prof, 1.0)


class TestEquimeasurability:
    @settings(max_examples=40, deadline=None)
    @given(atoms_strategy())
    def test_exact_items(self, atoms):
        u = SampledFunction.from_atoms(atoms)
        w = mw.uniform(0, u.total_mass + 1)
        rep = equimeasurability_report(u, rearrange(u, w))
        assert rep["worst_exact"] <= 1e-12

    def test_composition_square(self):
        u = SampledFunction.from_atoms([(1.5, 0.2), (-0.5, 0.3), (2.0, 0.1)])
        rep = equimeasurability_report(u, rearrange(u, mw.sphere(3)), {"sq": lambda t: t * t})
        assert rep["composition"]["sq"] <= 1e-10

    def test_sign_balanced(self):
        u = SampledFunction.from_atoms([(1.0, 0.2), (-1.0, 0.2), (2.0, 0.1), (-2.0, 0.1)])
        G = {"odd": lambda t: t * abs(t)}
        assert u.integral(G["odd"]) == 0.0
        rep = equimeasurability_report(u, rearrange(u, mw.gaussian()), G)
        assert rep["composition"]["odd"] <= 1e-10
