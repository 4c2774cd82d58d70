import math

import numpy as np
import pytest

from oracles import ball_volume, bessel_j0_first_zero, p_pi
from pzkit import eigen1d as eg
from pzkit import model_weights as mw
from pzkit.errors import ConfigurationError, PreconditionError

J01 = bessel_j0_first_zero()


class TestDirichlet:
    def test_disc(self):
        res = eg.dirichlet_eigenvalue(mw.euclidean(2), 1.0)
        assert res.lam == pytest.approx(J01**2, rel=1e-8)

    def test_faber_krahn_22(self):
        assert eg.faber_krahn_constant(2) == pytest.approx(math.pi * J01**2, rel=1e-8)

    def test_lebesgue_quarter_wave(self):
        res = eg.dirichlet_eigenvalue(mw.uniform(0, 1), 1.0)
        assert res.lam == pytest.approx(math.pi**2 / 4, rel=1e-8)
        f = res.f / res.f[0]
        np.testing.assert_allclose(f, np.cos(math.pi * res.x / 2), atol=1e-6)

    def test_ball_in_three_dimensions(self):
        assert eg.dirichlet_eigenvalue(mw.euclidean(3), 1.0).lam == pytest.approx(math.pi**2, rel=1e-8)

    @pytest.mark.parametrize("N,p", [(2, 2), (3, 2), (2.5, 3)])
    def test_scaling_law(self, N, p):
        F = eg.faber_krahn_constant(N, p, grid=800)
        for rho in (0.5, 1.0, 2.0):
            lam = eg.dirichlet_eigenvalue(mw.euclidean(N), rho, p, grid=800).lam
            assert lam == pytest.approx(F * (ball_volume(N) * rho**N) ** (-p / N), rel=1e-7)

    def test_monotone_in_rho(self):
        lams = [eg.dirichlet_eigenvalue(mw.sphere(3), rho, grid=500).lam for rho in (0.5, 1.0, 1.5, 2.5, 3.0)]
        assert np.all(np.diff(lams) < 0)

    def test_eigenfunction_shape(self):
        res = eg.dirichlet_eigenvalue(mw.sphere(2), 2.0, p=2.5, grid=600)
        f = res.f if res.f[0] > 0 else -res.f
        assert f[-1] == 0.0
        assert np.all(f[:-1] > 0)
        assert np.all(np.diff(f) < 0)

    def test_rho_outside(self):
        with pytest.raises(ConfigurationError):
            eg.dirichlet_eigenvalue(mw.sphere(2), 4.0)


class TestNeumann:
    @pytest.mark.parametrize("N", [2, 3, 5.5])
    def test_sphere(self, N):
        assert eg.neumann_eigenvalue(mw.sphere(N)).lam == pytest.approx(N, rel=1e-9)

    def test_gaussian(self):
        res = eg.neumann_eigenvalue(mw.gaussian())
        assert res.lam == pytest.approx(1.0, rel=1e-9)

    def test_one_sign_change(self):
        for w, p in ((mw.sphere(3), 2.0), (mw.gaussian(), 2.0), (mw.sphere(2), 3.0)):
            res = eg.neumann_eigenvalue(w, p, grid=600)
            assert eg.sign_changes(res.f) == 1

    def test_constraint(self):
        res = eg.neumann_eigenvalue(mw.sphere(2), p=3.0, grid=600)
        g = mw.sphere(2).density(res.x)
        integrand = np.abs(res.f) ** (res.p - 2) * res.f * g
        mean = np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(res.x))
        scale = np.sum(np.abs(integrand[1:]) * np.diff(res.x))
        assert abs(mean) <= 1e-5 * scale

    def test_infinite_mass(self):
        with pytest.raises(PreconditionError):
            eg.neumann_eigenvalue(mw.exponential(1.0))

    def test_p_bound_on_sphere(self):
        # explicit lower bound N^{p/2}/(p-1)^{p-1}, stated for p >= 2 and integer N
        for N, p in ((3, 3.0), (2, 2.5), (4, 3.0)):
            lam = eg.neumann_eigenvalue(mw.sphere(N), p, grid=600).lam
            assert lam >= N ** (p / 2) / (p - 1) ** (p - 1) * (1 - 1e-6)


class TestPLaplacian:
    @pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
    def test_uniform_dirichlet_oracle(self, p):
        # quarter period of the p-sine on (0, 1) with a free left end
        lam = eg.dirichlet_eigenvalue(mw.uniform(0, 1), 1.0, p, grid=800).lam
        assert lam == pytest.approx((p - 1) * (p_pi(p) / 2) ** p, rel=1e-7)

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_uniform_neumann_oracle(self, p):
        lam = eg.neumann_eigenvalue(mw.uniform(0, 1), p, grid=800).lam
        assert lam == pytest.approx((p - 1) * p_pi(p) ** p, rel=1e-7)


class TestRayleigh:
    @pytest.mark.parametrize(
        "make",
        [lambda: eg.neumann_eigenvalue(mw.sphere(3)), lambda: eg.dirichlet_eigenvalue(mw.euclidean(2), 1.0),
         lambda: eg.neumann_eigenvalue(mw.gaussian(), 2.5, grid=600)],
    )
    def test_self_consistency(self, make):
        res = make()
        assert abs(res.rayleigh - res.lam) <= 1e-8 * res.lam

    def test_json(self):
        d = eg.dirichlet_eigenvalue(mw.euclidean(2), 1.0, grid=200).to_json()
        assert {"lambda", "rayleigh", "ode_residual", "grid"} <= set(d)


class TestOdeResidual:
    @pytest.mark.parametrize("N", [2, 3.5])
    def test_sphere_cos(self, N):
        w = mw.sphere(N)
        res = [eg.ode_residual(w, 2, N, x, np.cos(x)) for x in (np.linspace(0, math.pi, n) for n in (201, 2001))]
        assert res[1] < 1e-3 and res[1] < res[0] / 50

    def test_gaussian_linear(self):
        w = mw.gaussian()
        res = [eg.ode_residual(w, 2, 1.0, x, x) for x in (np.linspace(-8, 8, n) for n in (201, 2001))]
        assert res[1] < 1e-10 or res[1] < res[0] / 50

    def test_perturbed_eigenvalue_detected(self):
        w, x = mw.sphere(2), np.linspace(0, math.pi, 2001)
        f = np.cos(x) / math.sqrt(1 / 3)
        assert eg.ode_residual(w, 2, 2.2, x, f) > 1e-2
        assert eg.ode_residual(w, 2, 2.0, x, f) < 1e-5

    def test_solver_output_meets_threshold(self):
        for res in (eg.neumann_eigenvalue(mw.sphere(2)), eg.dirichlet_eigenvalue(mw.euclidean(3), 1.0, 3.0, grid=800)):
            assert res.ode_residual <= 1e-4 * res.lam

    def test_nondivergence_form(self):
        x = np.linspace(0, math.pi, 4001)
        ok = eg.ode_residual_nondivergence(mw.sphere(3), 2, 3.0, x, np.cos(x))
        bad = eg.ode_residual_nondivergence(mw.sphere(3), 2, 3.3, x, np.cos(x))
        assert ok < 1e-5 and bad > 1e-2


class TestHalfInterval:
    def test_q2(self):
        neu, half = eg.half_interval_check(2, 1.0)
        assert neu == pytest.approx(J01**2, rel=1e-7)
        assert half == pytest.approx(neu, rel=1e-8)

    def test_q3(self):
        neu, half = eg.half_interval_check(3, 1.0)
        assert neu == pytest.approx(math.pi**2, rel=1e-7)
        assert half == pytest.approx(neu, rel=1e-8)

    def test_scaling(self):
        n1, _ = eg.half_interval_check(2, 1.0, grid=800)
        n2, _ = eg.half_interval_check(2, 2.0, grid=800)
        assert n2 == pytest.approx(n1 / 4, rel=1e-8)

    def test_p3(self):
        neu, half = eg.half_interval_check(2, 1.0, 3.0, grid=800)
        assert half == pytest.approx(neu, rel=1e-5)


class TestProblem:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(p=1.0), dict(boundary="robin"), dict(a=1.0, b=0.5), dict(grid=4), dict(b=math.inf)],
    )
    def test_invalid(self, kwargs):
        args = dict(weight=mw.uniform(0, 1), a=0.0, b=1.0)
        args.update(kwargs)
        with pytest.raises(ConfigurationError):
            eg.EigenProblem(**args)
