import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from deglab.backgrounds import (DsLinearBackground, KdvCubicBackground,
                                SampledBackground, check_x1_condition,
                                dt_y, gds_residual, gkdv_residual, kdv_beta,
                                kdv_beta_rhs, taylor_ode_schrodinger,
                                y_inverse, y_transform)
from deglab.errors import (BetaBlowup, DegenerateOnPath,
                           X1ConditionViolated)
from deglab.models import KdvSpec, SchrodingerSpec
from deglab.profiles import BumpProfile


class TestBumpProfile:

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_derivative_matches_finite_differences(self, order):
        # each rational prefactor R_k is pinned against a central
        # difference of the analytic order below it
        p = BumpProfile(center=0.3, halfwidth=0.8, amp=2.0)
        x = np.linspace(0.3 - 0.56, 0.3 + 0.56, 37)
        h = 1e-5
        lower = p(x + h) if order == 1 else p.derivative(x + h, order - 1)
        lower_m = p(x - h) if order == 1 else p.derivative(x - h, order - 1)
        fd = (lower - lower_m) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(p.derivative(x, order)))))
        assert np.max(np.abs(p.derivative(x, order) - fd)) < 1e-6 * scale

    def test_support(self):
        p = BumpProfile(center=1.0, halfwidth=0.5)
        assert p.support == (0.5, 1.5)
        x = np.array([0.45, 0.5, 1.5, 1.7])
        assert np.all(p(x) == 0.0)
        assert np.all(p.derivative(x, 3) == 0.0)
        assert p(np.array([1.0]))[0] == pytest.approx(np.exp(-1.0))

    def test_l2_norm_scaling(self):
        base = BumpProfile().l2_norm()
        assert BumpProfile(amp=3.0).l2_norm() == pytest.approx(3 * base)
        assert BumpProfile(halfwidth=4.0).l2_norm() == pytest.approx(
            2 * base)

    def test_l2_norm_against_quadrature(self):
        p = BumpProfile(center=0.2, halfwidth=0.7, amp=1.3)
        x = np.linspace(-0.5, 0.9, 20001)
        direct = np.sqrt(np.trapezoid(p(x) ** 2, x))
        assert p.l2_norm() == pytest.approx(direct, rel=1e-8)

    def test_on_interval_l2_normalized(self):
        p = BumpProfile.on_interval(0.25, 0.5, normalize="l2")
        assert p.support == (0.25, 0.5)
        assert p.l2_norm() == pytest.approx(1.0, rel=1e-13)

    def test_on_interval_int_normalized(self):
        p = BumpProfile.on_interval(-1.0, 3.0, normalize="int")
        assert p.integral() == pytest.approx(1.0, rel=1e-13)

    def test_order_cap(self):
        with pytest.raises(ValueError):
            BumpProfile().derivative(np.array([0.0]), 5)


class TestRateFitting:

    def test_exact_recovery(self):
        from deglab.fitting import fit_exponential_rate
        t = np.linspace(0.0, 2.0, 25)
        fit = fit_exponential_rate(t, 1.7 * np.exp(-3.2 * t))
        assert fit.rate == pytest.approx(-3.2, rel=1e-12)
        assert np.exp(fit.offset) == pytest.approx(1.7, rel=1e-12)
        assert fit.residual < 1e-12
        assert np.max(fit.relative_errors()) < 1e-12

    def test_degenerate_inputs(self):
        from deglab.errors import DegenerateFit
        from deglab.fitting import fit_exponential_rate
        t = np.linspace(0, 1, 10)
        with pytest.raises(DegenerateFit):
            fit_exponential_rate(t[:4], np.exp(t[:4]))
        with pytest.raises(DegenerateFit):
            fit_exponential_rate(t, np.concatenate([[-1.0], np.ones(9)]))
        with pytest.raises(DegenerateFit):
            fit_exponential_rate(t, np.full(10, 2.0))

    def test_log_slope(self):
        from deglab.fitting import fit_log_slope
        x = np.geomspace(1.0, 100.0, 12)
        assert fit_log_slope(x, 3.0 * x ** 2.5) == pytest.approx(
            2.5, rel=1e-12)


class TestDsLinear:

    @pytest.mark.parametrize("alpha1,beta1", [(1.0, 1.0), (0.0, 1.0),
                                              (-8.0, 0.0), (2.5, -1.5)])
    def test_exact_solution(self, alpha1, beta1):
        spec = SchrodingerSpec(alpha1=alpha1, beta1=beta1)
        bg = DsLinearBackground(spec)
        t = np.linspace(0.0, 1.0, 100)
        x = np.linspace(-1.0, 1.0, 100)
        assert gds_residual(spec, bg, t, x) < 1e-13

    def test_refuses_mass_term(self):
        with pytest.raises(ValueError):
            DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0,
                                               mu1=0.5))

    def test_modulus_static(self):
        bg = DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0))
        x = np.linspace(0.1, 1.0, 7)
        assert np.allclose(np.abs(bg.value(0.7, x)), x)
        assert np.all(bg.dt_abs2(0.7, x) == 0.0)


class TestTaylorOde:

    def test_linear_data_rotates(self):
        # f = x picks up exactly the phase e^{i (alpha1+beta1) t}
        spec = SchrodingerSpec(alpha1=1.0, beta1=1.0)
        t, d = taylor_ode_schrodinger(spec, [0.0, 1.0, 0.0, 0.0], 2.0)
        expected = np.exp(1j * (spec.alpha1 + spec.beta1) * t)
        assert np.max(np.abs(d[:, 1] - expected)) < 1e-9
        assert np.max(np.abs(d[:, 0])) < 1e-12
        assert np.max(np.abs(d[:, 2])) < 1e-12

    def test_matches_background(self):
        spec = SchrodingerSpec(alpha1=-8.0, beta1=0.0)
        bg = DsLinearBackground(spec)
        t, d = taylor_ode_schrodinger(spec, [0.0, 1.0], 1.5)
        assert np.max(np.abs(d[:, 1] - bg.derivative(t, np.zeros_like(t),
                                                     1))) < 1e-9

    @given(st.integers(min_value=0, max_value=3),
           st.floats(-2, 2), st.floats(-2, 2))
    @settings(max_examples=20, deadline=None)
    def test_zero_at_origin_persists(self, seed, alpha1, beta1):
        # vanishing at x = 0 is preserved by the coefficient flow
        rng = np.random.default_rng(seed)
        d0 = rng.normal(size=4) + 1j * rng.normal(size=4)
        d0[0] = 0.0
        spec = SchrodingerSpec(alpha1=alpha1, beta1=beta1)
        _, d = taylor_ode_schrodinger(spec, d0, 0.5, n_samples=21)
        assert np.max(np.abs(d[:, 0])) < 1e-10

    def test_order_cap(self):
        spec = SchrodingerSpec(alpha1=1.0, beta1=1.0)
        with pytest.raises(ValueError):
            taylor_ode_schrodinger(spec, np.zeros(9), 1.0)


class TestKdvBeta:

    @pytest.mark.parametrize("alpha1", [0.0, 1.5, 3.0])
    def test_closed_form_vs_raw_ode(self, alpha1):
        sol = solve_ivp(lambda t, b: [kdv_beta_rhs(alpha1, b[0])],
                        (0.0, 1.0), [1.0], method="DOP853", rtol=1e-12,
                        atol=1e-14, t_eval=np.linspace(0, 1, 101))
        exact = kdv_beta(alpha1, 1.0, sol.t)
        assert np.max(np.abs(sol.y[0] - exact)) < 1e-10

    def test_blowup_for_focusing_coefficient(self):
        # 2 + 6 alpha1 < 0 drives beta upward; existence time 1/12 here
        with pytest.raises(BetaBlowup):
            kdv_beta(-1.0, 1.0, 0.2)
        assert kdv_beta(-1.0, 1.0, 0.05) > 1.0


class TestKdvCubicBackground:

    def test_core_residual(self):
        spec = KdvSpec(alpha1=1.0)
        bg = KdvCubicBackground(spec, beta0=1.0, x1=1.0)
        t = np.linspace(0.0, 1.0, 40)
        x = np.linspace(1e-3, bg.x_cut, 40)
        assert gkdv_residual(spec, bg, t, x) < 1e-11

    def test_frozen_tail(self):
        bg = KdvCubicBackground(KdvSpec(alpha1=1.0), x1=1.0)
        x = np.linspace(bg.x_glue, 1.0, 9)
        assert np.array_equal(bg.value(0.8, x), bg.value(0.0, x))
        assert np.all(bg.dt_value(0.8, x) == 0.0)

    def test_c3_across_glue(self):
        # derivatives up to third order are continuous across both
        # collar seams: the jump seen at offset delta shrinks linearly
        # (the fourth derivative of the septic blend is merely bounded)
        bg = KdvCubicBackground(KdvSpec(alpha1=0.0), x1=1.0)
        t = 0.4
        for x0 in (bg.x_cut, bg.x_glue):
            for order in (1, 2, 3):
                def jump(delta):
                    lo = bg.derivative(t, np.array([x0 - delta]), order)[0]
                    hi = bg.derivative(t, np.array([x0 + delta]), order)[0]
                    return abs(hi - lo)
                assert jump(1e-8) < 0.1
                assert jump(1e-8) < 0.2 * jump(1e-6) + 1e-12

    def test_derivatives_match_finite_differences(self):
        bg = KdvCubicBackground(KdvSpec(alpha1=1.5), x1=1.0)
        t = 0.3
        x = np.linspace(0.05, 0.99, 61)
        h = 1e-6
        fd1 = (bg.value(t, x + h) - bg.value(t, x - h)) / (2 * h)
        assert np.max(np.abs(bg.derivative(t, x, 1) - fd1)) < 1e-7
        fd2 = (bg.derivative(t, x + h, 1)
               - bg.derivative(t, x - h, 1)) / (2 * h)
        assert np.max(np.abs(bg.derivative(t, x, 2) - fd2)) < 1e-6
        fd3 = (bg.derivative(t, x + h, 2)
               - bg.derivative(t, x - h, 2)) / (2 * h)
        assert np.max(np.abs(bg.derivative(t, x, 3) - fd3)) < 1e-4

    def test_dt_value_matches_finite_differences(self):
        bg = KdvCubicBackground(KdvSpec(alpha1=1.0), x1=1.0)
        x = np.linspace(0.05, 0.99, 31)
        h = 1e-6
        fd = (bg.value(0.5 + h, x) - bg.value(0.5 - h, x)) / (2 * h)
        assert np.max(np.abs(bg.dt_value(0.5, x) - fd)) < 1e-8

    def test_amplitude_and_existence(self):
        bg = KdvCubicBackground(KdvSpec(alpha1=1.0), beta0=0.5)
        assert bg.amplitude == pytest.approx(0.125)
        assert bg.existence_time() == np.inf
        bg2 = KdvCubicBackground(KdvSpec(alpha1=-1.0), beta0=1.0)
        assert bg2.existence_time() == pytest.approx(1.0 / 12.0)


class TestSampledBackground:

    def test_interpolates_kdv_profile(self):
        x = np.linspace(1e-3, 1.0, 400)
        bg = SampledBackground(x, x ** 3 + 0.1 * x ** 4, family="kdv")
        xs = np.linspace(0.1, 0.9, 17)
        assert np.max(np.abs(bg.value(0, xs)
                             - (xs ** 3 + 0.1 * xs ** 4))) < 1e-9
        assert np.max(np.abs(bg.derivative(0, xs, 1)
                             - (3 * xs ** 2 + 0.4 * xs ** 3))) < 1e-6

    def test_rejects_sign_changing_kdv_profile(self):
        from deglab.errors import NonpositiveField
        x = np.linspace(1e-3, 1.0, 50)
        with pytest.raises(NonpositiveField):
            SampledBackground(x, x - 0.5, family="kdv")

    def test_complex_schrodinger_samples(self):
        x = np.linspace(-1.0, 1.0, 400)
        vals = x * np.exp(1j * 0.3)
        bg = SampledBackground(x, vals, family="schrodinger")
        xs = np.linspace(-0.9, 0.9, 11)
        assert np.max(np.abs(bg.value(0, xs)
                             - xs * np.exp(1j * 0.3))) < 1e-10


class TestDegenerateCoordinate:

    def test_schrodinger_log_coordinate(self):
        # |f| = x gives y = log(x/x1) exactly
        bg = DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0))
        x = np.array([0.05, 0.2, 0.5, 1.0])
        y = y_transform(bg, 0.3, x, 1.0)
        assert np.max(np.abs(y - np.log(x))) < 1e-10

    def test_kdv_log_coordinate_at_t0(self):
        # at t = 0 the profile is the pure cubic, ftilde^{-1/3} = 1/x
        bg = KdvCubicBackground(KdvSpec(alpha1=1.0), beta0=2.0, x1=1.0)
        x = np.array([0.05, 0.3, 0.8])
        y = y_transform(bg, 0.0, x, 1.0)
        assert np.max(np.abs(y - np.log(x))) < 1e-10

    def test_inverse_roundtrip(self):
        bg = DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0))
        y = np.array([-3.0, -1.2, -0.1, 0.0])
        x = y_inverse(bg, 0.0, y, 1.0)
        assert np.max(np.abs(x - np.exp(y))) < 1e-9
        back = y_transform(bg, 0.0, x[:-1], 1.0)
        assert np.max(np.abs(back - y[:-1])) < 1e-9

    def test_kdv_inverse_roundtrip_during_evolution(self):
        bg = KdvCubicBackground(KdvSpec(alpha1=1.0), x1=1.0)
        t = 0.5
        y = np.array([-2.0, -0.7])
        x = y_inverse(bg, t, y, 1.0)
        back = y_transform(bg, t, x, 1.0)
        assert np.max(np.abs(back - y)) < 1e-9

    def test_degenerate_path_raises(self):
        bg = DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0))
        with pytest.raises(DegenerateOnPath):
            y_transform(bg, 0.0, -0.1, 1.0)

    def test_schrodinger_drift_vanishes_for_static_modulus(self):
        bg = DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0))
        h = dt_y(bg, 0.4, np.array([0.1, 0.6]), 1.0)
        assert np.max(np.abs(h)) < 1e-12

    def test_schrodinger_drift_growing_modulus(self):
        # |f| = x (1+t): y = log(x/x1)/(1+t), so
        # dy/dt = log(x1/x)/(1+t)^2 exactly

        class Stretching:
            family = "schrodinger"

            def value(self, t, x):
                return np.asarray(x, dtype=complex) * (1.0 + t)

            def dt_abs2(self, t, x):
                return 2.0 * np.asarray(x, dtype=float) ** 2 * (1.0 + t)

        t = 0.5
        x = np.array([0.05, 0.2, 0.7])
        h = dt_y(Stretching(), t, x, 1.0)
        want = np.log(1.0 / x) / (1.0 + t) ** 2
        assert np.max(np.abs(h - want)) < 1e-10

    def test_kdv_drift_at_t0(self):
        # whole profile is the exact cubic at t = 0:
        # q(0, x) = -A (2 + 6 alpha1) log(x1/x)
        spec = KdvSpec(alpha1=1.0)
        bg = KdvCubicBackground(spec, beta0=1.2, x1=1.0)
        x = np.array([0.05, 0.3, 0.8])
        q = dt_y(bg, 0.0, x, 1.0)
        A = bg.amplitude
        expected = -A * (2 + 6 * spec.alpha1) * np.log(1.0 / x)
        assert np.max(np.abs(q - expected)) < 1e-9

    def test_kdv_drift_core_increment(self):
        # inside the core the drift integrand is exactly
        # -A (2+6 alpha1) btilde^2 / u, so differences along the core
        # follow the closed form even while the collar does not
        spec = KdvSpec(alpha1=0.5)
        bg = KdvCubicBackground(spec, beta0=1.0, x1=1.0)
        t = 0.4
        btil = bg.beta(t) / bg.beta0
        x = np.array([0.05, 0.2, 0.5])
        q = dt_y(bg, t, x, 1.0)
        qc = dt_y(bg, t, bg.x_cut, 1.0)
        expected = -bg.amplitude * (2 + 6 * spec.alpha1) * btil ** 2 \
            * np.log(bg.x_cut / x)
        assert np.max(np.abs((q - qc) - expected)) < 1e-9


class TestX1Condition:

    def test_linear_profile_passes(self):
        bg = DsLinearBackground(SchrodingerSpec(alpha1=1.0, beta1=1.0))
        check_x1_condition(bg, 1.0)

    def test_curved_profile_fails(self):
        x = np.linspace(-1.0, 1.0, 400)
        bg = SampledBackground(x, (x + 5 * x ** 2).astype(complex),
                               family="schrodinger")
        with pytest.raises(X1ConditionViolated):
            check_x1_condition(bg, 1.0)

    def test_cubic_passes(self):
        bg = KdvCubicBackground(KdvSpec(alpha1=1.0), x1=1.0)
        check_x1_condition(bg, 1.0)
