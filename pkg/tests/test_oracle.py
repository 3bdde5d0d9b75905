import numpy as np
import pytest
from scipy.optimize import brentq

from lfvar.errors import NotRegular, OracleUnavailable
from lfvar.model import lagrangian_c, make_model
from lfvar.oracle import (
    characteristics_solution,
    exact_u_at_regular_point,
    hopf_lax_solution,
    hopf_lax_value,
    hopf_lax_values_batch,
    riemann_burgers_u,
    riemann_torus_solution,
)

TWO_PI = 2.0 * np.pi


def cosine_potential(y):
    return np.cos(TWO_PI * np.asarray(y, float)) / TWO_PI


def cosine_slope(y):
    return -np.sin(TWO_PI * np.asarray(y, float))


def invert_characteristic(x, t):
    """Foot point of the quadratic-flux characteristic x = y - t*sin(2*pi*y)."""
    return brentq(lambda y: y - t * np.sin(TWO_PI * y) - x, x - 1.0, x + 1.0, xtol=1e-14)


class TestHopfLax:
    def test_zero_data(self):
        model = make_model("burgers")
        res = hopf_lax_value(lambda y: 0.0 * np.asarray(y), model, 0.37, 0.25, slope_bound=2.0)
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert res.y_star == pytest.approx(0.37, abs=1e-6)

    def test_linear_data(self):
        model = make_model("burgers")
        a, x, t = 0.6, 0.37, 0.25
        res = hopf_lax_value(lambda y: a * np.asarray(y), model, x, t, slope_bound=2.0)
        assert res.value == pytest.approx(a * x - a * a / 2 * t, abs=1e-10)
        assert res.velocity == pytest.approx(a, abs=1e-6)
        # the straight minimizer hits the data foot point
        assert res.minimizer(0.0, x, t) == pytest.approx(x - a * t, abs=1e-6)

    def test_offset_rate(self):
        model = make_model("burgers", h=0.7)
        res = hopf_lax_value(lambda y: 0.0 * np.asarray(y), model, 0.2, 0.5, slope_bound=2.0)
        assert res.value == pytest.approx(0.35, abs=1e-12)

    def test_cosine_data_matches_characteristic_inversion(self):
        model = make_model("burgers")
        t = 0.1  # well before the first crossing time 1/(2 pi)
        for x in (0.05, 0.3, 0.62, 0.9):
            y = invert_characteristic(x, t)
            u = cosine_slope(y)
            v_exact = cosine_potential(y) + t * u * u / 2.0
            res = hopf_lax_value(cosine_potential, model, x, t, slope_bound=2.0)
            assert res.value == pytest.approx(float(v_exact), abs=1e-8)
            assert res.y_star == pytest.approx(float(y), abs=1e-6)

    def test_argmin_interior_of_window(self):
        model = make_model("burgers")
        res = hopf_lax_value(cosine_potential, model, 0.3, 0.1, slope_bound=2.0)
        lo, hi = res.window
        assert lo + 1e-9 < res.y_star < hi - 1e-9

    def test_batch_agrees_with_scalar(self):
        model = make_model("burgers")
        xs = np.linspace(0.0, 1.0, 23, endpoint=False)
        t = 0.08
        batch = hopf_lax_values_batch(cosine_potential, model, xs, t, 2.0)
        scalar = np.array([hopf_lax_value(cosine_potential, model, float(x), t, 2.0).value
                           for x in xs])
        assert np.max(np.abs(batch - scalar)) < 1e-12

    def test_numeric_conjugate_flux(self):
        model = make_model("quartic")
        a, x, t = 0.5, 0.4, 0.2
        # linear data: value = min_y over the dual of the quartic flux
        res = hopf_lax_value(lambda y: a * np.asarray(y), model, x, t, slope_bound=3.0)
        # stationarity: the minimizing velocity satisfies L'(xi) = a
        xi = res.velocity
        expect = t * float(lagrangian_c(model, 0.0, 0.0, xi)) + a * (x - xi * t)
        assert res.value == pytest.approx(expect, abs=1e-10)
        assert float(model.lagrangian.deriv_xi(0.0, 0.0, xi)) == pytest.approx(a, abs=1e-5)


class TestDynamicProgramming:
    def test_two_stage_composition(self):
        model = make_model("burgers")
        x, t, tau = 0.3, 0.1, 0.04
        direct = hopf_lax_value(cosine_potential, model, x, t, slope_bound=2.0).value
        ys = np.linspace(x - 2.0 * (t - tau), x + 2.0 * (t - tau), 2001)
        stage = [(t - tau) * float(lagrangian_c(model, 0.0, 0.0, (x - y) / (t - tau)))
                 + hopf_lax_value(cosine_potential, model, float(y), tau, slope_bound=2.0).value
                 for y in ys]
        two_stage = min(stage)
        assert two_stage == pytest.approx(direct, abs=1e-6)


class TestExactDerivative:
    def test_zero_data(self):
        model = make_model("burgers")
        assert exact_u_at_regular_point(lambda y: 0.0 * np.asarray(y), model, 0.3, 0.2, 2.0) == pytest.approx(0.0, abs=1e-8)

    def test_linear_data(self):
        model = make_model("burgers")
        val = exact_u_at_regular_point(lambda y: 0.4 * np.asarray(y), model, 0.3, 0.2, 2.0)
        assert val == pytest.approx(0.4, abs=1e-7)

    def test_drift_shift(self):
        model = make_model("burgers", c=0.3)
        val = exact_u_at_regular_point(lambda y: 0.4 * np.asarray(y), model, 0.3, 0.2, 2.0)
        assert val == pytest.approx(0.4, abs=1e-7)

    def test_cosine_data_matches_characteristics(self):
        model = make_model("burgers")
        t = 0.1
        for x in (0.1, 0.3, 0.77):
            y = invert_characteristic(x, t)
            val = exact_u_at_regular_point(cosine_potential, model, x, t, 2.0)
            assert val == pytest.approx(float(cosine_slope(y)), abs=1e-8)

    def test_matches_central_difference_of_value(self):
        model = make_model("burgers")
        rng = np.random.default_rng(27)
        step = 1e-5
        for _ in range(20):
            x, t = float(rng.uniform(0, 1)), float(rng.uniform(0.05, 0.12))
            u = exact_u_at_regular_point(cosine_potential, model, x, t, 2.0)
            vp = hopf_lax_value(cosine_potential, model, x + step, t, 2.0).value
            vm = hopf_lax_value(cosine_potential, model, x - step, t, 2.0).value
            assert u == pytest.approx((vp - vm) / (2 * step), abs=1e-5)

    def test_shock_point_not_regular(self):
        model = make_model("burgers")
        tent = lambda y: np.where(np.mod(y, 1.0) < 0.5, np.mod(y, 1.0), 1.0 - np.mod(y, 1.0))
        with pytest.raises(NotRegular):
            exact_u_at_regular_point(tent, model, 0.5, 0.2, 2.0)


class TestRiemann:
    def test_stationary_shock(self):
        assert float(riemann_burgers_u(1.0, -1.0, 0.4, 0.1)) == 1.0
        assert float(riemann_burgers_u(1.0, -1.0, 0.6, 0.1)) == -1.0

    def test_fan_center_and_interior(self):
        assert float(riemann_burgers_u(-1.0, 1.0, 0.5, 0.2)) == pytest.approx(0.0)
        assert float(riemann_burgers_u(-1.0, 1.0, 0.55, 0.2)) == pytest.approx(0.25)

    def test_moving_shock_speed(self):
        # mean state 0.5 plus drift 0.25 moves the jump accordingly
        x_s = 0.5 + (0.25 + 0.5) * 0.2
        assert float(riemann_burgers_u(1.0, 0.0, x_s - 0.01, 0.2, c=0.25)) == 1.0
        assert float(riemann_burgers_u(1.0, 0.0, x_s + 0.01, 0.2, c=0.25)) == 0.0

    def test_fan_with_drift(self):
        val = float(riemann_burgers_u(-1.0, 1.0, 0.55, 0.2, c=0.1))
        assert val == pytest.approx((0.55 - 0.5) / 0.2 - 0.1)

    def test_torus_composition_shock_case(self):
        sol = riemann_torus_solution(1.0, -1.0)
        xs = np.array([0.05, 0.2, 0.49, 0.51, 0.8, 0.95])
        vals = sol.u(xs, 0.1)
        expect = np.array([0.5, 1.0, 1.0, -1.0, -1.0, -0.5])  # fan at the wrap
        assert np.allclose(vals, expect)
        assert sol.shock_loci(0.1) == [0.5]

    def test_torus_composition_fan_case(self):
        sol = riemann_torus_solution(-1.0, 1.0)
        xs = np.array([0.04, 0.2, 0.45, 0.5, 0.55, 0.8, 0.97])
        vals = sol.u(xs, 0.2)
        expect = np.array([-1.0, -1.0, -0.25, 0.0, 0.25, 1.0, 1.0])
        assert np.allclose(vals, expect)
        assert sol.shock_loci(0.2) == [0.0]

    def test_interaction_detection(self):
        sol = riemann_torus_solution(-1.0, 1.0)
        with pytest.raises(OracleUnavailable):
            sol.u(np.array([0.3]), 0.7)

    def test_non_zero_mean_rejected(self):
        with pytest.raises(OracleUnavailable):
            riemann_torus_solution(1.0, -0.5)


class TestCharacteristicsSolution:
    def test_matches_hopf_lax_for_autonomous_flux(self):
        model = make_model("burgers")
        sol = characteristics_solution(cosine_slope, cosine_potential, model)
        hl = hopf_lax_solution(cosine_potential, model, slope_bound=2.0)
        for x, t in ((0.3, 0.1), (0.7, 0.05)):
            assert sol.v(x, t) == pytest.approx(float(hl.v(x, t)[0]), abs=1e-8)
            assert sol.u(x, t) == pytest.approx(hl.u(x, t), abs=1e-7)

    def test_forced_flux_short_time_consistency(self):
        # the potential from the curve integral must satisfy the equation
        # residual v_t + H(x, t, c + v_x) - h = 0 by finite differences
        model = make_model("quadratic-forced", amplitude=0.15, omega=0.7)
        u0 = lambda y: 0.2 * np.sin(TWO_PI * np.asarray(y, float))
        v0 = lambda y: -0.2 * np.cos(TWO_PI * np.asarray(y, float)) / TWO_PI
        sol = characteristics_solution(u0, v0, model)
        x, t, d = 0.41, 0.06, 2e-4
        vt = (sol.v(x, t + d) - sol.v(x, t - d)) / (2 * d)
        vx = (sol.v(x + d, t) - sol.v(x - d, t)) / (2 * d)
        residual = vt + float(model.hamiltonian.eval(x, t, vx))
        assert residual == pytest.approx(0.0, abs=5e-4)

    def test_crossing_detected(self):
        model = make_model("burgers")
        sol = characteristics_solution(cosine_slope, cosine_potential, model)
        with pytest.raises(OracleUnavailable):
            sol.u(0.5, 0.5)  # past the first crossing time
