import numpy as np
import pytest

from lfvar.errors import AssumptionViolated
from lfvar.grid import MeshSpec
from lfvar.model import (
    HamiltonianSpec,
    SampleGrid,
    cfl_estimate,
    conjugate_argmax,
    hamiltonian_p,
    lagrangian_c,
    legendre,
    make_hamiltonian,
    make_lagrangian,
    make_model,
    verify_assumptions,
)

TWO_PI = 2.0 * np.pi


def grid_conjugate(H, x, t, xi, p_lo=-10.0, p_hi=10.0, n=400001):
    """Independent dense-grid evaluation of sup_p {xi*p - H(x,t,p)}."""
    ps = np.linspace(p_lo, p_hi, n)
    return float(np.max(xi * ps - H.eval(x, t, ps)))


class TestLegendre:
    def test_quadratic_at_zero(self):
        H = make_hamiltonian("burgers")
        assert legendre(H, 0.0, 0.0, 0.0) == pytest.approx(0.0, abs=1e-14)

    def test_quadratic_at_one_matches_grid_oracle(self):
        H = make_hamiltonian("burgers")
        oracle = grid_conjugate(H, 0.0, 0.0, 1.0)
        val = float(legendre(H, 0.0, 0.0, 1.0))
        assert val == pytest.approx(0.5, abs=1e-9)
        assert val == pytest.approx(oracle, abs=1e-8)

    def test_forced_flux_with_drift(self):
        # flux p^2/2 - 0.3 at the phase origin; xi = 1, c = 0.2
        H = make_hamiltonian("quadratic-forced", amplitude=0.3, omega=1.0)
        oracle = grid_conjugate(H, 0.0, 0.0, 1.0) - 0.2 * 1.0
        val = float(legendre(H, 0.0, 0.0, 1.0, c=0.2))
        assert val == pytest.approx(0.6, abs=1e-9)
        assert val == pytest.approx(oracle, abs=1e-8)

    def test_numeric_conjugate_matches_grid_oracle(self):
        H = make_hamiltonian("quartic")
        for xi in (-2.0, -0.3, 0.0, 0.7, 2.0):
            oracle = grid_conjugate(H, 0.0, 0.0, xi)
            assert float(legendre(H, 0.0, 0.0, xi)) == pytest.approx(oracle, abs=1e-8)

    def test_numeric_root_is_slope_inverse(self):
        H = make_hamiltonian("quartic")
        xi = np.array([-1.5, 0.0, 0.4, 3.0])
        p = conjugate_argmax(H, 0.0, 0.0, xi)
        assert np.max(np.abs(hamiltonian_p(H, 0.0, 0.0, p) - xi)) < 1e-10


class TestHamiltonianSlope:
    def test_quadratic(self):
        H = make_hamiltonian("burgers")
        assert float(hamiltonian_p(H, 0.0, 0.0, 0.0)) == 0.0
        assert float(hamiltonian_p(H, 0.3, 0.1, 2.0)) == 2.0

    def test_quartic_finite_difference_fallback(self):
        H = make_hamiltonian("quartic")
        H_fd = HamiltonianSpec(name="quartic-fd", eval=H.eval, kind="numeric-conjugate", p_max=4.0)
        # derivative of p^4/4 + p^2/2 at p = 1 is 2
        assert float(hamiltonian_p(H_fd, 0.0, 0.0, 1.0)) == pytest.approx(2.0, abs=1e-8)

    def test_rejects_non_finite(self):
        H = make_hamiltonian("burgers")
        with pytest.raises(ValueError):
            hamiltonian_p(H, 0.0, 0.0, np.nan)


class TestAssumptions:
    def test_quadratic_passes_with_zero_growth_witness(self):
        rep = verify_assumptions(make_hamiltonian("burgers"))
        assert rep.alpha1_hat == 0.0
        assert rep.a2_min_curvature > 0.99
        assert rep.a3_ratio_full > rep.a3_ratio_half

    def test_sin_forced_witness_matches_grid_maximization(self):
        # flux p^2/2 - sin(2*pi*x): running cost xi^2/2 + sin(2*pi*x)
        H = HamiltonianSpec(
            name="sin-forced",
            eval=lambda x, t, p: 0.5 * np.square(p) - np.sin(TWO_PI * np.asarray(x, float)),
            deriv_p=lambda x, t, p: np.asarray(p, float),
            deriv_x=lambda x, t, p: -TWO_PI * np.cos(TWO_PI * np.asarray(x, float)) + 0.0 * np.asarray(p, float),
            kind="analytic-conjugate",
            conjugate=lambda x, t, xi: 0.5 * np.square(xi) + np.sin(TWO_PI * np.asarray(x, float)),
            conjugate_deriv_x=lambda x, t, xi: TWO_PI * np.cos(TWO_PI * np.asarray(x, float)) + 0.0 * np.asarray(xi, float),
            conjugate_deriv_xi=lambda x, t, xi: np.asarray(xi, float),
            conjugate_deriv_xx=lambda x, t, xi: -TWO_PI**2 * np.sin(TWO_PI * np.asarray(x, float)) + 0.0 * np.asarray(xi, float),
        )
        rep = verify_assumptions(H)
        grid = rep.grid
        xs, ts, zs = grid.xs(), grid.ts(), grid.xis()
        X, T, Z = np.meshgrid(xs, ts, zs, indexing="ij")
        ratio = np.abs(TWO_PI * np.cos(TWO_PI * X)) / (np.abs(0.5 * Z**2 + np.sin(TWO_PI * X)) + 1.0)
        assert rep.alpha1_hat == pytest.approx(float(np.max(ratio)), rel=1e-12)
        assert rep.alpha1_hat <= TWO_PI + 1e-12
        assert rep.alpha1_hat == pytest.approx(TWO_PI, rel=1e-12)  # attained at cos = +-1, xi = 0

    def test_linear_flux_fails_convexity(self):
        H = HamiltonianSpec(name="linear", eval=lambda x, t, p: np.asarray(p, float))
        with pytest.raises(AssumptionViolated) as err:
            verify_assumptions(H)
        assert err.value.clause == "A2"

    def test_linear_growth_fails_superlinearity(self):
        H = HamiltonianSpec(name="soft", eval=lambda x, t, p: np.sqrt(1.0 + np.square(p)))
        with pytest.raises(AssumptionViolated) as err:
            verify_assumptions(H)
        assert err.value.clause == "A3"

    def test_broken_periodicity_detected(self):
        H = HamiltonianSpec(name="aperiodic", eval=lambda x, t, p: 0.5 * np.square(p) + 0.01 * np.asarray(x, float))
        with pytest.raises(AssumptionViolated) as err:
            verify_assumptions(H)
        assert err.value.clause.startswith("A1")


class TestCflEstimate:
    def test_quadratic_reference_constants(self):
        est = cfl_estimate(make_hamiltonian("burgers"), (0.0, 0.0), r=1.0, T=1.0)
        assert est.alpha1 == 0.0
        assert est.alpha2 == pytest.approx(1.0, abs=1e-12)
        assert est.alpha3 == 0.0
        assert est.slope_bound == pytest.approx(2.0, abs=1e-12)
        assert est.cfl_limit == pytest.approx(0.5, abs=1e-12)
        assert est.cfl_limit == 1.0 / est.slope_bound

    def test_r_zero(self):
        est = cfl_estimate(make_hamiltonian("burgers"), (0.0, 0.0), r=0.0, T=1.0)
        assert est.slope_bound == pytest.approx(1.0, abs=1e-12)
        assert est.cfl_limit == pytest.approx(1.0, abs=1e-12)

    def test_drift_interval(self):
        est = cfl_estimate(make_hamiltonian("burgers"), (-1.0, 1.0), r=0.0, T=1.0)
        assert est.slope_bound == pytest.approx(2.0, abs=1e-12)

    def test_forced_theta_positive_and_invariants(self):
        est = cfl_estimate(make_hamiltonian("quadratic-forced", amplitude=0.2), (0.0, 0.0), r=0.5, T=0.5)
        assert est.alpha1 >= 0.0
        assert est.alpha2 >= est.r
        assert est.alpha3 >= 0.0
        assert est.slope_bound > 0.0
        assert est.theta == pytest.approx(0.5 * TWO_PI**2 * 0.2, rel=1e-10)
        assert est.cfl_limit > 0.0


class TestDuality:
    @pytest.mark.parametrize("name", ["burgers", "quartic"])
    def test_fenchel_round_trip(self, name):
        model = make_model(name)
        H, L = model.hamiltonian, model.lagrangian
        for xi in np.linspace(-2.0, 2.0, 9):
            p_star = float(conjugate_argmax(H, 0.0, 0.0, xi))
            # sup attained where the slope matches
            assert float(hamiltonian_p(H, 0.0, 0.0, p_star)) == pytest.approx(xi, abs=1e-8)
            # velocity derivative of the running cost returns the momentum
            assert float(L.deriv_xi(0.0, 0.0, xi)) == pytest.approx(p_star, abs=1e-8)

    def test_running_cost_convex_in_velocity(self):
        model = make_model("quartic")
        xis = np.linspace(-3.0, 3.0, 61)
        vals = np.array([lagrangian_c(model, 0.0, 0.0, xi) for xi in xis])
        curv = vals[2:] - 2 * vals[1:-1] + vals[:-2]
        assert np.min(curv) >= -1e-10

    def test_lagrangian_derivatives_match_central_differences(self):
        model = make_model("quadratic-forced", amplitude=0.3, omega=0.7)
        L = model.lagrangian
        step = 1e-6
        rng = np.random.default_rng(11)
        for _ in range(20):
            x, t, xi = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-2, 2)
            fd_x = (L.eval(x + step, t, xi) - L.eval(x - step, t, xi)) / (2 * step)
            fd_xi = (L.eval(x, t, xi + step) - L.eval(x, t, xi - step)) / (2 * step)
            assert float(L.deriv_x(x, t, xi)) == pytest.approx(float(fd_x), abs=1e-6)
            assert float(L.deriv_xi(x, t, xi)) == pytest.approx(float(fd_xi), abs=1e-6)

    def test_cfl_limit_positive_for_all_builtins(self):
        for name in ("burgers", "quadratic-forced", "quartic"):
            H = make_hamiltonian(name)
            verify_assumptions(H)
            est = cfl_estimate(H, (-0.2, 0.2), r=0.5, T=0.5)
            assert est.cfl_limit > 0.0
