"""Unit tests for the Bismut and finite-difference estimators and the verification helpers."""
import numpy as np
import pytest


def _setup(model, sampler, grid, N=400, seed=11, threads=1):
    from src.bismut.estimators import RunSetup

    return RunSetup(model, sampler, grid, N, seed, threads)


class TestCheckFlavor:
    """Tests for the flavor/model compatibility checks."""

    def test_additive_needs_additive_noise(self):
        """additive_exact on a tanh-noise model raises ModelNotAdditive."""
        from src.bismut.estimators import Flavor, check_flavor
        from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model
        from src.errors import ModelNotAdditive

        model = linear_meanfield_delay_model(LinearDelayParams(sigma_tanh=0.25))
        with pytest.raises(ModelNotAdditive):
            check_flavor(model, Flavor.ADDITIVE_EXACT)
        check_flavor(model, Flavor.MULTIPLICATIVE_EXACT)

    def test_hamiltonian_flavors_need_split(self, ou_model):
        """Hamiltonian flavors on a plain model raise ModelNotHamiltonian."""
        from src.bismut.estimators import Flavor, check_flavor
        from src.errors import ModelNotHamiltonian

        for flavor in (Flavor.HAMILTONIAN_EXACT, Flavor.ASYMPTOTIC_HAMILTONIAN):
            with pytest.raises(ModelNotHamiltonian):
                check_flavor(ou_model, flavor)

    def test_asymptotic_needs_lambda(self, ou_model, zero_start, small_grid, first_coordinate, unit_shift):
        """Asymptotic flavors without lam are rejected before simulating."""
        from src.bismut.estimators import Flavor, estimate_bismut

        with pytest.raises(ValueError):
            estimate_bismut(first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, _setup(ou_model, zero_start, small_grid))


class TestEstimateBismut:
    """Tests for estimate_bismut."""

    def test_additive_flat_model(self, flat_model, zero_start, small_grid, first_coordinate, unit_shift):
        """X_T = X_0 + W_T: the derivative along a unit shift is 1."""
        from src.bismut.estimators import Flavor, estimate_bismut

        est = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, unit_shift, _setup(flat_model, zero_start, small_grid, N=4000))
        assert est.n_particles == 4000
        assert est.weights.shape == (4000,)
        assert abs(est.value - 1.0) <= 4.0 * est.stderr
        assert est.remainder is None
        assert not est.remainder_included

    def test_multiplicative_flat_model(self, flat_model, zero_start, small_grid, first_coordinate, unit_shift):
        """The multiplicative construction on the same model is also unbiased."""
        from src.bismut.estimators import Flavor, estimate_bismut

        est = estimate_bismut(
            first_coordinate, Flavor.MULTIPLICATIVE_EXACT, unit_shift, _setup(flat_model, zero_start, small_grid, N=4000)
        )
        assert abs(est.value - 1.0) <= 4.0 * est.stderr

    def test_linear_in_direction(self, delay_model, zero_start, small_grid, first_coordinate):
        """Doubling phi doubles the estimate on the same noise."""
        from src.bismut.estimators import Flavor, estimate_bismut
        from src.bismut.functionals import constant_shift

        setup = _setup(delay_model, zero_start, small_grid)
        base = setup.simulate()
        one = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, constant_shift(1.0), setup, base=base)
        two = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, constant_shift(2.0), setup, base=base)
        assert two.value == pytest.approx(2.0 * one.value, rel=1e-9)

    def test_zero_direction(self, delay_model, zero_start, small_grid, first_coordinate):
        """phi = 0 gives exactly 0."""
        from src.bismut.estimators import Flavor, estimate_bismut
        from src.bismut.functionals import constant_shift

        est = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, constant_shift(0.0), _setup(delay_model, zero_start, small_grid, N=50))
        assert est.value == 0.0

    def test_asymptotic_without_damping_is_remainder(self, ou_model, zero_start, small_grid, first_coordinate, unit_shift):
        """lam = 0 and no mean field: the weights vanish and the value is the remainder."""
        from src.bismut.estimators import Flavor, estimate_bismut

        est = estimate_bismut(
            first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, _setup(ou_model, zero_start, small_grid, N=50), lam=0.0
        )
        assert np.all(est.weights == 0.0)
        assert est.remainder_included
        assert est.value == est.remainder
        # Z without damping is the Euler OU tangent (1 - dt)^n
        assert est.remainder == pytest.approx(0.95 ** 20, rel=1e-12)

    def test_asymptotic_remainder_optional(self, ou_model, zero_start, small_grid, first_coordinate, unit_shift):
        """include_remainder=False reports the remainder without adding it."""
        from src.bismut.estimators import Flavor, estimate_bismut

        setup = _setup(ou_model, zero_start, small_grid, N=50)
        est = estimate_bismut(first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, setup, lam=5.0, include_remainder=False)
        assert not est.remainder_included
        assert est.value == pytest.approx(float(np.mean(est.weights)))
        assert est.remainder is not None
        assert est.diagnostics["truncation_error"] == abs(est.remainder)
        assert est.diagnostics["remainder_method"] == "analytic"

    def test_hamiltonian_diagnostics(self, small_grid, first_coordinate):
        """Hamiltonian estimates record the Gram and steering-path diagnostics."""
        from src.bismut.estimators import Flavor, estimate_bismut
        from src.bismut.functionals import constant_shift
        from src.models.hamiltonian import hamiltonian_linear, hamiltonian_model
        from src.solver.particles import constant_sampler

        model = hamiltonian_model(hamiltonian_linear(dim=1, c=0.2))
        setup = _setup(model, constant_sampler([0.0, 0.0], dim=2), small_grid, N=100)
        est = estimate_bismut(first_coordinate, Flavor.HAMILTONIAN_EXACT, constant_shift([1.0, 0.0]), setup)
        assert est.diagnostics["gram_min_singular_value"] > 0.0
        assert est.diagnostics["alpha_terminal_sup"] <= 1e-8
        assert np.isfinite(est.value)

    def test_to_dict(self, ou_model, zero_start, small_grid, first_coordinate, unit_shift):
        """Serialized estimates carry the flavor name and no weights."""
        from src.bismut.estimators import Flavor, estimate_bismut

        est = estimate_bismut(first_coordinate, "additive_exact", unit_shift, _setup(ou_model, zero_start, small_grid, N=20))
        data = est.to_dict()
        assert est.flavor == Flavor.ADDITIVE_EXACT
        assert data["flavor"] == "additive_exact"
        assert "weights" not in data
        assert est.weights.flags.writeable is False


class TestEstimateFd:
    """Tests for estimate_fd."""

    def test_zero_direction(self, delay_model, zero_start, small_grid, first_coordinate):
        """phi = 0 gives exactly 0."""
        from src.bismut.estimators import estimate_fd
        from src.bismut.functionals import constant_shift

        fd = estimate_fd(first_coordinate, constant_shift(0.0), 1e-3, _setup(delay_model, zero_start, small_grid, N=20))
        assert fd.value == 0.0

    def test_linear_model_matches_delay_euler(self, delay_model, zero_start, small_grid, first_coordinate, unit_shift):
        """Linear dynamics: the quotient is the grid Euler delay-ODE value for every epsilon."""
        from src.bismut.estimators import estimate_fd
        from src.bismut.oracles import delay_ode_euler
        from src.models.linear_delay import LinearDelayParams

        setup = _setup(delay_model, zero_start, small_grid, N=50)
        expected = delay_ode_euler(LinearDelayParams(a=0.5, b1=0.3, c=0.4), 1.0, small_grid)[-1]
        for eps in (1e-3, 1e-1):
            fd = estimate_fd(first_coordinate, unit_shift, eps, setup, richardson=False)
            assert fd.value == pytest.approx(expected, rel=1e-8)
            assert fd.quotient_half is None
            assert fd.epsilon_term == 0.0

    def test_richardson(self, delay_model, zero_start, small_grid, first_coordinate, unit_shift):
        """Richardson pairs D(eps) with D(eps/2)."""
        from src.bismut.estimators import estimate_fd

        fd = estimate_fd(first_coordinate, unit_shift, 1e-2, _setup(delay_model, zero_start, small_grid, N=50))
        assert fd.quotient_half is not None
        assert fd.value == pytest.approx(2.0 * fd.quotient_half - fd.quotient, rel=1e-10)
        assert fd.epsilon_term == pytest.approx(abs(fd.quotient_half - fd.quotient))

    def test_epsilon_positive(self, delay_model, zero_start, small_grid, first_coordinate, unit_shift):
        """epsilon <= 0 is rejected."""
        from src.bismut.estimators import estimate_fd

        with pytest.raises(ValueError):
            estimate_fd(first_coordinate, unit_shift, 0.0, _setup(delay_model, zero_start, small_grid, N=4))


class TestVerification:
    """Tests for verify_ibp, verify_chain_rule and damped_decay_slope."""

    def test_ibp_zero_control(self, ou_model, zero_start, small_grid, first_coordinate):
        """hdot = 0: both sides vanish."""
        from src.bismut.verification import verify_ibp
        from src.tangents.types import constant_control

        setup = _setup(ou_model, zero_start, small_grid, N=30)
        check = verify_ibp(first_coordinate, constant_control(small_grid, 30, 1, 0.0), setup)
        assert check.lhs == 0.0
        assert check.rhs == 0.0
        assert check.to_dict()["gap"] == 0.0

    def test_chain_rule_identity(self, first_coordinate, unit_shift):
        """outer = identity, g = xi(0), phi = 1: both sides equal 1."""
        from src.bismut.verification import verify_chain_rule

        samples = np.random.default_rng(0).normal(size=(100, 3, 1))
        check = verify_chain_rule(first_coordinate, lambda x: x, lambda x: 1.0, unit_shift, samples)
        assert check.analytic == pytest.approx(1.0)
        assert check.numeric == pytest.approx(1.0, abs=1e-9)

    def test_chain_rule_square(self, first_coordinate, unit_shift):
        """outer = x^2: central differences of a quadratic are exact."""
        from src.bismut.verification import verify_chain_rule

        samples = np.random.default_rng(1).normal(size=(500, 3, 1))
        check = verify_chain_rule(first_coordinate, lambda x: x * x, lambda x: 2.0 * x, unit_shift, samples, epsilon=1e-3)
        assert check.analytic == pytest.approx(2.0 * samples[:, -1, 0].mean())
        assert check.gap <= 1e-9
        assert check.stderr > 0.0

    def test_chain_rule_zero_direction(self, first_coordinate):
        """phi = 0 gives 0 on both sides."""
        from src.bismut.functionals import constant_shift
        from src.bismut.verification import verify_chain_rule

        samples = np.ones((4, 2, 1))
        check = verify_chain_rule(first_coordinate, np.exp, np.exp, constant_shift(0.0), samples)
        assert check.numeric == 0.0
        assert check.analytic == 0.0

    def test_decay_slope_of_pure_damping(self, flat_model, zero_start, small_grid):
        """Without drift the damped tangent decays like (1 - lam dt)^n."""
        from src.bismut.verification import damped_decay_slope
        from src.solver.particles import simulate_particles
        from src.tangents.solvers import solve_damped_tangent

        base = simulate_particles(flat_model, zero_start, small_grid, 4, seed=1)
        Z = solve_damped_tangent(flat_model, base, base.law(), np.ones((4, small_grid.k + 1, 1)), lam=2.0)
        # past r0 the window sup is its left end, so the slope is exact
        slope = damped_decay_slope(Z, t_min=0.6, t_max=1.0)
        assert slope == pytest.approx(2.0 * np.log(0.9) / 0.05, rel=1e-9)

    def test_decay_slope_needs_two_points(self, flat_model, zero_start, small_grid):
        """A window with fewer than two grid times is rejected."""
        from src.bismut.verification import damped_decay_slope
        from src.solver.particles import simulate_particles
        from src.tangents.solvers import solve_damped_tangent

        base = simulate_particles(flat_model, zero_start, small_grid, 2, seed=1)
        Z = solve_damped_tangent(flat_model, base, base.law(), np.ones((2, small_grid.k + 1, 1)), lam=1.0)
        with pytest.raises(ValueError):
            damped_decay_slope(Z, t_min=0.51, t_max=0.54)
