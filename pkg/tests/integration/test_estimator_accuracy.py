"""
Integration tests: Bismut estimates against finite differences and the delay-ODE oracles.

On the grid, E[f(X_T) D*(h)] equals E[(grad_{w_T} f)(X_T)] exactly, so exact
flavors on linear models are compared with the Euler value without any dt margin.
"""
import numpy as np
import pytest


def _setup(model, sampler, grid, N, seed=2024, threads=1):
    from src.bismut.estimators import RunSetup

    return RunSetup(model, sampler, grid, N, seed, threads)


class TestAdditiveAccuracy:
    """Additive-noise estimates on the linear delay family."""

    def test_ou_matches_exponential(self, ou_model, zero_start, fine_grid, first_coordinate, unit_shift):
        """OU with a unit shift: the derivative of E X_T is e^{-T}."""
        from src.bismut.estimators import Flavor, estimate_bismut

        est = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, unit_shift, _setup(ou_model, zero_start, fine_grid, 4000))
        assert abs(est.value - 0.99 ** 100) <= 4.0 * est.stderr

    def test_delay_model_matches_oracle(self, delay_model, zero_start, fine_grid, first_coordinate, unit_shift):
        """Delay plus mean field: the estimate matches the delay-ODE oracle."""
        from src.bismut.estimators import Flavor, estimate_bismut
        from src.bismut.oracles import delay_ode_euler
        from src.models.linear_delay import LinearDelayParams

        params = LinearDelayParams(a=0.5, b1=0.3, c=0.4)
        est = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, unit_shift, _setup(delay_model, zero_start, fine_grid, 4000))
        assert abs(est.value - delay_ode_euler(params, 1.0, fine_grid)[-1]) <= 4.0 * est.stderr

    def test_agrees_with_fd(self, delay_model, fine_grid, unit_shift):
        """Random initial law and a bounded functional: Bismut and FD agree."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.functionals import tanh_coordinate
        from src.solver.particles import gaussian_constant_sampler

        f = tanh_coordinate(0)
        setup = _setup(delay_model, gaussian_constant_sampler(0.0, 0.5), fine_grid, 4000)
        base = setup.simulate()
        est = estimate_bismut(f, Flavor.ADDITIVE_EXACT, unit_shift, setup, base=base)
        fd = estimate_fd(f, unit_shift, 1e-3, setup, base=base)
        assert abs(est.value - fd.value) <= 4.0 * np.hypot(est.stderr, fd.stderr) + fd.epsilon_term


class TestAsymptoticAccuracy:
    """Asymptotic flavors with and without the remainder."""

    def test_with_remainder_is_unbiased(self, delay_model, zero_start, fine_grid, first_coordinate, unit_shift):
        """Weights plus remainder estimate the same Euler derivative."""
        from src.bismut.estimators import Flavor, estimate_bismut
        from src.bismut.oracles import delay_ode_euler
        from src.models.linear_delay import LinearDelayParams

        est = estimate_bismut(
            first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, _setup(delay_model, zero_start, fine_grid, 4000), lam=5.0
        )
        expected = delay_ode_euler(LinearDelayParams(a=0.5, b1=0.3, c=0.4), 1.0, fine_grid)[-1]
        assert abs(est.value - expected) <= 4.0 * est.diagnostics["combined_stderr"]

    def test_remainder_shrinks_with_lambda(self, ou_model, zero_start, fine_grid, first_coordinate, unit_shift):
        """The truncation term decays as lam grows."""
        from src.bismut.estimators import Flavor, estimate_bismut

        setup = _setup(ou_model, zero_start, fine_grid, 200)
        base = setup.simulate()
        remainders = [
            abs(estimate_bismut(first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, setup, lam=lam,
                                include_remainder=False, base=base).remainder)
            for lam in (1.0, 5.0, 20.0)
        ]
        assert remainders[0] > remainders[1] > remainders[2]
        assert remainders[2] < 1e-8

    def test_hamiltonian_asymptotic(self, small_grid, first_coordinate):
        """Degenerate damping with remainder agrees with finite differences."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.functionals import constant_shift
        from src.models.hamiltonian import hamiltonian_linear, hamiltonian_model
        from src.solver.particles import constant_sampler

        model = hamiltonian_model(hamiltonian_linear(dim=1, delay=0.2, c=0.3))
        setup = _setup(model, constant_sampler([0.0, 0.0], dim=2), small_grid, 4000)
        phi = constant_shift([1.0, 0.0])
        base = setup.simulate()
        est = estimate_bismut(first_coordinate, Flavor.ASYMPTOTIC_HAMILTONIAN, phi, setup, lam=5.0, base=base)
        fd = estimate_fd(first_coordinate, phi, 1e-3, setup, richardson=False, base=base)
        assert abs(est.value - fd.value) <= 4.0 * est.diagnostics["combined_stderr"]


class TestHamiltonianAccuracy:
    """Exact estimates for degenerate noise."""

    def test_matches_fd(self, small_grid, first_coordinate):
        """Linear kinetic system: the Hamiltonian estimate is unbiased for the FD value."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.functionals import constant_shift
        from src.models.hamiltonian import hamiltonian_linear, hamiltonian_model
        from src.solver.particles import constant_sampler

        model = hamiltonian_model(hamiltonian_linear(dim=1, delay=0.2, c=0.3))
        setup = _setup(model, constant_sampler([0.0, 0.0], dim=2), small_grid, 4000)
        phi = constant_shift([1.0, 0.5])
        base = setup.simulate()
        est = estimate_bismut(first_coordinate, Flavor.HAMILTONIAN_EXACT, phi, setup, base=base)
        fd = estimate_fd(first_coordinate, phi, 1e-3, setup, richardson=False, base=base)
        assert fd.stderr <= 1e-9
        assert abs(est.value - fd.value) <= 4.0 * est.stderr


class TestMultiplicativeAccuracy:
    """Exact estimate for state-dependent noise."""

    def test_matches_fd(self, fine_grid, unit_shift):
        """tanh noise: the multiplicative estimate agrees with FD."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.functionals import tanh_coordinate
        from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model
        from src.solver.particles import constant_sampler

        model = linear_meanfield_delay_model(LinearDelayParams(a=0.5, b1=0.3, c=0.4, sigma_tanh=0.25))
        f = tanh_coordinate(0)
        setup = _setup(model, constant_sampler(0.0), fine_grid, 4000)
        base = setup.simulate()
        est = estimate_bismut(f, Flavor.MULTIPLICATIVE_EXACT, unit_shift, setup, base=base)
        fd = estimate_fd(f, unit_shift, 1e-3, setup, base=base)
        assert abs(est.value - fd.value) <= 4.0 * (np.hypot(est.stderr, fd.stderr) + fd.epsilon_term)


class TestIntegrationByParts:
    """verify_ibp on the OU model."""

    def test_unit_control(self, ou_model, zero_start, fine_grid, first_coordinate):
        """hdot = 1: both sides estimate 1 - e^{-T}."""
        from src.bismut.verification import verify_ibp
        from src.tangents.types import constant_control

        setup = _setup(ou_model, zero_start, fine_grid, 4000)
        check = verify_ibp(first_coordinate, constant_control(fine_grid, 4000, 1, 1.0), setup)
        assert check.gap <= 4.0 * check.stderr
        assert check.lhs == pytest.approx(1.0 - 0.99 ** 100, rel=1e-10)
        assert check.lhs == pytest.approx(1.0 - np.exp(-1.0), abs=5e-3)


class TestThreadDeterminism:
    """Thread counts never change results."""

    @pytest.mark.parametrize("flavor", ["additive_exact", "asymptotic_nondeg"])
    def test_weights_identical(self, delay_model, small_grid, first_coordinate, unit_shift, flavor):
        """Weights are bit-identical for 1 and 4 threads."""
        from src.bismut.estimators import estimate_bismut
        from src.solver.particles import gaussian_constant_sampler

        sampler = gaussian_constant_sampler(0.0, 1.0)
        one = estimate_bismut(first_coordinate, flavor, unit_shift, _setup(delay_model, sampler, small_grid, 257, threads=1), lam=5.0)
        four = estimate_bismut(first_coordinate, flavor, unit_shift, _setup(delay_model, sampler, small_grid, 257, threads=4), lam=5.0)
        np.testing.assert_array_equal(one.weights, four.weights)
        assert one.value == four.value

    def test_hamiltonian_identical(self, small_grid, first_coordinate):
        """The Hamiltonian pipeline is thread-independent too."""
        from src.bismut.estimators import estimate_bismut
        from src.bismut.functionals import constant_shift
        from src.models.hamiltonian import hamiltonian_linear, hamiltonian_model
        from src.solver.particles import constant_sampler

        model = hamiltonian_model(hamiltonian_linear(dim=1, c=0.3))
        sampler = constant_sampler([0.0, 0.0], dim=2)
        runs = [
            estimate_bismut(first_coordinate, "hamiltonian_exact", constant_shift([1.0, 0.0]),
                            _setup(model, sampler, small_grid, 65, threads=threads))
            for threads in (1, 3)
        ]
        np.testing.assert_array_equal(runs[0].weights, runs[1].weights)


@pytest.mark.slow
class TestFullSizeRuns:
    """Full-size runs with N = 1e5 on the dt = 1/200 grid, within three standard errors."""

    def test_ou_full_size(self, ou_model, zero_start, dense_grid, first_coordinate, unit_shift):
        """OU: the additive estimate matches e^{-1}."""
        from src.bismut.estimators import Flavor, estimate_bismut

        est = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, unit_shift, _setup(ou_model, zero_start, dense_grid, 100_000))
        assert est.stderr <= 0.02
        assert abs(est.value - np.exp(-1.0)) <= 3.0 * est.stderr

    def test_delay_full_size(self, delay_model, zero_start, dense_grid, first_coordinate, unit_shift):
        """Delay plus mean field: the estimate matches the method-of-steps oracle and CRN finite differences."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.oracles import deterministic_tangent_oracle
        from src.models.linear_delay import LinearDelayParams

        setup = _setup(delay_model, zero_start, dense_grid, 100_000)
        base = setup.simulate()
        est = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, unit_shift, setup, base=base)
        fd = estimate_fd(first_coordinate, unit_shift, 1e-3, setup, richardson=False, base=base)
        oracle = deterministic_tangent_oracle(LinearDelayParams(a=0.5, b1=0.3, c=0.4), 1.0, 1.0, dense_grid)
        assert abs(est.value - oracle) <= 3.0 * est.stderr
        assert abs(est.value - fd.value) <= 3.0 * est.stderr

    def test_ibp_full_size(self, ou_model, zero_start, dense_grid, first_coordinate):
        """Integration by parts with hdot = 1: both sides agree and lhs is close to 1 - e^{-1}."""
        from src.bismut.verification import verify_ibp
        from src.tangents.types import constant_control

        setup = _setup(ou_model, zero_start, dense_grid, 100_000)
        check = verify_ibp(first_coordinate, constant_control(dense_grid, 100_000, 1, 1.0), setup)
        assert check.gap <= 3.0 * check.stderr
        assert abs(check.lhs - (1.0 - np.exp(-1.0))) <= 3.0 * check.stderr

    def test_asymptotic_agrees_with_exact(self, delay_model, zero_start, dense_grid, first_coordinate, unit_shift):
        """With the remainder the asymptotic estimate matches additive_exact; the omitted part shrinks with lam."""
        from src.bismut.estimators import Flavor, estimate_bismut

        setup = _setup(delay_model, zero_start, dense_grid, 100_000)
        base = setup.simulate()
        exact = estimate_bismut(first_coordinate, Flavor.ADDITIVE_EXACT, unit_shift, setup, base=base)

        omitted = {}
        for lam in (5.0, 20.0):
            full = estimate_bismut(first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, setup, lam=lam, base=base)
            bare = estimate_bismut(
                first_coordinate, Flavor.ASYMPTOTIC_NONDEG, unit_shift, setup, lam=lam, include_remainder=False, base=base
            )
            combined = np.hypot(full.diagnostics["combined_stderr"], exact.stderr)
            assert abs(full.value - exact.value) <= 3.0 * combined
            omitted[lam] = abs(full.value - bare.value)
        assert omitted[5.0] >= 2.0 * omitted[20.0]

    def test_multiplicative_full_size(self, dense_grid, unit_shift):
        """tanh noise: the multiplicative estimate matches Richardson finite differences."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.functionals import tanh_coordinate
        from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model
        from src.solver.particles import constant_sampler

        model = linear_meanfield_delay_model(LinearDelayParams(a=0.5, b1=0.3, c=0.4, sigma_tanh=0.25))
        f = tanh_coordinate(0)
        setup = _setup(model, constant_sampler(0.0), dense_grid, 100_000)
        base = setup.simulate()
        est = estimate_bismut(f, Flavor.MULTIPLICATIVE_EXACT, unit_shift, setup, base=base)
        fd = estimate_fd(f, unit_shift, 1e-3, setup, base=base)
        assert abs(est.value - fd.value) <= 3.0 * (np.hypot(est.stderr, fd.stderr) + fd.epsilon_term)

    def test_hamiltonian_full_size(self, dense_grid, first_coordinate):
        """Hamiltonian estimate against finite differences on the linear kinetic system."""
        from src.bismut.estimators import Flavor, estimate_bismut, estimate_fd
        from src.bismut.functionals import constant_shift
        from src.models.hamiltonian import hamiltonian_linear, hamiltonian_model
        from src.solver.particles import constant_sampler

        model = hamiltonian_model(hamiltonian_linear(dim=1, delay=0.2, c=0.3))
        setup = _setup(model, constant_sampler([0.0, 0.0], dim=2), dense_grid, 100_000)
        phi = constant_shift([1.0, 0.5])
        base = setup.simulate()
        est = estimate_bismut(first_coordinate, Flavor.HAMILTONIAN_EXACT, phi, setup, base=base)
        fd = estimate_fd(first_coordinate, phi, 1e-3, setup, richardson=False, base=base)
        assert abs(est.value - fd.value) <= 3.0 * np.hypot(est.stderr, fd.stderr)
