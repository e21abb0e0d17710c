"""
Integration tests: convergence rates of the scheme, the stability bound and the tangent limits.

These are fitted slopes and ratios, so they run at sizes where the fits are stable.
"""
import numpy as np
import pytest


def _tanh_model():
    from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model

    return linear_meanfield_delay_model(LinearDelayParams(a=0.5, b1=0.3, c=0.4, sigma_tanh=0.25))


def _loglog_slope(x, y):
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return slope


@pytest.mark.slow
class TestWeakOrder:
    """Euler-Maruyama is weak order one on the linear delay model."""

    def test_halving_dt_halves_the_error(self):
        """With one Brownian path per particle, E X_T differences shrink by two per halving."""
        from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model
        from src.pathspace.grid import make_grid
        from src.solver.particles import gaussian_constant_sampler, simulate_particles
        from src.solver.rng import brownian_increments, coarsen_increments

        model = linear_meanfield_delay_model(LinearDelayParams(a=1.0, b1=0.3, c=0.4))
        sampler = gaussian_constant_sampler(5.0, 0.5)
        N, seed = 20_000, 11
        finest = make_grid(1.0, 0.0025, 0.5)
        dW = brownian_increments(seed, N, finest.n_steps, 1, finest.dt)

        means = []
        for factor in (4, 2, 1):
            grid = make_grid(1.0, 0.0025 * factor, 0.5)
            run = simulate_particles(model, sampler, grid, N, seed, dW=coarsen_increments(dW, factor))
            means.append(run.paths[:, -1, 0].mean())

        ratio = (means[0] - means[1]) / (means[1] - means[2])
        assert 1.5 <= ratio <= 2.5


@pytest.mark.slow
class TestStability:
    """Initial segments delta apart stay within C delta^p in the p-th moment."""

    @pytest.mark.parametrize("p", [2.0, 4.0])
    def test_moment_of_difference(self, delay_model, fine_grid, unit_shift, p):
        """log-log slope of moment_sup(X^delta - X) against delta is p."""
        from src.solver.particles import ShiftedSampler, gaussian_constant_sampler, moment_sup, simulate_particles

        sampler = gaussian_constant_sampler(0.0, 1.0)
        base = simulate_particles(delay_model, sampler, fine_grid, 10_000, seed=8)
        deltas = np.array([1e-1, 1e-2, 1e-3])
        moments = []
        for delta in deltas:
            shifted = simulate_particles(delay_model, ShiftedSampler(sampler, unit_shift, float(delta)), fine_grid, 10_000, seed=8)
            moments.append(moment_sup(shifted.paths - base.paths, p))
        assert _loglog_slope(deltas, np.array(moments)) == pytest.approx(p, abs=0.1)


@pytest.mark.slow
class TestTangentLimitRates:
    """Difference quotients approach the tangents at rate eps."""

    EPSILONS = np.array([1e-1, 1e-2, 1e-3])

    def test_malliavin_rate(self, fine_grid):
        """sup |(Y^{eps h} - X) / eps - w^h| decays like eps."""
        from src.solver.particles import gaussian_constant_sampler, simulate_decoupled, simulate_particles
        from src.tangents.solvers import solve_malliavin_tangent
        from src.tangents.types import constant_control

        model = _tanh_model()
        base = simulate_particles(model, gaussian_constant_sampler(0.0, 0.5), fine_grid, 2000, seed=6)
        law = base.law()
        control = constant_control(fine_grid, base.N, 1, 1.0)
        w = solve_malliavin_tangent(model, base, law, control)

        errors = []
        for eps in self.EPSILONS:
            shifted = simulate_decoupled(
                model, law, base.segment(0), fine_grid, base.seed, dW=base.dW, control=control, epsilon=float(eps)
            )
            errors.append(np.max(np.abs((shifted.paths - base.paths) / eps - w.values)))
        assert _loglog_slope(self.EPSILONS, np.array(errors)) == pytest.approx(1.0, abs=0.2)

    def test_lions_rate(self, fine_grid, unit_shift):
        """sup |(X^{eps phi} - X) / eps - v| decays like eps."""
        from src.solver.particles import ShiftedSampler, gaussian_constant_sampler, simulate_particles
        from src.tangents.solvers import solve_lions_tangent

        model = _tanh_model()
        sampler = gaussian_constant_sampler(0.0, 0.5)
        base = simulate_particles(model, sampler, fine_grid, 2000, seed=6)
        v = solve_lions_tangent(model, base, base.law(), unit_shift(base.segment(0)))

        errors = []
        for eps in self.EPSILONS:
            shifted = simulate_particles(model, ShiftedSampler(sampler, unit_shift, float(eps)), fine_grid, 2000, seed=6)
            errors.append(np.max(np.abs((shifted.paths - base.paths) / eps - v.values)))
        assert _loglog_slope(self.EPSILONS, np.array(errors)) == pytest.approx(1.0, abs=0.2)


@pytest.mark.slow
class TestDampedDecay:
    """Damped tangents on the mean-field delay model."""

    def test_larger_lambda_decays_faster(self, delay_model, fine_grid, unit_shift):
        """Both fitted slopes are negative and lam = 20 is steeper by more than one."""
        from src.bismut.verification import damped_decay_slope
        from src.solver.particles import gaussian_constant_sampler, simulate_particles
        from src.tangents.solvers import solve_damped_tangent

        base = simulate_particles(delay_model, gaussian_constant_sampler(0.0, 1.0), fine_grid, 10_000, seed=12)
        law = base.law()
        phi = unit_shift(base.segment(0))
        slopes = {
            lam: damped_decay_slope(solve_damped_tangent(delay_model, base, law, phi, lam), 0.2, 1.0)
            for lam in (5.0, 20.0)
        }
        assert slopes[5.0] < 0.0
        assert slopes[20.0] < slopes[5.0] - 1.0
