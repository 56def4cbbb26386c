"""
Tests for the driving processes

Covers:
- parameter and RNG validation
- Brownian drivers with spiral
- SLE_kappa^mu(rho) drivers: force-point tracking, branch, fine steps
- adaptive step halving
- the absorbed gap diffusion
"""

import math
import os
import sys

import numpy as np
import pytest
from scipy import special

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from config_loader import DriverSettings
from conformal_core import TWO_PI
from drivers import (SIDE_ALIVE, SIDE_TWO_PI, SIDE_ZERO, CoupledStepper, RngSpec, Side, SleParams,
                     kappa_mu_rho_drift, sample_gap_process, sample_kappa_mu_rho_driver,
                     sample_partition_driver, sample_radial_driver, simulate_gap_batch)
from errors import DomainError, GapCollapse
from partition import Spiral


class TestSleParams:
    """Parameter record and conformal weights"""

    def test_weights(self):
        p = SleParams(2.0)
        assert p.h == pytest.approx(1.0)
        assert p.h_tilde == pytest.approx(0.0)
        assert SleParams(4.0).h_tilde == pytest.approx(0.125)

    def test_weights_need_positive_kappa(self):
        with pytest.raises(DomainError):
            SleParams(0.0).h

    def test_negative_kappa_rejected(self):
        with pytest.raises(DomainError):
            SleParams(-1.0)


class TestRngSpec:
    """Reproducible Philox streams"""

    def test_same_seed_same_draws(self):
        a = RngSpec(7).generator().standard_normal(5)
        b = RngSpec(7).generator().standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_substreams_differ(self):
        base = RngSpec(7).generator().standard_normal(5)
        other = RngSpec(7, stream=1).generator().standard_normal(5)
        block = RngSpec(7).substream(3).standard_normal(5)
        assert not np.array_equal(base, other)
        assert not np.array_equal(base, block)

    def test_negative_seed_rejected(self):
        with pytest.raises(DomainError):
            RngSpec(-1)


class TestRadialDriver:
    """xi_t = theta0 + sqrt(kappa) B_t + mu t"""

    def test_deterministic_spiral(self):
        path = sample_radial_driver(SleParams(0.0, mu=1.5), 0.2, 1.0, 0.1, RngSpec(1))
        np.testing.assert_allclose(path.xi, 0.2 + 1.5 * path.times, atol=1e-14)

    def test_zero_time_is_start(self):
        path = sample_radial_driver(SleParams(2.0), 0.5, 0.0, 0.1, RngSpec(1))
        assert path.times.tolist() == [0.0]
        assert path.xi.tolist() == [0.5]
        assert path.to_chain().n_steps == 0

    def test_increment_variance(self):
        dt = 1e-3
        path = sample_radial_driver(SleParams(3.0), 0.0, 20.0, dt, RngSpec(11))
        increments = np.diff(path.xi)
        assert np.var(increments) / dt == pytest.approx(3.0, rel=0.05)

    def test_invalid_step_rejected(self):
        with pytest.raises(DomainError):
            sample_radial_driver(SleParams(2.0), 0.0, 1.0, 0.0, RngSpec(1))


class TestKappaMuRhoDriver:
    """Driver with a tracked force point"""

    def test_drift_formula(self):
        drift = kappa_mu_rho_drift(SleParams(2.0, mu=0.5, rho=2.0))
        assert drift(0.0, math.pi / 2) == pytest.approx(-0.5)
        assert drift(0.0, math.pi) == pytest.approx(0.5)

    def test_symmetric_start_stays_put(self):
        path = sample_kappa_mu_rho_driver(SleParams(0.0, 0.0, 2.0), 0.0, math.pi, 1.0, 0.01, RngSpec(3))
        assert np.max(np.abs(path.xi)) < 1e-12
        np.testing.assert_allclose(path.v, math.pi, atol=1e-12)

    def test_gap_stays_in_interval(self):
        path = sample_kappa_mu_rho_driver(SleParams(2.0, 0.3, 2.0), 0.0, 1.0, 2.0, 0.01, RngSpec(5))
        gap = path.gap
        assert np.all(gap > 0) and np.all(gap < TWO_PI)

    def test_branch_of_theta2_is_kept(self):
        path = sample_kappa_mu_rho_driver(SleParams(2.0, 0.0, 2.0), 0.0, -math.pi, 0.5, 0.01, RngSpec(5))
        assert path.v[0] == pytest.approx(-math.pi)
        assert np.all(path.v - path.xi < 0)

    def test_fine_steps_cover_the_horizon(self):
        path = sample_kappa_mu_rho_driver(SleParams(3.0, 1.0, 2.0), 0.0, 0.5, 1.0, 0.05, RngSpec(9))
        chain = path.to_chain()
        assert chain.total_capacity == pytest.approx(1.0, abs=1e-12)
        assert chain.n_steps >= path.times.size - 1

    def test_parameter_domain(self):
        with pytest.raises(DomainError):
            sample_kappa_mu_rho_driver(SleParams(8.0), 0.0, 1.0, 1.0, 0.1, RngSpec(1))
        with pytest.raises(DomainError):
            sample_kappa_mu_rho_driver(SleParams(2.0, rho=-2.0), 0.0, 1.0, 1.0, 0.1, RngSpec(1))
        with pytest.raises(DomainError):
            sample_kappa_mu_rho_driver(SleParams(2.0), 1.0, 1.0 + TWO_PI, 1.0, 0.1, RngSpec(1))

    def test_partition_driver_matches_spiral_drift(self):
        # the spiral family's b_1 is the rho = 2 drift with the same mu
        pf = Spiral(2.0, 0.7)
        direct = sample_kappa_mu_rho_driver(SleParams(2.0, 0.7, 2.0), 0.0, 2.0, 0.5, 0.01, RngSpec(4))
        marginal = sample_partition_driver(pf, 0.0, 2.0, 0.5, 0.01, RngSpec(4))
        np.testing.assert_allclose(marginal.xi, direct.xi, atol=1e-12)
        np.testing.assert_allclose(marginal.v, direct.v, atol=1e-12)

    def test_zero_rho_is_the_radial_driver(self):
        params = SleParams(2.0, 0.7, 0.0)
        tracked = sample_kappa_mu_rho_driver(params, 0.0, math.pi, 0.2, 0.01, RngSpec(4))
        radial = sample_radial_driver(SleParams(2.0, 0.7), 0.0, 0.2, 0.01, RngSpec(4))
        assert tracked.halvings == 0
        np.testing.assert_allclose(tracked.times, radial.times, atol=0)
        np.testing.assert_allclose(tracked.xi, radial.xi, atol=1e-12)

    def test_increments_carry_the_gap_drift(self):
        # xi_T - xi_0 minus the summed drift along the path is sqrt(kappa) B_T
        params = SleParams(2.0, 0.5, 2.0)
        drift = kappa_mu_rho_drift(params)
        T, dt, n = 0.2, 0.01, 1500
        residuals = []
        for seed in range(n):
            path = sample_kappa_mu_rho_driver(params, 0.0, math.pi, T, dt, RngSpec(seed, stream=7))
            if path.halvings:
                continue
            drifted = sum(drift(x, g) * h for x, g, h in zip(path.xi[:-1], path.gap[:-1], np.diff(path.times)))
            residuals.append(path.xi[-1] - path.xi[0] - drifted)
        residuals = np.asarray(residuals)
        assert residuals.size >= 0.95 * n
        stderr = math.sqrt(params.kappa * T / residuals.size)
        assert abs(residuals.mean()) < 4 * stderr
        assert residuals.var() == pytest.approx(params.kappa * T, rel=0.15)


class TestCoupledStepper:
    """Adaptive halving of a single grid step"""

    def test_fast_drift_is_halved(self):
        stepper = CoupledStepper(0.0, lambda xi, gap: 5.0, RngSpec(1).generator())
        stepper.step(0.0, math.pi, math.pi, 0.1)
        steps = stepper.take_steps()
        assert stepper.halvings >= 1
        assert len(steps) >= 2
        assert math.fsum(steps[:, 0]) == pytest.approx(0.1, abs=1e-15)

    def test_slow_drift_is_one_step(self):
        stepper = CoupledStepper(0.0, lambda xi, gap: 0.1, RngSpec(1).generator())
        xi, v, gap = stepper.step(0.0, math.pi, math.pi, 0.01)
        assert stepper.halvings == 0
        assert xi == pytest.approx(0.001)
        assert gap == pytest.approx(v - xi)

    def test_collapse_after_all_halvings(self):
        settings = DriverSettings(max_halvings=3)
        stepper = CoupledStepper(0.0, lambda xi, gap: 1e6, RngSpec(1).generator(), settings)
        with pytest.raises(GapCollapse):
            stepper.step(0.0, math.pi, math.pi, 0.1)


class TestGapDiffusion:
    """d theta = sqrt(kappa) dB + (kappa - 4)/2 cot(theta/2) dt, absorbed at 0 and 2pi"""

    def test_all_paths_absorbed(self):
        batch = simulate_gap_batch(4.0, math.pi, 1e-2, 200, RngSpec(2).generator())
        assert np.all(batch.absorbed)
        assert np.all(batch.exit_time > 0)
        assert set(np.unique(batch.side)) <= {SIDE_ZERO, SIDE_TWO_PI}
        assert not batch.censored.any()

    def test_sides_match_stopped_values(self):
        batch = simulate_gap_batch(6.0, 2.0, 1e-2, 100, RngSpec(2).generator())
        np.testing.assert_array_equal(batch.theta_stop[batch.side == SIDE_ZERO], 0.0)
        np.testing.assert_array_equal(batch.theta_stop[batch.side == SIDE_TWO_PI], TWO_PI)

    def test_reproducible(self):
        a = simulate_gap_batch(3.0, 1.0, 1e-2, 50, RngSpec(8).generator())
        b = simulate_gap_batch(3.0, 1.0, 1e-2, 50, RngSpec(8).generator())
        np.testing.assert_array_equal(a.exit_time, b.exit_time)
        np.testing.assert_array_equal(a.side, b.side)

    def test_stop_time_freezes_paths(self):
        batch = simulate_gap_batch(4.0, math.pi, 1e-2, 100, RngSpec(2).generator(), t_stop=0.05)
        alive = batch.side == SIDE_ALIVE
        assert alive.sum() > 50
        assert not batch.censored.any()
        assert np.all((batch.theta_stop[alive] > 0) & (batch.theta_stop[alive] < TWO_PI))

    def test_domain(self):
        with pytest.raises(DomainError):
            simulate_gap_batch(4.0, 0.0, 1e-2, 10, RngSpec(1).generator())
        with pytest.raises(DomainError):
            simulate_gap_batch(8.0, 1.0, 1e-2, 10, RngSpec(1).generator())

    def test_single_path(self):
        sample = sample_gap_process(6.0, math.pi, 1e-2, RngSpec(4))
        assert sample.T_absorb > 0
        assert isinstance(sample.side, Side)
        assert sample.path['t'].iloc[0] == 0.0
        assert sample.path['theta'].iloc[0] == math.pi
        assert sample.to_dict(RngSpec(4))['side'] in ('zero', 'two_pi')

    @pytest.mark.parametrize("kappa, theta0", [(6.0, 0.01), (3.0, 0.5)])
    def test_exit_side_follows_the_scale_function(self, kappa, theta0):
        # s'(theta) = sin(theta/2)^((8 - 2 kappa)/kappa) makes the gap a local martingale
        settings = DriverSettings()
        a = (8.0 - kappa) / (2.0 * kappa)
        full = special.beta(a, 0.5)

        def scale(theta):
            return special.betainc(a, 0.5, math.sin(0.5 * theta) ** 2) * full

        low = scale(settings.eps_abs)
        expected = (scale(theta0) - low) / (2.0 * full - 2.0 * low)

        batch = simulate_gap_batch(kappa, theta0, 1e-2, 20000, RngSpec(11).generator(), settings)
        assert np.all(batch.absorbed)
        hits = (batch.side == SIDE_TWO_PI).astype(float)
        stderr = math.sqrt(expected * (1.0 - expected) / hits.size)
        assert abs(hits.mean() - expected) < 4 * stderr

    def test_noise_limited_steps_near_an_endpoint(self):
        coarse = DriverSettings(noise_fraction=1.0)
        fine = DriverSettings(noise_fraction=0.05)
        few = simulate_gap_batch(6.0, 0.01, 1e-2, 200, RngSpec(5).generator(), coarse, t_stop=0.01)
        many = simulate_gap_batch(6.0, 0.01, 1e-2, 200, RngSpec(5).generator(), fine, t_stop=0.01)
        assert many.substeps > few.substeps
