"""
Tests for the kappa = 0 flows and the kappa -> 0 behaviour of the partition functions
"""

import math
import os
import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from conformal_core import LoewnerChain, trace_chain
from drivers import RngSpec
from errors import DomainError, NumericalError
from samplers import sample_two_sided_pair
from semiclassical import (ChordalU, Umu, ZeroFlowState, classical_identity_error,
                           semiclassical_Z_trend, trace_zero_pair, trace_zero_radial, u_chordal,
                           u_mu)


def _distance_to_polyline(points: np.ndarray, line: np.ndarray) -> float:
    """Largest distance from a point to the polyline through ``line``"""
    a, ab = line[:-1], np.diff(line)
    worst = 0.0
    for p in points:
        t = np.clip(((p - a) * np.conj(ab)).real / np.maximum(np.abs(ab) ** 2, 1e-300), 0.0, 1.0)
        worst = max(worst, float(np.min(np.abs(a + t * ab - p))))
    return worst


class TestClassicalPotentials:
    """U_mu and the chordal potential"""

    def test_values_at_the_diameter(self):
        assert u_mu(0.0, 0.0, math.pi) == pytest.approx(0.0, abs=1e-15)
        assert u_chordal(0.0, math.pi) == pytest.approx(0.0, abs=1e-15)

    def test_constants(self):
        assert Umu(2.0).constant == pytest.approx(1.0)
        assert ChordalU().constant == -3.0

    @pytest.mark.parametrize("kappa", [0.5, 2.0, 4.0])
    @pytest.mark.parametrize("mu", [0.0, 1.3])
    def test_identity_holds_for_every_kappa(self, kappa, mu):
        assert classical_identity_error(kappa, mu, 0.4, 2.7) < 1e-12

    @pytest.mark.parametrize("variant", [Umu(0.0), Umu(0.8), ChordalU()], ids=lambda v: v.label)
    def test_gradient(self, variant):
        th1, th2, h = 0.3, 2.4, 1e-6
        d1 = (variant.value(th1 + h, th2) - variant.value(th1 - h, th2)) / (2 * h)
        d2 = (variant.value(th1, th2 + h) - variant.value(th1, th2 - h)) / (2 * h)
        g1, g2 = variant.gradient(th1, th2)
        assert g1 == pytest.approx(d1, abs=1e-7)
        assert g2 == pytest.approx(d2, abs=1e-7)

    def test_unordered_angles(self):
        with pytest.raises(DomainError):
            u_mu(0.0, 1.0, 1.0)


class TestZeroFlowState:
    """Driver and force point of a deterministic flow"""

    def test_gap(self):
        assert ZeroFlowState(0.5, 2.0, 0.0).gap == pytest.approx(1.5)

    def test_coinciding_points(self):
        with pytest.raises(DomainError):
            ZeroFlowState(0.5, 0.5 + 2 * math.pi, 0.0)


class TestZeroRadial:
    """Radial SLE_0^mu(2)"""

    def test_no_spiral_is_a_radius(self):
        trace = trace_zero_radial(0.0, 0.0, math.pi, 1.0, dt=1e-2, n_points=20)
        assert np.max(np.abs(trace.points.imag)) < 1e-9
        # the straight slit reaching x solves 4x / (1 + x)^2 = e^{-t}
        y = math.exp(-1.0)
        assert trace.tip.real == pytest.approx(((2 - y) - 2 * math.sqrt(1 - y)) / y, abs=1e-5)

    def test_spiral_winding_matches_dense_flow(self):
        mu, T, dt = 1.0, 2.0, 1e-3

        def flow(t, y):
            xi, v = y
            return [mu + 1.0 / math.tan(0.5 * (xi - v)), 1.0 / math.tan(0.5 * (v - xi))]

        times = np.linspace(0.0, T, int(round(T / dt)) + 1)
        dense = solve_ivp(flow, (0.0, T), [0.0, math.pi], t_eval=times, method='DOP853',
                          rtol=1e-11, atol=1e-12)
        reference = trace_chain(LoewnerChain.from_driver(times, dense.y[0]), 0.0, 50)
        trace = trace_zero_radial(mu, 0.0, math.pi, T, dt=dt, n_points=50)

        expected = np.unwrap(np.angle(reference.points))[-1]
        winding = np.unwrap(np.angle(trace.points))[-1]
        assert expected > 0
        assert winding == pytest.approx(expected, rel=0.05)

    def test_step_convergence(self):
        coarse = trace_zero_radial(1.0, 0.0, math.pi, 1.0, dt=1e-3, n_points=5)
        fine = trace_zero_radial(1.0, 0.0, math.pi, 1.0, dt=2.5e-4, n_points=5)
        assert abs(coarse.tip - fine.tip) < 1e-2

    def test_coinciding_angles(self):
        with pytest.raises(DomainError):
            trace_zero_radial(0.0, 0.0, 2 * math.pi, 1.0)


class TestZeroPair:
    """Two-sided radial SLE_0 with spiral"""

    def test_diameter_pair(self):
        trace1, trace2 = trace_zero_pair(0.0, 0.0, math.pi, 0.5, 0.05, n_points=10)
        assert np.max(np.abs(trace1.points.imag)) < 1e-6
        assert np.max(np.abs(trace2.points.imag)) < 1e-6
        assert abs(trace1.tip) == pytest.approx(abs(trace2.tip), abs=1e-9)

    def test_reflection_symmetry(self):
        trace1, trace2 = trace_zero_pair(0.0, -1.0, 1.0, 0.5, 0.01, n_points=20)
        assert abs(trace1.tip - np.conj(trace2.tip)) < 1e-9
        assert np.max(np.abs(trace1.points - np.conj(trace2.points))) < 1e-9

    def test_step_halving_moves_tips_little(self):
        coarse = trace_zero_pair(0.5, 0.0, 2.0, 0.48, 2e-4, n_points=2)
        fine = trace_zero_pair(0.5, 0.0, 2.0, 0.48, 1e-4, n_points=2)
        assert abs(coarse[0].tip - fine[0].tip) < 1e-4
        assert abs(coarse[1].tip - fine[1].tip) < 1e-4

    def test_alternating_growth_approaches_the_flows(self):
        reference, _ = trace_zero_pair(0.0, 0.0, 2.0, 0.6, 1e-3, n_points=600)
        distances = []
        for eps in (0.02, 0.01):
            alternating, _, _ = sample_two_sided_pair(0.0, 0.0, 0.0, 2.0, 0.3, eps,
                                                      RngSpec(seed=3), n_points=40)
            distances.append(_distance_to_polyline(alternating.points, reference.points))
        assert distances[1] < distances[0]
        assert distances[1] < 2e-2

    def test_unordered_angles(self):
        with pytest.raises(DomainError):
            trace_zero_pair(0.0, 2.0, 1.0, 0.5, 0.01)


class TestZTrend:
    """kappa log Z_alpha(theta) -> -6 log sin(theta/2)"""

    def test_error_shrinks_with_kappa(self):
        table = semiclassical_Z_trend(0.25, [2.0, 1.0, 0.5, 0.25], math.pi / 2)
        assert list(table.columns) == ['kappa', 'kappa_log_Z', 'limit', 'error']
        assert table['limit'].iloc[0] == pytest.approx(-6 * math.log(math.sin(math.pi / 4)))
        assert table['error'].iloc[-1] < table['error'].iloc[0]

    def test_diameter_is_exact(self):
        table = semiclassical_Z_trend(0.25, [2.0, 1.0], math.pi)
        np.testing.assert_allclose(table['error'], 0.0, atol=1e-10)

    def test_rising_error_raises(self):
        with pytest.raises(NumericalError):
            semiclassical_Z_trend(0.25, [0.25, 0.5, 1.0, 2.0], math.pi / 2)
        table = semiclassical_Z_trend(0.25, [0.25, 2.0], math.pi / 2, strict=False)
        assert len(table) == 2

    def test_alpha_must_stay_below_threshold(self):
        with pytest.raises(DomainError):
            semiclassical_Z_trend(0.9, [2.0], math.pi / 2)
