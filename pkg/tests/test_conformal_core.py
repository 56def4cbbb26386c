"""
Tests for the discrete radial Loewner engine

Covers:
- chain construction and validation
- forward maps: normalization at 0, composition, rotation equivariance
- the constant-driver closed form
- boundary flow against an independent ODE solve
- tip and trace extraction
"""

import math
import os
import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from conformal_core import (TWO_PI, CurveTrace, LoewnerChain, boundary_flow_step,
                            conformal_radius, forward_map, inverse_boundary_batch, tip_point,
                            trace_chain)
from errors import DomainError, PointSwallowed, SingularGap


def _constant_chain(T: float, n: int, xi: float = 0.0) -> LoewnerChain:
    return LoewnerChain(np.full(n, T / n), np.full(n, xi))


def _wiggly_chain() -> LoewnerChain:
    dts = np.full(8, 0.05)
    xis = 0.3 * np.sin(np.arange(8))
    return LoewnerChain(dts, xis)


class TestLoewnerChain:
    """Chain construction and bookkeeping"""

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(DomainError):
            LoewnerChain([0.1, 0.1], [0.0])

    def test_rejects_non_positive_steps(self):
        with pytest.raises(DomainError):
            LoewnerChain([0.1, 0.0], [0.0, 0.0])
        with pytest.raises(DomainError):
            LoewnerChain([0.1, -0.1], [0.0, 0.0])

    def test_from_driver_uses_right_endpoint(self):
        chain = LoewnerChain.from_driver([0.0, 0.1, 0.3], [5.0, 1.0, 2.0])
        np.testing.assert_allclose(chain.dts, [0.1, 0.2])
        np.testing.assert_allclose(chain.xis, [1.0, 2.0])

    def test_capacity_is_additive(self):
        chain = _wiggly_chain()
        head, tail = chain.prefix(3), chain.suffix(3)
        assert head.total_capacity + tail.total_capacity == pytest.approx(chain.total_capacity, abs=1e-15)
        assert head.concat(tail).n_steps == chain.n_steps

    def test_conformal_radius(self):
        chain = _constant_chain(1.0, 10)
        assert conformal_radius(chain) == pytest.approx(math.exp(-1.0), rel=1e-14)
        assert conformal_radius(LoewnerChain()) == 1.0

    def test_dict_round_trip(self):
        chain = _wiggly_chain()
        restored = LoewnerChain.from_dict(chain.to_dict())
        np.testing.assert_array_equal(restored.dts, chain.dts)
        np.testing.assert_array_equal(restored.xis, chain.xis)


class TestForwardMap:
    """g_t on the unit disc"""

    def test_origin_is_fixed(self):
        assert forward_map(_wiggly_chain(), 0.0) == 0.0

    def test_derivative_at_origin(self):
        chain = _wiggly_chain()
        delta = 5e-4
        slope = (forward_map(chain, delta) - forward_map(chain, -delta)) / (2 * delta)
        assert abs(slope - math.exp(chain.total_capacity)) < 1e-5

    def test_constant_driver_closed_form(self):
        # g / (1 + g)^2 = e^t z / (1 + z)^2 for xi = 0
        chain = _constant_chain(0.5, 5)
        z = 0.3 + 0.2j
        g = forward_map(chain, z)
        assert abs(g / (1 + g) ** 2 - math.exp(0.5) * z / (1 + z) ** 2) < 1e-8

    def test_composition(self):
        chain = _wiggly_chain()
        z = np.array([0.2 + 0.1j, -0.4j, 0.5])
        direct = forward_map(chain, z)
        staged = forward_map(chain.suffix(4), forward_map(chain.prefix(4), z))
        np.testing.assert_allclose(direct, staged, atol=1e-12)

    def test_rotation_equivariance(self):
        chain = _wiggly_chain()
        angle = 1.1
        z = 0.3 - 0.25j
        rotated = forward_map(chain.rotated(angle), z * np.exp(1j * angle))
        assert abs(rotated - np.exp(1j * angle) * forward_map(chain, z)) < 1e-8

    def test_point_on_driver_is_swallowed(self):
        chain = _constant_chain(0.1, 1, xi=0.4)
        with pytest.raises(PointSwallowed):
            forward_map(chain, complex(math.cos(0.4), math.sin(0.4)))

    def test_outside_disc_rejected(self):
        with pytest.raises(DomainError):
            forward_map(_wiggly_chain(), 1.5)


class TestBoundaryFlow:
    """dV/dt = cot((V - xi)/2) with frozen xi"""

    @staticmethod
    def _oracle(v0: float, xi: float, dt: float) -> float:
        solution = solve_ivp(lambda t, v: [1.0 / math.tan(0.5 * (v[0] - xi))], (0.0, dt), [v0],
                             rtol=1e-12, atol=1e-14)
        return float(solution.y[0, -1])

    @pytest.mark.parametrize("v0, xi, dt", [(1.0, 0.0, 0.01), (2.5, 0.3, 0.2), (-1.0, 0.0, 0.05)])
    def test_matches_ode_solution(self, v0, xi, dt):
        assert abs(boundary_flow_step(v0, xi, dt) - self._oracle(v0, xi, dt)) < 1e-10

    def test_points_move_away_from_driver(self):
        assert boundary_flow_step(1.0, 0.0, 0.01) > 1.0
        assert boundary_flow_step(-1.0, 0.0, 0.01) < -1.0

    def test_branch_is_preserved(self):
        near = boundary_flow_step(1.0, 0.0, 0.1)
        far = boundary_flow_step(1.0 + TWO_PI, 0.0, 0.1)
        assert far - near == pytest.approx(TWO_PI, abs=1e-12)

    def test_vectorized(self):
        v = np.array([0.5, 1.5, 4.0])
        result = boundary_flow_step(v, 0.0, 0.1)
        expected = [boundary_flow_step(float(x), 0.0, 0.1) for x in v]
        np.testing.assert_allclose(result, expected, rtol=0, atol=1e-15)

    def test_zero_step_is_identity(self):
        assert boundary_flow_step(1.3, 0.2, 0.0) == 1.3

    def test_singular_gap(self):
        with pytest.raises(SingularGap):
            boundary_flow_step(0.4, 0.4, 0.1)

    def test_negative_step_rejected(self):
        with pytest.raises(DomainError):
            boundary_flow_step(1.0, 0.0, -0.1)


class TestTips:
    """Backward flow of the driver point"""

    def test_straight_slit_tip(self):
        # for xi = 0 the tip x solves 4x / (1 + x)^2 = e^{-t}
        t = 0.5
        y = math.exp(-t)
        expected = ((2 - y) - 2 * math.sqrt(1 - y)) / y
        tip = tip_point(_constant_chain(t, 5))
        assert abs(tip - expected) < 1e-6

    def test_tip_of_empty_chain_rejected(self):
        with pytest.raises(DomainError):
            tip_point(LoewnerChain())

    def test_prefix_zero_stays_on_circle(self):
        points = inverse_boundary_batch(_wiggly_chain(), [0, 8], [0.7, 0.0])
        assert points[0] == np.exp(0.7j)
        assert abs(points[1]) < 1.0

    def test_batch_matches_single_tips(self):
        chain = _wiggly_chain()
        batch = inverse_boundary_batch(chain, [3, 8], [chain.xis[2], chain.xis[7]])
        assert abs(batch[0] - tip_point(chain.prefix(3))) < 1e-12
        assert abs(batch[1] - tip_point(chain)) < 1e-12


class TestTraceChain:
    """Sampled curves"""

    def test_empty_chain_is_start_point(self):
        trace = trace_chain(LoewnerChain(), 1.0, 50)
        assert len(trace) == 1
        assert trace.points[0] == complex(math.cos(1.0), math.sin(1.0))

    def test_trace_starts_on_circle_and_ends_at_tip(self):
        chain = _constant_chain(1.0, 20)
        trace = trace_chain(chain, 0.0, 11)
        assert trace.times[0] == 0.0
        assert trace.times[-1] == pytest.approx(1.0)
        assert abs(trace.points[0] - 1.0) < 1e-15
        assert abs(trace.tip - tip_point(chain)) < 1e-12
        assert np.all(np.abs(trace.points.imag) < 1e-9)
        assert np.all(np.diff(trace.points.real) < 0)

    def test_rotated_trace(self):
        trace = trace_chain(_constant_chain(0.5, 5), 0.0, 6)
        turned = trace.rotated(math.pi / 2)
        np.testing.assert_allclose(turned.points, 1j * trace.points, atol=1e-15)

    def test_descending_times_rejected(self):
        with pytest.raises(DomainError):
            CurveTrace([0.0, 0.2, 0.1], [1.0, 0.9, 0.8])

    def test_single_point_rejected(self):
        with pytest.raises(DomainError):
            trace_chain(_constant_chain(0.5, 5), 0.0, 1)

    def test_frame_columns(self):
        frame = trace_chain(_constant_chain(0.5, 5), 0.0, 6).to_frame()
        assert list(frame.columns) == ['t', 're', 'im']
