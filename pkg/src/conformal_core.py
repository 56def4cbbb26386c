"""
Discrete radial Loewner engine
Forward maps, tip tracing, boundary-angle flow and capacity bookkeeping for
chains with piecewise-constant driving.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from config_loader import EngineSettings
from errors import DomainError, NumericalBlowup, PointSwallowed, SingularGap

TWO_PI = 2.0 * math.pi
_DEFAULT_ENGINE = EngineSettings()

ComplexLike = Union[complex, np.ndarray]


def _frozen(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LoewnerChain:
    """Ordered capacity steps (dt_k, xi_k), driver held constant over each step"""
    dts: np.ndarray = field(default_factory=lambda: _frozen([]))
    xis: np.ndarray = field(default_factory=lambda: _frozen([]))

    def __post_init__(self):
        dts = _frozen(self.dts)
        xis = _frozen(self.xis)
        if dts.shape != xis.shape:
            raise DomainError("Chain needs one driver value per step",
                              {'n_dt': dts.size, 'n_xi': xis.size})
        if dts.size and (not np.all(np.isfinite(dts)) or np.any(dts <= 0)):
            raise DomainError("Capacity increments must be positive and finite")
        if xis.size and not np.all(np.isfinite(xis)):
            raise DomainError("Driver angles must be finite")
        object.__setattr__(self, 'dts', dts)
        object.__setattr__(self, 'xis', xis)

    @classmethod
    def from_steps(cls, steps: Iterable[Tuple[float, float]]) -> "LoewnerChain":
        pairs = list(steps)
        if not pairs:
            return cls()
        dts, xis = zip(*pairs)
        return cls(np.array(dts), np.array(xis))

    @classmethod
    def from_driver(cls, times: Sequence[float], xi: Sequence[float]) -> "LoewnerChain":
        """Chain from a sampled driver; step k runs over (t_{k-1}, t_k] with xi(t_k)"""
        times = np.asarray(times, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if times.shape != xi.shape or times.ndim != 1:
            raise DomainError("Driver times and angles must be 1-d arrays of equal length")
        return cls(np.diff(times), xi[1:])

    @property
    def n_steps(self) -> int:
        return int(self.dts.size)

    @property
    def total_capacity(self) -> float:
        return math.fsum(self.dts)

    def __len__(self) -> int:
        return self.n_steps

    def prefix(self, n: int) -> "LoewnerChain":
        return LoewnerChain(self.dts[:n], self.xis[:n])

    def suffix(self, n: int) -> "LoewnerChain":
        return LoewnerChain(self.dts[n:], self.xis[n:])

    def concat(self, other: "LoewnerChain") -> "LoewnerChain":
        return LoewnerChain(np.concatenate([self.dts, other.dts]),
                            np.concatenate([self.xis, other.xis]))

    def rotated(self, angle: float) -> "LoewnerChain":
        return LoewnerChain(self.dts, self.xis + angle)

    def append(self, dt: float, xi: float) -> "LoewnerChain":
        return LoewnerChain(np.append(self.dts, dt), np.append(self.xis, xi))

    def to_dict(self) -> Dict[str, Any]:
        return {'steps': [[float(dt), float(xi)] for dt, xi in zip(self.dts, self.xis)],
                'total_capacity': self.total_capacity}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LoewnerChain":
        return cls.from_steps((float(dt), float(xi)) for dt, xi in data.get('steps', []))


@dataclass(frozen=True)
class CurveTrace:
    """Sampled curve points with their capacity times"""
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        points = np.array(self.points, dtype=complex).reshape(-1)
        if times.shape != points.shape:
            raise DomainError("Trace needs one point per time")
        if times.size > 1 and np.any(np.diff(times) < 0):
            raise DomainError("Trace times must be ascending")
        times.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'points', points)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def tip(self) -> complex:
        return complex(self.points[-1])

    def rotated(self, angle: float) -> "CurveTrace":
        return CurveTrace(self.times, self.points * np.exp(1j * angle))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.times, 're': self.points.real, 'im': self.points.imag})

    def to_dict(self) -> Dict[str, Any]:
        return {'t': [float(t) for t in self.times],
                're': [float(p.real) for p in self.points],
                'im': [float(p.imag) for p in self.points]}


def _loewner_field(z: np.ndarray, w: complex, sign: float) -> np.ndarray:
    return sign * z * (w + z) / (w - z)


def _rk4(z: np.ndarray, w: complex, h: np.ndarray, sign: float) -> np.ndarray:
    k1 = _loewner_field(z, w, sign)
    k2 = _loewner_field(z + 0.5 * h * k1, w, sign)
    k3 = _loewner_field(z + 0.5 * h * k2, w, sign)
    k4 = _loewner_field(z + h * k3, w, sign)
    return z + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _flow(z: np.ndarray, xi: float, dt: float, sign: float,
          settings: EngineSettings) -> np.ndarray:
    """
    Integrate the frozen-driver Loewner field over one step.

    Classical RK4 with step doubling; each point keeps its own sub-step and a
    sub-step is accepted once the doubling estimate is below ``rk_tol``.
    sign=+1 is the forward map, sign=-1 the inverse (backward) flow.
    """
    w = complex(math.cos(xi), math.sin(xi))
    z = np.array(z, dtype=complex)
    if sign > 0:
        near = np.abs(z - w) < settings.tol_swallow
        if np.any(near):
            raise PointSwallowed("Point starts on the driver", {'xi': xi})

    remaining = np.full(z.shape, float(dt))
    h = np.full(z.shape, float(dt))
    done_tol = dt * 1e-13
    active = remaining > done_tol
    iterations = 0

    while np.any(active):
        iterations += 1
        if iterations > settings.max_substeps:
            raise NumericalBlowup("Loewner step did not converge within the sub-step budget",
                                  {'xi': xi, 'dt': dt, 'pending': int(active.sum())})
        idx = np.flatnonzero(active)
        zi = z[idx]
        hi = np.minimum(h[idx], remaining[idx])
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            coarse = _rk4(zi, w, hi, sign)
            fine = _rk4(_rk4(zi, w, 0.5 * hi, sign), w, 0.5 * hi, sign)
            err = np.abs(fine - coarse) / 15.0
        err = np.where(np.isfinite(err), err, np.inf)
        ok = err <= settings.rk_tol

        accepted = idx[ok]
        z[accepted] = fine[ok] + (fine[ok] - coarse[ok]) / 15.0
        remaining[accepted] -= hi[ok]

        with np.errstate(divide='ignore'):
            factor = 0.9 * (settings.rk_tol / np.maximum(err, 1e-300)) ** 0.2
        factor = np.where(np.isfinite(err), np.clip(factor, 0.2, 4.0), 0.2)
        h[idx] = hi * factor

        if sign > 0 and accepted.size:
            if np.any(np.abs(z[accepted] - w) < settings.tol_swallow):
                raise PointSwallowed("Point swallowed during Loewner step",
                                     {'xi': xi, 'dt': dt})
        active = remaining > done_tol

    return z


def _as_complex_array(z: ComplexLike) -> Tuple[np.ndarray, bool]:
    scalar = np.ndim(z) == 0
    return np.atleast_1d(np.array(z, dtype=complex)), scalar


def boundary_flow_step(v: Union[float, np.ndarray], xi: Union[float, np.ndarray], dt: float,
                       settings: Optional[EngineSettings] = None) -> Union[float, np.ndarray]:
    """
    Advance boundary angle(s) V under dV/dt = cot((V - xi)/2) with xi frozen.

    With u = V - xi the flow is solved exactly by cos(u(t)/2) = cos(u0/2) e^{-t/2};
    both 1 - cos and 1 + cos are formed without cancellation so the gap stays
    accurate near 0 and 2pi. The branch of V is preserved.
    """
    settings = settings or _DEFAULT_ENGINE
    if dt < 0:
        raise DomainError("Boundary flow needs dt >= 0", {'dt': dt})
    v_arr = np.asarray(v, dtype=float)
    gap = np.mod(v_arr - np.asarray(xi, dtype=float), TWO_PI)
    if np.any(np.abs(np.sin(0.5 * gap)) < settings.tol_gap):
        raise SingularGap("Marked point sits on the driver", {'gap': np.min(np.abs(np.sin(0.5 * gap)))})
    if dt == 0:
        return v_arr.copy() if v_arr.ndim else float(v_arr)

    half = 0.5 * gap
    decay = math.exp(-0.5 * dt)
    loss = -math.expm1(-0.5 * dt)
    y = np.cos(half) * decay
    one_minus = loss + decay * 2.0 * np.sin(0.5 * half) ** 2
    one_plus = loss + decay * 2.0 * np.cos(0.5 * half) ** 2
    new_gap = 2.0 * np.arctan2(np.sqrt(one_minus * one_plus), y)
    result = v_arr + (new_gap - gap)
    return result if result.ndim else float(result)


def forward_map(chain: LoewnerChain, z: ComplexLike,
                settings: Optional[EngineSettings] = None) -> ComplexLike:
    """Evaluate g_t(z) for the whole chain; accepts scalars or arrays"""
    settings = settings or _DEFAULT_ENGINE
    values, scalar = _as_complex_array(z)
    if np.any(np.abs(values) > 1.0 + settings.tol_geom):
        raise DomainError("forward_map is defined on the closed unit disc")
    for dt, xi in zip(chain.dts, chain.xis):
        values = _flow(values, float(xi), float(dt), +1.0, settings)
    return complex(values[0]) if scalar else values


def inverse_boundary_batch(chain: LoewnerChain, prefix_lengths: Sequence[int],
                           angles: Sequence[float],
                           settings: Optional[EngineSettings] = None) -> np.ndarray:
    """
    Pull boundary angles back through prefixes of the chain.

    Sample i starts at (1 - eps_tip) e^{i angle_i} and is flowed backward
    through steps prefix_lengths[i], ..., 1. Samples with prefix length 0
    stay exactly on the unit circle. All samples share one sweep over the steps.
    """
    settings = settings or _DEFAULT_ENGINE
    lengths = np.asarray(prefix_lengths, dtype=int).reshape(-1)
    angles = np.asarray(angles, dtype=float).reshape(-1)
    if lengths.shape != angles.shape:
        raise DomainError("One angle per prefix length is required")
    if np.any(lengths < 0) or np.any(lengths > chain.n_steps):
        raise DomainError("Prefix length outside the chain", {'n_steps': chain.n_steps})

    radius = np.where(lengths > 0, 1.0 - settings.eps_tip, 1.0)
    z = radius * np.exp(1j * angles)
    for j in range(int(lengths.max(initial=0)), 0, -1):
        mask = lengths >= j
        z[mask] = _flow(z[mask], float(chain.xis[j - 1]), float(chain.dts[j - 1]), -1.0, settings)
        overshoot = np.abs(z[mask]) - 1.0
        if np.any(overshoot > settings.tol_geom):
            raise NumericalBlowup("Backward flow left the unit disc",
                                  {'step': j, 'overshoot': float(overshoot.max())})
    return z


def tip_point(chain: LoewnerChain, settings: Optional[EngineSettings] = None) -> complex:
    """Curve tip g_t^{-1}(e^{i xi_t}) of a nonempty chain"""
    if chain.n_steps == 0:
        raise DomainError("tip_point needs a nonempty chain")
    tip = inverse_boundary_batch(chain, [chain.n_steps], [chain.xis[-1]], settings)
    return complex(tip[0])


def trace_chain(chain: LoewnerChain, theta0: float, n_points: int,
                settings: Optional[EngineSettings] = None) -> CurveTrace:
    """
    Sample the curve of a chain at n_points roughly equally spaced capacity times.

    The first point is e^{i theta0}; later points are tips of prefix chains.
    """
    if n_points < 2:
        raise DomainError("n_points must be at least 2 to hold the start point and the tip",
                          {'n_points': n_points})
    n = chain.n_steps
    if n == 0:
        return CurveTrace([0.0], [complex(math.cos(theta0), math.sin(theta0))])
    lengths = np.unique(np.rint(np.linspace(0, n, n_points)).astype(int))
    angles = np.where(lengths > 0, chain.xis[np.maximum(lengths - 1, 0)], theta0)
    points = inverse_boundary_batch(chain, lengths, angles, settings)
    times = np.concatenate([[0.0], np.cumsum(chain.dts)])[lengths]
    logger.debug(f"Traced {lengths.size} points over {n} Loewner steps")
    return CurveTrace(times, points)


def conformal_radius(chain: LoewnerChain) -> float:
    """CR(D minus hull, 0) = exp(-capacity)"""
    return math.exp(-chain.total_capacity)
