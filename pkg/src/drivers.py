"""
Driving processes for radial Loewner chains
Brownian drivers with spiral, SLE_kappa^mu(rho) drivers with a tracked force
point, and the absorbed gap diffusion behind chordal SLE in radial coordinates.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from config_loader import DriverSettings, EngineSettings
from conformal_core import TWO_PI, LoewnerChain, boundary_flow_step
from errors import DomainError, GapCollapse, MaxTimeExceeded

_DEFAULT_DRIVERS = DriverSettings()

# drift(xi, gap) with gap = V - xi in (0, 2pi)
GapDrift = Callable[[float, float], float]


@dataclass(frozen=True)
class SleParams:
    """Radial SLE_kappa^mu(rho) parameters"""
    kappa: float
    mu: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise DomainError("kappa must be a finite non-negative number", {'kappa': self.kappa})
        if not (math.isfinite(self.mu) and math.isfinite(self.rho)):
            raise DomainError("mu and rho must be finite")

    @property
    def h(self) -> float:
        self._require_positive_kappa()
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def h_tilde(self) -> float:
        self._require_positive_kappa()
        return (6.0 - self.kappa) * (self.kappa - 2.0) / (8.0 * self.kappa)

    def _require_positive_kappa(self) -> None:
        if self.kappa <= 0:
            raise DomainError("Conformal weights need kappa > 0", {'kappa': self.kappa})


@dataclass(frozen=True)
class RngSpec:
    """Seed plus substream index; every stream is an independent Philox generator"""
    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise DomainError("seed and stream must be non-negative integers")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(sequence))

    def substream(self, index: int) -> np.random.Generator:
        """Generator for block ``index`` below this stream"""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream, int(index)))
        return np.random.Generator(np.random.Philox(sequence))

    def to_dict(self) -> dict:
        return {'seed': int(self.seed), 'stream': int(self.stream)}


@dataclass(frozen=True)
class DrivingPath:
    """Driver angle xi and optional force point v on a time grid"""
    times: np.ndarray
    xi: np.ndarray
    v: Optional[np.ndarray] = None
    halvings: int = 0
    fine_steps: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        xi = np.array(self.xi, dtype=float)
        if times.shape != xi.shape:
            raise DomainError("Driver needs one angle per node")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'xi', xi)
        if self.v is not None:
            v = np.array(self.v, dtype=float)
            if v.shape != times.shape:
                raise DomainError("Force point needs one angle per node")
            gap = np.mod(v - xi, TWO_PI)
            if np.any(gap <= 0):
                raise GapCollapse("Force point coincides with the driver")
            object.__setattr__(self, 'v', v)

    @property
    def gap(self) -> Optional[np.ndarray]:
        return None if self.v is None else self.v - self.xi

    def to_chain(self) -> LoewnerChain:
        """Loewner steps actually taken, including halved sub-steps"""
        if self.fine_steps is not None and len(self.fine_steps):
            return LoewnerChain(self.fine_steps[:, 0], self.fine_steps[:, 1])
        return LoewnerChain.from_driver(self.times, self.xi)

    def to_frame(self) -> pd.DataFrame:
        data = {'t': self.times, 'xi': self.xi}
        if self.v is not None:
            data['v'] = self.v
        return pd.DataFrame(data)


def _time_grid(T: float, dt: float) -> np.ndarray:
    if T < 0 or not math.isfinite(T):
        raise DomainError("T must be finite and non-negative", {'T': T})
    if dt <= 0:
        raise DomainError("dt must be positive", {'dt': dt})
    if T == 0:
        return np.zeros(1)
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    return np.linspace(0.0, T, n + 1)


def sample_radial_driver(p: SleParams, theta0: float, T: float, dt: float,
                         rng: RngSpec) -> DrivingPath:
    """xi_t = theta0 + sqrt(kappa) B_t + mu t on a uniform grid"""
    times = _time_grid(T, dt)
    gen = rng.generator()
    steps = np.diff(times)
    increments = math.sqrt(p.kappa) * np.sqrt(steps) * gen.standard_normal(steps.size)
    brownian = np.concatenate([[0.0], np.cumsum(increments)])
    return DrivingPath(times, theta0 + brownian + p.mu * times)


def _initial_gap(theta1: float, theta2: float, tol: float) -> float:
    gap = math.fmod(theta2 - theta1, TWO_PI)
    if gap < 0:
        gap += TWO_PI
    if gap <= tol or gap >= TWO_PI - tol:
        raise DomainError("theta1 and theta2 must differ mod 2pi", {'theta1': theta1, 'theta2': theta2})
    return gap


class CoupledStepper:
    """
    Euler-Maruyama for (xi, V) with adaptive halving of one grid step.

    A step of length h with increment dB is split in two with a Brownian
    bridge draw whenever the drift is large relative to the gap or the
    proposed gap leaves (tol, 2pi - tol). Every accepted sub-step is kept
    in ``steps`` as a Loewner step (h, xi_new).
    """

    def __init__(self, kappa: float, drift: GapDrift, gen: np.random.Generator,
                 settings: Optional[DriverSettings] = None,
                 engine: Optional[EngineSettings] = None):
        if kappa < 0:
            raise DomainError("kappa must be non-negative", {'kappa': kappa})
        self.sqrt_kappa = math.sqrt(kappa)
        self.drift = drift
        self.gen = gen
        self.settings = settings or _DEFAULT_DRIVERS
        self.engine = engine or EngineSettings()
        self.halvings = 0
        self.steps: List[Tuple[float, float]] = []

    def advance(self, xi: float, v: float, gap: float, h: float, dB: float,
                depth: int = 0) -> Tuple[float, float, float]:
        b = self.drift(xi, gap)
        tol = 2.0 * self.engine.tol_gap
        too_fast = abs(b) * h > self.settings.drift_fraction * min(gap, TWO_PI - gap)
        if not too_fast:
            xi_new = xi + self.sqrt_kappa * dB + b * h
            gap_prop = gap - (xi_new - xi)
            if tol < gap_prop < TWO_PI - tol:
                v_new = boundary_flow_step(v, xi_new, h, self.engine)
                gap_new = gap_prop + (v_new - v)
                if tol < gap_new < TWO_PI - tol:
                    self.steps.append((h, xi_new))
                    return xi_new, v_new, gap_new
        if depth >= self.settings.max_halvings:
            raise GapCollapse("Gap left its interval after all halvings",
                              {'gap': gap, 'h': h, 'depth': depth})
        self.halvings += 1
        dB1 = 0.5 * dB + math.sqrt(0.25 * h) * float(self.gen.standard_normal())
        xi, v, gap = self.advance(xi, v, gap, 0.5 * h, dB1, depth + 1)
        return self.advance(xi, v, gap, 0.5 * h, dB - dB1, depth + 1)

    def step(self, xi: float, v: float, gap: float, h: float) -> Tuple[float, float, float]:
        """One grid step of length h with a fresh Brownian increment"""
        dB = math.sqrt(h) * float(self.gen.standard_normal())
        return self.advance(xi, v, gap, h, dB)

    def take_steps(self) -> np.ndarray:
        steps = np.array(self.steps, dtype=float).reshape(-1, 2)
        self.steps = []
        return steps


def sample_drifted_driver(kappa: float, drift: GapDrift, theta1: float, theta2: float,
                          T: float, dt: float, rng: RngSpec,
                          settings: Optional[DriverSettings] = None,
                          engine: Optional[EngineSettings] = None) -> DrivingPath:
    """
    Sample d xi = sqrt(kappa) dB + drift(xi, V - xi) dt, dV = cot((V - xi)/2) dt.

    Increment-then-grow convention: xi_{k+1} is formed first and V is flowed
    with xi_{k+1} frozen, matching the Loewner step built from the same node.
    """
    engine = engine or EngineSettings()
    times = _time_grid(T, dt)
    gap = _initial_gap(theta1, theta2, engine.tol_gap)
    branch_shift = theta2 - (theta1 + gap)
    stepper = CoupledStepper(kappa, drift, rng.generator(), settings, engine)

    xi = np.empty_like(times)
    v = np.empty_like(times)
    xi[0], v[0] = theta1, theta1 + gap
    for k, h in enumerate(np.diff(times)):
        xi[k + 1], v[k + 1], gap = stepper.step(float(xi[k]), float(v[k]), gap, float(h))
    if stepper.halvings:
        logger.debug(f"Driver needed {stepper.halvings} step halvings over {times.size - 1} steps")
    # keep the caller's branch of theta2
    v += branch_shift
    return DrivingPath(times, xi, v, halvings=stepper.halvings, fine_steps=stepper.take_steps())


def kappa_mu_rho_drift(p: SleParams) -> GapDrift:
    """(rho/2) cot((xi - V)/2) + mu written in terms of the gap V - xi"""
    rho, mu = p.rho, p.mu

    def drift(xi: float, gap: float) -> float:
        return -0.5 * rho / math.tan(0.5 * gap) + mu

    return drift


def sample_kappa_mu_rho_driver(p: SleParams, theta1: float, theta2: float, T: float, dt: float,
                               rng: RngSpec, settings: Optional[DriverSettings] = None,
                               engine: Optional[EngineSettings] = None) -> DrivingPath:
    """Radial SLE_kappa^mu(rho) driver with force point started at theta2"""
    if p.kappa >= 8:
        raise DomainError("kappa must be below 8", {'kappa': p.kappa})
    if p.rho <= -2:
        raise DomainError("rho must exceed -2", {'rho': p.rho})
    return sample_drifted_driver(p.kappa, kappa_mu_rho_drift(p), theta1, theta2, T, dt, rng,
                                 settings, engine)


def sample_partition_driver(pf, theta1: float, theta2: float, T: float, dt: float, rng: RngSpec,
                            settings: Optional[DriverSettings] = None,
                            engine: Optional[EngineSettings] = None) -> DrivingPath:
    """Marginal driver of the first curve, d xi = sqrt(kappa) dB + b_1(xi, V) dt"""

    def drift(xi: float, gap: float) -> float:
        return pf.drift(1, xi, xi + gap)

    return sample_drifted_driver(pf.kappa, drift, theta1, theta2, T, dt, rng, settings, engine)


class Side(str, Enum):
    """Endpoint at which the gap diffusion is absorbed"""
    ZERO = "zero"
    TWO_PI = "two_pi"


SIDE_ALIVE = -1
SIDE_ZERO = 0
SIDE_TWO_PI = 1


@dataclass
class GapBatch:
    """Outcome of a batch of gap-process paths"""
    exit_time: np.ndarray
    side: np.ndarray
    theta_stop: np.ndarray
    censored: np.ndarray
    substeps: int = 0
    path: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.exit_time.size)

    @property
    def absorbed(self) -> np.ndarray:
        return self.side != SIDE_ALIVE


def simulate_gap_batch(kappa: float, theta0: float, dt: float, n: int,
                       gen: np.random.Generator, settings: Optional[DriverSettings] = None,
                       t_stop: Optional[float] = None, record: bool = False) -> GapBatch:
    """
    Vectorized absorbed diffusion d theta = sqrt(kappa) dB + (kappa-4)/2 cot(theta/2) dt.

    Every path keeps its own clock. Sub-steps shrink so |drift| h stays below
    drift_fraction times the distance to the nearer endpoint and sqrt(kappa h)
    below noise_fraction times it, so the walk resolves the Bessel-type motion
    near an endpoint. Exits through (eps_abs, 2pi - eps_abs) get a linearly interpolated exit time; with
    bridge_correction a path that stays inside is still absorbed at t + h/2
    with the Brownian-bridge crossing probability.

    Paths alive at ``t_stop`` halt there; paths alive at t_cap are censored.
    """
    settings = settings or _DEFAULT_DRIVERS
    if not 0 < theta0 < TWO_PI:
        raise DomainError("Initial gap must lie in (0, 2pi)", {'theta0': theta0})
    if kappa < 0 or kappa >= 8:
        raise DomainError("kappa must lie in [0, 8)", {'kappa': kappa})

    eps = settings.eps_abs
    upper = TWO_PI - eps
    horizon = settings.t_cap if t_stop is None else min(float(t_stop), settings.t_cap)
    coef = 0.5 * (kappa - 4.0)
    sqrt_kappa = math.sqrt(kappa)
    h_min = dt * 2.0 ** (-settings.max_halvings)

    theta = np.full(n, float(theta0))
    clock = np.zeros(n)
    exit_time = np.full(n, np.nan)
    side = np.full(n, SIDE_ALIVE, dtype=np.int8)
    alive = np.ones(n, dtype=bool)
    if not eps < theta0 < upper:
        exit_time[:] = 0.0
        side[:] = SIDE_ZERO if theta0 <= eps else SIDE_TWO_PI
        alive[:] = False
    path: List[Tuple[float, float]] = [(0.0, float(theta0))] if record else []
    substeps = 0

    while True:
        alive &= clock < horizon
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        substeps += 1
        th = theta[idx]
        t = clock[idx]
        distance = np.minimum(th - eps, upper - th)
        drift = coef / np.tan(0.5 * th)
        h = np.full(idx.size, dt)
        if coef != 0.0:
            with np.errstate(divide='ignore'):
                h_drift = settings.drift_fraction * np.maximum(distance, eps) / np.abs(drift)
            h = np.minimum(h, np.maximum(h_drift, h_min))
        if kappa > 0:
            h_noise = (settings.noise_fraction * distance) ** 2 / kappa
            h = np.minimum(h, np.maximum(h_noise, h_min))
        h = np.minimum(h, horizon - t)

        noise = gen.standard_normal(idx.size)
        uniforms = gen.random(idx.size)
        th_new = th + sqrt_kappa * np.sqrt(h) * noise + drift * h

        low = th_new <= eps
        high = th_new >= upper
        crossed = low | high
        barrier = np.where(low, eps, upper)
        with np.errstate(divide='ignore', invalid='ignore'):
            fraction = np.where(crossed, (th - barrier) / (th - th_new), 1.0)
        exit_at = t + np.clip(fraction, 0.0, 1.0) * h

        if settings.bridge_correction and kappa > 0:
            inside = ~crossed
            var = kappa * h
            p_low = np.exp(-2.0 * (th - eps) * (th_new - eps) / var)
            p_high = np.exp(-2.0 * (upper - th) * (upper - th_new) / var)
            bridge_low = inside & (uniforms < p_low)
            bridge_high = inside & ~bridge_low & (uniforms < p_low + p_high)
            low |= bridge_low
            high |= bridge_high
            bridged = bridge_low | bridge_high
            exit_at = np.where(bridged, t + 0.5 * h, exit_at)
            crossed = low | high

        hit = idx[crossed]
        exit_time[hit] = exit_at[crossed]
        side[hit] = np.where(low[crossed], SIDE_ZERO, SIDE_TWO_PI)
        alive[hit] = False
        theta[hit] = np.where(low[crossed], 0.0, TWO_PI)

        moved = idx[~crossed]
        theta[moved] = th_new[~crossed]
        advanced = t + h
        clock[idx] = np.where(horizon - advanced <= 1e-12 * max(1.0, horizon), horizon, advanced)
        clock[hit] = exit_time[hit]

        if record:
            path.append((float(clock[0]), float(theta[0])))

    censored = (side == SIDE_ALIVE) & (clock >= settings.t_cap)
    if t_stop is not None and t_stop < settings.t_cap:
        censored = np.zeros(n, dtype=bool)
    return GapBatch(exit_time=exit_time, side=side, theta_stop=theta.copy(),
                    censored=censored, substeps=substeps, path=path)


@dataclass(frozen=True)
class GapSample:
    """Single absorbed gap path"""
    path: pd.DataFrame
    T_absorb: float
    side: Side

    def to_dict(self, rng: RngSpec) -> dict:
        return {'T': float(self.T_absorb), 'side': self.side.value, **rng.to_dict()}


def sample_gap_process(kappa: float, theta_gap0: float, dt: float, rng: RngSpec,
                       settings: Optional[DriverSettings] = None) -> GapSample:
    """One absorbed path of the gap diffusion with its exit time and side"""
    settings = settings or _DEFAULT_DRIVERS
    batch = simulate_gap_batch(kappa, theta_gap0, dt, 1, rng.generator(), settings, record=True)
    if batch.censored[0] or batch.side[0] == SIDE_ALIVE:
        raise MaxTimeExceeded("Gap process not absorbed before t_cap",
                              {'t_cap': settings.t_cap, **rng.to_dict()})
    path = pd.DataFrame(batch.path, columns=['t', 'theta'])
    side = Side.ZERO if batch.side[0] == SIDE_ZERO else Side.TWO_PI
    return GapSample(path=path, T_absorb=float(batch.exit_time[0]), side=side)
