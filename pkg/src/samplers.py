"""
Curve samplers and Monte Carlo estimators
Single radial SLE traces, the two-sided radial SLE pair with spiral, and
conformal-radius moments of chordal SLE from the absorbed gap diffusion.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from config_loader import DriverSettings, EngineSettings, HypergeometricSettings
from conformal_core import (TWO_PI, CurveTrace, LoewnerChain, inverse_boundary_batch,
                            trace_chain)
from drivers import (SIDE_TWO_PI, SIDE_ZERO, CoupledStepper, DrivingPath, GapBatch,
                     RngSpec, SleParams, kappa_mu_rho_drift, sample_partition_driver,
                     sample_kappa_mu_rho_driver, sample_radial_driver, simulate_gap_batch)
from errors import DomainError, Divergent, GapCollapse, MaxTimeExceeded, PathAbort
from partition import PartitionFn, critical_alpha, cr_moment_exact, solve_phi_alpha
from results_io import TOOL_NAME, TOOL_VERSION, build_id

_DEFAULT_DRIVERS = DriverSettings()


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error and scheme provenance"""
    mean: float
    stderr: float
    n: int
    seed: RngSpec
    dt: float
    eps_abs: float
    censored: int = 0
    variance_warning: bool = False
    label: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'mean': float(self.mean),
            'stderr': float(self.stderr),
            'n': int(self.n),
            'seed': self.seed.to_dict(),
            'dt': float(self.dt),
            'eps_abs': float(self.eps_abs),
            'censored': int(self.censored),
            'variance_warning': bool(self.variance_warning),
            'tool': TOOL_NAME,
            'version': TOOL_VERSION,
            'build': build_id(),
        }


# ---------------------------------------------------------------------------
# Single traces
# ---------------------------------------------------------------------------

def sample_radial_chain(p: SleParams, th1: float, th2: Optional[float], T: float, dt: float,
                        rng: RngSpec, settings: Optional[DriverSettings] = None,
                        engine: Optional[EngineSettings] = None) -> Tuple[LoewnerChain, DrivingPath]:
    """Driver and its Loewner chain; with th2 the SLE_kappa^mu(rho) driver is used"""
    if not 0 <= p.kappa < 8:
        raise DomainError("kappa must lie in [0, 8)", {'kappa': p.kappa})
    if th2 is None:
        path = sample_radial_driver(p, th1, T, dt, rng)
    else:
        path = sample_kappa_mu_rho_driver(p, th1, th2, T, dt, rng, settings, engine)
    return path.to_chain(), path


def trace_radial_sle(p: SleParams, th1: float, th2_opt: Optional[float], T: float, dt: float,
                     n_points: int, rng: RngSpec, settings: Optional[DriverSettings] = None,
                     engine: Optional[EngineSettings] = None) -> CurveTrace:
    """Trace of radial SLE_kappa^mu (or SLE_kappa^mu(rho) with force point th2_opt)"""
    chain, _ = sample_radial_chain(p, th1, th2_opt, T, dt, rng, settings, engine)
    return trace_chain(chain, th1, n_points, engine)


def trace_partition_sle(pf: PartitionFn, th1: float, th2: float, T: float, dt: float,
                        n_points: int, rng: RngSpec, settings: Optional[DriverSettings] = None,
                        engine: Optional[EngineSettings] = None) -> CurveTrace:
    """Trace of the first curve under d xi = sqrt(kappa) dB + b_1(xi, V) dt"""
    path = sample_partition_driver(pf, th1, th2, T, dt, rng, settings, engine)
    return trace_chain(path.to_chain(), th1, n_points, engine)


# ---------------------------------------------------------------------------
# Two-sided radial SLE with spiral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairState:
    """Common mapping-out chain of both curves and the images of their tips"""
    chain: LoewnerChain
    theta1_t: float
    theta2_t: float
    cap1: float
    cap2: float
    owner: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))

    def __post_init__(self):
        gap = math.fmod(self.theta2_t - self.theta1_t, TWO_PI)
        if gap <= 0:
            gap += TWO_PI
        if not 0 < gap < TWO_PI:
            raise GapCollapse("Tip images coincide", {'theta1': self.theta1_t, 'theta2': self.theta2_t})

    def to_dict(self) -> Dict[str, Any]:
        return {'theta1_t': float(self.theta1_t), 'theta2_t': float(self.theta2_t),
                'cap1': float(self.cap1), 'cap2': float(self.cap2),
                'total_capacity': self.chain.total_capacity, 'n_steps': self.chain.n_steps}


def _grow_round(stepper: CoupledStepper, active: float, passive: float, cap: float,
                n_sub: int, max_retries: int) -> Tuple[float, float, np.ndarray]:
    """Grow one curve by capacity ``cap`` with the other tip image as force point"""
    gap0 = math.fmod(passive - active, TWO_PI)
    if gap0 <= 0:
        gap0 += TWO_PI
    shift = passive - (active + gap0)
    h = cap / n_sub
    for attempt in range(max_retries + 1):
        xi, v, gap = active, active + gap0, gap0
        stepper.steps = []
        try:
            for _ in range(n_sub):
                xi, v, gap = stepper.step(xi, v, gap, h)
            return xi, v + shift, stepper.take_steps()
        except GapCollapse as e:
            logger.debug(f"Pair round retry {attempt + 1}/{max_retries}: {e}")
    raise PathAbort("Pair growth round failed after retries",
                    {'active': active, 'passive': passive, 'retries': max_retries})


def sample_two_sided_pair(kappa: float, mu: float, th1: float, th2: float, total_cap: float,
                          eps_step: float, rng: RngSpec, n_sub: int = 1, n_points: int = 200,
                          max_retries: int = 3, settings: Optional[DriverSettings] = None,
                          engine: Optional[EngineSettings] = None
                          ) -> Tuple[CurveTrace, CurveTrace, PairState]:
    """
    Alternating growth of two-sided radial SLE_kappa with spiraling rate mu.

    Each round grows curve 1 and then curve 2 by capacity eps_step in the common
    parametrization. The growing curve is driven by radial SLE_kappa^mu(2) from
    its current tip image with the other tip image as force point; the passive
    image follows the boundary flow. Curve j draws from substream j of ``rng``.
    """
    if not 0 <= kappa <= 4:
        raise DomainError("Two-sided radial SLE needs kappa in [0, 4]", {'kappa': kappa})
    if not th1 < th2 < th1 + TWO_PI:
        raise DomainError("Angles must satisfy th1 < th2 < th1 + 2pi", {'th1': th1, 'th2': th2})
    if n_points < 2:
        raise DomainError("n_points must be at least 2", {'n_points': n_points})
    if total_cap < 0 or eps_step <= 0 or n_sub < 1:
        raise DomainError("Need total_cap >= 0, eps_step > 0 and n_sub >= 1",
                          {'total_cap': total_cap, 'eps_step': eps_step, 'n_sub': n_sub})

    drift = kappa_mu_rho_drift(SleParams(kappa, mu, 2.0))
    steppers = {j: CoupledStepper(kappa, drift, rng.substream(j), settings, engine) for j in (1, 2)}

    theta = {1: float(th1), 2: float(th2)}
    caps = {1: 0.0, 2: 0.0}
    blocks: List[np.ndarray] = []
    owners: List[np.ndarray] = []
    marks = {1: [(0, 0.0, th1)], 2: [(0, 0.0, th2)]}
    n_steps = 0

    n_rounds = int(math.ceil(total_cap / eps_step - 1e-9)) if total_cap > 0 else 0
    for r in range(n_rounds):
        cap = min(eps_step, total_cap - r * eps_step)
        for j, other in ((1, 2), (2, 1)):
            tip, passive, steps = _grow_round(steppers[j], theta[j], theta[other], cap,
                                              n_sub, max_retries)
            theta[j], theta[other] = tip, passive
            caps[j] += cap
            blocks.append(steps)
            owners.append(np.full(len(steps), j, dtype=np.int8))
            n_steps += len(steps)
            marks[j].append((n_steps, caps[j], tip))

    all_steps = np.concatenate(blocks) if blocks else np.zeros((0, 2))
    chain = LoewnerChain(all_steps[:, 0], all_steps[:, 1])
    owner = np.concatenate(owners) if owners else np.zeros(0, dtype=np.int8)
    state = PairState(chain, theta[1], theta[2], caps[1], caps[2], owner)

    traces = []
    for j in (1, 2):
        selected = _thin(marks[j], n_points)
        lengths = [m[0] for m in selected]
        points = inverse_boundary_batch(chain, lengths, [m[2] for m in selected], engine)
        traces.append(CurveTrace([m[1] for m in selected], points))
    logger.debug(f"Pair sampled: {n_rounds} rounds, {chain.n_steps} Loewner steps")
    return traces[0], traces[1], state


def _thin(marks: List[Tuple[int, float, float]], n_points: int) -> List[Tuple[int, float, float]]:
    if len(marks) <= n_points:
        return marks
    keep = np.unique(np.rint(np.linspace(0, len(marks) - 1, n_points)).astype(int))
    return [marks[k] for k in keep]


# ---------------------------------------------------------------------------
# Conformal-radius moments
# ---------------------------------------------------------------------------

def _gap_block(args: Tuple[float, float, float, int, RngSpec, int, DriverSettings,
                           Optional[float]]) -> GapBatch:
    kappa, theta, dt, count, rng, block, settings, t_stop = args
    return simulate_gap_batch(kappa, theta, dt, count, rng.substream(block), settings, t_stop=t_stop)


def run_gap_blocks(kappa: float, theta: float, dt: float, n: int, rng: RngSpec,
                   settings: Optional[DriverSettings] = None, t_stop: Optional[float] = None,
                   workers: int = 1, progress: bool = False) -> GapBatch:
    """
    Simulate n gap paths in blocks of ``block_size``; block b draws from substream b.

    Blocks are merged in block order, so results do not depend on ``workers``.
    """
    settings = settings or _DEFAULT_DRIVERS
    if n < 1:
        raise DomainError("n must be at least 1", {'n': n})
    sizes = [settings.block_size] * (n // settings.block_size)
    if n % settings.block_size:
        sizes.append(n % settings.block_size)
    jobs = [(kappa, theta, dt, size, rng, b, settings, t_stop) for b, size in enumerate(sizes)]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_gap_block, jobs), total=len(jobs),
                                desc="gap paths", disable=not progress))
    else:
        results = [_gap_block(job) for job in tqdm(jobs, desc="gap paths", disable=not progress)]

    batch = GapBatch(
        exit_time=np.concatenate([r.exit_time for r in results]),
        side=np.concatenate([r.side for r in results]),
        theta_stop=np.concatenate([r.theta_stop for r in results]),
        censored=np.concatenate([r.censored for r in results]),
        substeps=sum(r.substeps for r in results),
    )
    n_censored = int(batch.censored.sum())
    if n_censored:
        fraction = n_censored / n
        logger.warning(f"{n_censored} of {n} gap paths not absorbed before t_cap={settings.t_cap}")
        if fraction > settings.censored_fraction:
            raise MaxTimeExceeded("Too many gap paths reached t_cap",
                                  {'censored': n_censored, 'n': n, 'allowed_fraction': settings.censored_fraction})
    return batch


def _check_moment_args(kappa: float, alpha: float, theta: float,
                       warning_fraction: float) -> bool:
    if not 0 < kappa < 8:
        raise DomainError("kappa must lie in (0, 8)", {'kappa': kappa})
    if not 0 < theta < TWO_PI:
        raise DomainError("theta must lie in (0, 2pi)", {'theta': theta})
    alpha0 = critical_alpha(kappa)
    if alpha >= alpha0:
        raise Divergent("E[CR^-alpha] is infinite for alpha >= 1 - kappa/8",
                        {'kappa': kappa, 'alpha': alpha, 'alpha0': alpha0})
    high_variance = alpha > warning_fraction * alpha0
    if high_variance:
        logger.warning(f"alpha={alpha} is close to alpha0={alpha0:.4f}; Monte Carlo variance may be infinite")
    return high_variance


def _estimate(values: np.ndarray, n: int, rng: RngSpec, dt: float, settings: DriverSettings,
              censored: int, warning: bool, label: str) -> McEstimate:
    mean = math.fsum(values) / n
    stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean=mean, stderr=stderr, n=n, seed=rng, dt=dt, eps_abs=settings.eps_abs,
                      censored=censored, variance_warning=warning, label=label)


@dataclass(frozen=True)
class SidedMoment:
    """Moment split by absorption side; left is theta_T = 2pi"""
    left: McEstimate
    right: McEstimate
    total: McEstimate


def estimate_cr_moment_split(kappa: float, alpha: float, theta: float, n: int, dt: float,
                             rng: RngSpec, settings: Optional[DriverSettings] = None,
                             workers: int = 1, progress: bool = False,
                             warning_fraction: float = 0.8) -> SidedMoment:
    """Shared-path estimates of E[e^{alpha T}] and its two sided parts"""
    settings = settings or _DEFAULT_DRIVERS
    warning = _check_moment_args(kappa, alpha, theta, warning_fraction)
    batch = run_gap_blocks(kappa, theta, dt, n, rng, settings, workers=workers, progress=progress)
    absorbed = batch.absorbed
    n_used = int(absorbed.sum())
    if n_used < 2:
        raise MaxTimeExceeded("Not enough absorbed paths", {'absorbed': n_used})
    weights = np.exp(alpha * batch.exit_time[absorbed])
    side = batch.side[absorbed]
    left_values = np.where(side == SIDE_TWO_PI, weights, 0.0)
    right_values = np.where(side == SIDE_ZERO, weights, 0.0)
    censored = int(batch.censored.sum())

    left = _estimate(left_values, n_used, rng, dt, settings, censored, warning, "left(theta_T=2pi)")
    right = _estimate(right_values, n_used, rng, dt, settings, censored, warning, "right(theta_T=0)")
    total_stderr = float(np.std(weights, ddof=1) / math.sqrt(n_used))
    total = McEstimate(mean=left.mean + right.mean, stderr=total_stderr, n=n_used, seed=rng, dt=dt,
                       eps_abs=settings.eps_abs, censored=censored, variance_warning=warning,
                       label="total")
    logger.info(f"CR moment kappa={kappa} alpha={alpha} theta={theta:.6f}: "
                f"{total.mean:.6f} +/- {total.stderr:.6f} (n={n_used})")
    return SidedMoment(left=left, right=right, total=total)


def estimate_cr_moment(kappa: float, alpha: float, theta: float, n: int, dt: float, rng: RngSpec,
                       settings: Optional[DriverSettings] = None, workers: int = 1,
                       progress: bool = False, warning_fraction: float = 0.8) -> McEstimate:
    """Monte Carlo E[CR^{-alpha}] = E[e^{alpha T}] from the absorbed gap diffusion"""
    return estimate_cr_moment_split(kappa, alpha, theta, n, dt, rng, settings, workers,
                                    progress, warning_fraction).total


def estimate_cr_moment_sided(kappa: float, alpha: float, theta: float, n: int, dt: float,
                             rng: RngSpec, settings: Optional[DriverSettings] = None,
                             workers: int = 1, progress: bool = False,
                             warning_fraction: float = 0.8) -> Tuple[McEstimate, McEstimate]:
    """(left, right) sided moments; left means absorption at theta_T = 2pi"""
    split = estimate_cr_moment_split(kappa, alpha, theta, n, dt, rng, settings, workers,
                                     progress, warning_fraction)
    return split.left, split.right


def estimate_absorption_stats(kappa: float, theta: float, n: int, dt: float, rng: RngSpec,
                              settings: Optional[DriverSettings] = None,
                              workers: int = 1) -> Tuple[McEstimate, McEstimate]:
    """(P[theta_T = 2pi], E[T]) over absorbed paths"""
    settings = settings or _DEFAULT_DRIVERS
    batch = run_gap_blocks(kappa, theta, dt, n, rng, settings, workers=workers)
    absorbed = batch.absorbed
    n_used = int(absorbed.sum())
    censored = int(batch.censored.sum())
    hits = (batch.side[absorbed] == SIDE_TWO_PI).astype(float)
    times = batch.exit_time[absorbed]
    return (_estimate(hits, n_used, rng, dt, settings, censored, False, "P[theta_T=2pi]"),
            _estimate(times, n_used, rng, dt, settings, censored, False, "E[T]"))


def phi_hat(kappa: float, alpha: float, u: np.ndarray,
            hyp_settings: Optional[HypergeometricSettings] = None) -> np.ndarray:
    """
    Exact moment Phi(u) on an array, with Phi(0) = Phi(1) = 1.

    Inside the solved grid Phi(u) = Phi(1/2) phi_alpha(u); outside it the 2F1
    route is summed point by point.
    """
    u = np.asarray(u, dtype=float)
    result = np.ones_like(u)
    if alpha == 0:
        return result
    hyp = solve_phi_alpha(kappa, alpha, hyp_settings)
    center = cr_moment_exact(kappa, alpha, 0.5, hyp_settings)
    inside = (u >= hyp.u_min) & (u <= hyp.u_max)
    if np.any(inside):
        result[inside] = center * hyp.evaluate(u[inside])
    edge = ~inside & (u > 0) & (u < 1)
    for k in np.flatnonzero(edge):
        result[k] = cr_moment_exact(kappa, alpha, float(u[k]), hyp_settings)
    return result


def martingale_check(kappa: float, alpha: float, theta0: float, t_fixed: float, n: int,
                     rng: RngSpec, dt: float = 1e-3, settings: Optional[DriverSettings] = None,
                     hyp_settings: Optional[HypergeometricSettings] = None,
                     workers: int = 1, progress: bool = False) -> McEstimate:
    """
    Mean of e^{alpha (t ^ T)} Phi(sin^2(theta_{t ^ T} / 4)) at the frozen time t.

    Absorbed paths contribute e^{alpha T} since Phi = 1 at both endpoints; the
    mean should equal Phi(sin^2(theta0 / 4)).
    """
    settings = settings or _DEFAULT_DRIVERS
    warning = _check_moment_args(kappa, alpha, theta0, 1.0)
    if t_fixed < 0:
        raise DomainError("t_fixed must be non-negative", {'t_fixed': t_fixed})
    if t_fixed == 0:
        start = float(phi_hat(kappa, alpha, np.array([math.sin(0.25 * theta0) ** 2]), hyp_settings)[0])
        return McEstimate(mean=start, stderr=0.0, n=n, seed=rng, dt=dt, eps_abs=settings.eps_abs,
                          variance_warning=warning, label="martingale(t=0)")

    batch = run_gap_blocks(kappa, theta0, dt, n, rng, settings, t_stop=t_fixed,
                           workers=workers, progress=progress)
    absorbed = batch.absorbed
    values = np.empty(n)
    values[absorbed] = np.exp(alpha * batch.exit_time[absorbed])
    alive = ~absorbed
    u_alive = np.sin(0.25 * batch.theta_stop[alive]) ** 2
    values[alive] = math.exp(alpha * t_fixed) * phi_hat(kappa, alpha, u_alive, hyp_settings)
    return _estimate(values, n, rng, dt, settings, 0, warning, f"martingale(t={t_fixed:g})")
