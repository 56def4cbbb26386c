"""
kappa = 0 deterministic flows and the kappa -> 0 behaviour of the partition functions

The deterministic curves run through the same driver and Loewner machinery as
the random ones with the noise switched off.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from config_loader import DriverSettings, EngineSettings, HypergeometricSettings
from conformal_core import TWO_PI, CurveTrace
from drivers import RngSpec, SleParams
from errors import DomainError, NumericalError
from partition import CRWeighted, Spiral, critical_alpha
from samplers import trace_radial_sle

# the kappa = 0 samplers never draw noise that matters; any fixed stream will do
_SILENT_RNG = RngSpec(seed=0)


@dataclass(frozen=True)
class ZeroFlowState:
    """Driver angle, force point and capacity time of a kappa = 0 flow"""
    xi: float
    v: float
    t: float

    def __post_init__(self):
        gap = math.fmod(self.v - self.xi, TWO_PI)
        if gap < 0:
            gap += TWO_PI
        if not 0 < gap < TWO_PI:
            raise DomainError("Force point coincides with the driver", {'xi': self.xi, 'v': self.v})

    @property
    def gap(self) -> float:
        return self.v - self.xi


def _ordered_gap(th1: float, th2: float) -> float:
    gap = th2 - th1
    if not 0.0 < gap < TWO_PI:
        raise DomainError("Angles must satisfy th1 < th2 < th1 + 2pi", {'th1': th1, 'th2': th2})
    return gap


@dataclass(frozen=True)
class Umu:
    """U = 2 log sin(theta21/2) + mu (theta1 + theta2)"""
    mu: float = 0.0

    @property
    def label(self) -> str:
        return f"Umu(mu={self.mu:g})"

    @property
    def constant(self) -> float:
        return self.mu ** 2 - 3.0

    def value(self, th1: float, th2: float) -> float:
        gap = _ordered_gap(th1, th2)
        return 2.0 * math.log(math.sin(0.5 * gap)) + self.mu * (th1 + th2)

    def gradient(self, th1: float, th2: float) -> Tuple[float, float]:
        cot = 1.0 / math.tan(0.5 * _ordered_gap(th1, th2))
        return self.mu - cot, self.mu + cot


@dataclass(frozen=True)
class ChordalU:
    """U = -6 log sin(theta21/2)"""

    @property
    def label(self) -> str:
        return "ChordalU"

    @property
    def constant(self) -> float:
        return -3.0

    def value(self, th1: float, th2: float) -> float:
        return -6.0 * math.log(math.sin(0.5 * _ordered_gap(th1, th2)))

    def gradient(self, th1: float, th2: float) -> Tuple[float, float]:
        cot = 1.0 / math.tan(0.5 * _ordered_gap(th1, th2))
        return 3.0 * cot, -3.0 * cot


def u_mu(mu: float, th1: float, th2: float) -> float:
    return Umu(mu).value(th1, th2)


def u_chordal(th1: float, th2: float) -> float:
    return ChordalU().value(th1, th2)


def classical_identity_error(kappa: float, mu: float, th1: float, th2: float) -> float:
    """|kappa log G_mu - U_mu|, zero up to rounding for every kappa"""
    return abs(kappa * Spiral(kappa, mu).log_value(th1, th2) - u_mu(mu, th1, th2))


def trace_zero_radial(mu: float, th1: float, th2: float, T: float, dt: float = 1e-3,
                      n_points: int = 200, settings: Optional[DriverSettings] = None,
                      engine: Optional[EngineSettings] = None) -> CurveTrace:
    """Radial SLE_0^mu(2): d xi = (mu + cot((xi - V)/2)) dt with V on the boundary flow"""
    if abs(math.sin(0.5 * (th2 - th1))) < 1e-12:
        raise DomainError("theta1 and theta2 must differ mod 2pi", {'th1': th1, 'th2': th2})
    return trace_radial_sle(SleParams(0.0, mu, 2.0), th1, th2, T, dt, n_points, _SILENT_RNG,
                            settings, engine)


def trace_zero_pair(mu: float, th1: float, th2: float, total_cap: float, eps_step: float,
                    n_sub: int = 1, n_points: int = 200,
                    settings: Optional[DriverSettings] = None,
                    engine: Optional[EngineSettings] = None) -> Tuple[CurveTrace, CurveTrace]:
    """
    Two-sided radial SLE_0 with spiraling rate mu.

    Without noise each curve is determined by its marginal, radial SLE_0^mu(2)
    from its own start with the other start as force point. Both curves are
    traced from those flows in their own capacity, with step eps_step / n_sub,
    so mirrored initial data gives mirrored curves up to rounding.
    """
    _ordered_gap(th1, th2)
    if total_cap < 0 or eps_step <= 0 or n_sub < 1:
        raise DomainError("Need total_cap >= 0, eps_step > 0 and n_sub >= 1",
                          {'total_cap': total_cap, 'eps_step': eps_step, 'n_sub': n_sub})
    dt = eps_step / n_sub
    trace1 = trace_zero_radial(mu, th1, th2, total_cap, dt, n_points, settings, engine)
    trace2 = trace_zero_radial(mu, th2, th1, total_cap, dt, n_points, settings, engine)
    logger.debug(f"kappa=0 pair: tips {trace1.tip:.6f}, {trace2.tip:.6f}")
    return trace1, trace2


def semiclassical_Z_trend(alpha_fixed: float, kappas: Iterable[float], theta: float,
                          grid_spec: Optional[HypergeometricSettings] = None,
                          strict: bool = True) -> pd.DataFrame:
    """
    Rows (kappa, kappa log Z_alpha(theta), error) against the limit -6 log sin(theta/2).

    With ``strict`` the error must not increase down the list.
    """
    kappas = [float(k) for k in kappas]
    if not 0.0 < theta < TWO_PI:
        raise DomainError("theta must lie in (0, 2pi)", {'theta': theta})
    target = u_chordal(0.0, theta)
    rows = []
    for kappa in kappas:
        if not alpha_fixed < critical_alpha(kappa):
            raise DomainError("alpha must stay below 1 - kappa/8 for every kappa",
                              {'kappa': kappa, 'alpha': alpha_fixed})
        pf = CRWeighted.build(kappa, alpha_fixed, grid_spec)
        scaled = kappa * pf.log_value(0.0, theta)
        rows.append({'kappa': kappa, 'kappa_log_Z': scaled, 'limit': target,
                     'error': abs(scaled - target)})
    table = pd.DataFrame(rows, columns=['kappa', 'kappa_log_Z', 'limit', 'error'])

    errors = table['error'].to_numpy()
    rising = np.flatnonzero(np.diff(errors) > 1e-14 * np.maximum(1.0, errors[:-1]))
    if rising.size:
        k = int(rising[0])
        message = (f"kappa log Z error increased from {errors[k]:.3e} to {errors[k + 1]:.3e} "
                   f"at kappa={kappas[k + 1]:g}")
        if strict:
            raise NumericalError(message, {'alpha': alpha_fixed, 'theta': theta})
        logger.warning(message)
    return table
