"""
Partition functions of locally commuting 2-radial SLE

Two families are implemented:
  * Spiral(mu):       G = sin(theta21/2)^{2/kappa} exp(mu (theta1 + theta2) / kappa)
  * CRWeighted(alpha): Z = sin(theta21/2)^{(kappa-6)/kappa} phi_alpha(sin^2(theta21/4))

phi_alpha solves the Euler hypergeometric IVP
    u(1-u) phi'' - (3 kappa - 8)/(2 kappa) (2u - 1) phi' + 8 alpha / kappa phi = 0,
    phi(1/2) = 1, phi'(1/2) = 0,
and the exact moment E[CR^{-alpha}] is assembled from two 2F1 solutions.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from config_loader import HypergeometricSettings
from conformal_core import TWO_PI
from errors import (DomainError, Divergent, OutOfGrid, ParameterDegenerate,
                    StiffnessFailure)
from special_functions import hyp2f1, log_gamma, gamma_sign

_DEFAULT_HYP = HypergeometricSettings()


def _require_kappa(kappa: float, upper: float = 8.0) -> None:
    if not (0.0 < kappa < upper):
        raise DomainError(f"kappa must lie in (0, {upper:g})", {'kappa': kappa})


def _require_ordered(th1: float, th2: float) -> float:
    gap = th2 - th1
    if not (0.0 < gap < TWO_PI):
        raise DomainError("Angles must satisfy th1 < th2 < th1 + 2pi", {'th1': th1, 'th2': th2})
    return gap


def critical_alpha(kappa: float) -> float:
    """alpha_0 = 1 - kappa/8, the finiteness threshold of E[CR^{-alpha}]"""
    return 1.0 - kappa / 8.0


def critical_phi(kappa: float, u):
    """(4u(1-u))^{4/kappa - 1/2}, the solution at alpha = alpha_0"""
    u = np.asarray(u, dtype=float)
    return (4.0 * u * (1.0 - u)) ** (4.0 / kappa - 0.5)


# ---------------------------------------------------------------------------
# Euler IVP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypSolution:
    """phi_alpha with derivatives on a grid symmetric about u = 1/2"""
    kappa: float
    alpha: float
    u_grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    d3phi: np.ndarray
    u_min: float
    u_max: float
    sign_change_u: Optional[float] = None
    endpoint_value: Optional[float] = None
    nfev: int = 0
    _poly: Any = field(default=None, repr=False, compare=False)
    _dpoly: Any = field(default=None, repr=False, compare=False)
    _d2poly: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        # degree-7 Hermite: phi, phi', phi'', phi''' at every node
        derivatives = np.stack([self.phi, self.dphi, self.d2phi, self.d3phi], axis=1)
        poly = BPoly.from_derivatives(self.u_grid, derivatives)
        object.__setattr__(self, '_poly', poly)
        object.__setattr__(self, '_dpoly', poly.derivative(1))
        object.__setattr__(self, '_d2poly', poly.derivative(2))

    @property
    def c_coef(self) -> float:
        return (3.0 * self.kappa - 8.0) / (2.0 * self.kappa)

    @property
    def lam(self) -> float:
        return 8.0 * self.alpha / self.kappa

    @property
    def is_positive(self) -> bool:
        return self.sign_change_u is None

    def _check(self, u: np.ndarray) -> None:
        slack = 1e-14
        if np.any(u < self.u_min - slack) or np.any(u > self.u_max + slack):
            raise OutOfGrid("u outside the solved grid",
                            {'u_min': self.u_min, 'u_max': self.u_max,
                             'u': float(np.min(u)) if np.any(u < self.u_min) else float(np.max(u))})

    def evaluate(self, u, nu: int = 0):
        """phi (nu=0), phi' (nu=1) or phi'' (nu=2) by Hermite interpolation"""
        u_arr = np.asarray(u, dtype=float)
        self._check(u_arr)
        poly = {0: self._poly, 1: self._dpoly, 2: self._d2poly}[nu]
        value = poly(np.clip(u_arr, self.u_min, self.u_max))
        return float(value) if value.ndim == 0 else value

    def __call__(self, u):
        return self.evaluate(u)

    def ode_residual(self, u) -> np.ndarray:
        """Euler equation evaluated with the interpolant's own derivatives"""
        u = np.asarray(u, dtype=float)
        phi = self.evaluate(u, 0)
        dphi = self.evaluate(u, 1)
        d2phi = self.evaluate(u, 2)
        return u * (1.0 - u) * d2phi - self.c_coef * (2.0 * u - 1.0) * dphi + self.lam * phi

    def jet(self, u: float) -> Tuple[float, float, float, float]:
        """(phi, phi', phi'', phi''') with the higher derivatives taken from the equation"""
        phi = self.evaluate(u, 0)
        dphi = self.evaluate(u, 1)
        q = u * (1.0 - u)
        d2phi = (self.c_coef * (2.0 * u - 1.0) * dphi - self.lam * phi) / q
        d3phi = ((1.0 + self.c_coef) * (2.0 * u - 1.0) * d2phi
                 + (2.0 * self.c_coef - self.lam) * dphi) / q
        return phi, dphi, d2phi, d3phi

    @property
    def ode_residual_max(self) -> float:
        """max |Euler residual| at the midpoints between grid nodes"""
        mid = 0.5 * (self.u_grid[1:] + self.u_grid[:-1])
        return float(np.max(np.abs(self.ode_residual(mid))))

    def critical_form_error(self) -> float:
        """max |phi - (4u(1-u))^{4/kappa-1/2}| over the grid"""
        return float(np.max(np.abs(self.phi - critical_phi(self.kappa, self.u_grid))))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kappa': self.kappa,
            'alpha': self.alpha,
            'u_min': self.u_min,
            'u_max': self.u_max,
            'sign_change_u': self.sign_change_u,
            'endpoint_value': self.endpoint_value,
            'nfev': self.nfev,
            'u_grid': self.u_grid.tolist(),
            'phi': self.phi.tolist(),
            'dphi': self.dphi.tolist(),
        }


def euler_exponents(kappa: float, alpha: float) -> Optional[Tuple[float, float]]:
    """
    (A, B) with A + B = 2 - 8/kappa and A B = -8 alpha / kappa.

    The even solution of the Euler IVP is 2F1(A/2, B/2; 1/2; (2u - 1)^2).
    Returns None when the exponents are complex.
    """
    a = 1.0 - 4.0 / kappa
    disc = a * a + 8.0 * alpha / kappa
    if disc < 0:
        return None
    root = math.sqrt(disc)
    return a + root, a - root


def _reciprocal_gamma(x: float, tol: float = 1e-12) -> float:
    if _is_pole(x, tol):
        return 0.0
    return gamma_sign(x) * math.exp(-log_gamma(x))


def _is_pole(x: float, tol: float) -> bool:
    return x <= tol and abs(x - round(x)) <= tol


def phi_alpha_endpoint(kappa: float, alpha: float) -> Optional[float]:
    """
    phi_alpha(0) = phi_alpha(1) by Gauss summation of the even solution:
    sqrt(pi) Gamma(4/kappa - 1/2) / (Gamma((1 - A)/2) Gamma((1 - B)/2)).
    """
    _require_kappa(kappa)
    exponents = euler_exponents(kappa, alpha)
    if exponents is None:
        return None
    A, B = exponents
    numerator = math.sqrt(math.pi) * math.exp(log_gamma(4.0 / kappa - 0.5))
    return numerator * _reciprocal_gamma(0.5 * (1.0 - A)) * _reciprocal_gamma(0.5 * (1.0 - B))


def solve_phi_alpha(kappa: float, alpha: float,
                    grid_spec: Optional[HypergeometricSettings] = None) -> HypSolution:
    """
    Solve the Euler IVP outward from u = 1/2.

    In s = u - 1/2 the equation reads (1/4 - s^2) phi'' - 2 c s phi' + lambda phi = 0,
    which is invariant under s -> -s. One adaptive pass over [0, 1/2 - u_min]
    is mirrored, so phi(u) = phi(1-u) holds exactly on mirrored nodes. The solver
    (DOP853 by default) reports nodes through its dense output; phi'' and phi''' at
    the nodes follow from the equation, so all Hermite data is consistent.

    A sign change inside the grid is located by linear interpolation between nodes.
    One between u_max and 1 is detected from the closed-form endpoint value and
    placed with the leading boundary term phi(1) + a1 (1 - u)^{4/kappa - 1/2}.
    """
    _require_kappa(kappa)
    spec = grid_spec or _DEFAULT_HYP
    c = (3.0 * kappa - 8.0) / (2.0 * kappa)
    lam = 8.0 * alpha / kappa
    s_max = 0.5 - spec.u_min

    m = spec.half_nodes
    s_nodes = s_max * np.sin(0.5 * np.pi * np.arange(m + 1) / m)
    s_nodes[0] = 0.0
    s_nodes[-1] = s_max

    def rhs(s, y):
        return [y[1], (2.0 * c * s * y[1] - lam * y[0]) / (0.25 - s * s)]

    result = solve_ivp(rhs, (0.0, s_max), [1.0, 0.0], method=spec.method, t_eval=s_nodes,
                       rtol=spec.rtol, atol=spec.atol)
    if result.status != 0 or result.y.shape[1] != s_nodes.size or not np.all(np.isfinite(result.y)):
        logger.error(f"Euler IVP failed for kappa={kappa}, alpha={alpha}: {result.message}")
        raise StiffnessFailure("Adaptive integration of the Euler IVP stalled",
                               {'kappa': kappa, 'alpha': alpha, 'message': result.message})

    phi_pos, dphi_pos = result.y
    phi_pos[0], dphi_pos[0] = 1.0, 0.0
    q = 0.25 - s_nodes ** 2
    d2_pos = (2.0 * c * s_nodes * dphi_pos - lam * phi_pos) / q
    d3_pos = (2.0 * (1.0 + c) * s_nodes * d2_pos + (2.0 * c - lam) * dphi_pos) / q

    u_grid = np.concatenate([0.5 - s_nodes[:0:-1], 0.5 + s_nodes])
    phi = np.concatenate([phi_pos[:0:-1], phi_pos])
    dphi = np.concatenate([-dphi_pos[:0:-1], dphi_pos])
    d2phi = np.concatenate([d2_pos[:0:-1], d2_pos])
    d3phi = np.concatenate([-d3_pos[:0:-1], d3_pos])

    endpoint = phi_alpha_endpoint(kappa, alpha)
    sign_change_u = None
    nonpositive = np.flatnonzero(phi_pos <= 0.0)
    if nonpositive.size:
        k = int(nonpositive[0])
        s0, s1 = s_nodes[k - 1], s_nodes[k]
        p0, p1 = phi_pos[k - 1], phi_pos[k]
        sign_change_u = float(0.5 + s0 + (s1 - s0) * p0 / (p0 - p1))
    elif endpoint is not None and endpoint < 0.0:
        exponent = 4.0 / kappa - 0.5
        distance = 0.5 - s_max
        slope = (phi_pos[-1] - endpoint) / distance ** exponent
        sign_change_u = float(1.0 - (-endpoint / slope) ** (1.0 / exponent))
    if sign_change_u is not None:
        logger.debug(f"phi_alpha changes sign at u={sign_change_u:.8f} (kappa={kappa}, alpha={alpha})")

    return HypSolution(kappa=float(kappa), alpha=float(alpha), u_grid=u_grid, phi=phi, dphi=dphi,
                       d2phi=d2phi, d3phi=d3phi, u_min=float(u_grid[0]), u_max=float(u_grid[-1]),
                       sign_change_u=sign_change_u, endpoint_value=endpoint, nfev=int(result.nfev))


# ---------------------------------------------------------------------------
# Partition functions
# ---------------------------------------------------------------------------

class PartitionFn(ABC):
    """Positive function of ordered angles th1 < th2 < th1 + 2pi"""
    kappa: float

    @abstractmethod
    def log_value(self, th1: float, th2: float) -> float:
        ...

    def value(self, th1: float, th2: float) -> float:
        return math.exp(self.log_value(th1, th2))

    @abstractmethod
    def drift(self, j: int, th1: float, th2: float) -> float:
        """b_j = kappa d_j log Z"""

    @abstractmethod
    def expected_F(self) -> float:
        ...

    @abstractmethod
    def interchange_constant(self) -> float:
        ...

    @abstractmethod
    def gap_slope_jet(self, gap: float) -> Tuple[float, float, float]:
        """sigma, sigma', sigma'' of the gap part: b1 = offset - sigma(theta21), b2 = offset + sigma(theta21)"""

    @property
    def drift_offset(self) -> float:
        return 0.0

    def drift_jets(self, th1: float, th2: float) -> Tuple[Dict[str, float], Dict[str, float]]:
        """Values and angle derivatives (f, d1, d2, d11, d22, d12) of b1 and b2 in closed form"""
        gap = _require_ordered(th1, th2)
        sigma, d_sigma, d2_sigma = self.gap_slope_jet(gap)
        offset = self.drift_offset
        b1 = {'f': offset - sigma, 'd1': d_sigma, 'd2': -d_sigma,
              'd11': -d2_sigma, 'd22': -d2_sigma, 'd12': d2_sigma}
        b2 = {'f': offset + sigma, 'd1': -d_sigma, 'd2': d_sigma,
              'd11': d2_sigma, 'd22': d2_sigma, 'd12': -d2_sigma}
        return b1, b2

    @property
    @abstractmethod
    def label(self) -> str:
        ...

    def _check_j(self, j: int) -> None:
        if j not in (1, 2):
            raise DomainError("Drift index must be 1 or 2", {'j': j})


@dataclass(frozen=True)
class Spiral(PartitionFn):
    """Two-sided radial SLE with spiraling rate mu"""
    kappa: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise DomainError("Spiral partition function needs kappa > 0", {'kappa': self.kappa})

    @property
    def label(self) -> str:
        return f"spiral(kappa={self.kappa:g}, mu={self.mu:g})"

    def log_value(self, th1: float, th2: float) -> float:
        gap = _require_ordered(th1, th2)
        return (2.0 / self.kappa) * math.log(math.sin(0.5 * gap)) + self.mu * (th1 + th2) / self.kappa

    def log_derivatives(self, th1: float, th2: float) -> Tuple[float, float, float, float, float]:
        """(d1, d2, d11, d12, d22) of log G in closed form"""
        gap = _require_ordered(th1, th2)
        cot = 1.0 / math.tan(0.5 * gap)
        inv_sin2 = 1.0 / math.sin(0.5 * gap) ** 2
        k = self.kappa
        d1 = (self.mu - cot) / k
        d2 = (self.mu + cot) / k
        d11 = -0.5 * inv_sin2 / k
        d22 = -0.5 * inv_sin2 / k
        d12 = 0.5 * inv_sin2 / k
        return d1, d2, d11, d12, d22

    def drift(self, j: int, th1: float, th2: float) -> float:
        self._check_j(j)
        gap = _require_ordered(th1, th2)
        cot = 1.0 / math.tan(0.5 * gap)
        return (-cot if j == 1 else cot) + self.mu

    @property
    def drift_offset(self) -> float:
        return self.mu

    def gap_slope_jet(self, gap: float) -> Tuple[float, float, float]:
        cot = 1.0 / math.tan(0.5 * gap)
        inv_sin2 = 1.0 / math.sin(0.5 * gap) ** 2
        return cot, -0.5 * inv_sin2, 0.5 * inv_sin2 * cot

    def expected_F(self) -> float:
        return (self.mu ** 2 - 3.0) / (2.0 * self.kappa)

    def interchange_constant(self) -> float:
        return math.exp(TWO_PI * self.mu / self.kappa)


@dataclass(frozen=True)
class CRWeighted(PartitionFn):
    """Chordal SLE weighted by conformal radius to the power -alpha"""
    kappa: float
    alpha: float
    hyp: HypSolution

    def __post_init__(self):
        _require_kappa(self.kappa)
        alpha0 = critical_alpha(self.kappa)
        if not self.alpha < alpha0:
            raise DomainError("CR-weighted partition function needs alpha < 1 - kappa/8",
                              {'kappa': self.kappa, 'alpha': self.alpha, 'alpha0': alpha0})
        if self.hyp.kappa != self.kappa or self.hyp.alpha != self.alpha:
            raise DomainError("HypSolution parameters do not match",
                              {'hyp_kappa': self.hyp.kappa, 'hyp_alpha': self.hyp.alpha})

    @classmethod
    def build(cls, kappa: float, alpha: float,
              grid_spec: Optional[HypergeometricSettings] = None) -> "CRWeighted":
        _require_kappa(kappa)
        if not alpha < critical_alpha(kappa):
            raise DomainError("CR-weighted partition function needs alpha < 1 - kappa/8",
                              {'kappa': kappa, 'alpha': alpha})
        return cls(kappa=float(kappa), alpha=float(alpha), hyp=solve_phi_alpha(kappa, alpha, grid_spec))

    @property
    def label(self) -> str:
        return f"cr_weighted(kappa={self.kappa:g}, alpha={self.alpha:g})"

    @property
    def h(self) -> float:
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    def log_value(self, th1: float, th2: float) -> float:
        gap = _require_ordered(th1, th2)
        u = math.sin(0.25 * gap) ** 2
        phi = self.hyp.evaluate(u)
        if phi <= 0:
            raise DomainError("phi_alpha is not positive at this angle", {'u': u, 'phi': phi})
        return (self.kappa - 6.0) / self.kappa * math.log(math.sin(0.5 * gap)) + math.log(phi)

    def dlog_dgap(self, gap: float) -> float:
        """d/d theta log Z as a function of theta = th2 - th1"""
        u = math.sin(0.25 * gap) ** 2
        phi = self.hyp.evaluate(u)
        dphi = self.hyp.evaluate(u, 1)
        return -self.h / math.tan(0.5 * gap) + 0.25 * math.sin(0.5 * gap) * dphi / phi

    def drift(self, j: int, th1: float, th2: float) -> float:
        self._check_j(j)
        gap = _require_ordered(th1, th2)
        slope = self.kappa * self.dlog_dgap(gap)
        return -slope if j == 1 else slope

    def gap_slope_jet(self, gap: float) -> Tuple[float, float, float]:
        """kappa times the first three gap derivatives of log Z, chain rule through u = sin^2(theta/4)"""
        half_sin, half_cos = math.sin(0.5 * gap), math.cos(0.5 * gap)
        u = math.sin(0.25 * gap) ** 2
        u1, u2, u3 = 0.25 * half_sin, 0.125 * half_cos, -0.0625 * half_sin

        phi, dphi, d2phi, d3phi = self.hyp.jet(u)
        psi = dphi / phi
        psi_u = d2phi / phi - psi * psi
        psi_uu = d3phi / phi - 3.0 * psi * d2phi / phi + 2.0 * psi ** 3

        cot = half_cos / half_sin
        inv_sin2 = 1.0 / half_sin ** 2
        g = -self.h * cot + psi * u1
        dg = 0.5 * self.h * inv_sin2 + psi_u * u1 * u1 + psi * u2
        d2g = (-0.5 * self.h * inv_sin2 * cot + psi_uu * u1 ** 3
               + 3.0 * psi_u * u1 * u2 + psi * u3)
        return self.kappa * g, self.kappa * dg, self.kappa * d2g

    def expected_F(self) -> float:
        h_tilde = (6.0 - self.kappa) * (self.kappa - 2.0) / (8.0 * self.kappa)
        return h_tilde - self.alpha

    def interchange_constant(self) -> float:
        return 1.0


def eval_G_mu(kappa: float, mu: float, th1: float, th2: float) -> float:
    return Spiral(kappa, mu).value(th1, th2)


def eval_Z_alpha(pf: CRWeighted, th1: float, th2: float) -> float:
    if not isinstance(pf, CRWeighted):
        raise DomainError("eval_Z_alpha needs a CR-weighted partition function")
    return pf.value(th1, th2)


def drift_b(pf: PartitionFn, j: int, th1: float, th2: float) -> float:
    return pf.drift(j, th1, th2)


def interchange_constant(pf: PartitionFn) -> float:
    return pf.interchange_constant()


def kappa4_closed_form(alpha: float, gap) -> np.ndarray:
    """Z_alpha at kappa = 4: sin(theta/2)^{-1/2} times cos or cosh of sqrt(|alpha|/2)(theta - pi)"""
    gap = np.asarray(gap, dtype=float)
    prefactor = np.sin(0.5 * gap) ** -0.5
    if alpha >= 0:
        return prefactor * np.cos(math.sqrt(0.5 * alpha) * (gap - math.pi))
    return prefactor * np.cosh(math.sqrt(-0.5 * alpha) * (gap - math.pi))


def partition_table(pf: PartitionFn, grid: int) -> pd.DataFrame:
    """(theta, value) for theta = 2 pi k / grid, k = 1 .. grid - 1, with th1 = 0"""
    if grid < 2:
        raise DomainError("grid must be at least 2", {'grid': grid})
    thetas = TWO_PI * np.arange(1, grid) / grid
    values = [pf.value(0.0, float(theta)) for theta in thetas]
    drifts = [pf.drift(1, 0.0, float(theta)) for theta in thetas]
    return pd.DataFrame({'theta': thetas, 'value': values, 'b1': drifts})


# ---------------------------------------------------------------------------
# Exact conformal-radius moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentConstants:
    """Exponents and endpoint values of the two 2F1 solutions"""
    kappa: float
    alpha: float
    A: float
    B: float
    C: float
    f1_at_1: float
    f2_at_1: float


def moment_constants(kappa: float, alpha: float,
                     settings: Optional[HypergeometricSettings] = None) -> MomentConstants:
    settings = settings or _DEFAULT_HYP
    _require_kappa(kappa)
    alpha0 = critical_alpha(kappa)
    if alpha >= alpha0:
        raise Divergent("E[CR^-alpha] is infinite for alpha >= 1 - kappa/8",
                        {'kappa': kappa, 'alpha': alpha, 'alpha0': alpha0})
    a = 1.0 - 4.0 / kappa
    disc = a * a + 8.0 * alpha / kappa
    if disc < 0:
        raise DomainError("alpha too negative for real exponents", {'kappa': kappa, 'alpha': alpha})
    root = math.sqrt(disc)
    C = 1.5 - 4.0 / kappa
    if abs(C - round(C)) < settings.degenerate_tol:
        raise ParameterDegenerate("C = 3/2 - 4/kappa is an integer; perturb kappa",
                                  {'kappa': kappa, 'C': C})
    A = a + root
    B = a - root
    f1_at_1 = math.cos(math.pi * root) / math.cos(math.pi * a)
    log_f2 = log_gamma(2.0 - C) + log_gamma(1.0 - C) - log_gamma(1.0 - A) - log_gamma(1.0 - B)
    f2_at_1 = gamma_sign(1.0 - A) * gamma_sign(1.0 - B) * math.exp(log_f2)
    return MomentConstants(kappa, alpha, A, B, C, f1_at_1, f2_at_1)


def _basis(constants: MomentConstants, u: float,
           settings: HypergeometricSettings) -> Tuple[float, float]:
    A, B, C = constants.A, constants.B, constants.C
    if u == 1.0:
        return constants.f1_at_1, constants.f2_at_1
    f1 = hyp2f1(A, B, C, u, settings)
    f2 = u ** (1.0 - C) * hyp2f1(1.0 + A - C, 1.0 + B - C, 2.0 - C, u, settings) if u > 0 else 0.0
    return f1, f2


def _check_u(u: float) -> float:
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise DomainError("u must lie in [0, 1]", {'u': u})
    return u


def cr_moment_exact(kappa: float, alpha: float, u: float,
                    settings: Optional[HypergeometricSettings] = None) -> float:
    """E[CR^{-alpha}] for chordal SLE_kappa started at gap theta, u = sin^2(theta/4)"""
    settings = settings or _DEFAULT_HYP
    u = _check_u(u)
    constants = moment_constants(kappa, alpha, settings)
    f1, f2 = _basis(constants, u, settings)
    return f1 + (1.0 - constants.f1_at_1) / constants.f2_at_1 * f2


def cr_moment_sided_exact(kappa: float, alpha: float, u: float,
                          settings: Optional[HypergeometricSettings] = None) -> Tuple[float, float]:
    """(E[CR^{-alpha}; theta_T = 2pi], E[CR^{-alpha}; theta_T = 0])"""
    settings = settings or _DEFAULT_HYP
    u = _check_u(u)
    constants = moment_constants(kappa, alpha, settings)
    f1, f2 = _basis(constants, u, settings)
    two_pi_side = f2 / constants.f2_at_1
    zero_side = f1 - constants.f1_at_1 * two_pi_side
    return two_pi_side, zero_side
