"""
Residual checks for the differential identities behind the classification

* radial BPZ equations of a partition function
* the commutation relation [L1, L2] = (L2 - L1) / sin^2(theta21 / 2)
* the kappa = 0 first-order system satisfied by U_mu and -6 log sin

Finite differences use 3-point central stencils at steps h, h/2, h/4. The
reported value is the Richardson combination of the two finest levels and the
order is read off from the ratio of successive differences.
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from config_loader import VerifySettings
from conformal_core import TWO_PI
from drivers import RngSpec
from errors import DomainError, StencilOutOfDomain
from partition import PartitionFn, Spiral
from semiclassical import ChordalU, Umu

_DEFAULT_VERIFY = VerifySettings()

AngleFunction = Callable[[float, float], float]
ZeroKappaVariant = Union[Umu, ChordalU]
DriftJets = Callable[[float, float], Tuple[Dict[str, float], Dict[str, float]]]

TEST_FUNCTIONS: Dict[str, AngleFunction] = {
    'one': lambda th1, th2: 1.0,
    'theta1': lambda th1, th2: th1,
    'theta2': lambda th1, th2: th2,
    'sin1_plus_cos2': lambda th1, th2: math.sin(th1) + math.cos(th2),
    'sin1_sin2': lambda th1, th2: math.sin(th1) * math.sin(th2),
    'exp_sum': lambda th1, th2: math.exp(0.1 * (th1 + th2)),
}


@dataclass(frozen=True)
class ResidualReport:
    """LHS value against its expected value at one point, with FD provenance"""
    location: Tuple[float, float]
    value: float
    expected: float
    fd_step: float
    estimated_order: float
    kind: str = ""
    label: str = ""

    @property
    def residual(self) -> float:
        return self.value - self.expected

    @property
    def converged(self) -> bool:
        return math.isinf(self.estimated_order)

    def passes(self, bound: float, min_order: float = 2.0) -> bool:
        order_ok = self.converged or self.fd_step == 0.0 or self.estimated_order >= min_order
        return abs(self.residual) < bound and order_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'label': self.label,
            'theta1': float(self.location[0]),
            'theta2': float(self.location[1]),
            'value': float(self.value),
            'expected': float(self.expected),
            'residual': float(self.residual),
            'fd_step': float(self.fd_step),
            'estimated_order': None if self.converged else float(self.estimated_order),
            'converged': self.converged,
        }


@dataclass(frozen=True)
class GeneratorSpec:
    """
    Drifts b1, b2 of L_j = kappa/2 d_jj + b_j d_j + cot((theta_k - theta_j)/2) d_k.

    ``jets`` optionally returns the drifts with their first and second angle
    derivatives in closed form; without it the drifts are differenced numerically.
    """
    kappa: float
    b1: AngleFunction
    b2: AngleFunction
    label: str = ""
    jets: Optional[DriftJets] = None

    @classmethod
    def from_partition(cls, pf: PartitionFn) -> "GeneratorSpec":
        return cls(kappa=pf.kappa,
                   b1=lambda th1, th2: pf.drift(1, th1, th2),
                   b2=lambda th1, th2: pf.drift(2, th1, th2),
                   label=pf.label,
                   jets=pf.drift_jets)

    def with_perturbed_b1(self, delta: float) -> "GeneratorSpec":
        b1, jets = self.b1, self.jets
        perturbed_jets = None
        if jets is not None:
            def perturbed_jets(th1: float, th2: float):
                p, q = jets(th1, th2)
                return {**p, 'f': p['f'] + delta}, q
        return GeneratorSpec(self.kappa, lambda th1, th2: b1(th1, th2) + delta, self.b2,
                             f"{self.label}+{delta:g}", perturbed_jets)

    def rotation_error(self, points: Sequence[Tuple[float, float]],
                       shifts: Sequence[float] = (0.7, -1.9, 3.0)) -> float:
        worst = 0.0
        for th1, th2 in points:
            for b in (self.b1, self.b2):
                base = b(th1, th2)
                if not math.isfinite(base):
                    raise DomainError("Drift is not finite", {'theta1': th1, 'theta2': th2})
                for a in shifts:
                    worst = max(worst, abs(b(th1 + a, th2 + a) - base))
        return worst

    def validate(self, points: Sequence[Tuple[float, float]], tol: float = 1e-9) -> None:
        error = self.rotation_error(points)
        if error >= tol:
            raise DomainError("Drifts are not rotation invariant", {'error': error, 'label': self.label})


# ---------------------------------------------------------------------------
# Finite-difference helpers
# ---------------------------------------------------------------------------

def _check_stencil(th1: float, th2: float, h: float) -> None:
    gap = th2 - th1
    if not (gap - 2.0 * h > 0.0 and gap + 2.0 * h < TWO_PI):
        raise StencilOutOfDomain("Finite-difference stencil leaves 0 < theta2 - theta1 < 2pi",
                                 {'gap': gap, 'step': h})


def _derivatives(f: AngleFunction, th1: float, th2: float, h: float) -> Dict[str, float]:
    """Central differences of f: value, d1, d2, d11, d22, d12"""
    f0 = f(th1, th2)
    f_p1, f_m1 = f(th1 + h, th2), f(th1 - h, th2)
    f_p2, f_m2 = f(th1, th2 + h), f(th1, th2 - h)
    mixed = (f(th1 + h, th2 + h) - f(th1 + h, th2 - h)
             - f(th1 - h, th2 + h) + f(th1 - h, th2 - h))
    return {
        'f': f0,
        'd1': (f_p1 - f_m1) / (2.0 * h),
        'd2': (f_p2 - f_m2) / (2.0 * h),
        'd11': (f_p1 - 2.0 * f0 + f_m1) / (h * h),
        'd22': (f_p2 - 2.0 * f0 + f_m2) / (h * h),
        'd12': mixed / (4.0 * h * h),
    }


def _richardson(evaluate: Callable[[float], float], h: float,
                settings: VerifySettings) -> Tuple[float, float]:
    """(extrapolated value, observed order) from levels h, h/2, h/4"""
    r0, r1, r2 = evaluate(h), evaluate(0.5 * h), evaluate(0.25 * h)
    value = (4.0 * r2 - r1) / 3.0
    coarse, fine = abs(r0 - r1), abs(r1 - r2)
    if fine < settings.roundoff_floor:
        order = math.inf
    elif coarse < settings.roundoff_floor:
        order = 0.0
    else:
        order = math.log2(coarse / fine)
    return value, order


# ---------------------------------------------------------------------------
# BPZ
# ---------------------------------------------------------------------------

def expected_F(pf: PartitionFn) -> float:
    return pf.expected_F()


def _conformal_weight(kappa: float) -> float:
    return (6.0 - kappa) / (2.0 * kappa)


def _bpz_lhs(kappa: float, which: int, cot: float, s2: float, z: Dict[str, float]) -> float:
    """kappa/2 d_jj Z/Z + cot((theta_k - theta_j)/2) d_k Z/Z - h/(2 s^2) from Z and its derivatives"""
    h = _conformal_weight(kappa)
    if which == 1:
        return 0.5 * kappa * z['d11'] / z['f'] + cot * z['d2'] / z['f'] - 0.5 * h / s2
    return 0.5 * kappa * z['d22'] / z['f'] - cot * z['d1'] / z['f'] - 0.5 * h / s2


def bpz_residual(pf: PartitionFn, th1: float, th2: float, which: int = 1,
                 settings: Optional[VerifySettings] = None) -> ResidualReport:
    """
    Radial BPZ equation number ``which`` at (th1, th2).

    Spiral uses closed-form log-derivatives; other partition functions are
    differentiated numerically.
    """
    settings = settings or _DEFAULT_VERIFY
    if which not in (1, 2):
        raise DomainError("which must be 1 or 2", {'which': which})
    gap = th2 - th1
    if not 0.0 < gap < TWO_PI:
        raise DomainError("Angles must satisfy th1 < th2 < th1 + 2pi", {'th1': th1, 'th2': th2})
    cot = 1.0 / math.tan(0.5 * gap)
    s2 = math.sin(0.5 * gap) ** 2
    expected = pf.expected_F()

    if isinstance(pf, Spiral):
        d1, d2, d11, d12, d22 = pf.log_derivatives(th1, th2)
        z = {'f': 1.0, 'd1': d1, 'd2': d2, 'd11': d11 + d1 * d1, 'd22': d22 + d2 * d2}
        value = _bpz_lhs(pf.kappa, which, cot, s2, z)
        return ResidualReport((th1, th2), value, expected, 0.0, math.inf, f"bpz{which}", pf.label)

    step = settings.fd_step
    _check_stencil(th1, th2, step)

    def lhs(h: float) -> float:
        return _bpz_lhs(pf.kappa, which, cot, s2, _derivatives(pf.value, th1, th2, h))

    value, order = _richardson(lhs, step, settings)
    report = ResidualReport((th1, th2), value, expected, step, order, f"bpz{which}", pf.label)
    if abs(report.residual) > settings.residual_bound:
        logger.warning(f"Large BPZ residual {report.residual:.3e} for {pf.label} at ({th1:.4f}, {th2:.4f})")
    return report


# ---------------------------------------------------------------------------
# Commutation relation
# ---------------------------------------------------------------------------

def _bracket_terms(spec: GeneratorSpec, f: AngleFunction, th1: float, th2: float,
                   h: float) -> Tuple[float, float]:
    """([L1, L2] f, (L2 - L1) f / s^2) with every derivative taken at step h"""
    a = 0.5 * spec.kappa
    gap = th2 - th1
    s2 = math.sin(0.5 * gap) ** 2
    c = 1.0 / math.tan(0.5 * gap)
    c1 = 0.5 / s2
    c2 = -0.5 / s2
    c11 = c22 = c / (2.0 * s2)

    fd = _derivatives(f, th1, th2, h)
    if spec.jets is not None:
        p, q = spec.jets(th1, th2)
    else:
        p = _derivatives(spec.b1, th1, th2, h)
        q = _derivatives(spec.b2, th1, th2, h)
    b1, b2 = p['f'], q['f']

    coef_1 = (-a * c11 - a * p['d22'] - b2 * p['d2'] - b1 * c1 + c * p['d1'] - c * c2)
    coef_2 = (a * q['d11'] + b1 * q['d1'] - a * c22 + c * q['d2'] - b2 * c2 + c * c1)
    coef_11 = -2.0 * a * c1
    coef_22 = -2.0 * a * c2
    coef_12 = 2.0 * a * q['d1'] - 2.0 * a * p['d2']
    bracket = (coef_1 * fd['d1'] + coef_2 * fd['d2'] + coef_11 * fd['d11']
               + coef_22 * fd['d22'] + coef_12 * fd['d12'])

    l1 = a * fd['d11'] + b1 * fd['d1'] + c * fd['d2']
    l2 = a * fd['d22'] + b2 * fd['d2'] - c * fd['d1']
    return bracket, (l2 - l1) / s2


def commutation_bracket_residual(spec: GeneratorSpec, f: AngleFunction, th1: float, th2: float,
                                 settings: Optional[VerifySettings] = None,
                                 label: str = "") -> ResidualReport:
    """[L1, L2] f - (L2 - L1) f / sin^2(theta21/2) with Richardson over step halving"""
    settings = settings or _DEFAULT_VERIFY
    step = settings.fd_step
    _check_stencil(th1, th2, step)

    def residual(h: float) -> float:
        bracket, rhs = _bracket_terms(spec, f, th1, th2, h)
        return bracket - rhs

    value, order = _richardson(residual, step, settings)
    return ResidualReport((th1, th2), value, 0.0, step, order, "bracket",
                          f"{spec.label}:{label}" if label else spec.label)


def drift_cross_symmetry(spec: GeneratorSpec, th1: float, th2: float,
                         settings: Optional[VerifySettings] = None) -> float:
    """d1 b2 - d2 b1 by central differences with Richardson extrapolation"""
    settings = settings or _DEFAULT_VERIFY
    step = settings.fd_step
    _check_stencil(th1, th2, step)

    def difference(h: float) -> float:
        d1_b2 = (spec.b2(th1 + h, th2) - spec.b2(th1 - h, th2)) / (2.0 * h)
        d2_b1 = (spec.b1(th1, th2 + h) - spec.b1(th1, th2 - h)) / (2.0 * h)
        return d1_b2 - d2_b1

    value, _ = _richardson(difference, step, settings)
    return value


# ---------------------------------------------------------------------------
# kappa = 0 system
# ---------------------------------------------------------------------------

def zero_kappa_lhs(variant: ZeroKappaVariant, th1: float, th2: float, which: int = 1) -> float:
    """
    which=1: (d2 U)^2 + 2 cot(theta12/2) d1 U - 3 / sin^2(theta12/2)
    which=2: (d1 U)^2 + 2 cot(theta21/2) d2 U - 3 / sin^2(theta21/2)
    """
    if which not in (1, 2):
        raise DomainError("which must be 1 or 2", {'which': which})
    gap = th2 - th1
    d1, d2 = variant.gradient(th1, th2)
    c = 1.0 / math.tan(0.5 * gap)
    s2 = math.sin(0.5 * gap) ** 2
    if which == 1:
        return d2 * d2 - 2.0 * c * d1 - 3.0 / s2
    return d1 * d1 + 2.0 * c * d2 - 3.0 / s2


def zero_kappa_residual(variant: ZeroKappaVariant, th1: float, th2: float, which: int = 1,
                        grid: Optional[Sequence[Tuple[float, float]]] = None) -> ResidualReport:
    """LHS at (th1, th2) against its mean over a sample grid"""
    grid = list(grid) if grid is not None else interior_points(20)
    mean = math.fsum(zero_kappa_lhs(variant, a, b, which) for a, b in grid) / len(grid)
    value = zero_kappa_lhs(variant, th1, th2, which)
    return ResidualReport((th1, th2), value, mean, 0.0, math.inf, f"zero_kappa{which}", variant.label)


# ---------------------------------------------------------------------------
# Batteries
# ---------------------------------------------------------------------------

def interior_points(n: int, seed: int = 2024, margin: float = 0.5) -> List[Tuple[float, float]]:
    """n reproducible points with margin < theta2 - theta1 < 2pi - margin"""
    if n < 1:
        raise DomainError("n must be at least 1", {'n': n})
    gen = RngSpec(seed).generator()
    th1 = gen.uniform(0.0, TWO_PI, n)
    gap = gen.uniform(margin, TWO_PI - margin, n)
    return [(float(a), float(a + g)) for a, g in zip(th1, gap)]


def bpz_battery(pf: PartitionFn, points: Sequence[Tuple[float, float]],
                settings: Optional[VerifySettings] = None) -> List[ResidualReport]:
    return [bpz_residual(pf, th1, th2, which, settings)
            for th1, th2 in points for which in (1, 2)]


def bracket_battery(spec: GeneratorSpec, points: Sequence[Tuple[float, float]],
                    settings: Optional[VerifySettings] = None,
                    functions: Optional[Dict[str, AngleFunction]] = None) -> List[ResidualReport]:
    functions = functions or TEST_FUNCTIONS
    return [commutation_bracket_residual(spec, f, th1, th2, settings, name)
            for th1, th2 in points for name, f in functions.items()]


def zero_kappa_battery(variants: Sequence[ZeroKappaVariant],
                       points: Sequence[Tuple[float, float]]) -> List[ResidualReport]:
    points = list(points)
    return [zero_kappa_residual(variant, th1, th2, which, points)
            for variant in variants for th1, th2 in points for which in (1, 2)]


def summarize(reports: Sequence[ResidualReport], bound: float, min_order: float) -> Dict[str, Any]:
    residuals = np.array([abs(r.residual) for r in reports]) if reports else np.zeros(0)
    return {
        'count': len(reports),
        'max_abs_residual': float(residuals.max()) if residuals.size else 0.0,
        'bound': bound,
        'min_order': min_order,
        'all_pass': all(r.passes(bound, min_order) for r in reports),
    }
