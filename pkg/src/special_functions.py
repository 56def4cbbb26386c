"""
Special functions used by the exact conformal-radius moment:
log|Gamma| with its sign, and the Gauss hypergeometric function 2F1 on [0, 1).
"""

import math
from typing import Optional, Tuple

from config_loader import HypergeometricSettings
from errors import DomainError, SeriesNonConvergent

_DEFAULT_HYP = HypergeometricSettings()

# Lanczos approximation, g = 7, n = 9
LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def _is_nonpositive_integer(x: float, tol: float = 0.0) -> bool:
    return x <= tol and abs(x - round(x)) <= tol


def log_gamma(x: float) -> float:
    """log|Gamma(x)|; reflection below 1/2, DomainError at the poles"""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError("log_gamma needs a finite argument", {'x': x})
    if _is_nonpositive_integer(x):
        raise DomainError("Gamma has a pole at non-positive integers", {'x': x})
    if x < 0.5:
        return math.log(math.pi) - math.log(abs(math.sin(math.pi * x))) - log_gamma(1.0 - x)

    x -= 1.0
    series = LANCZOS_COEFFICIENTS[0]
    for i, coefficient in enumerate(LANCZOS_COEFFICIENTS[1:], start=1):
        series += coefficient / (x + i)
    t = x + LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (x + 0.5) * math.log(t) - t + math.log(series)


def gamma_sign(x: float) -> float:
    """Sign of Gamma(x) away from the poles"""
    if x > 0:
        return 1.0
    if _is_nonpositive_integer(x):
        raise DomainError("Gamma has a pole at non-positive integers", {'x': x})
    return 1.0 if math.sin(math.pi * x) > 0 else -1.0


def gamma(x: float) -> float:
    return gamma_sign(x) * math.exp(log_gamma(x))


def _signed_log_gamma_ratio(numerator: Tuple[float, ...],
                            denominator: Tuple[float, ...]) -> Tuple[float, float]:
    """
    (sign, log|.|) of prod Gamma(numerator) / prod Gamma(denominator).

    A pole in the denominator makes the ratio vanish, reported as sign 0.
    """
    sign = 1.0
    log_value = 0.0
    for x in denominator:
        if _is_nonpositive_integer(x):
            return 0.0, -math.inf
        sign *= gamma_sign(x)
        log_value -= log_gamma(x)
    for x in numerator:
        sign *= gamma_sign(x)
        log_value += log_gamma(x)
    return sign, log_value


def _gauss_series(a: float, b: float, c: float, u: float,
                  settings: HypergeometricSettings) -> float:
    total = 1.0
    term = 1.0
    small_terms = 0
    for n in range(settings.series_max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * u
        total += term
        if term == 0.0:
            return total
        if abs(term) <= settings.series_tol * abs(total):
            small_terms += 1
            if small_terms >= 2:
                return total
        else:
            small_terms = 0
    raise SeriesNonConvergent("Gauss series did not converge",
                              {'a': a, 'b': b, 'c': c, 'u': u,
                               'terms': settings.series_max_terms, 'last_term': term})


def hyp2f1(a: float, b: float, c: float, u: float,
           settings: Optional[HypergeometricSettings] = None) -> float:
    """
    Gauss hypergeometric 2F1(a, b; c; u) for u in [0, 1).

    The series is summed directly for u <= 1/2. Above 1/2 the 1 - u connection
    formula is used unless c - a - b is an integer, in which case the direct
    series is summed.
    """
    settings = settings or _DEFAULT_HYP
    if _is_nonpositive_integer(c):
        raise DomainError("c must not be a non-positive integer", {'c': c})
    if not 0.0 <= u < 1.0:
        raise DomainError("hyp2f1 is evaluated on [0, 1)", {'u': u})
    if u == 0.0:
        return 1.0
    s = c - a - b
    if u <= 0.5 or abs(s - round(s)) <= settings.degenerate_tol:
        return _gauss_series(a, b, c, u, settings)

    w = 1.0 - u
    sign1, log1 = _signed_log_gamma_ratio((c, s), (c - a, c - b))
    sign2, log2 = _signed_log_gamma_ratio((c, -s), (a, b))
    value = 0.0
    if sign1 != 0.0:
        value += sign1 * math.exp(log1) * _gauss_series(a, b, 1.0 - s, w, settings)
    if sign2 != 0.0:
        value += sign2 * math.exp(log2 + s * math.log(w)) * _gauss_series(c - a, c - b, s + 1.0, w, settings)
    return value
