"""
Adaptive quadrature for sharply peaked, log-space integrands.

The integrand is supplied as its logarithm. The peak is located first
(coarse scan, then bounded Brent refinement), the integrand is rescaled by
its peak value, and adaptive Simpson integrates three segments: the two
tails and a window of a few peak widths around the maximum.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .config_loader import config_loader
from .exceptions import InvalidParameterError, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-8
DEFAULT_MAX_NODES = 2 ** 20
DEFAULT_PEAK_WIDTHS = 12
SCAN_NODES = 257
MIN_DEPTH = 4
MAX_DEPTH = 50


@dataclass(frozen=True)
class PeakIntegral:
    """Result of integrate_peaked."""
    log_value: float
    peak: float
    width: float
    log_peak_value: float
    evaluations: int

    @property
    def window(self) -> Tuple[float, float]:
        return self.peak - self.width, self.peak + self.width


class AdaptiveSimpson:
    """
    Adaptive Simpson's rule with a global cap on integrand evaluations.

    Each panel is accepted when the Richardson error estimate falls below its
    share of the absolute tolerance; the panel tolerance halves with depth.
    A panel is also accepted once its error estimate is within noise_floor
    times its width, where noise_floor bounds the rounding noise of f.
    """

    def __init__(self, f: Callable[[float], float], tol: float, max_nodes: int = DEFAULT_MAX_NODES,
                 noise_floor: float = 0.0):
        if not tol > 0:
            raise InvalidParameterError(f"Quadrature tolerance must be positive, got {tol}")
        self.f = f
        self.tol = tol
        self.max_nodes = max_nodes
        self.noise_floor = max(float(noise_floor), 0.0)
        self.evaluations = 0

    def _eval(self, x: float) -> float:
        self.evaluations += 1
        if self.evaluations > self.max_nodes:
            raise QuadratureError(
                "Adaptive Simpson exceeded its node cap",
                {'max_nodes': self.max_nodes, 'x': x, 'tol': self.tol},
            )
        return self.f(x)

    @staticmethod
    def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
        return h / 3.0 * (fa + 4.0 * fm + fb)

    def _adaptive(self, a, b, fa, fm, fb, s_whole, depth, tol) -> float:
        m = (a + b) / 2.0
        h = (b - a) / 2.0
        lm = (a + m) / 2.0
        rm = (m + b) / 2.0
        flm = self._eval(lm)
        frm = self._eval(rm)

        s_left = self._simpson(fa, flm, fm, h / 2.0)
        s_right = self._simpson(fm, frm, fb, h / 2.0)
        s_combined = s_left + s_right
        error_estimate = (s_combined - s_whole) / 15.0

        if abs(error_estimate) < tol or abs(error_estimate) <= self.noise_floor * (b - a):
            return s_combined + error_estimate
        if depth >= MAX_DEPTH:
            raise QuadratureError(
                "Adaptive Simpson reached its depth limit",
                {'a': a, 'b': b, 'error_estimate': error_estimate, 'tol': tol},
            )

        left = self._adaptive(a, m, fa, flm, fm, s_left, depth + 1, tol / 2.0)
        right = self._adaptive(m, b, fm, frm, fb, s_right, depth + 1, tol / 2.0)
        return left + right

    def integrate(self, a: float, b: float) -> float:
        """Integrate f over [a, b], starting from 2^MIN_DEPTH equal panels."""
        if a == b:
            return 0.0
        if a > b:
            return -self.integrate(b, a)

        panels = 2 ** MIN_DEPTH
        edges = np.linspace(a, b, panels + 1)
        values = [self._eval(float(x)) for x in edges]
        total = 0.0
        for i in range(panels):
            left, right = float(edges[i]), float(edges[i + 1])
            mid = (left + right) / 2.0
            fm = self._eval(mid)
            s_whole = self._simpson(values[i], fm, values[i + 1], (right - left) / 2.0)
            total += self._adaptive(left, right, values[i], fm, values[i + 1], s_whole, MIN_DEPTH, self.tol / panels)
        return total


def locate_peak(log_f: Callable[[float], float], lower: float, upper: float) -> Tuple[float, float]:
    """
    Maximizer and maximum of log_f on [lower, upper].

    A coarse scan brackets the maximum; bounded Brent refines it inside the
    bracket. The better of the scan and the refinement is returned.
    """
    grid = np.linspace(lower, upper, SCAN_NODES)
    values = np.array([log_f(float(t)) for t in grid])
    if not np.any(np.isfinite(values)):
        raise QuadratureError("Log-integrand is -inf on the whole scan grid", {'lower': lower, 'upper': upper})

    best = int(np.nanargmax(values))
    peak, peak_value = float(grid[best]), float(values[best])
    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, SCAN_NODES - 1)])

    def negative(t: float) -> float:
        value = log_f(t)
        return math.inf if not math.isfinite(value) else -value

    refined = minimize_scalar(negative, bounds=(lo, hi), method='bounded',
                              options={'xatol': 1e-12 * max(1.0, upper - lower)})
    if refined.success and math.isfinite(refined.fun) and -refined.fun > peak_value:
        peak, peak_value = float(refined.x), float(-refined.fun)
    return peak, peak_value


def integrate_peaked(
    log_f: Callable[[float], float],
    lower: float,
    upper: float,
    width: float,
    rel_tol: float = None,
    max_nodes: int = None,
    peak_widths: float = None,
    noise_floor: float = 0.0,
) -> PeakIntegral:
    """
    log of the integral of exp(log_f) over [lower, upper].

    Args:
        log_f: Scalar log-integrand, -inf allowed; must be finite near its peak.
        lower: Lower limit.
        upper: Upper limit.
        width: Expected width of the peak, used to size the refined window.
        rel_tol: Relative tolerance (quadrature.rel_tol by default).
        max_nodes: Cap on integrand evaluations per segment (quadrature.max_nodes).
        peak_widths: Half-width of the refined window in units of width.
        noise_floor: Rounding noise of exp(log_f) relative to its peak value;
            panels are not refined below it.

    Returns:
        PeakIntegral with the log of the integral and diagnostics.

    Raises:
        QuadratureError: If a segment exceeds the node cap.
    """
    settings: Dict = config_loader.get_quadrature_config()
    rel_tol = rel_tol if rel_tol is not None else float(settings.get('rel_tol', DEFAULT_REL_TOL))
    max_nodes = max_nodes if max_nodes is not None else int(settings.get('max_nodes', DEFAULT_MAX_NODES))
    peak_widths = peak_widths if peak_widths is not None else float(settings.get('peak_widths', DEFAULT_PEAK_WIDTHS))

    peak, log_peak = locate_peak(log_f, lower, upper)

    def scaled(t: float) -> float:
        value = log_f(t)
        return 0.0 if not math.isfinite(value) else math.exp(value - log_peak)

    window_lo = max(lower, peak - peak_widths * width)
    window_hi = min(upper, peak + peak_widths * width)

    # rough size of the integral sets the absolute tolerance
    nodes = np.linspace(window_lo, window_hi, 129)
    rough = float(np.trapezoid([scaled(float(t)) for t in nodes], nodes))
    abs_tol = rel_tol * max(rough, 1e-300)

    segments = [(lower, window_lo), (window_lo, window_hi), (window_hi, upper)]
    total = 0.0
    evaluations = 0
    for a, b in segments:
        if b <= a:
            continue
        integrator = AdaptiveSimpson(scaled, abs_tol / 3.0, max_nodes, noise_floor)
        total += integrator.integrate(a, b)
        evaluations += integrator.evaluations

    if not total > 0:
        raise QuadratureError("Integral of a positive integrand came out non-positive",
                              {'peak': peak, 'width': width, 'total': total})

    logger.debug(f"integrate_peaked: peak={peak:.6g}, width={width:.3g}, "
                 f"window=[{window_lo:.6g}, {window_hi:.6g}], evaluations={evaluations}")
    return PeakIntegral(
        log_value=log_peak + math.log(total),
        peak=peak,
        width=width,
        log_peak_value=log_peak,
        evaluations=evaluations,
    )
