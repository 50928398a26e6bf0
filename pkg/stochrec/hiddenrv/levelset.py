#!/usr/bin/env python
# encoding: utf-8

"""
the unit level set D = {φ = 1} inside [0,1]² and the critical point ξ*
maximizing h(ξ) = ξ1 + ξ2 on D
"""

from dataclasses import dataclass, field
from scipy import optimize
import numpy as np
import pandas as pd

from .errors import NotFound, OpenArc, OutsideDomain, TraceDiverged, Unsupported


STEP = 1e-2
NEWTON_TOL = 1e-10
ENDPOINT_TOL = 1e-6
MAX_FAILURES = 5
MAX_POINTS = 100_000
PREDICTOR = 0.9


@dataclass
class LevelSetTrace:
    points: np.ndarray
    residuals: np.ndarray
    endpoints: tuple
    step: float = STEP

    @property
    def h (self):
        return self.points.sum(axis=1)


    def to_frame (self):
        """
        the trace as a table with columns xi1, xi2, phi_residual, h
        """
        return pd.DataFrame({
            "xi1": self.points[:, 0],
            "xi2": self.points[:, 1],
            "phi_residual": self.residuals,
            "h": self.h,
            })


    def to_csv (self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.12g")


@dataclass
class CriticalPoint:
    xi_star: np.ndarray
    h: float
    grad: np.ndarray
    certified: dict = field(default_factory=dict)
    method: str = "newton"

    @property
    def is_certified (self):
        return all(self.certified.values())


    def serialize (self):
        return {
            "xi_star": [round(float(x), 12) for x in self.xi_star],
            "h": round(float(self.h), 12),
            "grad": [float(g) for g in self.grad],
            "certified": dict(self.certified),
            "method": self.method,
            }


def _require_deterministic (ev):
    if not ev.deterministic:
        raise Unsupported("level-set geometry needs a closed-form or quadrature evaluator")


def _log_phi (ev, xi):
    """
    log φ and its gradient; {log φ = 0} is the same curve as {φ = 1}
    """
    value, grad, _ = ev.moments(xi)
    return np.log(value), grad / value


def _correct (ev, xi, tol=NEWTON_TOL, max_iter=25):
    """
    Newton projection of `xi` back onto {φ = 1} along the gradient;
    returns the corrected point or None
    """
    xi = np.array(xi, dtype=float)

    for _ in range(max_iter):
        try:
            g, dg = _log_phi(ev, xi)
        except OutsideDomain:
            return None

        if abs(g) < tol:
            return xi

        norm2 = dg @ dg

        if norm2 == 0.0 or not np.isfinite(norm2):
            return None

        xi = xi - g * dg / norm2

    return None


def _axis_endpoint (ev, start):
    """
    second intersection of D with the ξ2 axis, by Newton on s -> log φ(0, s)
    """
    def f (s):
        return _log_phi(ev, (0.0, s))[0]

    def fprime (s):
        return _log_phi(ev, (0.0, s))[1][1]

    s = optimize.newton(f, max(start, 0.75), fprime=fprime, tol=1e-14, maxiter=100)
    return np.array([0.0, s])


def trace_level_set (ev, step=STEP, logger=None):
    """
    predictor-corrector trace of D from (1, 0): predict along the gradient
    rotated by 90 degrees, then correct back onto {φ = 1} by Newton;
    stops at the ξ2 axis

    :param ev: closed-form or quadrature evaluator.
    :type ev: PhiEvaluator.

    :param step: maximum arc-length distance between consecutive points.
    :type step: float.

    :returns: LevelSetTrace
    """
    _require_deterministic(ev)
    xi = np.array([1.0, 0.0])
    points = [xi]
    direction = None
    failures = 0
    h = PREDICTOR * step

    while len(points) < MAX_POINTS:
        _, dg = _log_phi(ev, xi)
        tangent = np.array([-dg[1], dg[0]]) / np.hypot(*dg)

        if direction is None:
            tangent = tangent if tangent[1] > 0.0 else -tangent
        elif tangent @ direction < 0.0:
            tangent = -tangent

        guess = xi + h * tangent

        if guess[0] <= 0.0:
            end = _axis_endpoint(ev, xi[1])
            points.append(end)
            break

        new = _correct(ev, guess)

        if new is None or np.linalg.norm(new - xi) > step:
            failures += 1

            if failures >= MAX_FAILURES:
                raise TraceDiverged(f"Newton correction failed {failures} times", last_point=xi.tolist())

            h *= 0.5
            continue

        if new[1] < -ENDPOINT_TOL or new[0] > 1.0 + ENDPOINT_TOL or new[1] > 1.0 + ENDPOINT_TOL:
            raise OpenArc(f"level set leaves [0,1]^2 near {new.tolist()}", trace=np.array(points))

        if new[0] <= 0.0:
            points.append(_axis_endpoint(ev, new[1]))
            break

        failures = 0
        h = PREDICTOR * step
        direction = tangent
        points.append(new)
        xi = new
    else:
        raise TraceDiverged("trace did not reach the ξ2 axis", last_point=xi.tolist())

    points = np.array(points)
    residuals = np.array([abs(ev.phi(p)[0] - 1.0) for p in points])

    if logger:
        logger.debug("level set traced with %d points, max residual %.2e", len(points), residuals.max())

    return LevelSetTrace(points=points, residuals=residuals, endpoints=(points[0], points[-1]), step=step)


######################################################################
## critical point

def _certify (ev, xi, tol):
    value, grad, _ = ev.moments(xi)
    gap = abs(grad[0] - grad[1]) / np.linalg.norm(grad)
    return {
        "interior": bool((xi > 0.0).all() and (xi < 1.0).all()),
        "on_level": bool(abs(value - 1.0) < tol),
        "parallel": bool(gap < tol),
        }, grad


def _diagonal_start (ev):
    """
    the point where D crosses the diagonal ξ1 = ξ2
    """
    def f (s):
        return _log_phi(ev, (s, s))[0]

    hi = 1.0

    try:
        while f(hi) <= 0.0 and hi < 4.0:
            hi *= 1.25
    except OutsideDomain:
        hi *= 0.8

    s = optimize.brentq(f, 0.5, hi, xtol=1e-14)
    return np.array([s, s])


def _newton_xi_star (ev, tol, max_iter=50):
    xi = _diagonal_start(ev)

    for _ in range(max_iter):
        value, grad, hess = ev.moments(xi)
        residual = np.array([value - 1.0, grad[0] - grad[1]])

        if np.abs(residual).max() < tol:
            return xi

        jac = np.array([grad, hess[0] - hess[1]])
        xi = xi - np.linalg.solve(jac, residual)

        if not np.all(np.isfinite(xi)):
            break

    return None


def _radial_point (ev, angle, radius):
    """
    the point of D on the ray at `angle`, bracketed around `radius`
    """
    u = np.array([np.cos(angle), np.sin(angle)])

    def f (r):
        return _log_phi(ev, r * u)[0]

    lo, hi = 0.5 * radius, 1.5 * radius

    while f(lo) >= 0.0:
        lo *= 0.5
    while f(hi) <= 0.0:
        hi *= 1.25

    return optimize.brentq(f, lo, hi, xtol=1e-14) * u


def _golden_xi_star (ev, trace):
    """
    golden-section maximization of h along D, bracketed by the argmax of
    h over the traced points
    """
    pts = trace.points
    k = int(np.argmax(trace.h))

    if k == 0 or k == len(pts) - 1:
        return None

    angles = np.arctan2(pts[:, 1], pts[:, 0])
    radii = np.hypot(pts[:, 0], pts[:, 1])

    def neg_h (angle):
        return -_radial_point(ev, angle, radii[k]).sum()

    res = optimize.minimize_scalar(neg_h, bracket=(angles[k - 1], angles[k], angles[k + 1]), method="golden", tol=1e-12)
    return _radial_point(ev, res.x, radii[k])


def find_xi_star (ev, tol=NEWTON_TOL, trace=None, logger=None):
    """
    solve φ(ξ) = 1, ∂1φ(ξ) = ∂2φ(ξ) by Newton, starting where D crosses
    the diagonal; when Newton stalls, fall back to a golden-section
    search along the traced arc

    :returns: CriticalPoint
    """
    _require_deterministic(ev)
    method = "newton"

    try:
        xi = _newton_xi_star(ev, tol)
    except (OutsideDomain, ValueError, np.linalg.LinAlgError):
        xi = None

    if xi is None or not ((xi > 0.0).all() and (xi < 1.0).all()):
        if logger:
            logger.debug("Newton for xi* stalled, falling back to golden-section search")

        method = "golden"

        try:
            trace = trace if trace is not None else trace_level_set(ev, logger=logger)
            xi = _golden_xi_star(ev, trace)
        except (OpenArc, TraceDiverged) as e:
            raise NotFound(f"no level-set arc to search: {e}")

        if xi is None:
            raise NotFound("h is maximized at an endpoint of D", h_max=float(trace.h.max()))

    # golden-section accuracy limits the gradient check
    flags, grad = _certify(ev, xi, tol if method == "newton" else max(tol, 1e-5))

    if not flags["interior"]:
        raise NotFound(f"critical point {xi.tolist()} outside (0,1)^2", xi=xi.tolist())

    point = CriticalPoint(xi_star=xi, h=float(xi.sum()), grad=grad, certified=flags, method=method)

    if logger:
        logger.debug("xi* = %s (h = %.10f) via %s, flags %s", xi.tolist(), point.h, method, flags)

    return point
