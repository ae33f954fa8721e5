"""Polyline loops in the complex plane: spokes from a basepoint and circles around points."""
import logging

import numpy as np

logger = logging.getLogger(__name__)

# candidate directions tried around the point set
_DIRECTIONS = 16


def segment_distance(p, a, b):
    """Distance from the point p to the segment [a, b] in the complex plane."""
    d = b - a
    if d == 0:
        return abs(p - a)
    s = min(1.0, max(0.0, ((p - a) * np.conj(d)).real / abs(d) ** 2))
    return abs(p - (a + s * d))


def circle(center, radius, segments, start_angle=0.0, clockwise=False):
    sign = -1.0 if clockwise else 1.0
    angles = start_angle + sign * 2 * np.pi * np.arange(segments + 1) / segments
    return list(center + radius * np.exp(1j * angles))


def spoke_end(center, radius, basepoint):
    """Point of the circle around ``center`` that faces ``basepoint``."""
    u = (center - basepoint) / abs(center - basepoint)
    return center - radius * u


def min_gap(points):
    points = np.asarray(points, dtype=complex).reshape(-1)
    if points.size < 2:
        return np.inf
    gaps = np.abs(points[:, None] - points[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(gaps.min())


def choose_basepoint(points, radius, origin=None, encircled=None):
    """
    Basepoint outside ``points`` whose spokes keep the largest clearance.

    Args:
        points (np.ndarray): Obstacles; the first ``encircled`` of them get a spoke
        radius (float): Radius of the circles the spokes end on
        origin (complex): Optional start point joined to the basepoint by a segment
        encircled (int): Number of leading points that are encircled (default all)

    Returns:
        (basepoint, clearance): clearance is the smallest distance from an obstacle
        to a spoke it does not end on, or to the segment from ``origin``
    """
    points = np.asarray(points, dtype=complex).reshape(-1)
    encircled = points.size if encircled is None else encircled
    cloud = points if origin is None else np.append(points, origin)
    center = np.mean(cloud)
    spread = float(np.max(np.abs(cloud - center))) if cloud.size > 1 else 1.0
    distance = spread + max(1.0, spread)
    best, best_clearance = None, -np.inf
    for k in range(_DIRECTIONS):
        b = center + distance * np.exp(2j * np.pi * (k + 0.25) / _DIRECTIONS)
        clearance = np.inf
        if origin is not None:
            clearance = min(segment_distance(q, origin, b) for q in points)
        for j in range(encircled):
            end = spoke_end(points[j], radius, b)
            for q in np.delete(points, j):
                clearance = min(clearance, segment_distance(q, b, end))
        if clearance > best_clearance:
            best, best_clearance = b, clearance
    logger.debug(f"Basepoint {best:.4f} keeps clearance {best_clearance:.3e}")
    return complex(best), float(best_clearance)
