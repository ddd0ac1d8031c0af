"""Quadrature rules on the reference triangle {(x, y): x, y >= 0, x + y <= 1}.

Each rule is a pair (points, weights) with points of shape (m, 2) in
reference coordinates and weights summing to 1/2 (the reference area), so
that an integral over a physical triangle T is

    int_T f dx  ~=  sum_q  w_q * |det J| * f(F(x_q))

with |det J| = 2 * area(T).
"""
from __future__ import annotations

import numpy as np

__all__ = ["midpoint_rule", "degree4_rule", "degree6_rule", "map_to_physical"]


def midpoint_rule():
    """Three-point edge-midpoint rule, exact for polynomials of degree <= 2."""
    points = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
    weights = np.full(3, 1.0 / 6.0)
    return points, weights


def _from_barycentric(groups):
    pts, wts = [], []
    for bary, w in groups:
        perms = {tuple(p) for p in _permutations3(bary)}
        for p in sorted(perms):
            # reference coords: x = lambda_2, y = lambda_3
            pts.append([p[1], p[2]])
            wts.append(w)
    points = np.array(pts)
    weights = 0.5 * np.array(wts)
    return points, weights


def _permutations3(t):
    a, b, c = t
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def degree4_rule():
    """Six-point rule (Dunavant), exact for polynomials of degree <= 4."""
    return _from_barycentric([
        ((0.108103018168070, 0.445948490915965, 0.445948490915965),
         0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771),
         0.109951743655322),
    ])


def degree6_rule():
    """Twelve-point rule (Dunavant), exact for polynomials of degree <= 6."""
    return _from_barycentric([
        ((0.873821971016996, 0.063089014491502, 0.063089014491502),
         0.050844906370207),
        ((0.501426509658179, 0.249286745170910, 0.249286745170910),
         0.116786275726379),
        ((0.636502499121399, 0.310352451033785, 0.053145049844816),
         0.082851075618374),
    ])


def map_to_physical(coords, points):
    """Map reference points (m, 2) to a physical triangle.

    coords has shape (3, 2) (one triangle) or (nt, 3, 2); returns (m, 2)
    or (nt, m, 2) respectively.
    """
    coords = np.asarray(coords, dtype=float)
    lam = np.column_stack([1.0 - points[:, 0] - points[:, 1],
                           points[:, 0], points[:, 1]])
    if coords.ndim == 2:
        return lam @ coords
    return np.einsum("qk,tki->tqi", lam, coords)
