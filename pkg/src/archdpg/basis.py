"""Reference-element Legendre basis, Gauss quadrature and L2 projection."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as nleg

MAX_QUAD_POINTS = 64


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on [-1, 1], exact through degree 2g-1."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.points.size

    def map_to(self, a: float, b: float) -> tuple:
        """Points and weights on the element (a, b)."""
        half = 0.5 * (b - a)
        return a + half * (self.points + 1.0), half * self.weights


@lru_cache(maxsize=None)
def quad_rule(g: int) -> QuadratureRule:
    if not 1 <= g <= MAX_QUAD_POINTS:
        raise ValueError(f"quadrature order must be in [1, {MAX_QUAD_POINTS}], got {g}")
    pts, wts = nleg.leggauss(g)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts)


class Basis:
    """Legendre polynomials P_0..P_p on [-1, 1].

    Mass matrix on the reference interval is diag(2/(2k+1)); on an element of
    length h it scales by h/2.
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        self.degree = degree
        eye = np.eye(degree + 1)
        self._coeffs = eye
        self._dcoeffs = np.zeros((degree + 1, degree + 1))
        for k in range(degree + 1):
            d = nleg.legder(eye[:, k])
            self._dcoeffs[: d.size, k] = d

    @property
    def size(self) -> int:
        return self.degree + 1

    def eval(self, points) -> tuple:
        """Value and reference-derivative tables, shape (n_points, p+1)."""
        xi = np.atleast_1d(np.asarray(points, dtype=float))
        vander = nleg.legvander(xi, self.degree)
        dvander = vander @ self._dcoeffs
        return vander, dvander

    def mass_diagonal(self) -> np.ndarray:
        k = np.arange(self.degree + 1)
        return 2.0 / (2.0 * k + 1.0)


@lru_cache(maxsize=None)
def basis(degree: int) -> Basis:
    return Basis(degree)


@lru_cache(maxsize=None)
def _basis_tables(degree: int, g: int) -> tuple:
    rule = quad_rule(g)
    v, dv = basis(degree).eval(rule.points)
    return rule, v, dv


def project_l2(f, b: Basis, element: tuple, quad_order: int | None = None) -> np.ndarray:
    """Legendre coefficients of the best L2 approximation of f on (a, b).

    The default quadrature order (degree + 8) keeps smooth transcendental
    integrands accurate to machine precision; callers may lower it to the
    minimum degree + 4.
    """
    a, bb = element
    g = quad_order if quad_order is not None else b.degree + 8
    rule, values, _ = _basis_tables(b.degree, g)
    x, w = rule.map_to(a, bb)
    fx = np.asarray(f(x), dtype=float)
    moments = values.T @ (w * fx)
    h = bb - a
    return moments / (0.5 * h * b.mass_diagonal())


def evaluate_coeffs(coeffs: np.ndarray, xi) -> np.ndarray:
    """Evaluate a Legendre coefficient vector at reference points."""
    return nleg.legval(np.asarray(xi, dtype=float), coeffs)
