"""
Legendre basis, Gauss quadrature and reference-element matrices on [-1, 1]
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Tuple, Union

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import ConfigurationError

ArrayLike = Union[float, np.ndarray]

NEWTON_TOL = 1e-15
NEWTON_MAX_ITER = 100


def legendre_eval(m: int, xi: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Evaluate L_m and L_m' at xi by the three-term recurrence

    Args:
        m: Polynomial degree (>= 0)
        xi: Point(s) in [-1, 1]

    Returns:
        (value, derivative), floats for scalar input, arrays otherwise
    """
    if m < 0:
        raise ConfigurationError(f"Legendre degree must be >= 0 (got {m})")

    x = np.asarray(xi, dtype=float)
    p_prev, p = np.ones_like(x), x.copy()
    dp_prev, dp = np.zeros_like(x), np.ones_like(x)
    if m == 0:
        p, dp = p_prev, dp_prev
    for n in range(1, m):
        p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        dp_prev, dp = dp, dp_prev + (2 * n + 1) * p_prev

    if x.ndim == 0:
        return float(p), float(dp)
    return p, dp


def legendre_table(k: int, xi: np.ndarray) -> np.ndarray:
    """Values L_0..L_k at the points xi, shape (k+1, len(xi))"""
    x = np.atleast_1d(np.asarray(xi, dtype=float))
    table = np.empty((k + 1, x.size))
    table[0] = 1.0
    if k >= 1:
        table[1] = x
    for n in range(1, k):
        table[n + 1] = ((2 * n + 1) * x * table[n] - n * table[n - 1]) / (n + 1)
    return table


@dataclass(frozen=True)
class QuadRule:
    """Quadrature rule on the reference interval [-1, 1]"""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n_pts(self) -> int:
        return len(self.points)

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integrate fn over [-1, 1]"""
        return float(np.dot(self.weights, fn(self.points)))

    def mapped(self, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
        """Points and weights transplanted to [a, b]"""
        half = 0.5 * (b - a)
        return a + half * (self.points + 1.0), half * self.weights


@lru_cache(maxsize=None)
def gauss_rule(n_pts: int) -> QuadRule:
    """Gauss-Legendre rule with n_pts points (exact to degree 2*n_pts - 1)

    Nodes come from Newton iteration on L_n started at the Chebyshev points.
    """
    if n_pts < 1:
        raise ConfigurationError(f"Quadrature needs at least one point (got {n_pts})")

    i = np.arange(n_pts)
    x = np.cos((2 * i + 1) * np.pi / (2 * n_pts))
    for _ in range(NEWTON_MAX_ITER):
        p, dp = legendre_eval(n_pts, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= NEWTON_TOL:
            break

    _, dp = legendre_eval(n_pts, x)
    weights = 2.0 / ((1.0 - x ** 2) * dp ** 2)
    order = np.argsort(x)
    return QuadRule(points=x[order], weights=weights[order])


@lru_cache(maxsize=None)
def gauss_lobatto_rule(n_pts: int) -> QuadRule:
    """Gauss-Lobatto rule including both endpoints (exact to degree 2*n_pts - 3)"""
    if n_pts < 2:
        raise ConfigurationError(f"Gauss-Lobatto needs at least two points (got {n_pts})")

    interior = npleg.Legendre.basis(n_pts - 1).deriv().roots() if n_pts > 2 else np.empty(0)
    x = np.concatenate(([-1.0], np.sort(np.real(interior)), [1.0]))
    p, _ = legendre_eval(n_pts - 1, x)
    weights = 2.0 / (n_pts * (n_pts - 1) * p ** 2)
    return QuadRule(points=x, weights=weights)


class ReferenceElement:
    """Modal Legendre element of degree k on [-1, 1]

    Holds the diagonal mass matrix, derivative matrices acting on modal
    coefficients, endpoint rows L_i^(l)(+-1) and the ultra-weak stiffness
    blocks S^m[r, i] = int L_r L_i^(m).
    """

    def __init__(self, k: int):
        if k < 0:
            raise ConfigurationError(f"Degree must be >= 0 (got {k})")
        self.k = k
        self.n_modes = k + 1
        self.mass = 2.0 / (2.0 * np.arange(self.n_modes) + 1.0)
        self._deriv: Dict[int, np.ndarray] = {0: np.eye(self.n_modes)}
        self._endpoint: Dict[Tuple[int, int], np.ndarray] = {}

    def deriv(self, d: int) -> np.ndarray:
        """Matrix mapping coefficients of p to coefficients of p^(d)"""
        if d not in self._deriv:
            mat = np.zeros((self.n_modes, self.n_modes))
            for i in range(self.n_modes):
                coeffs = npleg.legder(np.eye(self.n_modes)[i], d)
                mat[: len(coeffs), i] = coeffs
            self._deriv[d] = mat
        return self._deriv[d]

    def endpoint(self, level: int, side: int) -> np.ndarray:
        """Row of L_i^(level)(side) for i = 0..k, side = +1 or -1"""
        key = (level, side)
        if key not in self._endpoint:
            signs = np.ones(self.n_modes) if side > 0 else (-1.0) ** np.arange(self.n_modes)
            self._endpoint[key] = signs @ self.deriv(level)
        return self._endpoint[key]

    def stiffness(self, m: int) -> np.ndarray:
        """S^m[r, i] = int_{-1}^{1} L_r L_i^(m) dxi"""
        return self.mass[:, None] * self.deriv(m)

    def vandermonde(self, points: np.ndarray, d: int = 0) -> np.ndarray:
        """L_i^(d) at the given points, shape (k+1, n_points)"""
        table = legendre_table(self.k, points)
        if d == 0:
            return table
        return self.deriv(d).T @ table

    def projection_weights(self, rule: QuadRule) -> np.ndarray:
        """Matrix P so that coeffs = values_at_points @ P is the L2 projection"""
        table = self.vandermonde(rule.points)
        return (table * rule.weights).T / self.mass


@lru_cache(maxsize=None)
def reference_element(k: int) -> ReferenceElement:
    """Shared reference element for degree k"""
    return ReferenceElement(k)
