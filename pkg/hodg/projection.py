"""
Local projections onto DG spaces

L2, Gauss-Radau and the one- and two-derivative endpoint projections in
1D, their tensor products in 2D, and the boundary-form check for the
tensor projections.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg

from .basis import gauss_rule, reference_element
from .errors import ConfigurationError, DegreeTooLowError, SingularSystemError
from .meshfield import DGField1D, DGField2D, Mesh1D, Mesh2D

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-13


class ProjectionKind(Enum):
    """Projection used for initial data and error analysis"""
    L2 = "l2"
    RADAU_MINUS = "radau-minus"
    RADAU_PLUS = "radau-plus"
    P1_MINUS = "p1-minus"
    P1_PLUS = "p1-plus"
    P2_MINUS = "p2-minus"
    P2_PLUS = "p2-plus"
    PI_MINUS = "pi-minus"
    PI_PLUS = "pi-plus"

    @classmethod
    def from_string(cls, value: str) -> "ProjectionKind":
        for kind in cls:
            if kind.value == value:
                return kind
        raise ConfigurationError(f"Unknown projection: {value!r}")

    @property
    def conditions(self) -> int:
        """Number of endpoint conditions (value, derivative, ...)"""
        return {
            "l2": 0, "radau": 1, "p1": 2, "p2": 3, "pi": 2,
        }[self.value.split("-")[0]]

    @property
    def minimum_degree(self) -> int:
        return max(0, self.conditions - 1)

    @property
    def side(self) -> Optional[str]:
        """'-' matches at the right cell end, '+' at the left one"""
        if self is ProjectionKind.L2:
            return None
        return "-" if self.value.endswith("minus") else "+"

    @property
    def is_tensor(self) -> bool:
        return self in (ProjectionKind.PI_MINUS, ProjectionKind.PI_PLUS)

    @property
    def one_dimensional(self) -> "ProjectionKind":
        """1D factor of a tensor projection"""
        if self is ProjectionKind.PI_MINUS:
            return ProjectionKind.P1_MINUS
        if self is ProjectionKind.PI_PLUS:
            return ProjectionKind.P1_PLUS
        return self


def derivative_of(f, order):
    """d^order f from a profile object, a sequence of callables or a plain callable

    Raises:
        ConfigurationError: If f cannot supply the derivative
    """
    if hasattr(f, "derivative"):
        return f.derivative(*order) if isinstance(order, tuple) else f.derivative(order)
    if isinstance(f, (list, tuple)):
        index = order if not isinstance(order, tuple) else None
        if index is not None and index < len(f):
            return f[index]
    elif callable(f) and order in (0, (0, 0)):
        return f
    raise ConfigurationError(f"Projection needs the analytic derivative of order {order}")


def target_points(k: int) -> int:
    """Gauss points for projecting a non-polynomial target onto degree k"""
    return 2 * k + 6


def l2_coefficients(fn: Callable[[np.ndarray], np.ndarray], mesh: Mesh1D, k: int,
                    n_pts: Optional[int] = None) -> np.ndarray:
    """Modal coefficients of the L2 projection of fn, shape (N, k+1)"""
    ref = reference_element(k)
    rule = gauss_rule(n_pts or target_points(k))
    xq = mesh.physical(np.arange(mesh.n_cells)[:, None], rule.points[None, :])
    values = np.asarray(fn(xq), dtype=float) * np.ones_like(xq)
    return values @ ref.projection_weights(rule)


@dataclass(frozen=True, eq=False)
class LocalSystem:
    """Reference-cell system of an endpoint projection

    Rows 0..k-d are moments against L_0..L_{k-d}; the last d rows impose
    the endpoint value and derivatives. ``operator`` maps the sample vector
    (quadrature values, then (h/2)^l f^(l) at the endpoint) to coefficients.
    """

    kind: ProjectionKind
    k: int
    rule_points: np.ndarray
    operator: np.ndarray

    @property
    def endpoint(self) -> float:
        return 1.0 if self.kind.side == "-" else -1.0


def local_system(kind: ProjectionKind, k: int, n_pts: Optional[int] = None) -> LocalSystem:
    """Factor the local system once; all cells share it after scaling

    Raises:
        DegreeTooLowError: If k is below the kind's minimum
        SingularSystemError: If the system cannot be factored
    """
    kind = kind.one_dimensional
    if k < kind.minimum_degree:
        raise DegreeTooLowError(f"Projection {kind.value}", k, kind.minimum_degree)
    ref = reference_element(k)
    rule = gauss_rule(n_pts or target_points(k))
    d = kind.conditions
    n_moments = k + 1 - d
    endpoint = 1.0 if kind.side == "-" else -1.0

    matrix = np.zeros((k + 1, k + 1))
    matrix[:n_moments, :n_moments] = np.diag(ref.mass[:n_moments])
    for level in range(d):
        matrix[n_moments + level] = ref.vandermonde(np.array([endpoint]), level)[:, 0]

    sampler = np.zeros((k + 1, rule.n_pts + d))
    sampler[:n_moments, :rule.n_pts] = ref.vandermonde(rule.points)[:n_moments] * rule.weights
    sampler[n_moments:, rule.n_pts:] = np.eye(d)

    lu, piv = linalg.lu_factor(matrix)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularSystemError(f"Local system for {kind.value} with k={k} is singular")
    operator = linalg.lu_solve((lu, piv), sampler)
    return LocalSystem(kind, k, rule.points, operator)


def _samples_1d(f, system: LocalSystem, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Sample vectors (N, n_pts + d) for cells [left, right]"""
    half = 0.5 * (right - left)
    centers = 0.5 * (right + left)
    xq = centers[:, None] + half[:, None] * system.rule_points[None, :]
    xe = centers + half * system.endpoint
    columns = [np.asarray(derivative_of(f, 0)(xq), dtype=float) * np.ones_like(xq)]
    for level in range(system.kind.conditions):
        values = np.asarray(derivative_of(f, level)(xe), dtype=float) * np.ones_like(xe)
        columns.append((half ** level * values)[:, None])
    return np.concatenate(columns, axis=1)


def project_1d(kind: ProjectionKind, f, mesh: Mesh1D, k: int) -> DGField1D:
    """Project f onto piecewise polynomials of degree k

    Args:
        kind: Projection type (tensor kinds are rejected)
        f: Profile with ``derivative(order)``, a list [f, f', f''], or a
            plain callable for L2 and Radau projections
        mesh: Periodic 1D mesh
        k: Polynomial degree

    Raises:
        ConfigurationError: For tensor kinds, a too-low degree or missing derivatives
    """
    if kind.is_tensor:
        raise ConfigurationError(f"{kind.value} is a 2D projection")
    if kind is ProjectionKind.L2:
        return DGField1D(mesh, k, l2_coefficients(derivative_of(f, 0), mesh, k))

    system = local_system(kind, k)
    samples = _samples_1d(f, system, mesh.boundaries[:-1], mesh.boundaries[1:])
    return DGField1D(mesh, k, samples @ system.operator.T)


def _tensor_samples(f, sx: LocalSystem, sy: LocalSystem,
                    xb: np.ndarray, yb: np.ndarray) -> np.ndarray:
    """Sample matrix S[i, j, p, q] of f and its mixed partials on each element"""
    def points(system, bounds):
        half = 0.5 * np.diff(bounds)
        centers = 0.5 * (bounds[:-1] + bounds[1:])
        interior = centers[:, None] + half[:, None] * system.rule_points[None, :]
        end = (centers + half * system.endpoint)[:, None]
        return half, interior, end

    hx, xq, xe = points(sx, xb)
    hy, yq, ye = points(sy, yb)
    nqx, nqy = xq.shape[1], yq.shape[1]
    dx_levels, dy_levels = sx.kind.conditions, sy.kind.conditions
    samples = np.zeros((xq.shape[0], yq.shape[0], nqx + dx_levels, nqy + dy_levels))

    x_blocks = [(slice(0, nqx), xq, 0)] + [
        (slice(nqx + l, nqx + l + 1), xe, l) for l in range(dx_levels)]
    y_blocks = [(slice(0, nqy), yq, 0)] + [
        (slice(nqy + l, nqy + l + 1), ye, l) for l in range(dy_levels)]
    for xs, xpts, lx in x_blocks:
        for ys, ypts, ly in y_blocks:
            fn = derivative_of(f, (lx, ly))
            X = xpts[:, None, :, None]
            Y = ypts[None, :, None, :]
            values = np.asarray(fn(X, Y), dtype=float) * np.ones(np.broadcast(X, Y).shape)
            scale = (hx[:, None, None, None] ** lx) * (hy[None, :, None, None] ** ly)
            samples[:, :, xs, ys] = values * scale
    return samples


def tensor_coefficients(kind: ProjectionKind, f, xb: np.ndarray, yb: np.ndarray, k: int,
                        order: str = "xy") -> np.ndarray:
    """Tensor projection on the elements of the grid xb x yb, shape (Nx, Ny, k+1, k+1)

    ``order`` chooses whether the x operator or the y operator is applied
    to the samples first; both give the same result.
    """
    if order not in ("xy", "yx"):
        raise ConfigurationError(f"order must be 'xy' or 'yx' (got {order!r})")
    system = local_system(kind.one_dimensional, k)
    samples = _tensor_samples(f, system, system, np.asarray(xb, float), np.asarray(yb, float))
    op = system.operator
    if order == "xy":
        partial = np.einsum("ap,ijpq->ijaq", op, samples)
        return np.einsum("bq,ijaq->ijab", op, partial)
    partial = np.einsum("bq,ijpq->ijpb", op, samples)
    return np.einsum("ap,ijpb->ijab", op, partial)


def project_2d(kind: ProjectionKind, f, mesh: Mesh2D, k: int, order: str = "xy") -> DGField2D:
    """Project f onto Q^k on a Cartesian mesh

    Args:
        kind: L2, PI_MINUS or PI_PLUS
        f: Profile with ``derivative(dx, dy)`` (or a callable f(x, y) for L2)
        order: 'xy' or 'yx', the order the 1D operators are applied in

    Raises:
        ConfigurationError: For 1D kinds, k = 0 with a tensor kind, or missing partials
    """
    if kind is ProjectionKind.L2:
        ref = reference_element(k)
        rule = gauss_rule(target_points(k))
        nx, ny = mesh.shape
        xg = mesh.x.physical(np.arange(nx)[:, None], rule.points[None, :])
        yg = mesh.y.physical(np.arange(ny)[:, None], rule.points[None, :])
        fn = derivative_of(f, (0, 0))
        X, Y = xg[:, None, :, None], yg[None, :, None, :]
        values = np.asarray(fn(X, Y), dtype=float) * np.ones(np.broadcast(X, Y).shape)
        weights = ref.projection_weights(rule)
        coeffs = np.einsum("ijpq,pa,qb->ijab", values, weights, weights)
        return DGField2D(mesh, k, coeffs)
    if not kind.is_tensor:
        raise ConfigurationError(f"{kind.value} is a 1D projection")
    coeffs = tensor_coefficients(kind, f, mesh.x.boundaries, mesh.y.boundaries, k, order)
    return DGField2D(mesh, k, coeffs)


@dataclass(frozen=True)
class Element2D:
    """Rectangle [x0, x1] x [y0, y1]"""

    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def hx(self) -> float:
        return self.x1 - self.x0

    @property
    def hy(self) -> float:
        return self.y1 - self.y0

    def scaled(self, factor: float) -> "Element2D":
        """Same lower-left corner, sides multiplied by factor"""
        return Element2D(self.x0, self.x0 + factor * self.hx, self.y0, self.y0 + factor * self.hy)


def _patch(element: Element2D, side: str) -> Tuple[np.ndarray, np.ndarray]:
    """Boundaries of K and the neighbors whose traces the form reads"""
    if side == "+":
        return (np.array([element.x0, element.x1, element.x1 + element.hx]),
                np.array([element.y0, element.y1, element.y1 + element.hy]))
    return (np.array([element.x0 - element.hx, element.x0, element.x1]),
            np.array([element.y0 - element.hy, element.y0, element.y1]))


def boundary_form(u, k: int, element: Element2D, side: str = "+") -> np.ndarray:
    """B_K(u - Pi u, q) for every normalized q = L_a L_b in Q^k(K), shape (k+1, k+1)

    B_K(e, q) = (e, lap q)_K - <e^s, grad q . n> + <grad e^s . n, q> with
    s = '+' (Pi^+, traces on the right/top faces from the east/north
    neighbors) or s = '-' (Pi^-, traces on the left/bottom faces from the
    west/south neighbors).
    """
    if side not in ("+", "-"):
        raise ConfigurationError(f"side must be '+' or '-' (got {side!r})")
    kind = ProjectionKind.PI_PLUS if side == "+" else ProjectionKind.PI_MINUS
    ref = reference_element(k)
    rule = gauss_rule(k + 4)
    xb, yb = _patch(element, side)
    coeffs = tensor_coefficients(kind, u, xb, yb, k)
    home = (0, 0) if side == "+" else (1, 1)
    hx, hy = element.hx, element.hy

    def error(cell: Tuple[int, int], xi: np.ndarray, eta: np.ndarray, dx: int, dy: int) -> np.ndarray:
        """(u - Pi u) derivative on a patch element at reference points, shape (len(xi), len(eta))"""
        i, j = cell
        cx = 0.5 * (xb[i] + xb[i + 1])
        cy = 0.5 * (yb[j] + yb[j + 1])
        X = (cx + 0.5 * hx * xi)[:, None]
        Y = (cy + 0.5 * hy * eta)[None, :]
        exact = np.asarray(derivative_of(u, (dx, dy))(X, Y), dtype=float) * np.ones((xi.size, eta.size))
        poly = np.einsum("ab,ap,bq->pq", coeffs[i, j],
                         ref.vandermonde(xi, dx), ref.vandermonde(eta, dy))
        return exact - poly * (2.0 / hx) ** dx * (2.0 / hy) ** dy

    pts, wts = rule.points, rule.weights
    one, minus_one = np.array([1.0]), np.array([-1.0])
    L = [ref.vandermonde(pts, d) for d in range(3)]
    end = {s: [ref.vandermonde(np.array([s]), d)[:, 0] for d in range(2)] for s in (1.0, -1.0)}
    jx, jy = 2.0 / hx, 2.0 / hy

    # volume: (e, q_xx + q_yy)
    e = error(home, pts, pts, 0, 0) * np.outer(wts, wts)
    form = 0.25 * hx * hy * (jx ** 2 * np.einsum("pq,ap,bq->ab", e, L[2], L[0])
                             + jy ** 2 * np.einsum("pq,ap,bq->ab", e, L[0], L[2]))

    if side == "+":
        right_cell, right_xi = (1, 0), minus_one
        left_cell, left_xi = home, minus_one
        top_cell, top_eta = (0, 1), minus_one
        bottom_cell, bottom_eta = home, minus_one
    else:
        right_cell, right_xi = home, one
        left_cell, left_xi = (0, 1), one
        top_cell, top_eta = home, one
        bottom_cell, bottom_eta = (1, 0), one

    # x-faces: n = +-1 in x; line integrals over y
    for cell, xi, face, normal in ((right_cell, right_xi, 1.0, 1.0), (left_cell, left_xi, -1.0, -1.0)):
        value = error(cell, xi, pts, 0, 0)[0] * wts
        slope = error(cell, xi, pts, 1, 0)[0] * wts
        q_x = jx * end[face][1]
        q = end[face][0]
        form += 0.5 * hy * normal * (-np.outer(q_x, L[0] @ value) + np.outer(q, L[0] @ slope))

    # y-faces: line integrals over x
    for cell, eta, face, normal in ((top_cell, top_eta, 1.0, 1.0), (bottom_cell, bottom_eta, -1.0, -1.0)):
        value = error(cell, pts, eta, 0, 0)[:, 0] * wts
        slope = error(cell, pts, eta, 0, 1)[:, 0] * wts
        q_y = jy * end[face][1]
        q = end[face][0]
        form += 0.5 * hx * normal * (-np.outer(L[0] @ value, q_y) + np.outer(L[0] @ slope, q))

    norms = np.sqrt(0.25 * hx * hy * np.outer(ref.mass, ref.mass))
    return form / norms


def superconvergence_check(u, k: int, element: Element2D, side: Optional[str] = None) -> float:
    """max over normalized q in Q^k(K) of |B_K(u - Pi u, q)|

    ``side`` picks the form with Pi^+ ('+') or Pi^- ('-'); None takes the
    larger of the two.
    """
    if k < 1:
        raise DegreeTooLowError("Tensor projection", k, 1)
    sides = ("+", "-") if side is None else (side,)
    return max(float(np.max(np.abs(boundary_form(u, k, element, s)))) for s in sides)
