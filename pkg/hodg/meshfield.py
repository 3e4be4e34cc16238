"""
Periodic meshes and modal DG fields: evaluation, traces, jumps and norms
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .basis import gauss_rule, reference_element
from .errors import AmbiguousTraceError, ConfigurationError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
DEFAULT_DOMAIN = (0.0, TWO_PI)
BOUNDARY_TOL = 1e-14
LINF_INTERIOR_SAMPLES = 4


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Periodic partition of [a, b] given by its cell boundaries"""

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 3:
            raise ConfigurationError("A mesh needs at least two cells")
        if np.any(np.diff(b) <= 0):
            raise ConfigurationError("Cell boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @property
    def n_cells(self) -> int:
        return self.boundaries.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.boundaries[:-1] + self.boundaries[1:])

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.boundaries[0]), float(self.boundaries[-1])

    @property
    def length(self) -> float:
        return float(self.boundaries[-1] - self.boundaries[0])

    @property
    def h(self) -> float:
        """Largest cell width"""
        return float(self.widths.max())

    @property
    def regularity(self) -> float:
        """max h_j / min h_j"""
        return float(self.widths.max() / self.widths.min())

    def physical(self, cell: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """x = x_j + h_j * xi / 2"""
        return self.centers[cell] + 0.5 * self.widths[cell] * xi

    def locate(self, x: np.ndarray, side: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Cell index and reference coordinate for each point

        Args:
            x: Points inside the domain (periodic images are wrapped)
            side: '-' or '+' to pick the one-sided limit at cell boundaries

        Raises:
            AmbiguousTraceError: If a point sits on a boundary and side is None
        """
        a, b = self.domain
        x = a + np.mod(np.asarray(x, dtype=float) - a, self.length)
        cell = np.clip(np.searchsorted(self.boundaries, x, side="right") - 1, 0, self.n_cells - 1)
        xi = 2.0 * (x - self.centers[cell]) / self.widths[cell]

        # distance to the nearest boundary, relative to the local width
        on_left = np.abs(xi + 1.0) <= BOUNDARY_TOL * 4
        on_right = np.abs(xi - 1.0) <= BOUNDARY_TOL * 4
        on_boundary = on_left | on_right
        if np.any(on_boundary):
            if side is None:
                raise AmbiguousTraceError(
                    "Point lies on a cell boundary; pass side='-' or side='+'"
                )
            if side not in ("-", "+"):
                raise ConfigurationError(f"side must be '-' or '+' (got {side!r})")
            left_cell = np.where(on_left, (cell - 1) % self.n_cells, cell)
            right_cell = np.where(on_right, (cell + 1) % self.n_cells, cell)
            if side == "-":
                cell = np.where(on_boundary, left_cell, cell)
                xi = np.where(on_boundary, 1.0, xi)
            else:
                cell = np.where(on_boundary, right_cell, cell)
                xi = np.where(on_boundary, -1.0, xi)
        return cell, xi


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Tensor product of two periodic 1D partitions"""

    x: Mesh1D
    y: Mesh1D

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x.n_cells, self.y.n_cells

    @property
    def h(self) -> float:
        return max(self.x.h, self.y.h)


def build_mesh(n_cells: int, domain: Sequence[float] = DEFAULT_DOMAIN,
               perturbation: float = 0.0, seed: int = 0) -> Mesh1D:
    """Uniform periodic mesh, optionally with jittered interior boundaries

    Args:
        n_cells: Number of cells (>= 2)
        domain: (a, b)
        perturbation: Interior boundaries move by up to perturbation * h
        seed: Seed for the deterministic jitter

    Raises:
        ConfigurationError: For n_cells < 2 or perturbation outside [0, 0.5)
    """
    if n_cells < 2:
        raise ConfigurationError(f"Mesh needs N >= 2 (got {n_cells})")
    if not 0.0 <= perturbation < 0.5:
        raise ConfigurationError(
            f"perturbation must lie in [0, 0.5) (got {perturbation}); cells could invert"
        )
    a, b = float(domain[0]), float(domain[1])
    boundaries = np.linspace(a, b, n_cells + 1)
    if perturbation > 0:
        h = (b - a) / n_cells
        rng = np.random.default_rng(seed)
        shifts = rng.uniform(-perturbation, perturbation, n_cells - 1) * h
        boundaries[1:-1] += shifts
    mesh = Mesh1D(boundaries)
    logger.debug("built mesh N=%d h=%.3e regularity=%.3f", n_cells, mesh.h, mesh.regularity)
    return mesh


def build_mesh_2d(nx: int, ny: Optional[int] = None,
                  domain: Sequence[float] = DEFAULT_DOMAIN) -> Mesh2D:
    """Uniform periodic Cartesian mesh on domain x domain"""
    return Mesh2D(build_mesh(nx, domain), build_mesh(ny or nx, domain))


@dataclass(eq=False)
class TraceData:
    """One-sided limits at every interface

    Interface i is the right boundary of cell i; index N-1 is the periodic
    interface shared by the last and the first cell. ``minus[l, i]`` is the
    l-th derivative from cell i, ``plus[l, i]`` the one from cell i+1.
    """

    minus: np.ndarray
    plus: np.ndarray

    @property
    def max_deriv(self) -> int:
        return self.minus.shape[0] - 1

    def jump(self, level: int = 0) -> np.ndarray:
        """[v] = v+ - v-"""
        return self.plus[level] - self.minus[level]

    def average(self, level: int = 0) -> np.ndarray:
        """{v} = (v+ + v-) / 2"""
        return 0.5 * (self.plus[level] + self.minus[level])


def cell_traces(coeffs: np.ndarray, widths: np.ndarray, level: int) -> Tuple[np.ndarray, np.ndarray]:
    """Right-end and left-end values of the level-th derivative per cell

    ``coeffs`` has shape (..., N, k+1) and ``widths`` shape (N,).
    """
    ref = reference_element(coeffs.shape[-1] - 1)
    scale = (2.0 / widths) ** level
    right = (coeffs @ ref.endpoint(level, +1)) * scale
    left = (coeffs @ ref.endpoint(level, -1)) * scale
    return right, left


def interface_traces(coeffs: np.ndarray, widths: np.ndarray, level: int) -> Tuple[np.ndarray, np.ndarray]:
    """(minus, plus) traces of the level-th derivative at each interface"""
    right, left = cell_traces(coeffs, widths, level)
    return right, np.roll(left, -1, axis=-1)


@dataclass(eq=False)
class DGField1D:
    """Piecewise Legendre expansion of degree k on a periodic 1D mesh"""

    mesh: Mesh1D
    k: int
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = (self.mesh.n_cells, self.k + 1)
        if self.coeffs is None:
            self.coeffs = np.zeros(shape)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != shape:
            raise ConfigurationError(f"coefficients must have shape {shape}, got {self.coeffs.shape}")

    @property
    def ref(self):
        return reference_element(self.k)

    def with_coeffs(self, coeffs: np.ndarray) -> "DGField1D":
        return DGField1D(self.mesh, self.k, np.asarray(coeffs, dtype=float).reshape(self.coeffs.shape))

    def evaluate(self, x, side: Optional[str] = None, deriv: int = 0):
        """Point values (or derivatives) of the field

        Args:
            x: Point or array of points
            side: '-' / '+' for one-sided limits at cell boundaries
            deriv: Derivative order
        """
        cell, xi = self.mesh.locate(x, side)
        table = self.ref.vandermonde(np.atleast_1d(xi), deriv)
        values = np.einsum("pi,ip->p", self.coeffs[np.atleast_1d(cell)], table)
        values = values * (2.0 / self.mesh.widths[np.atleast_1d(cell)]) ** deriv
        return float(values[0]) if np.ndim(x) == 0 else values.reshape(np.shape(x))

    def traces(self, max_deriv: int = 0) -> TraceData:
        """Left/right limits of the field and its derivatives up to max_deriv"""
        if max_deriv > self.k:
            raise ConfigurationError(f"max_deriv={max_deriv} exceeds degree {self.k}")
        minus, plus = zip(*(interface_traces(self.coeffs, self.mesh.widths, l)
                            for l in range(max_deriv + 1)))
        return TraceData(minus=np.array(minus), plus=np.array(plus))

    def mass_weights(self) -> np.ndarray:
        """Diagonal of the global mass matrix, shape (N, k+1)"""
        return 0.5 * self.mesh.widths[:, None] * self.ref.mass[None, :]

    def inner(self, other: "DGField1D") -> float:
        """Exact L2 inner product from modal coefficients"""
        return float(np.sum(self.mass_weights() * self.coeffs * other.coeffs))

    def norm(self, which: str = "L2") -> float:
        """L1, L2 or Linf norm (quadrature with k+3 points, dense sampling for Linf)"""
        return sampled_norms(self.mesh, self.k, self.coeffs)[which]


def sampled_norms(mesh: Mesh1D, k: int, coeffs: np.ndarray,
                  reference: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Dict[str, float]:
    """Norms of (field - reference) by element quadrature and dense sampling

    L1/L2 use a (k+3)-point Gauss rule per cell; Linf samples the quadrature
    points, both endpoints and a few equispaced interior points.
    """
    ref = reference_element(k)
    rule = gauss_rule(k + 3)
    half = 0.5 * mesh.widths[:, None]

    xq = mesh.physical(np.arange(mesh.n_cells)[:, None], rule.points[None, :])
    err_q = coeffs @ ref.vandermonde(rule.points)
    if reference is not None:
        err_q = err_q - reference(xq)

    samples = np.concatenate(([-1.0, 1.0], rule.points,
                              np.linspace(-1.0, 1.0, LINF_INTERIOR_SAMPLES + 2)[1:-1]))
    xs = mesh.physical(np.arange(mesh.n_cells)[:, None], samples[None, :])
    err_s = coeffs @ ref.vandermonde(samples)
    if reference is not None:
        err_s = err_s - reference(xs)

    return {
        "L1": float(np.sum(half * np.abs(err_q) * rule.weights)),
        "L2": float(np.sqrt(np.sum(half * err_q ** 2 * rule.weights))),
        "Linf": float(np.max(np.abs(err_s))),
    }


@dataclass(eq=False)
class DGField2D:
    """Tensor Legendre (Q^k) expansion on a periodic Cartesian mesh

    ``coeffs[i, j, a, b]`` multiplies L_a(xi) L_b(eta) on element (i, j).
    """

    mesh: Mesh2D
    k: int
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        nx, ny = self.mesh.shape
        shape = (nx, ny, self.k + 1, self.k + 1)
        if self.coeffs is None:
            self.coeffs = np.zeros(shape)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != shape:
            raise ConfigurationError(f"coefficients must have shape {shape}, got {self.coeffs.shape}")

    @property
    def ref(self):
        return reference_element(self.k)

    def with_coeffs(self, coeffs: np.ndarray) -> "DGField2D":
        return DGField2D(self.mesh, self.k, np.asarray(coeffs, dtype=float).reshape(self.coeffs.shape))

    def evaluate(self, x, y, side_x: Optional[str] = None, side_y: Optional[str] = None):
        """Point values; sides are required only for points on element edges"""
        cx, xi = self.mesh.x.locate(np.atleast_1d(x), side_x)
        cy, eta = self.mesh.y.locate(np.atleast_1d(y), side_y)
        lx = self.ref.vandermonde(xi)
        ly = self.ref.vandermonde(eta)
        values = np.einsum("pab,ap,bp->p", self.coeffs[cx, cy], lx, ly)
        return float(values[0]) if np.ndim(x) == 0 else values.reshape(np.shape(x))

    def mass_weights(self) -> np.ndarray:
        """Diagonal of the global mass matrix, shape (Nx, Ny, k+1, k+1)"""
        hx = 0.5 * self.mesh.x.widths[:, None, None, None]
        hy = 0.5 * self.mesh.y.widths[None, :, None, None]
        m = self.ref.mass
        return hx * hy * m[None, None, :, None] * m[None, None, None, :]

    def inner(self, other: "DGField2D") -> float:
        return float(np.sum(self.mass_weights() * self.coeffs * other.coeffs))

    def norm(self, which: str = "L2") -> float:
        return sampled_norms_2d(self.mesh, self.k, self.coeffs)[which]


def sampled_norms_2d(mesh: Mesh2D, k: int, coeffs: np.ndarray,
                     reference: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
                     ) -> Dict[str, float]:
    """2D analogue of sampled_norms on the tensor quadrature grid"""
    ref = reference_element(k)
    rule = gauss_rule(k + 3)
    nx, ny = mesh.shape

    def grid_error(points: np.ndarray) -> np.ndarray:
        table = ref.vandermonde(points)
        values = np.einsum("ijab,ap,bq->ijpq", coeffs, table, table)
        if reference is not None:
            xg = mesh.x.physical(np.arange(nx)[:, None], points[None, :])
            yg = mesh.y.physical(np.arange(ny)[:, None], points[None, :])
            values = values - reference(xg[:, None, :, None], yg[None, :, None, :])
        return values

    err_q = grid_error(rule.points)
    w2 = np.outer(rule.weights, rule.weights)
    area = 0.25 * np.outer(mesh.x.widths, mesh.y.widths)[:, :, None, None]

    samples = np.concatenate(([-1.0, 1.0], rule.points,
                              np.linspace(-1.0, 1.0, LINF_INTERIOR_SAMPLES + 2)[1:-1]))
    err_s = grid_error(samples)

    return {
        "L1": float(np.sum(area * np.abs(err_q) * w2)),
        "L2": float(np.sqrt(np.sum(area * err_q ** 2 * w2))),
        "Linf": float(np.max(np.abs(err_s))),
    }
