"""
Ultra-weak DG discretizations of u_t + sigma d^n u = g on periodic 1D meshes

The n-th order equation is split into blocks of at most M = floor(n/2)
derivatives. Each block is an element-local solve: the modal mass matrix
is diagonal, so an auxiliary variable comes straight from the cell volume
term plus the flux terms at the two cell ends.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basis import gauss_rule, reference_element
from .errors import ConfigurationError, DegreeTooLowError, NumericalFailure
from .flux import EntropyPotential, FluxConfig, MonotoneKind, UpwindSide, monotone_flux
from .meshfield import DGField1D, Mesh1D, interface_traces
from .models import AuxFields, Nonlinearity, ProblemSpec
from .projection import l2_coefficients

logger = logging.getLogger(__name__)

NEGATIVE_B_TOL = 1e-14


def alternating_fluxes(coeffs: np.ndarray, widths: np.ndarray,
                       weights: Sequence[float]) -> List[np.ndarray]:
    """Interface fluxes F_L = a_L b^-(L) + (1 - a_L) b^+(L), L = 0..len(weights)-1"""
    fluxes = []
    for level, alpha in enumerate(weights):
        minus, plus = interface_traces(coeffs, widths, level)
        fluxes.append(alpha * minus + (1.0 - alpha) * plus)
    return fluxes


def weak_derivative(coeffs: np.ndarray, widths: np.ndarray,
                    fluxes: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficients of a = d^m b with m = len(fluxes), from the ultra-weak form

        (a, q)_j = (-1)^m (b, q^(m))_j
                   + sum_l (-1)^l (F_{m-1-l} q^(l) |_{j+1/2}^- - F_{m-1-l} q^(l) |_{j-1/2}^+)

    ``fluxes[L]`` holds the numerical trace of b^(L) at every interface.
    Works on arrays shaped (..., N, k+1).
    """
    m = len(fluxes)
    ref = reference_element(coeffs.shape[-1] - 1)
    jac = (2.0 / widths)[:, None]
    half = (0.5 * widths)[:, None]

    rhs = (-1) ** m * (coeffs @ ref.stiffness(m)) * jac ** m * half
    for level in range(m):
        trace = fluxes[m - 1 - level]
        right = trace[..., None]
        left = np.roll(trace, 1, axis=-1)[..., None]
        rhs = rhs + (-1) ** level * jac ** level * (
            right * ref.endpoint(level, +1) - left * ref.endpoint(level, -1))
    return rhs / (half * ref.mass)


def _endpoint_values(k: int, level: int) -> Tuple[np.ndarray, np.ndarray]:
    """L_i^(level)(+1) and L_i^(level)(-1) in closed form"""
    i = np.arange(k + 1, dtype=float)
    right = np.ones(k + 1)
    for j in range(level):
        right *= (i - j) * (i + j + 1) / (2.0 * (j + 1))
    left = (-1.0) ** (i + level) * right
    return right, left


def _inverse_mass(k: int, widths: np.ndarray) -> np.ndarray:
    return (2.0 * np.arange(k + 1) + 1.0)[None, :] / widths[:, None]


def first_derivative(b: np.ndarray, widths: np.ndarray, f0: np.ndarray) -> np.ndarray:
    """(a, q) = -(b, q_x) + [F0 q]"""
    k = b.shape[-1] - 1
    r0, l0 = _endpoint_values(k, 0)
    rhs = -(b @ reference_element(k).stiffness(1))
    rhs = rhs + f0[..., None] * r0 - np.roll(f0, 1, axis=-1)[..., None] * l0
    return rhs * _inverse_mass(k, widths)


def second_derivative(b: np.ndarray, widths: np.ndarray,
                      f0: np.ndarray, f1: np.ndarray) -> np.ndarray:
    """(a, q) = (b, q_xx) + [F1 q] - [F0 q_x]"""
    k = b.shape[-1] - 1
    jac = (2.0 / widths)[:, None]
    r0, l0 = _endpoint_values(k, 0)
    r1, l1 = _endpoint_values(k, 1)
    rhs = jac * (b @ reference_element(k).stiffness(2))
    rhs = rhs + f1[..., None] * r0 - np.roll(f1, 1, axis=-1)[..., None] * l0
    rhs = rhs - jac * (f0[..., None] * r1 - np.roll(f0, 1, axis=-1)[..., None] * l1)
    return rhs * _inverse_mass(k, widths)


def third_derivative(b: np.ndarray, widths: np.ndarray,
                     f0: np.ndarray, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """(a, q) = -(b, q_xxx) + [F2 q] - [F1 q_x] + [F0 q_xx]"""
    k = b.shape[-1] - 1
    jac = (2.0 / widths)[:, None]
    r0, l0 = _endpoint_values(k, 0)
    r1, l1 = _endpoint_values(k, 1)
    r2, l2 = _endpoint_values(k, 2)
    rhs = -jac ** 2 * (b @ reference_element(k).stiffness(3))
    rhs = rhs + f2[..., None] * r0 - np.roll(f2, 1, axis=-1)[..., None] * l0
    rhs = rhs - jac * (f1[..., None] * r1 - np.roll(f1, 1, axis=-1)[..., None] * l1)
    rhs = rhs + jac ** 2 * (f0[..., None] * r2 - np.roll(f0, 1, axis=-1)[..., None] * l2)
    return rhs * _inverse_mass(k, widths)


class Scheme(ABC):
    """Semi-discrete operator u -> du/dt for one problem on one mesh

    Subclasses provide the auxiliary solves and the top-level block; the
    base class adds the manufactured source and the energy bookkeeping.
    """

    name = "scheme"

    def __init__(self, problem: ProblemSpec, mesh, k: int,
                 flux: Optional[FluxConfig] = None, quad_pts: Optional[int] = None):
        minimum = self.minimum_degree(problem.order)
        if k < minimum:
            raise DegreeTooLowError(f"{self.name} (order {problem.order})", k, minimum)
        if quad_pts is not None and quad_pts < k + 1:
            raise ConfigurationError(f"quad_pts must be >= k+1 (got {quad_pts})")
        self.problem = problem
        self.mesh = mesh
        self.k = k
        self.flux = flux or FluxConfig()
        self.ref = reference_element(k)
        self.rule = gauss_rule(quad_pts or k + 2)
        self._table = self.ref.vandermonde(self.rule.points)
        self._project = self.ref.projection_weights(self.rule)
        self._mass = None

    @classmethod
    @abstractmethod
    def minimum_degree(cls, order: int) -> int:
        """Smallest polynomial degree the scheme is defined for"""

    @property
    @abstractmethod
    def shape(self) -> Tuple[int, ...]:
        """Shape of a coefficient array"""

    @abstractmethod
    def field(self, coeffs: np.ndarray):
        """Wrap coefficients in the matching DG field type"""

    @abstractmethod
    def auxiliaries(self, coeffs: np.ndarray) -> Dict[str, np.ndarray]:
        """Auxiliary coefficient arrays keyed 'w' (and 'v')"""

    @abstractmethod
    def apply(self, coeffs: np.ndarray, aux: Dict[str, np.ndarray]) -> np.ndarray:
        """du/dt without source, given u and its auxiliaries"""

    @abstractmethod
    def dissipation(self, coeffs: np.ndarray, aux: Dict[str, np.ndarray]) -> float:
        """The value D >= 0 with <du/dt, u> = -D predicted by the energy identity"""

    @abstractmethod
    def source_coeffs(self, t: float) -> np.ndarray:
        """L2 projection of the manufactured source at time t"""

    @property
    def is_linear(self) -> bool:
        return self.problem.is_linear

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def mass_weights(self) -> np.ndarray:
        if self._mass is None:
            self._mass = self.field(np.zeros(self.shape)).mass_weights()
        return self._mass

    def rate(self, coeffs: np.ndarray, t: Optional[float] = None) -> np.ndarray:
        """du/dt; the source is added when t is given and the problem has one"""
        coeffs = np.asarray(coeffs, dtype=float).reshape(self.shape)
        dudt = self.apply(coeffs, self.auxiliaries(coeffs))
        if t is not None and self.problem.has_source:
            dudt = dudt + self.source_coeffs(t)
        return dudt

    def solve_auxiliaries(self, u_h) -> AuxFields:
        aux = self.auxiliaries(u_h.coeffs)
        return AuxFields(w=self.field(aux["w"]),
                         v=self.field(aux["v"]) if "v" in aux else None)

    def spatial_residual(self, u_h, t: Optional[float] = None):
        aux = self.auxiliaries(u_h.coeffs)
        dudt = self.apply(u_h.coeffs, aux)
        if t is not None and self.problem.has_source:
            dudt = dudt + self.source_coeffs(t)
        fields = AuxFields(w=self.field(aux["w"]),
                           v=self.field(aux["v"]) if "v" in aux else None)
        return self.field(dudt), fields

    def energy_balance(self, coeffs: np.ndarray) -> Tuple[float, float]:
        """(<du/dt, u>, -D): the measured and the predicted energy rate"""
        coeffs = np.asarray(coeffs, dtype=float).reshape(self.shape)
        aux = self.auxiliaries(coeffs)
        measured = float(np.sum(self.mass_weights() * self.apply(coeffs, aux) * coeffs))
        return measured, -self.dissipation(coeffs, aux)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(order={self.problem.order}, k={self.k}, flux={self.flux})"


class Scheme1D(Scheme):
    """Shared plumbing for the 1D schemes: quadrature, projections, sources"""

    @property
    def widths(self) -> np.ndarray:
        return self.mesh.widths

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mesh.n_cells, self.k + 1

    def field(self, coeffs: np.ndarray) -> DGField1D:
        return DGField1D(self.mesh, self.k, coeffs)

    def at_points(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self._table

    def project_points(self, values: np.ndarray) -> np.ndarray:
        return values @ self._project

    def quadrature_sum(self, values: np.ndarray) -> float:
        """Sum over cells of the quadrature of point values, shape (N, n_pts)"""
        return float(np.sum(0.5 * self.widths[:, None] * values * self.rule.weights))

    def source_coeffs(self, t: float) -> np.ndarray:
        source = self.problem.source
        return l2_coefficients(lambda x: source(x, t), self.mesh, self.k)

    def u_derivative(self, coeffs: np.ndarray, depth: int) -> np.ndarray:
        """D^depth applied to u with the u-family traces"""
        fluxes = alternating_fluxes(coeffs, self.widths, self.flux.u_weights(depth))
        return weak_derivative(coeffs, self.widths, fluxes)

    def aux_derivative(self, coeffs: np.ndarray, depth: int) -> np.ndarray:
        """D^depth applied to an auxiliary with the complementary traces"""
        fluxes = alternating_fluxes(coeffs, self.widths, self.flux.aux_weights(depth))
        return weak_derivative(coeffs, self.widths, fluxes)


class OddOrderMixin:
    """Monotone flux for the f(v) block of odd-order schemes"""

    def upwind_side(self) -> UpwindSide:
        if self.flux.upwind_side is not UpwindSide.AUTO:
            return self.flux.upwind_side
        return UpwindSide.MINUS if self.problem.orientation > 0 else UpwindSide.PLUS

    def _oriented_traces(self, v: np.ndarray):
        minus, plus = interface_traces(v, self.widths, 0)
        if self.upwind_side() is UpwindSide.PLUS:
            return plus, minus
        return minus, plus

    def _lf_alpha(self, a: np.ndarray, b: np.ndarray) -> Optional[float]:
        if self.flux.monotone is not MonotoneKind.LAX_FRIEDRICHS:
            return None
        if self.flux.lf_alpha is not None:
            return self.flux.lf_alpha
        slopes = self.problem.f_prime(np.concatenate((a, b)))
        return float(np.max(np.abs(slopes)))

    @property
    def potential(self) -> EntropyPotential:
        return self.problem.potential or EntropyPotential(self.problem.f)

    def f_hat(self, v: np.ndarray) -> np.ndarray:
        a, b = self._oriented_traces(v)
        return monotone_flux(self.flux.monotone, self.problem.f, a, b,
                             self._lf_alpha(a, b), self.potential)

    def flux_derivative(self, v: np.ndarray) -> np.ndarray:
        """w = f(v)_x with (w, s) = -(f(v), s_x) + [f-hat s]"""
        values = self.problem.f(self.at_points(v)) * np.ones(self.rule.n_pts)
        return first_derivative(self.project_points(values), self.widths, self.f_hat(v))

    def interface_balance(self, v: np.ndarray) -> float:
        """orientation * <w, v> = orientation * sum F(v+) - F(v-) + f-hat (v- - v+)"""
        minus, plus = interface_traces(v, self.widths, 0)
        potential = self.potential
        total = np.sum(potential(plus) - potential(minus) + self.f_hat(v) * (minus - plus))
        return float(self.problem.orientation * total)


class FourthOrderScheme(Scheme1D):
    """u_t + (b(u) u_xx)_xx = g with w = u_xx and v = b(u) w (v = w when linear)"""

    name = "fourth-order"

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return 1

    def auxiliaries(self, coeffs):
        f0, f1 = alternating_fluxes(coeffs, self.widths, self.flux.u_weights(2))
        w = second_derivative(coeffs, self.widths, f0, f1)
        if self.problem.nonlinearity is not Nonlinearity.FOURTH_B:
            return {"w": w}
        b_values = self._b_at_points(coeffs)
        v = self.project_points(b_values * self.at_points(w))
        return {"w": w, "v": v}

    def apply(self, coeffs, aux):
        v = aux.get("v", aux["w"])
        g0, g1 = alternating_fluxes(v, self.widths, self.flux.aux_weights(2))
        return -second_derivative(v, self.widths, g0, g1)

    def dissipation(self, coeffs, aux):
        w = aux["w"]
        if "v" not in aux:
            return float(np.sum(self.mass_weights() * w ** 2))
        return self.quadrature_sum(self._b_at_points(coeffs) * self.at_points(w) ** 2)

    def _b_at_points(self, coeffs: np.ndarray) -> np.ndarray:
        values = self.problem.b(self.at_points(coeffs)) * np.ones(self.rule.n_pts)
        lowest = float(np.min(values))
        if lowest < -NEGATIVE_B_TOL:
            raise NumericalFailure(f"b(u) must be nonnegative; found {lowest:.3e} at a quadrature point")
        return values


class FifthOrderScheme(OddOrderMixin, Scheme1D):
    """u_t + sigma f(u_xx)_xxx = g with v = u_xx and w = f(v)_x"""

    name = "fifth-order"

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return 1

    def auxiliaries(self, coeffs):
        f0, f1 = alternating_fluxes(coeffs, self.widths, self.flux.u_weights(2))
        v = second_derivative(coeffs, self.widths, f0, f1)
        return {"v": v, "w": self.flux_derivative(v)}

    def apply(self, coeffs, aux):
        w = aux["w"]
        g0, g1 = alternating_fluxes(w, self.widths, self.flux.aux_weights(2))
        return -self.problem.sigma * second_derivative(w, self.widths, g0, g1)

    def dissipation(self, coeffs, aux):
        return self.interface_balance(aux["v"])


class SixthOrderScheme(Scheme1D):
    """u_t - d^6 u = g with w = u_xxx"""

    name = "sixth-order"

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return 2

    def auxiliaries(self, coeffs):
        fluxes = alternating_fluxes(coeffs, self.widths, self.flux.u_weights(3))
        return {"w": third_derivative(coeffs, self.widths, *fluxes)}

    def apply(self, coeffs, aux):
        w = aux["w"]
        fluxes = alternating_fluxes(w, self.widths, self.flux.aux_weights(3))
        return -self.problem.sigma * third_derivative(w, self.widths, *fluxes)

    def dissipation(self, coeffs, aux):
        return float(np.sum(self.mass_weights() * aux["w"] ** 2))


class SeventhOrderScheme(OddOrderMixin, Scheme1D):
    """u_t + sigma d^4 f(u_xxx) = g with v = u_xxx and w = f(v)_x"""

    name = "seventh-order"

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return 2

    def auxiliaries(self, coeffs):
        fluxes = alternating_fluxes(coeffs, self.widths, self.flux.u_weights(3))
        v = third_derivative(coeffs, self.widths, *fluxes)
        return {"v": v, "w": self.flux_derivative(v)}

    def apply(self, coeffs, aux):
        w = aux["w"]
        fluxes = alternating_fluxes(w, self.widths, self.flux.aux_weights(3))
        return -self.problem.sigma * third_derivative(w, self.widths, *fluxes)

    def dissipation(self, coeffs, aux):
        return self.interface_balance(aux["v"])


class EvenOrderScheme(Scheme1D):
    """u_t + (-1)^M d^{2M} u = g with w = d^M u"""

    name = "even-order"

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return max(0, order // 2 - 1)

    def auxiliaries(self, coeffs):
        return {"w": self.u_derivative(coeffs, self.problem.half_order)}

    def apply(self, coeffs, aux):
        return -self.problem.sigma * self.aux_derivative(aux["w"], self.problem.half_order)

    def dissipation(self, coeffs, aux):
        return float(np.sum(self.mass_weights() * aux["w"] ** 2))


class OddOrderScheme(OddOrderMixin, Scheme1D):
    """u_t + sigma d^{M+1} f(d^M u) = g with v = d^M u and w = f(v)_x"""

    name = "odd-order"

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return max(0, (order - 3) // 2)

    def auxiliaries(self, coeffs):
        v = self.u_derivative(coeffs, self.problem.half_order)
        return {"v": v, "w": self.flux_derivative(v)}

    def apply(self, coeffs, aux):
        return -self.problem.sigma * self.aux_derivative(aux["w"], self.problem.half_order)

    def dissipation(self, coeffs, aux):
        return self.interface_balance(aux["v"])


def build_scheme(problem: ProblemSpec, mesh, k: int, flux: Optional[FluxConfig] = None,
                 quad_pts: Optional[int] = None, general: bool = False) -> Scheme:
    """Pick the scheme for a problem

    Orders 4 to 7 get the dedicated schemes with hand-written derivative
    blocks unless ``general`` is set; every other order, and every order
    when ``general`` is set, uses the loop-based even/odd schemes.
    """
    if problem.dimension == 2:
        from .scheme2d import BiharmonicScheme
        return BiharmonicScheme(problem, mesh, k, flux)

    if not isinstance(mesh, Mesh1D):
        raise ConfigurationError("1D problems need a Mesh1D")

    n = problem.order
    if problem.nonlinearity is Nonlinearity.FOURTH_B or (n == 4 and not general):
        cls = FourthOrderScheme
    elif n == 5 and not general:
        cls = FifthOrderScheme
    elif n == 6 and not general:
        cls = SixthOrderScheme
    elif n == 7 and not general:
        cls = SeventhOrderScheme
    elif n % 2 == 0:
        cls = EvenOrderScheme
    else:
        cls = OddOrderScheme
    scheme = cls(problem, mesh, k, flux, quad_pts)
    logger.debug("built %r on N=%d", scheme, mesh.n_cells)
    return scheme


def solve_auxiliaries(problem: ProblemSpec, u_h: DGField1D,
                      config: Optional[FluxConfig] = None, **options) -> AuxFields:
    """Auxiliary fields (w_h, and v_h where the scheme has one) for u_h"""
    return build_scheme(problem, u_h.mesh, u_h.k, config, **options).solve_auxiliaries(u_h)


def spatial_residual(problem: ProblemSpec, u_h: DGField1D, config: Optional[FluxConfig] = None,
                     t: Optional[float] = None, **options) -> Tuple[DGField1D, AuxFields]:
    """du_h/dt and the auxiliaries at time t (source included when t is given)"""
    return build_scheme(problem, u_h.mesh, u_h.k, config, **options).spatial_residual(u_h, t)


def manufactured_source(problem: ProblemSpec, t: float, mesh: Mesh1D, k: int) -> DGField1D:
    """L2 projection of g(., t) = u_t + (spatial operator applied to the exact u)

    Raises:
        ConfigurationError: If the problem has no exact solution to derive g from
    """
    if problem.exact is None:
        raise ConfigurationError(f"Problem {problem.name!r} has no exact solution to build a source from")
    if problem.source is None:
        return DGField1D(mesh, k)
    source = problem.source
    return DGField1D(mesh, k, l2_coefficients(lambda x: source(x, t), mesh, k))
