"""
Time integration: operator assembly by probing, and spectral deferred
correction (SDC) on Gauss-Lobatto nodes with implicit or explicit sweeps
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import interpolate, sparse
from scipy.sparse import linalg as splinalg

from .basis import gauss_lobatto_rule
from .errors import ConfigurationError, IntegrationAborted, NumericalFailure
from .flux import FluxConfig
from .models import AuxFields, ProblemSpec, StudyConfig
from .scheme1d import Scheme, build_scheme

logger = logging.getLogger(__name__)

BANDWIDTH_2D = 2
CONSISTENCY_TOL = 1e-9
STALL_RATIO = 0.5
STAGNATION_TOL = 1e-9
MAX_REFINEMENTS = 4
REFINE_TOL = 1e-15


class SweepMode(Enum):
    IMPLICIT = "implicit"
    EXPLICIT = "explicit"

    @classmethod
    def from_string(cls, value: str) -> "SweepMode":
        for mode in cls:
            if mode.value == value:
                return mode
        raise ConfigurationError(f"Unknown sweep mode: {value!r}")


@dataclass
class SDCConfig:
    """Spectral deferred correction settings

    Attributes:
        nodes: Gauss-Lobatto nodes per step (collocation order 2*nodes - 2)
        sweeps: Correction sweeps (None: k + 1)
        mode: Backward-Euler-based (IMPLICIT) or forward-Euler-based sweeps
        newton_tol: Max-norm Newton residual and update tolerance, relative to 1 + max|u|
        newton_max_iter: Newton iterations before giving up
        dt: Fixed step (None: min(dt_factor * h, t_final / min_steps))
    """

    nodes: int = 3
    sweeps: Optional[int] = None
    mode: SweepMode = SweepMode.IMPLICIT
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    dt: Optional[float] = None
    dt_factor: float = 0.5
    min_steps: int = 16

    def __post_init__(self):
        if self.nodes < 2:
            raise ConfigurationError("SDC needs at least two Gauss-Lobatto nodes")
        if self.sweeps is not None and self.sweeps < 1:
            raise ConfigurationError(f"sweeps must be >= 1 (got {self.sweeps})")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError(f"dt must be positive (got {self.dt})")
        if self.dt_factor <= 0 or self.min_steps < 1:
            raise ConfigurationError("dt_factor must be positive and min_steps >= 1")

    def resolve_sweeps(self, k: int) -> int:
        return self.sweeps if self.sweeps is not None else k + 1

    def formal_order(self, k: int) -> int:
        return min(2 * self.nodes - 2, self.resolve_sweeps(k) + 1)

    def step_plan(self, h: float, t_final: float) -> Tuple[int, float]:
        """(number of steps, step size) covering [0, t_final] exactly"""
        if t_final <= 0:
            raise ConfigurationError(f"t_final must be positive (got {t_final})")
        target = self.dt if self.dt is not None else min(self.dt_factor * h, t_final / self.min_steps)
        n_steps = max(1, math.ceil(t_final / target - 1e-9))
        return n_steps, t_final / n_steps

    def halved(self, h: float, t_final: float) -> "SDCConfig":
        """Same settings with half the step size"""
        _, dt = self.step_plan(h, t_final)
        return SDCConfig(self.nodes, self.sweeps, self.mode, self.newton_tol,
                         self.newton_max_iter, dt / 2, self.dt_factor, self.min_steps)

    @classmethod
    def from_study(cls, config: StudyConfig) -> "SDCConfig":
        return cls(nodes=config.nodes, sweeps=config.sweeps,
                   mode=SweepMode.from_string(config.sweep_mode),
                   newton_tol=config.newton_tol, newton_max_iter=config.newton_max_iter,
                   dt=config.dt, dt_factor=config.dt_factor, min_steps=config.min_steps)


@dataclass(eq=False)
class LinearOperator:
    """Sparse matrix of a linear semi-discrete operator on flattened coefficients"""

    matrix: sparse.csr_matrix
    field_shape: Tuple[int, ...]
    stencil_width: int = 0

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.ravel(coeffs)).reshape(self.field_shape)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def color_count(n_cells: int, bandwidth: int) -> int:
    """Smallest divisor of n_cells that separates probes by more than 2*bandwidth"""
    for count in range(2 * bandwidth + 1, n_cells + 1):
        if n_cells % count == 0:
            return count
    return n_cells


def _owners(n_cells: int, count: int, color: int) -> np.ndarray:
    """Nearest probed cell (periodically) for every cell"""
    r = np.arange(n_cells)
    d = (r - color) % count
    return np.where(d <= count // 2, r - d, r + (count - d)) % n_cells


def probe_matrix(fn: Callable[[np.ndarray], np.ndarray], field_shape: Sequence[int],
                 bandwidth: int, base: Optional[np.ndarray] = None,
                 eps: Optional[float] = None) -> Tuple[sparse.csr_matrix, int]:
    """Sparse Jacobian of fn by colored probing on a periodic cell grid

    Cells whose indices agree modulo the color count are perturbed
    together; each response entry is credited to the nearest perturbed
    cell. Valid as long as fn couples cells at most ``bandwidth`` apart.

    Args:
        fn: Map from coefficient arrays of shape field_shape to the same shape
        field_shape: (N, k+1) or (Nx, Ny, k+1, k+1)
        base: Linearization point; None for a linear fn (probed at zero)
        eps: Finite-difference step (default 1 for linear fn, sqrt(eps) scaled otherwise)

    Returns:
        (matrix, measured stencil width in cells)
    """
    field_shape = tuple(field_shape)
    ndim = len(field_shape) // 2
    cells, modes = field_shape[:ndim], field_shape[ndim:]
    size = int(np.prod(field_shape))
    counts = [color_count(n, bandwidth) for n in cells]

    if base is None:
        origin = np.zeros(field_shape)
        reference = None
        step = 1.0 if eps is None else eps
    else:
        origin = np.asarray(base, dtype=float).reshape(field_shape)
        reference = fn(origin)
        step = eps if eps is not None else np.sqrt(np.finfo(float).eps) * max(1.0, float(np.max(np.abs(origin))))

    row_index = np.arange(size).reshape(field_shape)
    pad = (slice(None),) * ndim + (None,) * len(modes)
    rows, cols, vals = [], [], []
    stencil = 0

    for color in itertools.product(*(range(c) for c in counts)):
        selected = [np.flatnonzero(np.arange(n) % c == g) for n, c, g in zip(cells, counts, color)]
        owners = [_owners(n, c, g) for n, c, g in zip(cells, counts, color)]
        owner_grid = np.meshgrid(*owners, indexing="ij")
        distance = np.zeros(cells, dtype=int)
        for axis, (n, own) in enumerate(zip(cells, owners)):
            gap = np.abs(np.arange(n) - own)
            gap = np.minimum(gap, n - gap)
            shape = [1] * ndim
            shape[axis] = n
            distance = np.maximum(distance, gap.reshape(shape))
        distance = np.broadcast_to(distance[pad], field_shape)

        for mode in itertools.product(*(range(m) for m in modes)):
            probe = origin.copy()
            probe[np.ix_(*selected) + mode] += step
            response = fn(probe)
            if reference is not None:
                response = response - reference
            response = response / step

            col_cells = np.ravel_multi_index(tuple(owner_grid) + tuple(
                np.full(cells, m) for m in mode), field_shape)
            col = np.broadcast_to(col_cells[pad], field_shape)
            nonzero = response != 0.0
            rows.append(row_index[nonzero])
            cols.append(col[nonzero])
            vals.append(response[nonzero])
            if np.any(nonzero):
                stencil = max(stencil, int(np.max(distance[nonzero])))

    matrix = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))
    return matrix, stencil


def _bandwidth(scheme: Scheme) -> int:
    """Cells a rate entry can reach: 2 for the biharmonic operator, (n+1)//2 with one-sided fluxes, n otherwise"""
    if scheme.problem.dimension == 2:
        return BANDWIDTH_2D
    n = scheme.problem.order
    return (n + 1) // 2 if scheme.flux.is_one_sided() else n


def operator_for(scheme: Scheme, bandwidth: Optional[int] = None) -> LinearOperator:
    """Assemble and self-check the sparse matrix of a linear scheme

    Raises:
        ConfigurationError: If the scheme is nonlinear
        NumericalFailure: If the assembled matrix disagrees with the scheme
    """
    if not scheme.is_linear:
        raise ConfigurationError(f"{scheme.problem.name} is nonlinear; it has no linear operator")
    bandwidth = bandwidth or _bandwidth(scheme)
    matrix, stencil = probe_matrix(scheme.rate, scheme.shape, bandwidth)
    operator = LinearOperator(matrix, scheme.shape, stencil)

    check = np.random.default_rng(0).standard_normal(scheme.shape)
    expected = scheme.rate(check)
    mismatch = float(np.max(np.abs(operator.apply(check) - expected)))
    if mismatch > CONSISTENCY_TOL * max(1.0, float(np.max(np.abs(expected)))):
        raise NumericalFailure(
            f"Assembled operator disagrees with the scheme by {mismatch:.3e}; "
            f"stencil wider than {bandwidth} cells?"
        )
    logger.info("assembled %r: size %d, nnz %d, stencil width %d",
                scheme, operator.size, operator.nnz, stencil)
    return operator


def assemble_operator(problem: ProblemSpec, mesh, k: int, config: Optional[FluxConfig] = None,
                      quad_pts: Optional[int] = None) -> LinearOperator:
    """Sparse operator L with du/dt = L u for a linear problem (source excluded)"""
    if not problem.is_linear:
        raise ConfigurationError(f"{problem.name} is nonlinear; it has no linear operator")
    return operator_for(build_scheme(problem, mesh, k, config, quad_pts))


def assemble_jacobian(scheme: Scheme, coeffs: np.ndarray) -> sparse.csr_matrix:
    """Finite-difference Jacobian of the scheme at coeffs"""
    matrix, _ = probe_matrix(scheme.rate, scheme.shape, _bandwidth(scheme), base=coeffs)
    return matrix


class NewtonStalled(NumericalFailure):
    """Newton iteration hit its iteration cap"""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Newton did not converge in {iterations} iterations (residual {residual:.3e})")


class LinearSystem:
    """u' = L u + g(t), solved with one sparse LU per distinct sub-step

    The assembled matrix is only factored. Rates and refinement residuals
    go through ``apply``, the staged matrix-free operator for a DG scheme.
    """

    def __init__(self, operator: LinearOperator, source: Optional[Callable[[float], np.ndarray]] = None,
                 apply: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 refinements: int = MAX_REFINEMENTS):
        self.operator = operator
        self.source = source
        self.apply = apply or (lambda u: self.operator.matrix @ u)
        self.refinements = refinements
        self._factors: Dict[float, Any] = {}

    def rate(self, u: np.ndarray, t: float) -> np.ndarray:
        du = self.apply(u)
        if self.source is not None:
            du = du + np.ravel(self.source(t))
        return du

    def prepare(self, u: np.ndarray, t: float) -> None:
        pass

    def _factor(self, dtau: float):
        if dtau not in self._factors:
            identity = sparse.identity(self.operator.size, format="csc")
            self._factors[dtau] = splinalg.splu((identity - dtau * self.operator.matrix).tocsc())
            logger.debug("factored I - %.3e L", dtau)
        return self._factors[dtau]

    def solve(self, dtau: float, rhs: np.ndarray, t: float, guess: np.ndarray) -> np.ndarray:
        """u with u - dtau (L u + g(t)) = rhs

        The LU solution is corrected by solving for the residual of the
        matrix-free operator until the correction stops shrinking.
        """
        if self.source is not None:
            rhs = rhs + dtau * np.ravel(self.source(t))
        factor = self._factor(dtau)
        u = factor.solve(rhs)
        previous = np.inf
        for _ in range(self.refinements):
            delta = factor.solve(rhs - u + dtau * self.apply(u))
            size = float(np.max(np.abs(delta)))
            if not size < previous:
                break
            u = u + delta
            previous = size
            if size <= REFINE_TOL * max(1.0, float(np.max(np.abs(u)))):
                break
        return u


class NonlinearSystem:
    """u' = F(u, t) with Newton solves on a probed Jacobian

    The Jacobian is refreshed at the start of every step and again when the
    residual fails to halve between iterations.
    """

    def __init__(self, scheme: Scheme, tol: float = 1e-12, max_iter: int = 25):
        self.scheme = scheme
        self.tol = tol
        self.max_iter = max_iter
        self._jacobian: Optional[sparse.csr_matrix] = None
        self._factors: Dict[float, Any] = {}
        self.refreshes = 0
        self.iterations = 0

    def rate(self, u: np.ndarray, t: float) -> np.ndarray:
        return np.ravel(self.scheme.rate(u, t))

    def prepare(self, u: np.ndarray, t: float) -> None:
        self._jacobian = assemble_jacobian(self.scheme, u)
        self._factors.clear()
        self.refreshes += 1

    def _factor(self, dtau: float):
        if dtau not in self._factors:
            identity = sparse.identity(self._jacobian.shape[0], format="csc")
            self._factors[dtau] = splinalg.splu((identity - dtau * self._jacobian).tocsc())
        return self._factors[dtau]

    def solve(self, dtau: float, rhs: np.ndarray, t: float, guess: np.ndarray) -> np.ndarray:
        """u with u - dtau F(u, t) = rhs

        Converged when max|G| or the Newton update is at most tol * (1 + max|u|).
        A residual that stops halving after an update below
        STAGNATION_TOL * (1 + max|u|) is at its round-off floor and is
        accepted as well.
        """
        if self._jacobian is None:
            self.prepare(guess, t)
        u = np.array(guess, dtype=float)
        previous = None
        update = np.inf
        residual = np.inf
        for iteration in range(self.max_iter):
            G = u - dtau * self.rate(u, t) - rhs
            residual = float(np.max(np.abs(G)))
            scale = 1.0 + float(np.max(np.abs(u)))
            if residual <= self.tol * scale:
                return u
            if previous is not None and residual > STALL_RATIO * previous:
                if update <= STAGNATION_TOL * scale:
                    logger.debug("Newton residual stagnated at %.3e after an update of %.3e",
                                 residual, update)
                    return u
                logger.warning("Newton residual %.3e -> %.3e; refreshing Jacobian", previous, residual)
                self.prepare(u, t)
            delta = self._factor(dtau).solve(-G)
            u = u + delta
            self.iterations += 1
            update = float(np.max(np.abs(delta)))
            if update <= self.tol * scale:
                return u
            previous = residual
            logger.debug("Newton iteration %d: residual %.3e, update %.3e", iteration, residual, update)
        raise NewtonStalled(residual, self.max_iter)


System = Union[LinearSystem, NonlinearSystem]


def lobatto_nodes(n_nodes: int) -> np.ndarray:
    """Gauss-Lobatto nodes on [0, 1]"""
    return 0.5 * (gauss_lobatto_rule(n_nodes).points + 1.0)


def integration_matrix(nodes: np.ndarray) -> np.ndarray:
    """Q[m, j] = integral from 0 to nodes[m] of the j-th Lagrange polynomial"""
    n = len(nodes)
    Q = np.zeros((n, n))
    for j in range(n):
        antiderivative = interpolate.lagrange(nodes, np.eye(n)[j]).integ()
        Q[:, j] = antiderivative(nodes) - antiderivative(0.0)
    return Q


class SDCIntegrator:
    """One SDC step: Euler predictor on the nodes, then correction sweeps"""

    def __init__(self, system: System, nodes: int = 3, sweeps: int = 2,
                 mode: SweepMode = SweepMode.IMPLICIT):
        self.system = system
        self.nodes = lobatto_nodes(nodes)
        self.Q = integration_matrix(self.nodes)
        self.S = self.Q[1:] - self.Q[:-1]
        self.sweeps = sweeps
        self.mode = mode

    def step(self, u: np.ndarray, t: float, dt: float) -> np.ndarray:
        system = self.system
        times = t + dt * self.nodes
        dtaus = dt * np.diff(self.nodes)
        system.prepare(u, t)

        U = [u]
        F = [system.rate(u, times[0])]
        for m, dtau in enumerate(dtaus):
            if self.mode is SweepMode.IMPLICIT:
                nxt = system.solve(dtau, U[m], times[m + 1], U[m])
            else:
                nxt = U[m] + dtau * F[m]
            U.append(nxt)
            F.append(system.rate(nxt, times[m + 1]))

        for _ in range(self.sweeps):
            new_U, new_F = [u], [F[0]]
            for m, dtau in enumerate(dtaus):
                quadrature = dt * (self.S[m] @ np.asarray(F))
                if self.mode is SweepMode.IMPLICIT:
                    rhs = new_U[m] - dtau * F[m + 1] + quadrature
                    nxt = system.solve(dtau, rhs, times[m + 1], U[m + 1])
                else:
                    nxt = new_U[m] + dtau * (new_F[m] - F[m]) + quadrature
                new_U.append(nxt)
                new_F.append(system.rate(nxt, times[m + 1]))
            U, F = new_U, new_F
        return U[-1]


@dataclass
class EnergyTrace:
    """||u_h||^2 after every accepted step"""

    steps: List[int] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)

    def record(self, step: int, t: float, energy: float) -> None:
        self.steps.append(step)
        self.times.append(t)
        self.energies.append(energy)

    @property
    def increments(self) -> List[float]:
        """E_m - E_{m-1} (0 for the initial entry)"""
        return [0.0] + [b - a for a, b in zip(self.energies, self.energies[1:])]

    def is_monotone(self, tol: float = 1e-10) -> bool:
        scale = max(1.0, self.energies[0]) if self.energies else 1.0
        return all(inc <= tol * scale for inc in self.increments)

    def relative_drift(self) -> float:
        """|E_final - E_0| / E_0"""
        if not self.energies or self.energies[0] == 0:
            return 0.0
        return abs(self.energies[-1] - self.energies[0]) / self.energies[0]

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"step": s, "t": t, "energy": e, "dissipation_increment": d}
            for s, t, e, d in zip(self.steps, self.times, self.energies, self.increments)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {"steps": self.steps, "times": self.times, "energies": self.energies}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnergyTrace":
        return cls(list(data["steps"]), list(data["times"]), list(data["energies"]))


def integrate_system(system: System, u0: np.ndarray, t_final: float, n_steps: int,
                     integrator: SDCIntegrator, energy: Optional[Callable[[np.ndarray], float]] = None,
                     t0: float = 0.0) -> Tuple[np.ndarray, EnergyTrace]:
    """Advance u0 by n_steps equal SDC steps

    Raises:
        IntegrationAborted: On Newton failure or non-finite values
    """
    dt = (t_final - t0) / n_steps
    u = np.array(u0, dtype=float).ravel()
    trace = EnergyTrace()
    if energy is not None:
        trace.record(0, t0, energy(u))
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * dt
        try:
            u = integrator.step(u, t, dt)
        except NewtonStalled as exc:
            raise IntegrationAborted(str(exc), step, t)
        if not np.all(np.isfinite(u)):
            raise IntegrationAborted("non-finite values in the solution", step, t + dt)
        if energy is not None:
            trace.record(step, t + dt, energy(u))
        logger.debug("step %d/%d done, t=%.6g", step, n_steps, t + dt)
    return u, trace


@dataclass(eq=False)
class IntegrationResult:
    u: Any
    aux: AuxFields
    trace: EnergyTrace
    n_steps: int
    dt: float
    wall_time: float


def make_system(scheme: Scheme, sdc: SDCConfig) -> System:
    if scheme.is_linear:
        source = scheme.source_coeffs if scheme.problem.has_source else None
        return LinearSystem(operator_for(scheme), source, apply=lambda u: np.ravel(scheme.rate(u)))
    return NonlinearSystem(scheme, sdc.newton_tol, sdc.newton_max_iter)


def integrate_scheme(scheme: Scheme, u0, t_final: float,
                     sdc: Optional[SDCConfig] = None) -> IntegrationResult:
    """Integrate a DG field from 0 to t_final with SDC"""
    sdc = sdc or SDCConfig()
    start = time.perf_counter()
    n_steps, dt = sdc.step_plan(scheme.mesh.h, t_final)
    system = make_system(scheme, sdc)
    integrator = SDCIntegrator(system, sdc.nodes, sdc.resolve_sweeps(scheme.k), sdc.mode)
    weights = np.ravel(scheme.mass_weights())

    logger.info("integrating %r to t=%g: %d steps of %.3e, %d nodes, %d sweeps (%s)",
                scheme, t_final, n_steps, dt, sdc.nodes, integrator.sweeps, sdc.mode.value)
    u, trace = integrate_system(system, u0.coeffs, t_final, n_steps, integrator,
                                energy=lambda c: float(np.dot(weights, c * c)))
    final = scheme.field(u.reshape(scheme.shape))
    return IntegrationResult(u=final, aux=scheme.solve_auxiliaries(final), trace=trace,
                             n_steps=n_steps, dt=dt, wall_time=time.perf_counter() - start)


def integrate(problem: ProblemSpec, u0, t_final: float, sdc: Optional[SDCConfig] = None,
              flux: Optional[FluxConfig] = None, quad_pts: Optional[int] = None) -> IntegrationResult:
    """Build the scheme for u0's mesh and degree, then integrate"""
    scheme = build_scheme(problem, u0.mesh, u0.k, flux, quad_pts)
    return integrate_scheme(scheme, u0, t_final, sdc)
