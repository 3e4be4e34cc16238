"""
Study runner: convergence studies, single solves and energy traces
"""

import logging
import time
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigurationError, NumericalFailure, StudyFailed
from .flux import FluxConfig
from .meshfield import (DGField1D, DGField2D, build_mesh, build_mesh_2d, sampled_norms,
                        sampled_norms_2d)
from .models import AuxFields, ConvergenceTable, ProblemSpec, StudyConfig
from .problems import get_problem
from .projection import ProjectionKind, project_1d, project_2d
from .scheme1d import build_scheme
from .scheme2d import FluxConfig2D
from .timeint import EnergyTrace, SDCConfig, integrate_scheme

logger = logging.getLogger(__name__)

DT_CHECK_WARN = 0.05

Field = Union[DGField1D, DGField2D]


def error_norms(u_h: Field, exact: Callable, t: float) -> Dict[str, float]:
    """L1, L2 and Linf norms of u_h - exact(., t)

    Args:
        u_h: 1D or 2D DG field
        exact: Callable taking (x, t) or (x, y, t)
        t: Time the exact solution is evaluated at
    """
    if isinstance(u_h, DGField2D):
        return sampled_norms_2d(u_h.mesh, u_h.k, u_h.coeffs, lambda x, y: exact(x, y, t))
    return sampled_norms(u_h.mesh, u_h.k, u_h.coeffs, lambda x: exact(x, t))


def execution_context(reproducible: bool):
    """Single-threaded BLAS and OpenMP pools in reproducible mode"""
    return threadpool_limits(limits=1) if reproducible else nullcontext()


def parse_flux(text: str, dimension: int = 1) -> Union[FluxConfig, FluxConfig2D]:
    if dimension == 2:
        return FluxConfig2D.parse(text)
    return FluxConfig.parse(text)


@dataclass(eq=False)
class RunResult:
    """Outcome of one solve on one mesh"""
    n: int
    u: Field
    aux: AuxFields
    errors: Dict[str, float]
    trace: EnergyTrace
    n_steps: int
    dt: float
    wall_time: float
    initial: Optional[Field] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "errors": self.errors,
            "n_steps": self.n_steps,
            "dt": self.dt,
            "wall_time": self.wall_time,
            "energy_monotone": self.trace.is_monotone() if self.trace.energies else None,
        }


class StudyRunner:
    """Runs one configured problem on one or more meshes"""

    def __init__(self, config: StudyConfig, problem: Optional[ProblemSpec] = None):
        """Initialize the runner

        Args:
            config: Validated or raw study configuration
            problem: Prebuilt problem (looked up from config.problem otherwise)
        """
        self.config = config.validate()
        self.problem = problem or get_problem(
            config.problem, order=config.order, convention=config.convention,
            exact=config.exact, b_expr=config.b_expr, f_expr=config.f_expr,
            t_final=config.t_final,
        )
        self.t_final = config.t_final or self.problem.t_final
        self.flux = parse_flux(config.flux, self.problem.dimension)
        self.sdc = SDCConfig.from_study(config)
        if config.perturbation and self.problem.dimension == 2:
            raise ConfigurationError("Mesh perturbation is only available in 1D")

    # Building blocks

    def build_mesh(self, n: int):
        if self.problem.dimension == 2:
            return build_mesh_2d(n)
        return build_mesh(n, perturbation=self.config.perturbation, seed=self.config.seed)

    def initial_projection(self) -> ProjectionKind:
        return ProjectionKind.from_string(self.config.init)

    def initial_field(self, mesh) -> Field:
        """Project the exact solution at t = 0"""
        if self.problem.exact is None:
            raise ConfigurationError(f"Problem {self.problem.name!r} has no exact solution")
        kind = self.initial_projection()
        if kind.minimum_degree > self.config.k:
            raise ConfigurationError(
                f"Initial projection {kind.value} needs k >= {kind.minimum_degree} (got {self.config.k})"
            )
        profile = self.problem.exact.at(0.0)
        if self.problem.dimension == 2:
            return project_2d(kind, profile, mesh, self.config.k)
        return project_1d(kind, profile, mesh, self.config.k)

    def build_scheme(self, mesh):
        return build_scheme(self.problem, mesh, self.config.k, self.flux, self.config.quad_pts)

    # Runs

    def run_single(self, n: int, sdc: Optional[SDCConfig] = None) -> RunResult:
        """Integrate on an N-cell (or N x N) mesh and measure the error at t_final"""
        start = time.perf_counter()
        mesh = self.build_mesh(n)
        scheme = self.build_scheme(mesh)
        u0 = self.initial_field(mesh)
        with execution_context(self.config.reproducible):
            result = integrate_scheme(scheme, u0, self.t_final, sdc or self.sdc)

        errors = error_norms(result.u, self.problem.exact, self.t_final)
        if self.config.aux:
            for name, aux_field in result.aux.items():
                exact = self.problem.aux_exact.get(name)
                if exact is not None:
                    errors[f"{name}:L2"] = error_norms(aux_field, exact, self.t_final)["L2"]

        wall = time.perf_counter() - start
        logger.info("N=%d finished in %.2fs: L2 error %.3e", n, wall, errors["L2"])
        return RunResult(n=n, u=result.u, aux=result.aux, errors=errors, trace=result.trace,
                         n_steps=result.n_steps, dt=result.dt, wall_time=wall, initial=u0)

    def run_study(self) -> ConvergenceTable:
        """Run the mesh ladder in order and tabulate errors and orders

        Raises:
            StudyFailed: When a level aborts; the failing N is attached
        """
        table = ConvergenceTable(problem=self.problem.name, k=self.config.k)
        table.metadata.update({
            "problem": self.problem.to_dict(),
            "flux": str(self.flux),
            "init": self.initial_projection().value,
            "t_final": self.t_final,
            "nodes": self.sdc.nodes,
            "sweeps": self.sdc.resolve_sweeps(self.config.k),
            "sweep_mode": self.sdc.mode.value,
            "reproducible": self.config.reproducible,
        })
        steps = {}
        for n in self.config.meshes:
            logger.info("level N=%d started (%s, k=%d)", n, self.problem.name, self.config.k)
            try:
                result = self.run_single(n)
            except NumericalFailure as exc:
                raise StudyFailed(n, exc) from exc
            table.add_row(n, result.errors)
            steps[str(n)] = {"n_steps": result.n_steps, "dt": result.dt}
        table.metadata["steps"] = steps

        if self.config.check_dt:
            table.metadata["dt_check"] = self.temporal_check(table)
        return table

    def temporal_check(self, table: ConvergenceTable) -> Dict[str, float]:
        """Rerun the finest level with half the step and compare L2 errors"""
        n = table.rows[-1].n
        baseline = table.rows[-1].errors["L2"]
        mesh_h = self.build_mesh(n).h
        try:
            refined = self.run_single(n, self.sdc.halved(mesh_h, self.t_final))
        except NumericalFailure as exc:
            raise StudyFailed(n, exc) from exc
        change = abs(refined.errors["L2"] - baseline) / baseline if baseline > 0 else 0.0
        if change > DT_CHECK_WARN:
            logger.warning("halving dt at N=%d changed the L2 error by %.1f%%", n, 100 * change)
        return {"n": n, "l2": baseline, "l2_half_dt": refined.errors["L2"], "relative_change": change}

    def energy_trace(self, n: int) -> EnergyTrace:
        """Energy after every step on one mesh, without the exact-solution comparison"""
        mesh = self.build_mesh(n)
        scheme = self.build_scheme(mesh)
        u0 = self.initial_field(mesh) if self.problem.exact is not None else self._random_field(scheme)
        with execution_context(self.config.reproducible):
            trace = integrate_scheme(scheme, u0, self.t_final, self.sdc).trace
        logger.info("energy trace N=%d: E0=%.6e, E=%.6e, monotone=%s",
                    n, trace.energies[0], trace.energies[-1], trace.is_monotone())
        return trace

    def _random_field(self, scheme) -> Field:
        rng = np.random.default_rng(self.config.seed)
        return scheme.field(rng.standard_normal(scheme.shape))
