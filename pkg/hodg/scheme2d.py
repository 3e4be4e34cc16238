"""
Biharmonic DG scheme on periodic Cartesian meshes

w_h approximates the Laplacian of u_h and u_t = -lap w_h. Each Laplacian
is the sum of two 1D second-derivative blocks, one per axis, applied to
the tensor coefficients along that axis.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .flux import AlternatingChoice, FluxConfig
from .meshfield import DGField2D, Mesh2D
from .models import AuxFields, ProblemSpec
from .scheme1d import Scheme, alternating_fluxes, weak_derivative

logger = logging.getLogger(__name__)

# coefficient axes (Nx, Ny, a, b) moved so the active axis pair ends in (cells, modes)
_X_AXES = (1, 3, 0, 2)
_X_BACK = (2, 0, 3, 1)
_Y_AXES = (0, 2, 1, 3)


class FluxChoice2D(Enum):
    """Which side the u-family takes on every face"""
    ALT_PLUS_MINUS = "pm"   # u-hat, grad u-hat from +; w-tilde, grad w-tilde from -
    ALT_MINUS_PLUS = "mp"

    @classmethod
    def from_string(cls, value: str) -> "FluxChoice2D":
        aliases = {"pm": cls.ALT_PLUS_MINUS, "alt1": cls.ALT_PLUS_MINUS,
                   "mp": cls.ALT_MINUS_PLUS, "alt2": cls.ALT_MINUS_PLUS}
        try:
            return aliases[value]
        except KeyError:
            raise ConfigurationError(f"Unknown 2D flux: {value!r} (use pm/alt1 or mp/alt2)")


@dataclass(frozen=True)
class FluxConfig2D:
    choice: FluxChoice2D = FluxChoice2D.ALT_PLUS_MINUS

    def as_1d(self) -> FluxConfig:
        """The 1D configuration applied along each axis"""
        if self.choice is FluxChoice2D.ALT_PLUS_MINUS:
            return FluxConfig(AlternatingChoice.CHOICE1)
        return FluxConfig(AlternatingChoice.CHOICE2)

    @classmethod
    def parse(cls, text: str) -> "FluxConfig2D":
        token = text.split(",")[0].strip() or "pm"
        return cls(FluxChoice2D.from_string(token))

    @classmethod
    def from_1d(cls, flux: FluxConfig) -> "FluxConfig2D":
        if flux.choice is AlternatingChoice.CHOICE1:
            return cls(FluxChoice2D.ALT_PLUS_MINUS)
        if flux.choice is AlternatingChoice.CHOICE2:
            return cls(FluxChoice2D.ALT_MINUS_PLUS)
        raise ConfigurationError(f"2D fluxes are alt1 (pm) or alt2 (mp); got {flux.choice.value}")

    def __str__(self) -> str:
        return self.choice.value


def second_derivative_x(coeffs: np.ndarray, widths: np.ndarray, weights) -> np.ndarray:
    moved = coeffs.transpose(_X_AXES)
    fluxes = alternating_fluxes(moved, widths, weights)
    return weak_derivative(moved, widths, fluxes).transpose(_X_BACK)


def second_derivative_y(coeffs: np.ndarray, widths: np.ndarray, weights) -> np.ndarray:
    moved = coeffs.transpose(_Y_AXES)
    fluxes = alternating_fluxes(moved, widths, weights)
    return weak_derivative(moved, widths, fluxes).transpose(_Y_AXES)


class BiharmonicScheme(Scheme):
    """u_t + lap^2 u = g on Q^k elements, w = lap u"""

    name = "biharmonic-2d"

    def __init__(self, problem: ProblemSpec, mesh: Mesh2D, k: int, flux=None, quad_pts=None):
        if not isinstance(mesh, Mesh2D):
            raise ConfigurationError("The biharmonic scheme needs a Mesh2D")
        if flux is None or isinstance(flux, FluxConfig2D):
            flux2d = flux or FluxConfig2D()
        else:
            flux2d = FluxConfig2D.from_1d(flux)
        super().__init__(problem, mesh, k, flux2d.as_1d(), quad_pts)
        self.flux2d = flux2d

    @classmethod
    def minimum_degree(cls, order: int) -> int:
        return 1

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        nx, ny = self.mesh.shape
        return nx, ny, self.k + 1, self.k + 1

    def field(self, coeffs: np.ndarray) -> DGField2D:
        return DGField2D(self.mesh, self.k, coeffs)

    def laplacian(self, coeffs: np.ndarray, weights) -> np.ndarray:
        return (second_derivative_x(coeffs, self.mesh.x.widths, weights)
                + second_derivative_y(coeffs, self.mesh.y.widths, weights))

    def auxiliaries(self, coeffs):
        return {"w": self.laplacian(coeffs, self.flux.u_weights(2))}

    def apply(self, coeffs, aux):
        return -self.laplacian(aux["w"], self.flux.aux_weights(2))

    def dissipation(self, coeffs, aux):
        return float(np.sum(self.mass_weights() * aux["w"] ** 2))

    def source_coeffs(self, t: float) -> np.ndarray:
        from .projection import ProjectionKind, project_2d
        source = self.problem.source
        return project_2d(ProjectionKind.L2, lambda x, y: source(x, y, t), self.mesh, self.k).coeffs

    def __repr__(self) -> str:
        return f"BiharmonicScheme(k={self.k}, flux={self.flux2d})"


def spatial_residual_2d(u_h: DGField2D, config: Optional[FluxConfig2D] = None,
                        problem: Optional[ProblemSpec] = None,
                        t: Optional[float] = None) -> Tuple[DGField2D, DGField2D]:
    """du_h/dt and w_h for the biharmonic equation

    Without a problem the equation is the homogeneous u_t + lap^2 u = 0.
    """
    if problem is None:
        problem = ProblemSpec(name="biharmonic", order=4, dimension=2)
    scheme = BiharmonicScheme(problem, u_h.mesh, u_h.k, config)
    dudt, aux = scheme.spatial_residual(u_h, t)
    return dudt, aux.w


def solve_auxiliaries_2d(u_h: DGField2D, config: Optional[FluxConfig2D] = None) -> AuxFields:
    problem = ProblemSpec(name="biharmonic", order=4, dimension=2)
    return BiharmonicScheme(problem, u_h.mesh, u_h.k, config).solve_auxiliaries(u_h)
