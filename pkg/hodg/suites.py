"""
Property suites: machine-precision checks of projections, energy
identities, superconvergence, derivative/jump bounds and scheme equivalences
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np
from numpy.polynomial import Polynomial

from .basis import gauss_rule, reference_element
from .errors import ConfigurationError
from .flux import AlternatingChoice, FluxConfig, MonotoneKind
from .meshfield import build_mesh, build_mesh_2d, interface_traces, sampled_norms, sampled_norms_2d
from .models import convergence_order
from .problems import get_problem, symbolic_profile
from .projection import (Element2D, ProjectionKind, project_1d, project_2d,
                         superconvergence_check)
from .scheme1d import (EvenOrderScheme, FifthOrderScheme, FourthOrderScheme, OddOrderScheme,
                       SeventhOrderScheme, SixthOrderScheme, build_scheme)
from .timeint import SDCConfig, integrate_scheme

logger = logging.getLogger(__name__)

ROUNDOFF_TOL = 1e-11
EQUIVALENCE_TOL = 1e-12
SMOOTH_TARGET = "sin(x) + cos(2*x)/2"


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "tolerance": self.tolerance, "detail": self.detail}


@dataclass
class SuiteReport:
    """Outcome of one suite run"""
    suite: str
    seed: int
    checks: List[CheckResult] = field(default_factory=list)
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def add(self, name: str, passed: bool, value: Optional[float] = None,
            tolerance: Optional[float] = None, detail: str = "") -> CheckResult:
        check = CheckResult(name, bool(passed), None if value is None else float(value), tolerance, detail)
        self.checks.append(check)
        if not check.passed:
            logger.warning("%s: check %s failed (value %s, tolerance %s)",
                           self.suite, name, value, tolerance)
        return check

    def bound(self, name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
        """Pass when value <= tolerance"""
        return self.add(name, math.isfinite(value) and value <= tolerance, value, tolerance, detail)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failures),
            "options": self.options,
            "checks": [check.to_dict() for check in self.checks],
        }


class Suite(ABC):
    """Base class for all property suites"""

    name: str = "base_suite"
    description: str = "Base suite class"

    @abstractmethod
    def run(self, report: SuiteReport, rng: np.random.Generator, **options) -> None:
        """Append checks to the report"""


def _flux_family(thetas: Iterable[float], monotone: MonotoneKind = MonotoneKind.UPWIND) -> List[FluxConfig]:
    configs = [FluxConfig(choice, monotone=monotone) for choice in
               (AlternatingChoice.CHOICE1, AlternatingChoice.CHOICE2,
                AlternatingChoice.CHOICE3, AlternatingChoice.CHOICE4)]
    configs += [FluxConfig(AlternatingChoice.THETA, theta, monotone) for theta in thetas]
    return configs


class _PolynomialProfile:
    """Product of 1D polynomials, in the form the projections consume"""

    def __init__(self, px: Polynomial, py: Optional[Polynomial] = None):
        self.px = px
        self.py = py

    def __call__(self, *coords):
        if self.py is None:
            return self.px(coords[0])
        return self.px(coords[0]) * self.py(coords[1])

    def derivative(self, dx: int = 0, dy: int = 0) -> Callable:
        px = self.px.deriv(dx) if dx else self.px
        if self.py is None:
            return px
        py = self.py.deriv(dy) if dy else self.py
        return lambda x, y: px(x) * py(y)


class ProjectionSuite(Suite):
    name = "projections"
    description = "Reproduction, moment and endpoint conditions and EOC of every projection"

    ONE_D = [ProjectionKind.L2, ProjectionKind.RADAU_MINUS, ProjectionKind.RADAU_PLUS,
             ProjectionKind.P1_MINUS, ProjectionKind.P1_PLUS,
             ProjectionKind.P2_MINUS, ProjectionKind.P2_PLUS]
    TENSOR = [ProjectionKind.PI_MINUS, ProjectionKind.PI_PLUS]

    def run(self, report, rng, degrees=(0, 1, 2, 3), n_cells=12, ladder=(8, 16, 32), **options):
        domain = (0.0, 2 * np.pi)
        mesh = build_mesh(n_cells, perturbation=0.2, seed=int(rng.integers(1 << 30)))
        target = symbolic_profile(SMOOTH_TARGET)
        for k in degrees:
            for kind in self.ONE_D:
                label = f"{kind.value}/k={k}"
                if k < kind.minimum_degree:
                    self._rejected(report, label, lambda: project_1d(kind, target, mesh, k))
                    continue
                poly = _PolynomialProfile(Polynomial(rng.standard_normal(k + 1), domain=domain))
                u_h = project_1d(kind, poly, mesh, k)
                err = sampled_norms(mesh, k, u_h.coeffs, poly)["Linf"]
                report.bound(f"{label}/reproduction", err, ROUNDOFF_TOL)

                u_h = project_1d(kind, target, mesh, k)
                moments, endpoints = self._conditions(kind, target, mesh, k, u_h.coeffs)
                report.bound(f"{label}/moments", moments, ROUNDOFF_TOL)
                if kind is not ProjectionKind.L2:
                    report.bound(f"{label}/endpoints", endpoints, ROUNDOFF_TOL)

                errors = [sampled_norms(m, k, project_1d(kind, target, m, k).coeffs, target)["L2"]
                          for m in (build_mesh(n) for n in ladder)]
                order = convergence_order(errors[-2], errors[-1], ladder[-2], ladder[-1])
                report.add(f"{label}/eoc", order is not None and order >= k + 0.85, order, k + 0.85)

            for kind in self.TENSOR:
                label = f"{kind.value}/k={k}"
                mesh2d = build_mesh_2d(4)
                if k < 1:
                    self._rejected(report, label, lambda: project_2d(kind, target, mesh2d, k))
                    continue
                poly = _PolynomialProfile(Polynomial(rng.standard_normal(k + 1), domain=domain),
                                          Polynomial(rng.standard_normal(k + 1), domain=domain))
                u_h = project_2d(kind, poly, mesh2d, k)
                err = sampled_norms_2d(mesh2d, k, u_h.coeffs, poly)["Linf"]
                report.bound(f"{label}/reproduction", err, ROUNDOFF_TOL)
                xy_first = project_2d(kind, poly, mesh2d, k, order="xy").coeffs
                yx_first = project_2d(kind, poly, mesh2d, k, order="yx").coeffs
                report.bound(f"{label}/commutes", float(np.max(np.abs(xy_first - yx_first))), ROUNDOFF_TOL)

    @staticmethod
    def _rejected(report: SuiteReport, label: str, attempt: Callable) -> None:
        try:
            attempt()
        except ConfigurationError as exc:
            report.add(f"{label}/rejected", True, detail=str(exc))
        else:
            report.add(f"{label}/rejected", False, detail="degree below the minimum was accepted")

    @staticmethod
    def _conditions(kind: ProjectionKind, target, mesh, k: int, coeffs: np.ndarray):
        """max moment residual and max scaled endpoint residual"""
        ref = reference_element(k)
        rule = gauss_rule(k + 3)
        half = 0.5 * mesh.widths
        xq = mesh.physical(np.arange(mesh.n_cells)[:, None], rule.points[None, :])
        err = target(xq) - coeffs @ ref.vandermonde(rule.points)
        n_moments = k + 1 - kind.conditions
        table = ref.vandermonde(rule.points)[:n_moments]
        moments = (err * rule.weights) @ table.T * half[:, None]
        worst_moment = float(np.max(np.abs(moments))) if n_moments else 0.0

        worst_end = 0.0
        if kind.side is not None:
            side = 1 if kind.side == "-" else -1
            xe = mesh.boundaries[1:] if side > 0 else mesh.boundaries[:-1]
            for level in range(kind.conditions):
                exact = target.derivative(level)(xe)
                approx = (coeffs @ ref.endpoint(level, side)) * (2.0 / mesh.widths) ** level
                worst_end = max(worst_end, float(np.max(np.abs((exact - approx) * half ** level))))
        return worst_moment, worst_end


class EnergySuite(Suite):
    name = "energy"
    description = "Semi-discrete energy identities on random fields"

    def run(self, report, rng, degrees=(1, 2, 3), n_cells=16, samples=100,
            thetas=(0.0, 0.3, 0.5, 1.0), **options):
        mesh = build_mesh(n_cells)
        identities = [
            ("fourth-linear", get_problem("ex7.1"), MonotoneKind.UPWIND, False),
            ("fourth-b", get_problem("ex7.3"), MonotoneKind.UPWIND, False),
            ("fifth-upwind", get_problem("ex7.2"), MonotoneKind.UPWIND, False),
            ("fifth-central", get_problem("ex7.2"), MonotoneKind.CENTRAL, False),
            ("fifth-nonlinear", get_problem("ex7.4"), MonotoneKind.UPWIND, True),
            ("sixth", get_problem("order:6"), MonotoneKind.UPWIND, False),
            ("seventh", get_problem("order:7"), MonotoneKind.UPWIND, False),
        ]
        for label, problem, monotone, exact_quadrature in identities:
            conservative = monotone is MonotoneKind.CENTRAL and problem.is_linear
            for k in degrees:
                for flux in _flux_family(thetas, monotone):
                    try:
                        scheme = build_scheme(problem, mesh, k, flux,
                                              quad_pts=2 * k + 2 if exact_quadrature else None)
                    except ConfigurationError:
                        continue
                    worst, lowest = 0.0, math.inf
                    for _ in range(samples):
                        coeffs = rng.standard_normal(scheme.shape)
                        measured, predicted = scheme.energy_balance(coeffs)
                        scale = self._scale(scheme, coeffs)
                        target = 0.0 if conservative else predicted
                        worst = max(worst, abs(measured - target) / scale)
                        lowest = min(lowest, -predicted / scale)
                    name = f"{label}/k={k}/{flux}"
                    report.bound(name, worst, ROUNDOFF_TOL)
                    if not conservative:
                        report.add(f"{name}/dissipative", lowest >= -ROUNDOFF_TOL, lowest, -ROUNDOFF_TOL)

    @staticmethod
    def _scale(scheme, coeffs: np.ndarray) -> float:
        """||du/dt|| ||u||, the Cauchy-Schwarz bound of <du/dt, u>"""
        weights = scheme.mass_weights()
        dudt = scheme.rate(coeffs)
        return max(math.sqrt(np.sum(weights * dudt ** 2) * np.sum(weights * coeffs ** 2)), 1e-300)


class SuperconvergenceSuite(Suite):
    name = "superconvergence"
    description = "Vanishing boundary forms of the tensor projection and the decay of the remainder"

    @staticmethod
    def monomials(k: int) -> Dict[str, _PolynomialProfile]:
        """Cases for which the boundary form vanishes identically"""
        def power(n):
            return Polynomial([0.0] * n + [1.0])
        one = Polynomial([1.0])
        return {
            f"x^{k + 1}": _PolynomialProfile(power(k + 1), one),
            f"y^{k + 1}": _PolynomialProfile(one, power(k + 1)),
            f"x^{k + 2}": _PolynomialProfile(power(k + 2), one),
            f"y^{k + 2}": _PolynomialProfile(one, power(k + 2)),
            f"x^{k + 1}y": _PolynomialProfile(power(k + 1), power(1)),
            f"xy^{k + 1}": _PolynomialProfile(power(1), power(k + 1)),
        }

    def run(self, report, rng, degrees=(1, 2, 3), rectangles=5, **options):
        for k in degrees:
            for _ in range(rectangles):
                x0, y0 = rng.uniform(-0.5, 0.5, 2)
                hx, hy = rng.uniform(0.5, 1.5, 2)
                element = Element2D(x0, x0 + hx, y0, y0 + hy)
                for label, u in self.monomials(k).items():
                    value = superconvergence_check(u, k, element)
                    report.bound(f"k={k}/{label}", value, ROUNDOFF_TOL,
                                 detail=f"[{x0:.3f}, {x0 + hx:.3f}] x [{y0:.3f}, {y0 + hy:.3f}]")
            self._slope(report, k)

    @staticmethod
    def _slope(report: SuiteReport, k: int) -> None:
        """Remainder for x^(k+1) y^2 under element refinement from a fixed corner

        The remainder must be nonzero on every level and decay like h^(k+2).
        """
        u = _PolynomialProfile(Polynomial([0.0] * (k + 1) + [1.0]), Polynomial([0.0, 0.0, 1.0]))
        base = Element2D(0.3, 1.3, 0.2, 1.2)
        values = [superconvergence_check(u, k, base.scaled(2.0 ** -level)) for level in range(4)]
        detail = ", ".join(f"{v:.3e}" for v in values)
        if min(values) <= ROUNDOFF_TOL:
            report.add(f"k={k}/slope", False, min(values), ROUNDOFF_TOL,
                       detail=f"remainder vanishes: {detail}")
            return
        slope = math.log2(values[-2] / values[-1])
        report.add(f"k={k}/slope", slope >= k + 1.8, slope, k + 1.8, detail=detail)


class LemmaRatioSuite(Suite):
    name = "lemma-ratios"
    description = "Auxiliary derivative and jump bounds of the fifth-order scheme stay mesh-independent"

    RATIOS = ("vx/w", "jump_v/w", "wxx/ut", "jump_wx/ut", "jump_w/ut", "w/ut", "v/w")

    def run(self, report, rng, ladder=(10, 20, 40, 80, 160), k=2, t_final=0.1, growth=1.5, **options):
        """Ratios of the integrated solution at t_final on every mesh of the ladder

        A ratio passes when no level in the finer half of the ladder exceeds
        growth times the largest value in the coarser half.
        """
        problem = get_problem("ex7.2")
        table: Dict[str, List[float]] = {name: [] for name in self.RATIOS}
        for n in ladder:
            mesh = build_mesh(n)
            scheme = build_scheme(problem, mesh, k, FluxConfig())
            u0 = project_1d(ProjectionKind.L2, problem.exact.at(0.0), mesh, k)
            u_h = integrate_scheme(scheme, u0, t_final).u
            for name, value in self.ratios(scheme, u_h.coeffs).items():
                table[name].append(value)

        report.options.update(ladder=list(ladder), t_final=t_final)
        split = max(1, len(ladder) // 2)
        for name, values in table.items():
            reference = max(values[:split])
            worst = max(values[split:]) if len(values) > split else reference
            report.add(name, worst <= growth * reference, worst / reference, growth,
                       detail=", ".join(f"{v:.3e}" for v in values))

    @staticmethod
    def ratios(scheme, coeffs: np.ndarray) -> Dict[str, float]:
        widths = scheme.widths
        h = scheme.mesh.h
        ref = scheme.ref
        weights = scheme.mass_weights()
        aux = scheme.auxiliaries(coeffs)
        v, w = aux["v"], aux["w"]
        ut = scheme.apply(coeffs, aux)

        def norm(c):
            return math.sqrt(float(np.sum(weights * c * c)))

        def broken(c, d):
            return norm((c @ ref.deriv(d).T) * (2.0 / widths[:, None]) ** d)

        def jump(c, level=0):
            minus, plus = interface_traces(c, widths, level)
            return math.sqrt(float(np.sum((plus - minus) ** 2)))

        nw, nut = norm(w), norm(ut)
        return {
            "vx/w": broken(v, 1) / nw,
            "jump_v/w": h ** -0.5 * jump(v) / nw,
            "wxx/ut": broken(w, 2) / nut,
            "jump_wx/ut": h ** -0.5 * jump(w, 1) / nut,
            "jump_w/ut": h ** -1.5 * jump(w) / nut,
            "w/ut": nw / nut,
            "v/w": norm(v) / nw,
        }


class FluxEquivalenceSuite(Suite):
    name = "flux-equivalence"
    description = "General even/odd schemes against the dedicated ones, theta limits, heat equation"

    PAIRS = [(4, FourthOrderScheme, EvenOrderScheme), (5, FifthOrderScheme, OddOrderScheme),
             (6, SixthOrderScheme, EvenOrderScheme), (7, SeventhOrderScheme, OddOrderScheme)]

    def run(self, report, rng, degrees=(1, 2, 3), n_cells=16, samples=10, **options):
        mesh = build_mesh(n_cells, perturbation=0.2, seed=int(rng.integers(1 << 30)))
        for order, dedicated_cls, general_cls in self.PAIRS:
            problem = get_problem(f"order:{order}")
            for k in degrees:
                if k < dedicated_cls.minimum_degree(order):
                    continue
                for flux in _flux_family((0.3,)):
                    dedicated = dedicated_cls(problem, mesh, k, flux)
                    general = general_cls(problem, mesh, k, flux)
                    worst = 0.0
                    for _ in range(samples):
                        coeffs = rng.standard_normal(dedicated.shape)
                        a, b = dedicated.rate(coeffs), general.rate(coeffs)
                        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
                    report.bound(f"order {order}/k={k}/{flux}", worst, EQUIVALENCE_TOL)

        problem = get_problem("ex7.1")
        for theta, choice in ((1.0, AlternatingChoice.CHOICE1), (0.0, AlternatingChoice.CHOICE2)):
            scheme_theta = build_scheme(problem, mesh, 2, FluxConfig(AlternatingChoice.THETA, theta))
            scheme_alt = build_scheme(problem, mesh, 2, FluxConfig(choice))
            coeffs = rng.standard_normal(scheme_alt.shape)
            a, b = scheme_alt.rate(coeffs), scheme_theta.rate(coeffs)
            report.bound(f"theta={theta:g} vs {choice.value}",
                         float(np.max(np.abs(a - b)) / np.max(np.abs(a))), EQUIVALENCE_TOL)

        self._heat(report, rng)

    @staticmethod
    def _heat(report: SuiteReport, rng: np.random.Generator) -> None:
        problem = get_problem("order:2")
        scheme = build_scheme(problem, build_mesh(16), 1, FluxConfig())
        u0 = scheme.field(rng.standard_normal(scheme.shape))
        trace = integrate_scheme(scheme, u0, 0.1, SDCConfig(dt=0.002)).trace
        report.add("order 2/dissipates", trace.is_monotone() and trace.energies[-1] < trace.energies[0],
                   trace.energies[-1] / trace.energies[0], 1.0)


class SuiteManager:
    """Registry of property suites"""

    def __init__(self):
        self.suites: Dict[str, Suite] = {}
        for suite_cls in (ProjectionSuite, EnergySuite, SuperconvergenceSuite,
                          LemmaRatioSuite, FluxEquivalenceSuite):
            self.register(suite_cls())

    def register(self, suite: Suite):
        self.suites[suite.name] = suite

    def unregister(self, name: str):
        self.suites.pop(name, None)

    def get_suite(self, name: str) -> Suite:
        """Look up a suite

        Raises:
            ConfigurationError: For unknown names
        """
        if name not in self.suites:
            known = ", ".join(sorted(self.suites))
            raise ConfigurationError(f"Unknown suite: {name!r} (available: {known})")
        return self.suites[name]

    def list_suites(self) -> List[Suite]:
        return list(self.suites.values())

    def run(self, name: str, seed: int = 0, **options) -> SuiteReport:
        suite = self.get_suite(name)
        report = SuiteReport(suite=name, seed=seed, options=dict(options))
        logger.info("running suite %s (seed %d)", name, seed)
        suite.run(report, np.random.default_rng(seed), **options)
        logger.info("suite %s: %d checks, %d failed", name, len(report.checks), len(report.failures))
        return report


def verify_suite(name: str, seed: int = 0, **options) -> SuiteReport:
    """Run a named property suite with a fixed seed"""
    return SuiteManager().run(name, seed, **options)
