"""
Exact solutions and the problem registry

Exact solutions are sympy expressions; every derivative, manufactured
source, exact auxiliary and entropy potential is derived symbolically and
then lambdified to numpy.
"""

import logging
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import sympy as sy

from .errors import ConfigurationError
from .flux import EntropyPotential
from .models import Nonlinearity, ProblemSpec, SignConvention

logger = logging.getLogger(__name__)

X, Y, T = sy.symbols("x y t", real=True)
U, V = sy.symbols("u v", real=True)
_S = sy.Symbol("s", real=True)

_NAMESPACE = {"x": X, "y": Y, "t": T, "u": U, "v": V, "pi": sy.pi, "e": sy.E}


def parse_expression(text: str, allowed: List[sy.Symbol]) -> sy.Expr:
    """sympify a user expression and check its free symbols

    Raises:
        ConfigurationError: On syntax errors or symbols outside ``allowed``
    """
    try:
        expr = sy.sympify(text, locals=_NAMESPACE)
    except (sy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigurationError(f"Cannot parse expression {text!r}: {exc}")
    extra = expr.free_symbols - set(allowed)
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ConfigurationError(f"Expression {text!r} uses unknown symbols: {names}")
    return expr


def numeric(expr: sy.Expr, args) -> Callable:
    """Lambdify expr over args; constants broadcast to the argument shape"""
    fn = sy.lambdify(args, expr, modules="numpy")

    def evaluate(*values):
        result = np.asarray(fn(*values), dtype=float)
        shape = np.broadcast(*[np.asarray(v) for v in values]).shape
        if not shape:
            return float(result)
        return np.broadcast_to(result, shape).copy()

    return evaluate


class ExactSolution:
    """u(x, t) or u(x, y, t) with symbolic derivatives"""

    def __init__(self, expr, dimension: int = 1):
        if isinstance(expr, str):
            expr = parse_expression(expr, [X, Y, T] if dimension == 2 else [X, T])
        self.expr = sy.sympify(expr)
        self.dimension = dimension
        self._cache: Dict[tuple, Callable] = {}

    @property
    def coordinates(self):
        return (X, Y) if self.dimension == 2 else (X,)

    def expression(self, dx: int = 0, dy: int = 0, dt: int = 0) -> sy.Expr:
        expr = self.expr
        for symbol, count in ((X, dx), (Y, dy), (T, dt)):
            if count:
                expr = sy.diff(expr, symbol, count)
        return expr

    def derivative(self, dx: int = 0, dy: int = 0, dt: int = 0) -> Callable:
        """Numeric derivative taking (x, t) or (x, y, t)"""
        key = (dx, dy, dt)
        if key not in self._cache:
            self._cache[key] = numeric(self.expression(dx, dy, dt), (*self.coordinates, T))
        return self._cache[key]

    def __call__(self, *args):
        return self.derivative()(*args)

    def at(self, t: float) -> "Profile":
        return Profile(self, t)

    def __str__(self) -> str:
        return str(self.expr)


class Profile:
    """An exact solution frozen at time t, in the form the projections consume"""

    def __init__(self, solution: ExactSolution, t: float = 0.0):
        self.solution = solution
        self.t = float(t)

    def __call__(self, *coords):
        return self.solution.derivative()(*coords, self.t)

    def derivative(self, dx: int = 0, dy: int = 0) -> Callable:
        fn = self.solution.derivative(dx, dy)
        t = self.t
        return lambda *coords: fn(*coords, t)

    def __str__(self) -> str:
        return f"{self.solution} at t={self.t:g}"


def symbolic_profile(expr, dimension: int = 1, t: float = 0.0) -> Profile:
    """Profile from an expression in x (and y), e.g. symbolic_profile('sin(x)')"""
    return ExactSolution(expr, dimension).at(t)


def spatial_operator(u: sy.Expr, order: int, sigma: int, nonlinearity: Nonlinearity,
                     b: Optional[sy.Expr] = None, f: Optional[sy.Expr] = None,
                     dimension: int = 1) -> sy.Expr:
    """The term L(u) in u_t + L(u) = g"""
    if dimension == 2:
        laplacian = sy.diff(u, X, 2) + sy.diff(u, Y, 2)
        return sy.diff(laplacian, X, 2) + sy.diff(laplacian, Y, 2)
    half = order // 2
    if nonlinearity is Nonlinearity.FOURTH_B:
        return sy.diff(b.subs(U, u) * sy.diff(u, X, 2), X, 2)
    if order % 2 == 1:
        inner = sy.diff(u, X, half)
        flux = f.subs(V, inner) if f is not None else inner
        return sigma * sy.diff(flux, X, half + 1)
    return sigma * sy.diff(u, X, order)


def auxiliary_expressions(u: sy.Expr, order: int, nonlinearity: Nonlinearity,
                          b: Optional[sy.Expr] = None, f: Optional[sy.Expr] = None,
                          dimension: int = 1) -> Dict[str, sy.Expr]:
    """Exact counterparts of the auxiliary unknowns the schemes compute"""
    if dimension == 2:
        return {"w": sy.diff(u, X, 2) + sy.diff(u, Y, 2)}
    half = order // 2
    if nonlinearity is Nonlinearity.FOURTH_B:
        w = sy.diff(u, X, 2)
        return {"w": w, "v": b.subs(U, u) * w}
    if order % 2 == 1:
        v = sy.diff(u, X, half)
        flux = f.subs(V, v) if f is not None else v
        return {"v": v, "w": sy.diff(flux, X)}
    return {"w": sy.diff(u, X, half)}


def entropy_potential(f: sy.Expr) -> EntropyPotential:
    """F(v) = int_0^v f, closed form when sympy finds one"""
    f_numeric = numeric(f, (V,))
    antiderivative = sy.integrate(f.subs(V, _S), (_S, 0, V))
    if antiderivative.has(sy.Integral):
        logger.info("no closed-form potential for f(v) = %s; using adaptive quadrature", f)
        return EntropyPotential(f_numeric)
    return EntropyPotential(f_numeric, numeric(antiderivative, (V,)))


def make_problem(name: str, order: int, exact, *, b=None, f=None,
                 convention: SignConvention = SignConvention.INTRO, dimension: int = 1,
                 t_final: float = 1.0, description: str = "") -> ProblemSpec:
    """Build a ProblemSpec with its manufactured source

    Args:
        exact: Exact solution (sympy expression or string in x[, y], t)
        b: Coefficient b(u) (expression in u); makes a fourth-order problem nonlinear
        f: Flux f(v) (expression in v); makes an odd-order problem nonlinear
    """
    b_expr = parse_expression(b, [U]) if isinstance(b, str) else b
    f_expr = parse_expression(f, [V]) if isinstance(f, str) else f
    if b_expr is not None and f_expr is not None:
        raise ConfigurationError("Give either b(u) or f(v), not both")
    if b_expr is not None:
        nonlinearity = Nonlinearity.FOURTH_B
    elif f_expr is not None:
        nonlinearity = Nonlinearity.FIFTH_F
    else:
        nonlinearity = Nonlinearity.LINEAR

    solution = exact if isinstance(exact, ExactSolution) else ExactSolution(exact, dimension)
    options: Dict[str, Any] = {}
    if b_expr is not None:
        options["b"] = numeric(b_expr, (U,))
    if f_expr is not None:
        options["f"] = numeric(f_expr, (V,))
        options["f_prime"] = numeric(sy.diff(f_expr, V), (V,))
        options["potential"] = entropy_potential(f_expr)

    problem = ProblemSpec(name=name, order=order, dimension=dimension, convention=convention,
                          nonlinearity=nonlinearity, exact=solution, t_final=t_final,
                          description=description, **options)

    u = solution.expr
    residual = sy.diff(u, T) + spatial_operator(u, order, problem.sigma, nonlinearity,
                                                b_expr, f_expr, dimension)
    residual = sy.simplify(residual)
    if residual != 0:
        problem.source = numeric(residual, (*solution.coordinates, T))
        logger.debug("%s: manufactured source g = %s", name, residual)
    problem.aux_exact = {
        key: ExactSolution(expr, dimension)
        for key, expr in auxiliary_expressions(u, order, nonlinearity, b_expr, f_expr, dimension).items()
    }
    return problem


def _order_family(spec: str, b: Optional[str], f: Optional[str]) -> ProblemSpec:
    """'order:<n>' or 'order:<n>:odd-plus'"""
    parts = spec.split(":")
    try:
        order = int(parts[1])
    except (IndexError, ValueError):
        raise ConfigurationError(f"Expected 'order:<n>', got {spec!r}")
    convention = SignConvention.from_string(parts[2]) if len(parts) > 2 else SignConvention.INTRO
    if order % 2 == 0:
        exact = sy.exp(-T) * sy.sin(X)
    else:
        half = order // 2
        sigma = 1 if convention is SignConvention.ODD_PLUS else (-1) ** half
        exact = sy.sin(X - sigma * (-1) ** half * T)
    return make_problem(spec, order, exact, b=b, f=f, convention=convention,
                        description=f"u_t + sigma d^{order} u = 0, {convention.value} sign")


def get_problem(problem_id: str, *, order: Optional[int] = None, convention: str = "intro",
                exact: Optional[str] = None, b_expr: Optional[str] = None,
                f_expr: Optional[str] = None, t_final: Optional[float] = None) -> ProblemSpec:
    """Look up a registered problem, an 'order:<n>' family member or a custom one

    Raises:
        ConfigurationError: For unknown ids or inconsistent options
    """
    if problem_id == "ex7.1":
        problem = make_problem(problem_id, 4, sy.exp(-T) * sy.sin(X), b=b_expr,
                               description="linear fourth order, u_t + u_xxxx = 0")
    elif problem_id == "ex7.2":
        problem = make_problem(problem_id, 5, sy.sin(X - T), f=f_expr,
                               description="linear fifth order, u_t + u_xxxxx = 0")
    elif problem_id == "ex7.3":
        problem = make_problem(problem_id, 4, sy.exp(-T) * sy.sin(X), b=b_expr or U ** 2,
                               t_final=0.1, description="u_t + (u^2 u_xx)_xx = g")
    elif problem_id == "ex7.4":
        problem = make_problem(problem_id, 5, sy.sin(X - T), f=f_expr or V ** 3,
                               t_final=0.1, description="u_t + ((u_xx)^3)_xxx = g")
    elif problem_id == "ex7.5":
        problem = make_problem(problem_id, 4, sy.exp(-4 * T) * sy.sin(X + Y), dimension=2,
                               description="biharmonic, u_t + lap^2 u = 0 on a square")
    elif problem_id.startswith("order:"):
        problem = _order_family(problem_id, b_expr, f_expr)
    elif problem_id == "custom":
        if order is None or exact is None:
            raise ConfigurationError("A custom problem needs --order and --exact")
        problem = make_problem("custom", order, exact, b=b_expr, f=f_expr,
                               convention=SignConvention.from_string(convention),
                               description=f"custom order-{order} problem")
    else:
        raise ConfigurationError(f"Unknown problem: {problem_id!r}")

    if t_final is not None:
        problem.t_final = t_final
    return problem


TABLE_LADDER = [10, 20, 40, 80, 160, 320]
SHORT_LADDER = [4, 8, 16, 32, 64]

PRESETS: Dict[str, Dict[str, Any]] = {
    "ex7.1": {"k": 2, "meshes": TABLE_LADDER, "flux": "alt1"},
    "ex7.2": {"k": 2, "meshes": TABLE_LADDER, "flux": "alt1,upwind"},
    "ex7.3": {"k": 2, "meshes": SHORT_LADDER, "flux": "alt1"},
    "ex7.4": {"k": 2, "meshes": SHORT_LADDER, "flux": "alt1,upwind",
              "meshes_by_k": {3: [4, 8, 16, 32]}},
    "ex7.5": {"k": 2, "meshes": [2, 4, 8, 16, 32, 64], "flux": "alt1",
              "meshes_by_k": {1: [4, 8, 16, 32, 64]}},
}


def preset_for(problem_id: str, k: Optional[int] = None) -> Dict[str, Any]:
    """Default study settings for a problem (empty for unregistered ids)"""
    preset = dict(PRESETS.get(problem_id, {}))
    by_k = preset.pop("meshes_by_k", {})
    degree = k if k is not None else preset.get("k")
    if degree in by_k:
        preset["meshes"] = by_k[degree]
    if "meshes" in preset:
        preset["meshes"] = list(preset["meshes"])
    return preset


def list_problems() -> List[Dict[str, Any]]:
    """Registered problems with their descriptions"""
    rows = []
    for problem_id in PRESETS:
        problem = get_problem(problem_id)
        rows.append({"id": problem_id, "order": problem.order, "dimension": problem.dimension,
                     "t_final": problem.t_final, "description": problem.description})
    return rows
