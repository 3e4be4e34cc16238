"""
Numerical fluxes: alternating trace choices, the theta family, and
monotone fluxes for the nonlinear term f(v)
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from .errors import ConfigurationError

CENTRAL_JUMP_TOL = 1e-12


class AlternatingChoice(Enum):
    """Which side each alternating trace takes"""
    CHOICE1 = "alt1"   # u-family from +, auxiliary family from -
    CHOICE2 = "alt2"   # mirror of CHOICE1
    CHOICE3 = "alt3"   # u-family: even levels from -, odd levels from +
    CHOICE4 = "alt4"   # mirror of CHOICE3
    THETA = "theta"    # u-family weight theta on +, auxiliary weight theta on -

    @classmethod
    def from_string(cls, value: str) -> "AlternatingChoice":
        for choice in cls:
            if choice.value == value:
                return choice
        raise ConfigurationError(f"Unknown alternating flux: {value!r}")


class MonotoneKind(Enum):
    """Flux for the nonlinear term f(v) of odd-order equations"""
    UPWIND = "upwind"
    LAX_FRIEDRICHS = "lf"
    CENTRAL = "central"


class UpwindSide(Enum):
    """Side v-hat is taken from; AUTO follows the sign of the equation"""
    AUTO = "auto"
    MINUS = "minus"
    PLUS = "plus"


@dataclass(frozen=True)
class TraceRole:
    """A named flux: family 'u' (the unknown) or 'aux' (v/w), derivative level
    and the depth of the derivative block it belongs to"""

    family: str
    level: int
    depth: int = 2

    @classmethod
    def parse(cls, name: str, depth: Optional[int] = None) -> "TraceRole":
        """'u_hat', 'u_x', 'u_xx', 'v_hat', 'w_x', ... -> TraceRole"""
        try:
            letter, suffix = name.split("_", 1)
        except ValueError:
            raise ConfigurationError(f"Unknown flux role: {name!r}")
        if letter not in ("u", "v", "w") or (suffix != "hat" and set(suffix) != {"x"}):
            raise ConfigurationError(f"Unknown flux role: {name!r}")
        level = 0 if suffix == "hat" else len(suffix)
        family = "u" if letter == "u" else "aux"
        return cls(family, level, depth if depth is not None else max(2, level + 1))


@dataclass(frozen=True)
class FluxConfig:
    """Flux selection for one run

    Attributes:
        choice: Alternating choice for the paired traces
        theta: Weight for AlternatingChoice.THETA
        monotone: Flux kind for f(v) in odd-order equations
        lf_alpha: Lax-Friedrichs viscosity (None: estimated from the data)
        upwind_side: Side the monotone flux treats as upwind
    """

    choice: AlternatingChoice = AlternatingChoice.CHOICE1
    theta: Optional[float] = None
    monotone: MonotoneKind = MonotoneKind.UPWIND
    lf_alpha: Optional[float] = None
    upwind_side: UpwindSide = UpwindSide.AUTO

    def __post_init__(self):
        if self.choice is AlternatingChoice.THETA:
            if self.theta is None or not 0.0 <= self.theta <= 1.0:
                raise ConfigurationError(f"theta must lie in [0, 1] (got {self.theta})")
        if self.lf_alpha is not None and self.lf_alpha < 0:
            raise ConfigurationError(f"Lax-Friedrichs alpha must be >= 0 (got {self.lf_alpha})")

    def u_weight(self, level: int) -> float:
        """Weight on the minus side for the level-th derivative of u"""
        if self.choice is AlternatingChoice.CHOICE1:
            return 0.0
        if self.choice is AlternatingChoice.CHOICE2:
            return 1.0
        if self.choice is AlternatingChoice.CHOICE3:
            return 1.0 if level % 2 == 0 else 0.0
        if self.choice is AlternatingChoice.CHOICE4:
            return 0.0 if level % 2 == 0 else 1.0
        return 1.0 - self.theta

    def aux_weight(self, level: int, depth: int) -> float:
        """Weight on the minus side for the level-th derivative of an auxiliary

        Level L of the auxiliary pairs with level depth-1-L of u and always
        takes the complementary weight.
        """
        return 1.0 - self.u_weight(depth - 1 - level)

    def weight(self, role: TraceRole) -> float:
        if role.family == "u":
            return self.u_weight(role.level)
        return self.aux_weight(role.level, role.depth)

    def u_weights(self, depth: int) -> np.ndarray:
        return np.array([self.u_weight(l) for l in range(depth)])

    def aux_weights(self, depth: int) -> np.ndarray:
        return np.array([self.aux_weight(l, depth) for l in range(depth)])

    def paired_roles(self, depth: int) -> Iterator[Tuple[TraceRole, TraceRole]]:
        """(auxiliary level L, u level depth-1-L) pairs"""
        for level in range(depth):
            yield TraceRole("aux", level, depth), TraceRole("u", depth - 1 - level, depth)

    def is_one_sided(self) -> bool:
        return self.choice is not AlternatingChoice.THETA or self.theta in (0.0, 1.0)

    def __str__(self) -> str:
        parts = [f"theta:{self.theta:g}" if self.choice is AlternatingChoice.THETA
                 else self.choice.value]
        if self.monotone is MonotoneKind.LAX_FRIEDRICHS:
            parts.append("lf" if self.lf_alpha is None else f"lf:{self.lf_alpha:g}")
        else:
            parts.append(self.monotone.value)
        if self.upwind_side is not UpwindSide.AUTO:
            parts.append(f"side:{self.upwind_side.value}")
        return ",".join(parts)

    @classmethod
    def parse(cls, text: str) -> "FluxConfig":
        """Build from a comma-separated CLI string, e.g. 'alt2,lf:1.5'

        Tokens: alt1..alt4, theta:<value>, upwind, lf[:<alpha>], central,
        side:auto|minus|plus. Missing tokens keep their defaults.
        """
        options = {}
        for token in filter(None, (t.strip() for t in text.split(","))):
            name, _, value = token.partition(":")
            if name in ("alt1", "alt2", "alt3", "alt4"):
                options["choice"] = AlternatingChoice.from_string(name)
            elif name == "theta":
                options["choice"] = AlternatingChoice.THETA
                options["theta"] = _parse_float(token, value)
            elif name == "upwind":
                options["monotone"] = MonotoneKind.UPWIND
            elif name == "central":
                options["monotone"] = MonotoneKind.CENTRAL
            elif name == "lf":
                options["monotone"] = MonotoneKind.LAX_FRIEDRICHS
                options["lf_alpha"] = _parse_float(token, value) if value else None
            elif name == "side":
                try:
                    options["upwind_side"] = UpwindSide(value)
                except ValueError:
                    raise ConfigurationError(f"Unknown upwind side in {token!r}")
            else:
                raise ConfigurationError(f"Unknown flux token: {token!r}")
        return cls(**options)


def _parse_float(token: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"Expected a number in flux token {token!r}")


def select_trace(config: FluxConfig, role: Union[str, TraceRole], minus, plus):
    """Numerical trace for a named flux

    Examples:
        select_trace(FluxConfig(), "v_hat", a, b) -> a
        select_trace(FluxConfig(AlternatingChoice.THETA, 0.5), "u_hat", a, b) -> (a+b)/2
    """
    if isinstance(role, str):
        role = TraceRole.parse(role)
    alpha = config.weight(role)
    return alpha * np.asarray(minus) + (1.0 - alpha) * np.asarray(plus)


class EntropyPotential:
    """F(v) = int_0^v f(s) ds, closed form when available"""

    def __init__(self, f: Callable, antiderivative: Optional[Callable] = None):
        self.f = f
        self._antiderivative = antiderivative

    def __call__(self, v):
        if self._antiderivative is not None:
            return self._antiderivative(np.asarray(v, dtype=float))
        quad = np.vectorize(lambda b: integrate.quad(self.f, 0.0, b)[0])
        return quad(np.asarray(v, dtype=float))

    def max_derivative_error(self, samples: np.ndarray, step: float = 1e-5) -> float:
        """max |F'(v) - f(v)| by central differences at the samples"""
        samples = np.asarray(samples, dtype=float)
        slope = (self(samples + step) - self(samples - step)) / (2 * step)
        return float(np.max(np.abs(slope - self.f(samples))))


IDENTITY_POTENTIAL = EntropyPotential(lambda v: v, lambda v: 0.5 * v ** 2)


def monotone_flux(kind: MonotoneKind, f: Callable, v_minus, v_plus,
                  alpha: Optional[float] = None,
                  potential: Optional[EntropyPotential] = None):
    """Monotone flux f-hat(v-, v+), vectorized over interfaces

    Args:
        kind: UPWIND -> f(v-); LAX_FRIEDRICHS -> mean minus alpha/2 [v];
            CENTRAL -> divided difference of the entropy potential
        f: Physical flux
        alpha: Viscosity for LAX_FRIEDRICHS (>= sup |f'| over the data)
        potential: Antiderivative of f for CENTRAL
    """
    a = np.asarray(v_minus, dtype=float)
    b = np.asarray(v_plus, dtype=float)
    if kind is MonotoneKind.UPWIND:
        return f(a) * np.ones_like(a)
    if kind is MonotoneKind.LAX_FRIEDRICHS:
        if alpha is None:
            raise ConfigurationError("Lax-Friedrichs flux needs alpha")
        return 0.5 * (f(a) + f(b)) - 0.5 * alpha * (b - a)
    if kind is MonotoneKind.CENTRAL:
        potential = potential or EntropyPotential(f)
        jump = b - a
        small = np.abs(jump) < CENTRAL_JUMP_TOL * (1.0 + np.abs(a))
        safe = np.where(small, 1.0, jump)
        divided = (potential(b) - potential(a)) / safe
        return np.where(small, f(0.5 * (a + b)) * np.ones_like(a), divided)
    raise ConfigurationError(f"Unknown monotone flux kind: {kind}")


def interface_dissipation(f: Callable, kind: MonotoneKind, v_minus, v_plus,
                          alpha: Optional[float] = None,
                          potential: Optional[EntropyPotential] = None):
    """Theta = F(v+) - F(v-) + f-hat (v- - v+); nonnegative for monotone fluxes"""
    potential = potential or EntropyPotential(f)
    a = np.asarray(v_minus, dtype=float)
    b = np.asarray(v_plus, dtype=float)
    fhat = monotone_flux(kind, f, a, b, alpha, potential)
    return potential(b) - potential(a) + fhat * (a - b)
