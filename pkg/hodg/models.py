"""
Core data models: problem descriptors, auxiliary fields, study
configuration and convergence tables
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Union

from .errors import ConfigurationError
from .flux import EntropyPotential

if TYPE_CHECKING:
    from .meshfield import DGField1D, DGField2D
    from .problems import ExactSolution

NORMS = ("L1", "L2", "Linf")


class SignConvention(Enum):
    """Sign sigma in u_t + sigma d^n u = 0"""
    INTRO = "intro"          # sigma = (-1)^floor(n/2)
    ODD_PLUS = "odd-plus"    # sigma = +1 for odd n

    @classmethod
    def from_string(cls, value: str) -> "SignConvention":
        for convention in cls:
            if convention.value == value:
                return convention
        raise ConfigurationError(f"Unknown sign convention: {value!r}")


class Nonlinearity(Enum):
    LINEAR = "linear"
    FOURTH_B = "fourth-b"    # u_t + (b(u) u_xx)_xx = g
    FIFTH_F = "fifth-f"      # u_t + sigma d^{M+1} f(d^M u) = g, n = 2M+1


@dataclass
class ProblemSpec:
    """PDE descriptor: order, sign, nonlinearity, exact solution and source"""
    name: str
    order: int
    dimension: int = 1
    convention: SignConvention = SignConvention.INTRO
    nonlinearity: Nonlinearity = Nonlinearity.LINEAR
    b: Optional[Callable] = None
    f: Optional[Callable] = None
    f_prime: Optional[Callable] = None
    potential: Optional[EntropyPotential] = None
    exact: Optional["ExactSolution"] = None
    source: Optional[Callable] = None
    aux_exact: Dict[str, "ExactSolution"] = field(default_factory=dict)
    t_final: float = 1.0
    description: str = ""

    def __post_init__(self):
        if self.order < 2:
            raise ConfigurationError(f"Spatial order must be >= 2 (got {self.order})")
        if self.nonlinearity is Nonlinearity.FOURTH_B:
            if self.order != 4 or self.b is None:
                raise ConfigurationError("b(u) nonlinearity needs order 4 and a coefficient b")
        if self.nonlinearity is Nonlinearity.FIFTH_F:
            if self.order % 2 == 0 or self.f is None:
                raise ConfigurationError("f(v) nonlinearity needs an odd order and a flux f")
        if self.dimension == 2 and (self.order != 4 or self.nonlinearity is not Nonlinearity.LINEAR):
            raise ConfigurationError("Only the linear biharmonic equation is supported in 2D")
        if self.f is None:
            self.f = _identity
            self.f_prime = _one
        if self.potential is None and self.f is _identity:
            self.potential = EntropyPotential(_identity, lambda v: 0.5 * v ** 2)

    @property
    def half_order(self) -> int:
        return self.order // 2

    @property
    def is_odd(self) -> bool:
        return self.order % 2 == 1

    @property
    def is_linear(self) -> bool:
        return self.nonlinearity is Nonlinearity.LINEAR

    @property
    def sigma(self) -> int:
        if self.dimension == 2:
            return 1
        if self.is_odd and self.convention is SignConvention.ODD_PLUS:
            return 1
        return (-1) ** self.half_order

    @property
    def orientation(self) -> int:
        """+1 when upwinding takes v-, -1 when it takes v+ (odd orders)"""
        return self.sigma * (-1) ** self.half_order

    @property
    def has_source(self) -> bool:
        return self.source is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "order": self.order,
            "dimension": self.dimension,
            "convention": self.convention.value,
            "nonlinearity": self.nonlinearity.value,
            "sigma": self.sigma,
            "t_final": self.t_final,
            "exact": str(self.exact) if self.exact is not None else None,
            "has_source": self.has_source,
        }


def _identity(v):
    return v


def _one(v):
    return 1.0 + 0.0 * v


@dataclass(eq=False)
class AuxFields:
    """Auxiliary unknowns from the local solves (w always, v when present)"""
    w: Union["DGField1D", "DGField2D"]
    v: Optional[Union["DGField1D", "DGField2D"]] = None

    def items(self):
        yield "w", self.w
        if self.v is not None:
            yield "v", self.v


@dataclass
class StudyConfig:
    """Everything a convergence study or a single run needs"""
    problem: str = "ex7.1"
    k: int = 2
    meshes: List[int] = field(default_factory=lambda: [10, 20, 40, 80, 160, 320])
    flux: str = "alt1"
    t_final: Optional[float] = None
    init: str = "l2"
    quad_pts: Optional[int] = None
    nodes: int = 3
    sweeps: Optional[int] = None
    sweep_mode: str = "implicit"
    dt: Optional[float] = None
    dt_factor: float = 0.5
    min_steps: int = 16
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    perturbation: float = 0.0
    seed: int = 0
    aux: bool = False
    check_dt: bool = False
    reproducible: bool = False
    output: Optional[str] = None
    # custom problems
    order: Optional[int] = None
    convention: str = "intro"
    exact: Optional[str] = None
    b_expr: Optional[str] = None
    f_expr: Optional[str] = None

    def validate(self) -> "StudyConfig":
        if not self.meshes:
            raise ConfigurationError("Mesh ladder is empty")
        if any(n2 <= n1 for n1, n2 in zip(self.meshes, self.meshes[1:])):
            raise ConfigurationError(f"Mesh ladder must be strictly increasing: {self.meshes}")
        if self.k < 0:
            raise ConfigurationError(f"Degree must be >= 0 (got {self.k})")
        if self.t_final is not None and self.t_final <= 0:
            raise ConfigurationError(f"Final time must be positive (got {self.t_final})")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError(f"Time step must be positive (got {self.dt})")
        if self.nodes < 2:
            raise ConfigurationError("SDC needs at least two Gauss-Lobatto nodes")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StudyConfig":
        known = {name for name in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def config_hash(self) -> str:
        """Stable hash of the configuration, excluding the output path"""
        data = self.to_dict()
        data.pop("output", None)
        blob = json.dumps(data, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def convergence_order(e_coarse: float, e_fine: float, n_coarse: int, n_fine: int) -> Optional[float]:
    """log(e_coarse / e_fine) / log(N_fine / N_coarse); None when undefined"""
    if e_coarse <= 0 or e_fine <= 0 or not math.isfinite(e_coarse) or not math.isfinite(e_fine):
        return None
    return math.log2(e_coarse / e_fine) / math.log2(n_fine / n_coarse)


@dataclass
class ConvergenceRow:
    """Errors at one refinement level, keyed 'L1', 'L2', 'Linf' (and 'w:L2', ...)"""
    n: int
    errors: Dict[str, float]
    orders: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "errors": dict(self.errors), "orders": dict(self.orders)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConvergenceRow":
        return cls(n=data["n"], errors=dict(data["errors"]), orders=dict(data.get("orders", {})))


@dataclass
class ConvergenceTable:
    """Errors and empirical orders per refinement level"""
    problem: str
    k: int
    rows: List[ConvergenceRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        keys: List[str] = []
        for row in self.rows:
            keys.extend(key for key in row.errors if key not in keys)
        primary = [key for key in NORMS if key in keys]
        return primary + [key for key in keys if key not in primary]

    def add_row(self, n: int, errors: Dict[str, float]) -> ConvergenceRow:
        row = ConvergenceRow(n=n, errors=dict(errors))
        if self.rows:
            prev = self.rows[-1]
            row.orders = {
                key: convergence_order(prev.errors[key], value, prev.n, n)
                for key, value in errors.items() if key in prev.errors
            }
        else:
            row.orders = {key: None for key in errors}
        self.rows.append(row)
        return row

    def final_order(self, key: str = "L2") -> Optional[float]:
        return self.rows[-1].orders.get(key) if self.rows else None

    def final_error(self, key: str = "L2") -> Optional[float]:
        return self.rows[-1].errors.get(key) if self.rows else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "problem": self.problem,
            "k": self.k,
            "rows": [row.to_dict() for row in self.rows],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConvergenceTable":
        return cls(
            problem=data["problem"],
            k=data["k"],
            rows=[ConvergenceRow.from_dict(row) for row in data.get("rows", [])],
            metadata=data.get("metadata", {}),
        )


@dataclass
class RunManifest:
    """Provenance record written next to every result file"""
    command: str
    config: Dict[str, Any]
    config_hash: str
    version: str
    commit: str = "unknown"
    started_at: datetime = field(default_factory=datetime.now)
    wall_time: float = 0.0
    outputs: List[str] = field(default_factory=list)
    status: str = "ok"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "version": self.version,
            "commit": self.commit,
            "started_at": self.started_at.isoformat(),
            "wall_time": self.wall_time,
            "outputs": self.outputs,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(
            command=data["command"],
            config=data["config"],
            config_hash=data["config_hash"],
            version=data["version"],
            commit=data.get("commit", "unknown"),
            started_at=datetime.fromisoformat(data["started_at"]),
            wall_time=data.get("wall_time", 0.0),
            outputs=data.get("outputs", []),
            status=data.get("status", "ok"),
        )
