"""
Storage for results: JSON manifests and reports, CSV convergence tables,
energy traces and field dumps
"""

import json
import logging
import subprocess
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .errors import ConfigurationError
from .meshfield import DGField1D, DGField2D, Mesh1D, Mesh2D
from .models import ConvergenceTable, RunManifest
from .timeint import EnergyTrace

logger = logging.getLogger(__name__)

FIELD_HEADER_PREFIX = "# "
FIELD_COLUMNS_1D = ["cell_index", "mode_index"]
FIELD_COLUMNS_2D = ["cell_x", "cell_y", "mode_x", "mode_y"]
TRACE_COLUMNS = ["step", "t", "energy", "dissipation_increment"]


class Storage(ABC):
    """Abstract base class for result files"""

    def __init__(self, path: Path):
        self.path = Path(path)

    @abstractmethod
    def load(self) -> Any:
        """Read the file"""

    @abstractmethod
    def save(self, data: Any):
        """Write the file, creating parent directories"""

    def exists(self) -> bool:
        return self.path.exists()

    def _prepare(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class JsonStorage(Storage):
    """JSON file storage"""

    def load(self) -> Dict[str, Any]:
        if not self.exists():
            return {}
        with open(self.path, "r", encoding="utf-8") as f:
            return json.load(f)

    def save(self, data: Dict[str, Any]):
        self._prepare()
        with open(self.path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, default=_json_default)


def _or_nan(value: Optional[float]) -> float:
    return np.nan if value is None else float(value)


def _or_none(value: Any) -> Optional[float]:
    return None if pd.isna(value) else float(value)


class TableStorage(Storage):
    """Convergence table as CSV: N, then each error column followed by its order"""

    def save(self, table: ConvergenceTable):
        self._prepare()
        data: Dict[str, List[Any]] = {"N": [row.n for row in table.rows]}
        for key in table.columns:
            data[key] = [row.errors.get(key, np.nan) for row in table.rows]
            data[f"{key}_order"] = [_or_nan(row.orders.get(key)) for row in table.rows]
        pd.DataFrame(data).to_csv(self.path, index=False, na_rep="")

    def load(self, problem: str = "", k: int = 0) -> ConvergenceTable:
        table = ConvergenceTable(problem=problem, k=k)
        data = pd.read_csv(self.path, float_precision="round_trip")
        keys = [name for name in data.columns[1:] if not name.endswith("_order")]
        for line in data.to_dict("records"):
            row = table.add_row(int(line["N"]), {
                key: float(line[key]) for key in keys if not pd.isna(line[key])
            })
            row.orders = {key: _or_none(line[f"{key}_order"]) for key in keys}
        return table


class TraceStorage(Storage):
    """Energy trace as CSV (step, t, energy, dissipation_increment)"""

    def save(self, trace: EnergyTrace):
        self._prepare()
        pd.DataFrame(trace.rows(), columns=TRACE_COLUMNS).to_csv(self.path, index=False)

    def load(self) -> EnergyTrace:
        trace = EnergyTrace()
        data = pd.read_csv(self.path, float_precision="round_trip")
        for step, t, energy in data[["step", "t", "energy"]].itertuples(index=False):
            trace.record(int(step), float(t), float(energy))
        return trace


class FieldStorage(Storage):
    """DG coefficients as long-format CSV after a one-line JSON header

    The header records N, k, the domain and the exact mesh boundaries. Each
    row holds one coefficient: ``cell_index, mode_index, coefficient`` in 1D
    and ``cell_x, cell_y, mode_x, mode_y, coefficient`` in 2D. Floats are
    written in shortest round-trip form, so loading reproduces the field
    bit for bit.
    """

    def save(self, u_h: Union[DGField1D, DGField2D], metadata: Optional[Dict[str, Any]] = None):
        self._prepare()
        if isinstance(u_h, DGField2D):
            axes = [u_h.mesh.x.boundaries, u_h.mesh.y.boundaries]
            header: Dict[str, Any] = {"dimension": 2, "N": list(u_h.mesh.shape)}
            index = np.indices(u_h.coeffs.shape).reshape(4, -1)
            frame = pd.DataFrame(dict(zip(FIELD_COLUMNS_2D, index)))
        else:
            axes = [u_h.mesh.boundaries]
            header = {"dimension": 1, "N": u_h.mesh.n_cells}
            index = np.indices(u_h.coeffs.shape).reshape(2, -1)
            frame = pd.DataFrame(dict(zip(FIELD_COLUMNS_1D, index)))
        frame["coefficient"] = u_h.coeffs.ravel()
        header.update(
            k=u_h.k,
            domain=[[float(b[0]), float(b[-1])] for b in axes],
            boundaries=[[repr(float(x)) for x in b] for b in axes],
            metadata=metadata or {},
        )

        with open(self.path, "w", encoding="utf-8", newline="") as f:
            f.write(FIELD_HEADER_PREFIX + json.dumps(header, default=_json_default) + "\n")
            frame.to_csv(f, index=False)

    def header(self) -> Dict[str, Any]:
        with open(self.path, "r", encoding="utf-8") as f:
            first = f.readline()
        if not first.startswith(FIELD_HEADER_PREFIX):
            raise ConfigurationError(f"{self.path} is not a field dump (missing JSON header)")
        return json.loads(first[len(FIELD_HEADER_PREFIX):])

    def load(self) -> Union[DGField1D, DGField2D]:
        header = self.header()
        k = int(header["k"])
        meshes = [Mesh1D(np.array([float(x) for x in b])) for b in header["boundaries"]]
        frame = pd.read_csv(self.path, skiprows=1, float_precision="round_trip")
        if header.get("dimension", 1) == 2:
            x, y = meshes
            coeffs = np.zeros((x.n_cells, y.n_cells, k + 1, k + 1))
            coeffs[tuple(frame[c].to_numpy() for c in FIELD_COLUMNS_2D)] = frame["coefficient"].to_numpy()
            return DGField2D(Mesh2D(x, y), k, coeffs)
        (x,) = meshes
        coeffs = np.zeros((x.n_cells, k + 1))
        coeffs[tuple(frame[c].to_numpy() for c in FIELD_COLUMNS_1D)] = frame["coefficient"].to_numpy()
        return DGField1D(x, k, coeffs)

    def metadata(self) -> Dict[str, Any]:
        return self.header().get("metadata", {})


def dump_field(u_h: Union[DGField1D, DGField2D], path: Path,
               metadata: Optional[Dict[str, Any]] = None) -> Path:
    FieldStorage(path).save(u_h, metadata)
    return Path(path)


def load_field(path: Path) -> Union[DGField1D, DGField2D]:
    return FieldStorage(path).load()


class ResultStore:
    """Files written by one command into an output directory"""

    def __init__(self, output_dir: Path, stem: str):
        """Initialize the store

        Args:
            output_dir: Directory for all files (created on first write)
            stem: Common file-name prefix, e.g. 'ex7.1_k2'
        """
        self.output_dir = Path(output_dir)
        self.stem = stem
        self.written: List[str] = []

    def path(self, suffix: str) -> Path:
        return self.output_dir / f"{self.stem}{suffix}"

    def _record(self, path: Path) -> Path:
        self.written.append(str(path))
        logger.info("wrote %s", path)
        return path

    def save_table(self, table: ConvergenceTable, path: Optional[Path] = None) -> Path:
        path = Path(path) if path else self.path(".csv")
        TableStorage(path).save(table)
        return self._record(path)

    def save_trace(self, trace: EnergyTrace) -> Path:
        path = self.path("_energy.csv")
        TraceStorage(path).save(trace)
        return self._record(path)

    def save_field(self, u_h, name: str = "u", metadata: Optional[Dict[str, Any]] = None) -> Path:
        path = self.path(f"_{name}.csv")
        FieldStorage(path).save(u_h, metadata)
        return self._record(path)

    def save_report(self, report: Dict[str, Any]) -> Path:
        path = self.path("_report.json")
        JsonStorage(path).save(report)
        return self._record(path)

    def save_manifest(self, manifest: RunManifest) -> Path:
        """Manifest last, so that it lists every other output"""
        path = self.path("_manifest.json")
        manifest.outputs = list(self.written)
        JsonStorage(path).save(manifest.to_dict())
        self.written.append(str(path))
        return path


def load_manifest(path: Path) -> RunManifest:
    data = JsonStorage(Path(path)).load()
    if not data:
        raise ConfigurationError(f"No manifest at {path}")
    return RunManifest.from_dict(data)


def source_commit(cwd: Optional[Path] = None) -> str:
    """Commit id of the working tree, or 'unknown' outside a git checkout"""
    try:
        result = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=cwd,
                                capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return result.stdout.strip() if result.returncode == 0 and result.stdout.strip() else "unknown"
