"""
Unit tests for result files
"""

import csv
import json

import pytest
import numpy as np
import pandas as pd

from hodg.errors import ConfigurationError
from hodg.meshfield import DGField1D, DGField2D, build_mesh, build_mesh_2d
from hodg.models import ConvergenceTable, RunManifest
from hodg.storage import (FieldStorage, JsonStorage, ResultStore, TableStorage, TraceStorage,
                          dump_field, load_field, load_manifest, source_commit)
from hodg.timeint import EnergyTrace


@pytest.fixture
def table():
    """Two-level convergence table"""
    table = ConvergenceTable("ex7.1", 2)
    table.add_row(10, {"L1": 3e-4, "L2": 1e-4, "Linf": 2e-4})
    table.add_row(20, {"L1": 3.75e-5, "L2": 1.25e-5, "Linf": 2.5e-5})
    return table


@pytest.mark.unit
class TestJsonStorage:
    """Tests for JSON files"""

    def test_missing_file(self, temp_output_dir):
        """Test that a missing file loads as empty"""
        assert JsonStorage(temp_output_dir / "none.json").load() == {}

    def test_numpy_values(self, temp_output_dir):
        """Test that numpy scalars and arrays are written"""
        storage = JsonStorage(temp_output_dir / "sub" / "data.json")
        storage.save({"x": np.float64(1.5), "a": np.arange(3)})
        assert storage.load() == {"x": 1.5, "a": [0, 1, 2]}


@pytest.mark.unit
class TestTableStorage:
    """Tests for convergence table CSV files"""

    def test_layout(self, table, temp_output_dir):
        """Test the header and the empty first order"""
        path = temp_output_dir / "table.csv"
        TableStorage(path).save(table)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["N", "L1", "L1_order", "L2", "L2_order", "Linf", "Linf_order"]
        assert rows[1][0] == "10"
        assert rows[1][2] == ""
        assert float(rows[2][4]) == pytest.approx(3.0)

    def test_load(self, table, temp_output_dir):
        """Test reading the table back"""
        path = temp_output_dir / "table.csv"
        TableStorage(path).save(table)
        loaded = TableStorage(path).load("ex7.1", 2)
        assert [row.n for row in loaded.rows] == [10, 20]
        assert loaded.rows[1].errors == table.rows[1].errors
        assert loaded.rows[0].orders["L2"] is None
        assert loaded.final_order() == pytest.approx(3.0)


@pytest.mark.unit
class TestTraceStorage:
    """Tests for energy trace CSV files"""

    def test_save_and_load(self, temp_output_dir):
        """Test the trace columns and values"""
        trace = EnergyTrace([0, 1, 2], [0.0, 0.1, 0.2], [1.0, 0.8, 0.7])
        path = temp_output_dir / "trace.csv"
        TraceStorage(path).save(trace)
        with open(path, newline="") as f:
            header = next(csv.reader(f))
        assert header == ["step", "t", "energy", "dissipation_increment"]
        loaded = TraceStorage(path).load()
        assert loaded.energies == trace.energies
        assert loaded.steps == [0, 1, 2]


@pytest.mark.unit
class TestFieldStorage:
    """Tests for field dumps"""

    def test_1d_bit_exact(self, perturbed_mesh, rng, temp_output_dir):
        """Test that coefficients and mesh survive exactly"""
        u_h = DGField1D(perturbed_mesh, 3, rng.standard_normal((12, 4)) * 1e-7)
        path = dump_field(u_h, temp_output_dir / "u.csv", {"t": 0.5})
        loaded = load_field(path)
        assert isinstance(loaded, DGField1D)
        assert loaded.k == 3
        np.testing.assert_array_equal(loaded.coeffs, u_h.coeffs)
        np.testing.assert_array_equal(loaded.mesh.boundaries, perturbed_mesh.boundaries)
        assert FieldStorage(path).metadata() == {"t": 0.5}

    def test_2d_bit_exact(self, rng, temp_output_dir):
        """Test a 2D dump"""
        mesh = build_mesh_2d(3, 2)
        u_h = DGField2D(mesh, 1, rng.standard_normal((3, 2, 2, 2)))
        loaded = load_field(dump_field(u_h, temp_output_dir / "u2.csv"))
        assert isinstance(loaded, DGField2D)
        assert loaded.mesh.shape == (3, 2)
        np.testing.assert_array_equal(loaded.coeffs, u_h.coeffs)

    def test_long_format_layout(self, temp_output_dir):
        """Test the header keys and one row per coefficient"""
        mesh = build_mesh(4)
        u_h = DGField1D(mesh, 1, np.arange(8.0).reshape(4, 2))
        path = dump_field(u_h, temp_output_dir / "u.csv")
        header = FieldStorage(path).header()
        assert header["N"] == 4
        assert header["k"] == 1
        assert header["domain"] == [[0.0, pytest.approx(2 * np.pi)]]
        frame = pd.read_csv(path, skiprows=1)
        assert list(frame.columns) == ["cell_index", "mode_index", "coefficient"]
        assert len(frame) == 8
        assert frame.iloc[3].tolist() == [1, 1, 3.0]

    def test_2d_columns(self, temp_output_dir):
        """Test the 2D index columns"""
        u_h = DGField2D(build_mesh_2d(2), 1)
        frame = pd.read_csv(dump_field(u_h, temp_output_dir / "u2.csv"), skiprows=1)
        assert list(frame.columns) == ["cell_x", "cell_y", "mode_x", "mode_y", "coefficient"]
        assert len(frame) == 16

    def test_missing_header(self, temp_output_dir):
        """Test that plain CSV files are refused"""
        path = temp_output_dir / "plain.csv"
        path.write_text("cell,c0\n0,1.0\n")
        with pytest.raises(ConfigurationError, match="not a field dump"):
            load_field(path)


@pytest.mark.unit
class TestResultStore:
    """Tests for the per-command output set"""

    def test_file_names(self, table, temp_output_dir):
        """Test the suffixes and the manifest listing"""
        store = ResultStore(temp_output_dir / "out", "ex7.1_k2")
        store.save_table(table)
        store.save_trace(EnergyTrace([0], [0.0], [1.0]))
        store.save_field(DGField1D(build_mesh(4), 1), name="w")
        store.save_report({"passed": True})
        manifest = RunManifest(command="study", config={}, config_hash="abc", version="1.0.0")
        path = store.save_manifest(manifest)

        names = sorted(p.name for p in (temp_output_dir / "out").iterdir())
        assert names == ["ex7.1_k2.csv", "ex7.1_k2_energy.csv", "ex7.1_k2_manifest.json",
                         "ex7.1_k2_report.json", "ex7.1_k2_w.csv"]
        with open(path) as f:
            outputs = json.load(f)["outputs"]
        assert len(outputs) == 4
        assert load_manifest(path).command == "study"

    def test_missing_manifest(self, temp_output_dir):
        """Test loading a manifest that does not exist"""
        with pytest.raises(ConfigurationError, match="No manifest"):
            load_manifest(temp_output_dir / "none.json")

    def test_source_commit_outside_git(self, temp_output_dir):
        """Test the fallback outside a checkout"""
        assert source_commit(temp_output_dir) == "unknown"
