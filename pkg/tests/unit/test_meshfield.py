"""
Unit tests for periodic meshes and DG fields
"""

import pytest
import numpy as np

from hodg.errors import AmbiguousTraceError, ConfigurationError
from hodg.meshfield import (DGField1D, DGField2D, Mesh1D, build_mesh, build_mesh_2d,
                            interface_traces, sampled_norms, sampled_norms_2d)


@pytest.mark.unit
class TestMesh1D:
    """Tests for 1D meshes"""

    def test_uniform_mesh(self, uniform_mesh):
        """Test the geometry of a uniform mesh"""
        assert uniform_mesh.n_cells == 10
        np.testing.assert_allclose(uniform_mesh.widths, 2 * np.pi / 10)
        assert uniform_mesh.h == pytest.approx(2 * np.pi / 10)
        assert uniform_mesh.regularity == pytest.approx(1.0)
        assert uniform_mesh.domain == (0.0, pytest.approx(2 * np.pi))

    def test_perturbed_mesh_is_deterministic(self):
        """Test that the jitter depends only on the seed and keeps the endpoints"""
        a = build_mesh(12, perturbation=0.2, seed=7)
        b = build_mesh(12, perturbation=0.2, seed=7)
        c = build_mesh(12, perturbation=0.2, seed=8)
        np.testing.assert_array_equal(a.boundaries, b.boundaries)
        assert not np.array_equal(a.boundaries, c.boundaries)
        assert a.boundaries[0] == 0.0
        assert a.boundaries[-1] == pytest.approx(2 * np.pi)
        assert a.regularity > 1.0
        assert np.all(a.widths > 0)

    def test_invalid_meshes(self):
        """Test rejection of too few cells, large jitter and unsorted boundaries"""
        with pytest.raises(ConfigurationError, match="N >= 2"):
            build_mesh(1)
        with pytest.raises(ConfigurationError, match="perturbation"):
            build_mesh(8, perturbation=0.5)
        with pytest.raises(ConfigurationError, match="strictly increasing"):
            Mesh1D(np.array([0.0, 2.0, 1.0, 3.0]))

    def test_locate_interior(self, uniform_mesh):
        """Test cell lookup and reference coordinate for interior points"""
        h = uniform_mesh.h
        cell, xi = uniform_mesh.locate(np.array([2.5 * h]))
        assert cell[0] == 2
        assert xi[0] == pytest.approx(0.0, abs=1e-12)

    def test_locate_wraps_periodically(self, uniform_mesh):
        """Test that points outside the domain are wrapped"""
        h = uniform_mesh.h
        cell, xi = uniform_mesh.locate(np.array([2 * np.pi + 0.5 * h]))
        assert cell[0] == 0
        assert xi[0] == pytest.approx(0.0, abs=1e-12)

    def test_locate_boundary_needs_side(self, uniform_mesh):
        """Test that a cell boundary without a side is ambiguous"""
        x = np.array([uniform_mesh.boundaries[3]])
        with pytest.raises(AmbiguousTraceError):
            uniform_mesh.locate(x)

        cell, xi = uniform_mesh.locate(x, side="-")
        assert (cell[0], xi[0]) == (2, 1.0)
        cell, xi = uniform_mesh.locate(x, side="+")
        assert (cell[0], xi[0]) == (3, -1.0)

    def test_locate_domain_start_minus_side(self, uniform_mesh):
        """Test that the left limit at x = a comes from the last cell"""
        cell, xi = uniform_mesh.locate(np.array([0.0]), side="-")
        assert (cell[0], xi[0]) == (9, 1.0)

    def test_mesh_2d(self, square_mesh):
        """Test the tensor mesh shape"""
        assert square_mesh.shape == (4, 4)
        assert square_mesh.h == pytest.approx(np.pi / 2)
        assert build_mesh_2d(4, 6).shape == (4, 6)


@pytest.mark.unit
class TestDGField1D:
    """Tests for 1D DG fields"""

    def test_zero_default(self, uniform_mesh):
        """Test that a field without coefficients is zero"""
        u_h = DGField1D(uniform_mesh, 2)
        assert u_h.coeffs.shape == (10, 3)
        assert not np.any(u_h.coeffs)

    def test_shape_mismatch(self, uniform_mesh):
        """Test rejection of coefficients with the wrong shape"""
        with pytest.raises(ConfigurationError, match="shape"):
            DGField1D(uniform_mesh, 2, np.zeros((10, 2)))

    def test_evaluate_linear_field(self, uniform_mesh):
        """Test point values and derivatives of u = x"""
        coeffs = np.stack([uniform_mesh.centers, 0.5 * uniform_mesh.widths], axis=1)
        u_h = DGField1D(uniform_mesh, 1, coeffs)
        x = np.array([0.3, 1.7, 4.4])
        np.testing.assert_allclose(u_h.evaluate(x), x, atol=1e-13)
        np.testing.assert_allclose(u_h.evaluate(x, deriv=1), 1.0, atol=1e-13)
        assert isinstance(u_h.evaluate(0.3), float)

    def test_evaluate_on_boundary(self, uniform_mesh):
        """Test one-sided limits of a piecewise constant field"""
        coeffs = np.zeros((10, 1))
        coeffs[:, 0] = np.arange(10)
        u_h = DGField1D(uniform_mesh, 0, coeffs)
        x = uniform_mesh.boundaries[4]
        assert u_h.evaluate(x, side="-") == 3.0
        assert u_h.evaluate(x, side="+") == 4.0
        with pytest.raises(AmbiguousTraceError):
            u_h.evaluate(x)

    def test_traces_and_jumps(self, uniform_mesh):
        """Test interface ordering: minus from cell i, plus from cell i+1"""
        coeffs = np.zeros((10, 1))
        coeffs[:, 0] = np.arange(10)
        traces = DGField1D(uniform_mesh, 0, coeffs).traces()
        np.testing.assert_allclose(traces.minus[0], np.arange(10))
        np.testing.assert_allclose(traces.plus[0], np.roll(np.arange(10), -1))
        jump = traces.jump()
        np.testing.assert_allclose(jump[:-1], 1.0)
        assert jump[-1] == pytest.approx(-9.0)
        np.testing.assert_allclose(traces.average()[:-1], np.arange(9) + 0.5)

    def test_derivative_traces(self, uniform_mesh):
        """Test that derivative traces carry the 2/h scaling"""
        coeffs = np.stack([uniform_mesh.centers, 0.5 * uniform_mesh.widths], axis=1)
        minus, plus = interface_traces(coeffs, uniform_mesh.widths, 1)
        np.testing.assert_allclose(minus, 1.0)
        np.testing.assert_allclose(plus, 1.0)

    def test_traces_above_degree(self, uniform_mesh):
        """Test that traces beyond the degree are rejected"""
        with pytest.raises(ConfigurationError):
            DGField1D(uniform_mesh, 1).traces(max_deriv=2)

    def test_inner_and_norm(self, perturbed_mesh):
        """Test the exact L2 inner product of the constant 1"""
        coeffs = np.zeros((12, 3))
        coeffs[:, 0] = 1.0
        one = DGField1D(perturbed_mesh, 2, coeffs)
        assert one.inner(one) == pytest.approx(2 * np.pi)
        assert one.norm("L2") == pytest.approx(np.sqrt(2 * np.pi))
        assert one.norm("L1") == pytest.approx(2 * np.pi)
        assert one.norm("Linf") == pytest.approx(1.0)

    def test_sampled_norms_against_reference(self):
        """Test error norms of the zero field against sin(x)"""
        mesh = build_mesh(40)
        norms = sampled_norms(mesh, 2, np.zeros((40, 3)), np.sin)
        assert norms["L2"] == pytest.approx(np.sqrt(np.pi), rel=1e-8)
        assert norms["L1"] == pytest.approx(4.0, rel=1e-8)
        assert 0.99 < norms["Linf"] <= 1.0


@pytest.mark.unit
class TestDGField2D:
    """Tests for tensor-product fields"""

    def test_constant_field(self, square_mesh):
        """Test evaluation and norms of the constant 1"""
        coeffs = np.zeros((4, 4, 2, 2))
        coeffs[:, :, 0, 0] = 1.0
        one = DGField2D(square_mesh, 1, coeffs)
        assert one.evaluate(0.3, 2.9) == pytest.approx(1.0)
        assert one.inner(one) == pytest.approx(4 * np.pi ** 2)
        assert one.norm("L1") == pytest.approx(4 * np.pi ** 2)

    def test_shape_mismatch(self, square_mesh):
        """Test rejection of coefficients with the wrong shape"""
        with pytest.raises(ConfigurationError):
            DGField2D(square_mesh, 1, np.zeros((4, 4, 2)))

    def test_sampled_norms_2d(self):
        """Test the L2 norm of sin(x) sin(y) over the square"""
        mesh = build_mesh_2d(16)
        norms = sampled_norms_2d(mesh, 2, np.zeros((16, 16, 3, 3)),
                                 lambda x, y: np.sin(x) * np.sin(y))
        assert norms["L2"] == pytest.approx(np.pi, rel=1e-6)
