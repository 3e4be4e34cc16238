"""
Unit tests for operator assembly and SDC time integration
"""

import pytest
import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from hodg.core import error_norms
from hodg.errors import ConfigurationError, IntegrationAborted, NumericalFailure
from hodg.flux import AlternatingChoice, FluxConfig, MonotoneKind
from hodg.meshfield import DGField1D, build_mesh, build_mesh_2d
from hodg.problems import get_problem
from hodg.projection import ProjectionKind, project_1d
from hodg.scheme1d import build_scheme
from hodg.timeint import (EnergyTrace, LinearOperator, LinearSystem, NewtonStalled, NonlinearSystem,
                          SDCConfig, SDCIntegrator, SweepMode, assemble_jacobian, assemble_operator,
                          color_count, integrate, integrate_system, integration_matrix,
                          lobatto_nodes, operator_for, probe_matrix)


def scalar_system(rate):
    """y' = rate * y as a 1 x 1 linear system"""
    operator = LinearOperator(sparse.csr_matrix(np.array([[rate]])), (1,))
    return LinearSystem(operator)


def scalar_error(n_steps, sweeps, mode, rate=-1.0, t_final=1.0):
    integrator = SDCIntegrator(scalar_system(rate), nodes=3, sweeps=sweeps, mode=mode)
    u, _ = integrate_system(integrator.system, np.array([1.0]), t_final, n_steps, integrator)
    return abs(u[0] - np.exp(rate * t_final))


@pytest.mark.unit
class TestSDCConfig:
    """Tests for SDC settings"""

    def test_defaults(self):
        """Test k+1 sweeps and the formal order"""
        sdc = SDCConfig()
        assert sdc.resolve_sweeps(2) == 3
        assert sdc.formal_order(2) == 4
        assert SDCConfig(nodes=5).formal_order(3) == 5
        assert SDCConfig(sweeps=1).formal_order(3) == 2

    def test_step_plan(self):
        """Test dt = min(dt_factor * h, T / min_steps), rounded to whole steps"""
        sdc = SDCConfig(dt_factor=0.5, min_steps=16)
        assert sdc.step_plan(0.1, 1.0) == (20, pytest.approx(0.05))
        assert sdc.step_plan(1.0, 1.0) == (16, pytest.approx(1.0 / 16))
        n_steps, dt = SDCConfig(dt=0.3).step_plan(0.1, 1.0)
        assert n_steps == 4
        assert n_steps * dt == pytest.approx(1.0)

    def test_halved(self):
        """Test that halving doubles the number of steps"""
        sdc = SDCConfig()
        n_steps, _ = sdc.step_plan(0.1, 1.0)
        assert sdc.halved(0.1, 1.0).step_plan(0.1, 1.0)[0] == 2 * n_steps

    def test_invalid(self):
        """Test rejection of bad settings"""
        with pytest.raises(ConfigurationError):
            SDCConfig(nodes=1)
        with pytest.raises(ConfigurationError):
            SDCConfig(sweeps=0)
        with pytest.raises(ConfigurationError):
            SDCConfig(dt=-1.0)
        with pytest.raises(ConfigurationError):
            SDCConfig().step_plan(0.1, 0.0)
        with pytest.raises(ConfigurationError, match="sweep mode"):
            SweepMode.from_string("semi")


@pytest.mark.unit
class TestQuadratureMatrices:
    """Tests for the collocation building blocks"""

    def test_lobatto_nodes(self):
        """Test three nodes on [0, 1]"""
        np.testing.assert_allclose(lobatto_nodes(3), [0.0, 0.5, 1.0], atol=1e-15)

    def test_integration_matrix(self):
        """Test that Q integrates polynomials up to the node count exactly"""
        nodes = lobatto_nodes(4)
        Q = integration_matrix(nodes)
        np.testing.assert_allclose(Q[0], 0.0, atol=1e-14)
        np.testing.assert_allclose(Q @ nodes ** 2, nodes ** 3 / 3, atol=1e-13)
        np.testing.assert_allclose(Q[-1].sum(), 1.0)


@pytest.mark.unit
class TestProbing:
    """Tests for colored probing and operator assembly"""

    def test_color_count(self):
        """Test the smallest divisor separating probes"""
        assert color_count(16, 3) == 8
        assert color_count(21, 3) == 7
        assert color_count(10, 3) == 10
        assert color_count(4, 2) == 4

    def test_probe_banded_matrix(self, rng):
        """Test that probing recovers a periodic tridiagonal block operator"""
        n, m = 14, 2
        blocks = rng.standard_normal((3, m, m))
        dense = np.zeros((n * m, n * m))
        for i in range(n):
            for offset, block in zip((-1, 0, 1), blocks):
                j = (i + offset) % n
                dense[i * m:(i + 1) * m, j * m:(j + 1) * m] = block

        def fn(c):
            return (dense @ c.ravel()).reshape(n, m)

        matrix, stencil = probe_matrix(fn, (n, m), bandwidth=1)
        np.testing.assert_allclose(matrix.toarray(), dense, atol=1e-14)
        assert stencil == 1

    @pytest.mark.parametrize("problem_id, k, flux", [
        ("ex7.1", 1, "alt1"), ("ex7.2", 2, "alt2"), ("order:6", 3, "alt3"),
        ("order:7", 2, "alt1"), ("ex7.1", 2, "theta:0.7"),
    ])
    def test_operator_matches_scheme(self, problem_id, k, flux, rng):
        """Test the assembled matrix against the matrix-free rate"""
        mesh = build_mesh(18, perturbation=0.1, seed=3)
        scheme = build_scheme(get_problem(problem_id), mesh, k, FluxConfig.parse(flux))
        operator = operator_for(scheme)
        coeffs = rng.standard_normal(scheme.shape)
        expected = scheme.rate(coeffs)
        np.testing.assert_allclose(operator.apply(coeffs), expected, atol=1e-9 * np.max(np.abs(expected)))
        order = scheme.problem.order
        reach = (order + 1) // 2 if scheme.flux.is_one_sided() else order
        assert operator.stencil_width <= reach

    def test_operator_2d(self, rng):
        """Test assembly of the biharmonic operator"""
        mesh = build_mesh_2d(6)
        operator = assemble_operator(get_problem("ex7.5"), mesh, 1)
        scheme = build_scheme(get_problem("ex7.5"), mesh, 1)
        coeffs = rng.standard_normal(scheme.shape)
        expected = scheme.rate(coeffs)
        np.testing.assert_allclose(operator.apply(coeffs), expected, atol=1e-9 * np.max(np.abs(expected)))
        assert operator.size == 6 * 6 * 4

    def test_nonlinear_has_no_operator(self, uniform_mesh):
        """Test that nonlinear problems refuse assembly"""
        with pytest.raises(ConfigurationError, match="nonlinear"):
            assemble_operator(get_problem("ex7.4"), uniform_mesh, 2)

    def test_jacobian_of_linear_scheme(self, rng):
        """Test that the finite-difference Jacobian of a linear scheme is its matrix"""
        mesh = build_mesh(14)
        scheme = build_scheme(get_problem("ex7.1"), mesh, 1)
        jacobian = assemble_jacobian(scheme, rng.standard_normal(scheme.shape))
        exact = operator_for(scheme).to_dense()
        np.testing.assert_allclose(jacobian.toarray(), exact, atol=1e-5 * np.max(np.abs(exact)))

    def test_fourth_order_spectrum_is_dissipative(self):
        """Test that every eigenvalue of the assembled fourth-order operator has nonpositive real part"""
        scheme = build_scheme(get_problem("ex7.1"), build_mesh(10), 1)
        eigenvalues = np.linalg.eigvals(operator_for(scheme).to_dense())
        assert np.max(eigenvalues.real) <= 1e-10

    def test_central_flux_conserves_energy_in_time(self, fifth_order_problem, perturbed_mesh, rng):
        """Test that the exact semi-discrete flow with the central flux keeps ||u_h|| to t = 0.1"""
        flux = FluxConfig(AlternatingChoice.CHOICE3, monotone=MonotoneKind.CENTRAL)
        scheme = build_scheme(fifth_order_problem, perturbed_mesh, 2, flux)
        weights = np.ravel(scheme.mass_weights())
        u0 = rng.standard_normal(scheme.size)
        u = splinalg.expm_multiply(0.1 * operator_for(scheme).matrix.tocsc(), u0)
        energy0 = np.sum(weights * u0 ** 2)
        assert abs(np.sum(weights * u ** 2) - energy0) / energy0 <= 1e-8


@pytest.mark.unit
class TestSDCIntegrator:
    """Tests for the SDC steps"""

    @pytest.mark.parametrize("mode", [SweepMode.IMPLICIT, SweepMode.EXPLICIT])
    def test_order_on_scalar_problem(self, mode):
        """Test fourth order with three nodes and three sweeps"""
        coarse = scalar_error(20, 3, mode)
        fine = scalar_error(40, 3, mode)
        assert np.log2(coarse / fine) > 3.3

    def test_more_sweeps_help(self):
        """Test that one sweep is less accurate than three"""
        assert scalar_error(20, 3, SweepMode.IMPLICIT) < scalar_error(20, 1, SweepMode.IMPLICIT)

    def test_source_term(self):
        """Test y' = -y + 1 from y(0) = 0"""
        operator = LinearOperator(sparse.csr_matrix(np.array([[-1.0]])), (1,))
        system = LinearSystem(operator, source=lambda t: np.array([1.0]))
        integrator = SDCIntegrator(system, nodes=3, sweeps=4)
        u, _ = integrate_system(system, np.array([0.0]), 1.0, 20, integrator)
        assert u[0] == pytest.approx(1.0 - np.exp(-1.0), abs=1e-5)

    def test_zero_data_stays_zero(self, uniform_mesh):
        """Test that homogeneous problems keep u = 0"""
        problem = get_problem("ex7.1")
        result = integrate(problem, DGField1D(uniform_mesh, 2), 0.1, SDCConfig(dt=0.02))
        assert not np.any(result.u.coeffs)
        assert result.n_steps == 5
        assert len(result.trace.energies) == 6

    def test_heat_equation_decays(self, uniform_mesh):
        """Test that the second-order problem loses energy monotonically"""
        problem = get_problem("order:2")
        u0 = project_1d(ProjectionKind.L2, problem.exact.at(0.0), uniform_mesh, 2)
        result = integrate(problem, u0, 0.1, SDCConfig(dt=0.002))
        assert result.trace.is_monotone()
        assert result.trace.energies[-1] < result.trace.energies[0]

    def test_nonlinear_solve(self, uniform_mesh):
        """Test that Newton converges for the b(u) problem and the solution stays close"""
        problem = get_problem("ex7.3")
        profile = problem.exact.at(0.0)
        u0 = project_1d(ProjectionKind.P1_PLUS, profile, uniform_mesh, 2)
        result = integrate(problem, u0, 0.02, SDCConfig(dt=0.01))
        assert result.n_steps == 2
        assert np.all(np.isfinite(result.u.coeffs))
        assert result.aux.v is not None

    def test_energy_decreases_every_step(self, fourth_order_problem):
        """Test that the fourth-order solution loses energy on every step"""
        mesh = build_mesh(20)
        u0 = project_1d(ProjectionKind.L2, fourth_order_problem.exact.at(0.0), mesh, 2)
        result = integrate(fourth_order_problem, u0, 0.2, SDCConfig(dt=0.01))
        assert result.trace.is_monotone()
        assert all(inc < 0 for inc in result.trace.increments[1:])

    def test_newton_converges_at_roundoff_floor(self):
        """Test the cubic fifth-order problem on 32 cells with the default Newton tolerance"""
        problem = get_problem("ex7.4")
        u0 = project_1d(ProjectionKind.L2, problem.exact.at(0.0), build_mesh(32), 2)
        result = integrate(problem, u0, 0.01, SDCConfig(dt=0.005), FluxConfig.parse("alt1,upwind"))
        assert result.n_steps == 2
        assert error_norms(result.u, problem.exact, 0.01)["L2"] < 1e-3

    def test_newton_stall_aborts(self, uniform_mesh):
        """Test that a Newton failure becomes IntegrationAborted with the step"""
        problem = get_problem("ex7.4")
        scheme = build_scheme(problem, uniform_mesh, 2)
        system = NonlinearSystem(scheme, tol=1e-300, max_iter=1)
        integrator = SDCIntegrator(system, nodes=3, sweeps=1)
        u0 = np.random.default_rng(0).standard_normal(scheme.size)
        with pytest.raises(IntegrationAborted) as excinfo:
            integrate_system(system, u0, 0.1, 2, integrator)
        assert excinfo.value.step == 1
        assert "Newton" in excinfo.value.reason
        assert isinstance(NewtonStalled(1.0, 3), NumericalFailure)


@pytest.mark.unit
class TestRefinedSolve:
    """Tests for the LU solve with matrix-free refinement"""

    def test_fine_mesh_solve_recovers_smooth_data(self, fourth_order_problem):
        """Test that I - dtau L is inverted to round-off for P3 on 160 cells"""
        scheme = build_scheme(fourth_order_problem, build_mesh(160), 3)

        def apply(u):
            return np.ravel(scheme.rate(u))

        system = LinearSystem(operator_for(scheme), apply=apply)
        dtau = 0.005
        expected = np.ravel(project_1d(ProjectionKind.L2, np.sin, scheme.mesh, 3).coeffs)
        rhs = expected - dtau * apply(expected)
        u = system.solve(dtau, rhs, 0.0, rhs)
        assert np.max(np.abs(u - expected)) <= 1e-9

    def test_refinement_disabled(self):
        """Test that a plain LU solve is used without refinements"""
        operator = LinearOperator(sparse.csr_matrix(np.array([[-2.0]])), (1,))
        system = LinearSystem(operator, refinements=0)
        assert system.solve(0.5, np.array([4.0]), 0.0, np.array([0.0]))[0] == pytest.approx(2.0)


@pytest.mark.unit
class TestEnergyTrace:
    """Tests for energy bookkeeping"""

    def test_increments_and_monotonicity(self):
        """Test increments, monotonicity and drift"""
        trace = EnergyTrace()
        for step, energy in enumerate([4.0, 3.0, 2.5, 2.5]):
            trace.record(step, 0.1 * step, energy)
        assert trace.increments == [0.0, -1.0, -0.5, 0.0]
        assert trace.is_monotone()
        assert trace.relative_drift() == pytest.approx(0.375)
        trace.record(4, 0.4, 2.6)
        assert not trace.is_monotone()

    def test_rows_and_dict(self):
        """Test row export and dict round trip"""
        trace = EnergyTrace([0, 1], [0.0, 0.5], [1.0, 0.9])
        rows = trace.rows()
        assert rows[1] == {"step": 1, "t": 0.5, "energy": 0.9, "dissipation_increment": pytest.approx(-0.1)}
        restored = EnergyTrace.from_dict(trace.to_dict())
        assert restored.energies == [1.0, 0.9]

    def test_empty_trace(self):
        """Test an empty trace"""
        trace = EnergyTrace()
        assert trace.is_monotone()
        assert trace.relative_drift() == 0.0
