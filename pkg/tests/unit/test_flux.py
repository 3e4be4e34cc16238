"""
Unit tests for flux configuration and monotone fluxes
"""

import pytest
import numpy as np

from hodg.errors import ConfigurationError
from hodg.flux import (AlternatingChoice, EntropyPotential, FluxConfig, MonotoneKind, TraceRole,
                       UpwindSide, interface_dissipation, monotone_flux, select_trace)


def cube(v):
    return v ** 3


@pytest.mark.unit
class TestFluxConfig:
    """Tests for alternating trace weights"""

    def test_default_is_choice1(self):
        """Test that the default takes u from + and the auxiliaries from -"""
        flux = FluxConfig()
        assert flux.choice is AlternatingChoice.CHOICE1
        np.testing.assert_array_equal(flux.u_weights(2), [0.0, 0.0])
        np.testing.assert_array_equal(flux.aux_weights(2), [1.0, 1.0])

    def test_choice2_mirrors_choice1(self):
        """Test the mirrored one-sided choice"""
        flux = FluxConfig(AlternatingChoice.CHOICE2)
        np.testing.assert_array_equal(flux.u_weights(3), [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(flux.aux_weights(3), [0.0, 0.0, 0.0])

    def test_choice3_alternates_levels(self):
        """Test even/odd alternation and the complementary auxiliary weights"""
        flux = FluxConfig(AlternatingChoice.CHOICE3)
        np.testing.assert_array_equal(flux.u_weights(3), [1.0, 0.0, 1.0])
        np.testing.assert_array_equal(flux.aux_weights(3), [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(FluxConfig(AlternatingChoice.CHOICE4).u_weights(3), [0.0, 1.0, 0.0])

    def test_theta_weights(self):
        """Test the theta family"""
        flux = FluxConfig(AlternatingChoice.THETA, 0.3)
        assert flux.u_weight(0) == pytest.approx(0.7)
        assert flux.aux_weight(1, 2) == pytest.approx(0.3)
        assert not flux.is_one_sided()
        assert FluxConfig(AlternatingChoice.THETA, 1.0).is_one_sided()

    def test_paired_roles_are_complementary(self):
        """Test that every auxiliary level pairs with a u level of opposite weight"""
        for choice in AlternatingChoice:
            flux = FluxConfig(choice, 0.3 if choice is AlternatingChoice.THETA else None)
            pairs = list(flux.paired_roles(3))
            assert len(pairs) == 3
            for aux_role, u_role in pairs:
                assert aux_role.level + u_role.level == 2
                assert flux.weight(aux_role) + flux.weight(u_role) == pytest.approx(1.0)

    def test_theta_out_of_range(self):
        """Test rejection of theta outside [0, 1]"""
        with pytest.raises(ConfigurationError, match="theta"):
            FluxConfig(AlternatingChoice.THETA, 1.5)
        with pytest.raises(ConfigurationError, match="theta"):
            FluxConfig(AlternatingChoice.THETA)


@pytest.mark.unit
class TestFluxParsing:
    """Tests for the CLI flux strings"""

    def test_parse_choice_and_monotone(self):
        """Test a choice plus a Lax-Friedrichs flux with fixed alpha"""
        flux = FluxConfig.parse("alt2,lf:1.5")
        assert flux.choice is AlternatingChoice.CHOICE2
        assert flux.monotone is MonotoneKind.LAX_FRIEDRICHS
        assert flux.lf_alpha == 1.5
        assert str(flux) == "alt2,lf:1.5"

    def test_parse_theta(self):
        """Test theta with the central flux"""
        flux = FluxConfig.parse("theta:0.25,central")
        assert flux.theta == 0.25
        assert str(flux) == "theta:0.25,central"

    def test_parse_side(self):
        """Test an explicit upwind side"""
        flux = FluxConfig.parse("side:plus")
        assert flux.upwind_side is UpwindSide.PLUS
        assert str(flux) == "alt1,upwind,side:plus"

    def test_roundtrip_of_str(self):
        """Test that str() output parses back to the same configuration"""
        for text in ["alt1,upwind", "alt3,lf", "alt4,central", "theta:0.7,lf:2"]:
            assert FluxConfig.parse(str(FluxConfig.parse(text))) == FluxConfig.parse(text)

    @pytest.mark.parametrize("text", ["alt9", "theta:abc", "theta:1.5", "side:left", "lf:-1", "upwinded"])
    def test_invalid_strings(self, text):
        """Test rejection of malformed flux strings"""
        with pytest.raises(ConfigurationError):
            FluxConfig.parse(text)


@pytest.mark.unit
class TestTraces:
    """Tests for named trace selection"""

    def test_role_parsing(self):
        """Test family, level and depth of flux names"""
        assert TraceRole.parse("u_hat") == TraceRole("u", 0, 2)
        assert TraceRole.parse("w_x") == TraceRole("aux", 1, 2)
        assert TraceRole.parse("u_xx") == TraceRole("u", 2, 3)
        for bad in ["uhat", "q_x", "u_y"]:
            with pytest.raises(ConfigurationError):
                TraceRole.parse(bad)

    def test_select_trace(self):
        """Test the one-sided and averaged traces"""
        a, b = np.array([1.0, 2.0]), np.array([3.0, 5.0])
        np.testing.assert_array_equal(select_trace(FluxConfig(), "v_hat", a, b), a)
        np.testing.assert_array_equal(select_trace(FluxConfig(), "u_hat", a, b), b)
        half = FluxConfig(AlternatingChoice.THETA, 0.5)
        np.testing.assert_allclose(select_trace(half, "u_hat", a, b), [2.0, 3.5])


@pytest.mark.unit
class TestMonotoneFlux:
    """Tests for the f(v) fluxes"""

    def test_upwind(self):
        """Test that upwinding takes f(v-)"""
        np.testing.assert_allclose(monotone_flux(MonotoneKind.UPWIND, cube, [2.0], [3.0]), [8.0])

    def test_lax_friedrichs(self):
        """Test the Lax-Friedrichs formula and its missing-alpha error"""
        value = monotone_flux(MonotoneKind.LAX_FRIEDRICHS, cube, [1.0], [2.0], alpha=12.0)
        np.testing.assert_allclose(value, [0.5 * (1 + 8) - 6.0])
        with pytest.raises(ConfigurationError, match="alpha"):
            monotone_flux(MonotoneKind.LAX_FRIEDRICHS, cube, [1.0], [2.0])

    def test_central_is_divided_difference(self):
        """Test the entropy-conservative flux, including equal states"""
        potential = EntropyPotential(cube, lambda v: v ** 4 / 4)
        value = monotone_flux(MonotoneKind.CENTRAL, cube, [0.0, 1.5], [2.0, 1.5], potential=potential)
        np.testing.assert_allclose(value, [4.0 / 2.0, 1.5 ** 3])

    def test_dissipation_signs(self, rng):
        """Test interface dissipation: nonnegative for upwind/LF, zero for central"""
        a, b = rng.standard_normal(50), rng.standard_normal(50)
        potential = EntropyPotential(cube, lambda v: v ** 4 / 4)
        alpha = float(np.max(3 * np.concatenate((a, b)) ** 2))
        upwind = interface_dissipation(cube, MonotoneKind.UPWIND, a, b, potential=potential)
        lf = interface_dissipation(cube, MonotoneKind.LAX_FRIEDRICHS, a, b, alpha, potential)
        central = interface_dissipation(cube, MonotoneKind.CENTRAL, a, b, potential=potential)
        assert np.all(upwind >= -1e-14)
        assert np.all(lf >= -1e-14)
        np.testing.assert_allclose(central, 0.0, atol=1e-12)

    def test_potential_by_quadrature(self):
        """Test the adaptive-quadrature antiderivative"""
        potential = EntropyPotential(cube)
        assert float(potential(2.0)) == pytest.approx(4.0)
        assert potential.max_derivative_error(np.linspace(-1, 1, 5)) < 1e-6
