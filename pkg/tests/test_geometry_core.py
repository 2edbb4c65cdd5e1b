"""
Tests for the geometry core: dual-number derivatives, Hamiltonians,
chart domains and phase-space projection.
"""

import math
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add repo root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src import autodiff as ad
from src.catalog import build_model, list_catalog
from src.catalog.classical import revolution_from_profile
from src.errors import DegenerateMetricError, DomainError
from src.geometry_core import (
    ChartMetric,
    CoordinateSpec,
    CotangentState,
    GeodesicModel,
    derivative,
    finite_difference_gradient,
    hamiltonian_eval,
    hamiltonian_flow_field,
    project_to_phase_space,
    sample_states,
)

SEED = 20240611
finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)


class TestDualNumbers:
    """Forward-mode derivatives through the registered primitives"""

    def test_product_rule_gradient(self):
        """Test sin(x) exp(y) has the analytic gradient"""
        x = ad.seed_variables([0.3, -0.7], 0, 2)
        out = ad.sin(x[0]) * ad.exp(x[1])
        grad = ad.tangent_of(out, 2)
        assert ad.value_of(out) == pytest.approx(np.sin(0.3) * np.exp(-0.7))
        assert grad == pytest.approx([np.cos(0.3) * np.exp(-0.7), np.sin(0.3) * np.exp(-0.7)])

    def test_quotient_and_sqrt(self):
        """Test sqrt(x) / (1 + y) differentiates correctly"""
        x = ad.seed_variables([2.0, 0.5], 0, 2)
        out = ad.sqrt(x[0]) / (1.0 + x[1])
        expected = [0.5 / np.sqrt(2.0) / 1.5, -np.sqrt(2.0) / 1.5 ** 2]
        assert ad.tangent_of(out, 2) == pytest.approx(expected)

    def test_constant_output_has_zero_gradient(self):
        """Test constants carry a zero tangent"""
        assert np.all(ad.tangent_of(3.0, 4) == 0.0)

    def test_numpy_dot_on_object_arrays(self):
        """Test np.dot propagates tangents through object arrays"""
        x = ad.seed_variables([1.0, 2.0, 3.0], 0, 3)
        m = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 4.0]])
        out = 0.5 * np.dot(x, np.dot(m, x))
        assert ad.tangent_of(out, 3) == pytest.approx(m @ np.array([1.0, 2.0, 3.0]))

    @settings(max_examples=30, deadline=None)
    @given(st.tuples(finite, finite, finite))
    def test_euler_identity_for_quadratic_forms(self, values):
        """Test x . grad f = 2 f for a homogeneous quadratic"""
        x = ad.seed_variables(values, 0, 3)
        out = x[0] * x[1] - 2.0 * x[2] * x[2] + x[0] * x[0]
        grad = ad.tangent_of(out, 3)
        assert np.dot(values, grad) == pytest.approx(2.0 * ad.value_of(out), abs=1e-9)


class TestDerivative:
    """Exact derivatives with the finite-difference fallback"""

    def setup_method(self):
        """Set up a Liouville surface"""
        self.model = build_model("liouville")
        self.state = CotangentState([0.4, 1.3], [0.7, -0.2])

    def test_exact_and_fd_agree(self):
        """Test AD and 4th-order differences agree on the quadratic integral"""
        fn = self.model.integral("F").fn
        exact = derivative(fn, self.state, method="ad").flat()
        fd = derivative(fn, self.state, method="fd").flat()
        assert np.max(np.abs(exact - fd)) < 1e-8

    def test_fallback_for_non_primitive_functions(self):
        """Test functions written with math fall back to differences"""
        grad = derivative(lambda x, p: math.sin(x[0]) * p[1], self.state)
        assert grad.dx[0] == pytest.approx(np.cos(0.4) * -0.2, rel=1e-8)
        assert grad.dp[1] == pytest.approx(np.sin(0.4), rel=1e-8)

    def test_fd_gradient_of_polynomial(self):
        """Test the stencil is exact for cubics"""
        g = finite_difference_gradient(lambda z: z[0] ** 3 + z[0] * z[1], np.array([1.5, -2.0]))
        assert g == pytest.approx([3 * 1.5 ** 2 - 2.0, 1.5], rel=1e-9)


class TestHamiltonian:
    """Hamiltonian evaluation and chart domains"""

    def test_flat_torus_energy(self):
        """Test H = 1/2 (a p1^2 + 2 b p1 p2 + c p2^2)"""
        model = build_model("flat_torus", {"a": 2.0, "b": 0.5, "c": 1.0})
        s = CotangentState([0.1, 0.2], [1.0, -2.0])
        expected = 0.5 * (2.0 * 1.0 + 2 * 0.5 * 1.0 * -2.0 + 1.0 * 4.0)
        assert hamiltonian_eval(model, s) == pytest.approx(expected)

    def test_flow_field_is_velocity_and_force(self):
        """Test dx/dt = g^-1 p on the flat torus and dp/dt = 0"""
        model = build_model("flat_torus", {"a": 2.0, "b": 0.5, "c": 1.0})
        dx, dp = hamiltonian_flow_field(model, CotangentState([0.1, 0.2], [1.0, -2.0]))
        assert dx == pytest.approx([2.0 - 1.0, 0.5 - 2.0])
        assert dp == pytest.approx([0.0, 0.0])

    def test_liouville_constant_profiles(self):
        """Test H = |p|^2 / (2 (f + g)) with f = 2, g = 3"""
        model = build_model("liouville", {"f_kind": "constant", "f_c0": 2.0, "f_c1": 0.0,
                                          "g_kind": "constant", "g_c0": 3.0, "g_c1": 0.0})
        assert hamiltonian_eval(model, CotangentState([0.7, 2.1], [1.0, 1.0])) == pytest.approx(0.2, rel=1e-12)

    def test_round_sphere_chart_on_equator(self):
        """Test H = 1/2 (p_theta^2 + p_phi^2 / sin^2 theta) on the equator"""
        model = revolution_from_profile("sphere")
        s = CotangentState([np.pi / 2, 0.0], [0.0, 1.0])
        assert hamiltonian_eval(model, s) == pytest.approx(0.5, rel=1e-12)
        dx, dp = hamiltonian_flow_field(model, s)
        assert dx == pytest.approx([0.0, 1.0], abs=1e-12)
        assert dp == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_embedded_state_off_the_surface_is_rejected(self):
        """Test a point off the unit sphere raises DomainError"""
        with pytest.raises(DomainError):
            hamiltonian_eval(build_model("sphere"), CotangentState([2.0, 0.0, 0.0], [0.0, 1.0, 0.0]))

    def test_embedded_momentum_must_be_tangent(self):
        """Test a momentum with a normal component raises DomainError"""
        with pytest.raises(DomainError):
            hamiltonian_eval(build_model("sphere"), CotangentState([1.0, 0.0, 0.0], [0.5, 1.0, 0.0]))

    def test_embedded_phase_state_is_accepted(self):
        """Test a state on T*S^2 evaluates to 1/2 |p|^2"""
        s = CotangentState([0.0, 0.6, 0.8], [1.0, 0.8, -0.6])
        assert hamiltonian_eval(build_model("sphere"), s) == pytest.approx(1.0)

    def test_state_near_pole_is_rejected(self):
        """Test the sphere-of-revolution chart refuses states near its poles"""
        model = revolution_from_profile("sphere")
        with pytest.raises(DomainError):
            hamiltonian_eval(model, CotangentState([1e-8, 0.0], [1.0, 0.0]))

    def test_degenerate_metric_is_reported(self):
        """Test a singular metric raises DegenerateMetricError"""
        metric = ChartMetric(dim=2, g=lambda x: np.diag([1.0, 0.0]), coords=(CoordinateSpec(), CoordinateSpec()))
        model = GeodesicModel("degenerate", "degenerate", metric)
        with pytest.raises(DegenerateMetricError):
            hamiltonian_eval(model, CotangentState([0.0, 0.0], [1.0, 1.0]))

    def test_state_dimension_mismatch(self):
        """Test states of the wrong dimension are rejected"""
        model = build_model("flat_torus")
        with pytest.raises(DomainError):
            hamiltonian_eval(model, CotangentState([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]))


CATALOG_KEYS = [entry["key"] for entry in list_catalog()]


class TestCatalogHamiltonians:
    """Positivity, homogeneity and flow field of every catalog Hamiltonian"""

    @pytest.mark.parametrize("key", CATALOG_KEYS)
    def test_hamiltonian_is_positive(self, key):
        """Test H > 0 on seeded states with nonzero momentum"""
        model = build_model(key)
        for s in sample_states(model, 20, np.random.default_rng(SEED)):
            assert hamiltonian_eval(model, s) > 0

    @pytest.mark.parametrize("key", CATALOG_KEYS)
    def test_hamiltonian_is_quadratic_in_momenta(self, key):
        """Test H(x, lam p) = lam^2 H(x, p)"""
        model = build_model(key)
        for s in sample_states(model, 20, np.random.default_rng(SEED)):
            h = hamiltonian_eval(model, s)
            for lam in (-1.0, 2.0, 0.5):
                scaled = hamiltonian_eval(model, CotangentState(s.x, lam * s.p))
                assert scaled == pytest.approx(lam * lam * h, rel=1e-12)

    @pytest.mark.parametrize("key", CATALOG_KEYS)
    def test_flow_field_matches_central_differences(self, key):
        """Test (dH/dp, -dH/dx) against 4th-order central differences of H"""
        model = build_model(key)
        for s in sample_states(model, 20, np.random.default_rng(SEED)):
            dx, dp = hamiltonian_flow_field(model, s)
            n = s.dim
            grad = finite_difference_gradient(
                lambda z: float(model.hamiltonian(z[:n], z[n:])), s.flat()
            )
            field = np.concatenate([-dp, dx])
            assert np.linalg.norm(field - grad) <= 1e-8 * max(1.0, np.linalg.norm(grad))


class TestPhaseSpace:
    """Projection onto T*Q and seeded sampling"""

    def setup_method(self):
        """Set up the triaxial ellipsoid"""
        self.model = build_model("ellipsoid")
        self.rng = np.random.default_rng(SEED)

    def test_projection_satisfies_both_constraints(self):
        """Test projected states satisfy c = 0 and the hidden constraint"""
        s = project_to_phase_space(self.model, [1.0, 1.0, 0.5], [0.3, -0.2, 0.9])
        c, t = self.model.metric.residuals(s)
        assert c < 1e-12
        assert t < 1e-12

    def test_sampling_is_deterministic(self):
        """Test equal seeds give equal states"""
        first = sample_states(self.model, 3, np.random.default_rng(5))
        second = sample_states(self.model, 3, np.random.default_rng(5))
        for a, b in zip(first, second):
            assert np.array_equal(a.flat(), b.flat())

    def test_sampled_states_lie_on_phase_space(self):
        """Test sampled ellipsoid states satisfy the constraints"""
        for s in sample_states(self.model, 10, self.rng):
            c, t = self.model.metric.residuals(s)
            assert c < 1e-12 and t < 1e-12
