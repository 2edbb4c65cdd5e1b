"""
Tests for exact and estimated topological entropy and the SOL return map.
"""

import json
import os
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

# Add repo root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.catalog import build_model
from src.catalog.sol import sol_data
from src.entropy_lab import (
    EntropyEstimate,
    circle_doubling,
    rigid_rotation,
    sol_return_map,
    spanning_entropy_estimate,
    toral_automorphism,
    toral_entropy_exact,
)
from src.errors import ParameterError

CAT_MAP = [[2, 1], [1, 1]]
CAT_ENTROPY = 0.962424

ELEMENTARY = [
    np.array([[1, 1], [0, 1]]),
    np.array([[1, -1], [0, 1]]),
    np.array([[1, 0], [1, 1]]),
    np.array([[1, 0], [-1, 1]]),
    np.array([[0, 1], [-1, 0]]),
]


class TestExactEntropy:
    """ln of the spectral radius"""

    def test_cat_map(self):
        """Test [[2,1],[1,1]] has entropy ln((3 + sqrt 5) / 2)"""
        assert toral_entropy_exact(CAT_MAP) == pytest.approx(CAT_ENTROPY, abs=1e-6)

    def test_parabolic_and_identity(self):
        """Test unipotent and identity matrices have zero entropy"""
        assert toral_entropy_exact([[1, 1], [0, 1]]) == 0.0
        assert toral_entropy_exact(np.eye(3)) == 0.0

    def test_higher_dimension(self):
        """Test a 3x3 automorphism uses its largest eigenvalue"""
        B = [[0, 1, 0], [0, 0, 1], [1, 1, 0]]
        expected = np.log(np.max(np.abs(np.linalg.eigvals(np.array(B, dtype=float)))))
        assert toral_entropy_exact(B) == pytest.approx(expected)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=len(ELEMENTARY) - 1), min_size=1, max_size=5))
    def test_conjugation_invariance(self, word):
        """Test P B P^-1 has the same entropy for unimodular P"""
        P = np.eye(2, dtype=int)
        for k in word:
            P = P @ ELEMENTARY[k]
        P_inv = np.rint(np.linalg.inv(P)).astype(int)
        conjugated = P @ np.array(CAT_MAP) @ P_inv
        assert toral_entropy_exact(conjugated) == pytest.approx(CAT_ENTROPY, abs=1e-6)

    def test_invalid_matrices(self):
        """Test non-square, non-integer and non-unimodular matrices are rejected"""
        with pytest.raises(ParameterError):
            toral_entropy_exact([[1, 2, 3]])
        with pytest.raises(ParameterError):
            toral_entropy_exact([[1.5, 0], [0, 1]])
        with pytest.raises(ParameterError):
            toral_entropy_exact([[2, 0], [0, 1]])


class TestTorusMaps:
    """Map constructors and orbits"""

    def test_orbit_shape_and_range(self):
        """Test orbits stay in the unit cube"""
        orbit = toral_automorphism(CAT_MAP).orbit(np.array([[0.1, 0.3], [0.7, 0.9]]), 4)
        assert orbit.shape == (2, 5, 2)
        assert np.all((orbit >= 0.0) & (orbit < 1.0))
        assert orbit[0, 1] == pytest.approx([0.5, 0.4])

    def test_exact_values_attached(self):
        """Test constructors carry the known entropy"""
        assert toral_automorphism(CAT_MAP).exact_entropy == pytest.approx(CAT_ENTROPY, abs=1e-6)
        assert rigid_rotation().exact_entropy == 0.0
        assert circle_doubling().exact_entropy == pytest.approx(np.log(2.0))


class TestSpanningEstimate:
    """Greedy spanning-set counts and slopes"""

    def test_rotation_has_no_growth(self):
        """Test an irrational rotation estimates zero entropy"""
        estimate = spanning_entropy_estimate(rigid_rotation(), resolution=128)
        assert estimate.estimate <= 0.02
        assert not any(any(row) for row in estimate.saturated)

    def test_doubling_map(self):
        """Test the doubling map estimate is within 10% of ln 2"""
        estimate = spanning_entropy_estimate(circle_doubling(), resolution=4096)
        assert estimate.estimate == pytest.approx(np.log(2.0), rel=0.10)

    @pytest.mark.slow
    def test_cat_map_estimate(self):
        """Test the cat map estimate is within 15% of the exact entropy"""
        estimate = spanning_entropy_estimate(toral_automorphism(CAT_MAP))
        assert estimate.exact == pytest.approx(CAT_ENTROPY, abs=1e-6)
        assert estimate.estimate == pytest.approx(CAT_ENTROPY, rel=0.15)

    def test_counts_are_monotone(self):
        """Test reported counts grow in T and as eps shrinks"""
        estimate = spanning_entropy_estimate(circle_doubling(), horizons=range(6), resolution=1024)
        counts = np.array(estimate.counts)
        assert np.all(np.diff(counts, axis=1) >= 0)
        assert np.all(np.diff(counts, axis=0) >= 0)
        assert estimate.epsilons == [0.2, 0.1, 0.05]

    def test_coarse_grid_rejected(self):
        """Test a grid coarser than eps / 4 is refused"""
        with pytest.raises(ParameterError):
            spanning_entropy_estimate(rigid_rotation(), resolution=64)

    def test_empty_inputs_rejected(self):
        """Test eps and T lists must be nonempty and T nonnegative"""
        with pytest.raises(ParameterError):
            spanning_entropy_estimate(circle_doubling(), epsilons=[])
        with pytest.raises(ParameterError):
            spanning_entropy_estimate(circle_doubling(), horizons=[-1, 0, 1], resolution=1024)

    def test_validator_rejects_decreasing_counts(self):
        """Test non-monotone counts cannot be stored"""
        with pytest.raises(ValidationError):
            EntropyEstimate(map_name="x", resolution=8, epsilons=[0.2], horizons=[0, 1], counts=[[4, 3]],
                            raw_counts=[[4, 3]], saturated=[[False, False]], slopes=[None], estimate=None)


class TestEstimateArtifacts:
    """CSV and JSON output"""

    def setup_method(self):
        """Run a small rotation estimate"""
        self.estimate = spanning_entropy_estimate(rigid_rotation(), horizons=range(4), resolution=128)

    def test_csv_rows(self):
        """Test one CSV row per (eps, T)"""
        lines = self.estimate.to_csv().splitlines()
        assert lines[0] == "epsilon,T,N,lnN_over_T,saturated"
        assert len(lines) == 1 + 3 * 4

    def test_json_is_deterministic(self):
        """Test JSON output parses and repeats byte for byte"""
        text = self.estimate.to_json()
        data = json.loads(text)
        assert data["raw_monotone"] is True
        assert data["horizons"] == [0, 1, 2, 3]
        assert text == self.estimate.to_json()

    def test_write(self, tmp_path):
        """Test write produces both files"""
        paths = self.estimate.write(tmp_path, stem="rotation")
        assert os.path.exists(paths["json"])
        assert os.path.exists(paths["csv"])


class TestReturnMap:
    """Fiber return map of torus bundles"""

    def test_sol_return_map_is_monodromy(self):
        """Test the fiber map of the SOL bundle equals B"""
        model = build_model("sol")
        B = model.companions["sol"].B
        assert np.max(np.abs(sol_return_map(model) - B)) <= 1e-6

    def test_return_map_is_step_independent(self):
        """Test coarse and fine transport steps agree on the fiber map"""
        model = build_model("sol")
        coarse = sol_return_map(model, dt=1e-2)
        fine = sol_return_map(model, dt=1e-4)
        assert np.max(np.abs(coarse - fine)) <= 1e-6

    def test_return_map_follows_the_flow(self):
        """Test the map comes from the integrated bundle, not its attached data"""
        nil = build_model("nil")
        mismatched = replace(nil, companions={"sol": sol_data([[2, 1], [1, 1]])})
        C = sol_return_map(mismatched)
        assert np.max(np.abs(C - np.array([[1.0, 1.0], [0.0, 1.0]]))) <= 1e-6

    def test_return_map_entropy(self):
        """Test the return map of the SOL bundle has the monodromy's entropy"""
        C = np.rint(sol_return_map(build_model("sol")))
        assert toral_entropy_exact(C) == pytest.approx(CAT_ENTROPY, abs=1e-6)

    def test_nil_return_map(self):
        """Test the parabolic bundle returns its unipotent monodromy"""
        model = build_model("nil")
        assert np.max(np.abs(sol_return_map(model) - np.array([[1.0, 1.0], [0.0, 1.0]]))) <= 1e-6

    def test_requires_bundle(self):
        """Test ordinary models are refused"""
        with pytest.raises(ParameterError):
            sol_return_map(build_model("flat_torus"))

    def test_rejects_nonpositive_steps(self):
        """Test step sizes must be positive"""
        with pytest.raises(ParameterError):
            sol_return_map(build_model("sol"), dt=0.0)
