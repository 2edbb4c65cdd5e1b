"""
Tests for the Lie-algebraic machinery: algebras, brackets, argument
shifts, pencils and restricted families on reductive complements.
"""

import os
import sys

import numpy as np
import pytest

# Add repo root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.errors import NonGenericPointError, ParameterError, PreconditionError
from src.lie_poisson import (
    LiePoissonStructure,
    PencilMember,
    PolynomialFamily,
    ReductiveDecomposition,
    RestrictedStructure,
    ShiftStructure,
    ThetaStructure,
    aloff_wallach,
    argument_shift_family,
    build_algebra,
    completeness_on_v,
    coordinate_function,
    direct_sum,
    leaf_rank,
    lie_poisson_bracket,
    linear_function,
    modified_bracket,
    pencil_completeness_check,
    restricted_invariant_family,
    so_algebra,
    symmetric_pair_family,
    symmetric_pair_member,
    unitary_algebra,
)
from src.poisson_verify import commutation_residual, independence_rank, tensor_jacobi_residual

SEED = 17


def _points(algebra, count, seed=SEED):
    rng = np.random.default_rng(seed)
    return [algebra.random_point(rng) for _ in range(count)]


def _max_residual(family, structure, points):
    return float(commutation_residual(family.as_function_family(structure), points).max())


class TestAlgebras:
    """Structure constants, pairings and invariants"""

    @pytest.mark.parametrize("kind,n", [("so", 3), ("so", 4), ("so", 5), ("u", 2), ("u", 3), ("su", 3)])
    def test_structure_constants_are_lie(self, kind, n):
        """Test antisymmetry, Jacobi and ad-invariance of the pairing"""
        alg = build_algebra(kind, n)
        assert alg.antisymmetry_defect() == 0.0
        assert alg.jacobi_defect() <= 1e-12
        assert alg.pairing_defect(np.random.default_rng(SEED)) <= 1e-10

    def test_dimensions_and_coranks(self):
        """Test dim and generic corank of the presets"""
        expected = {("so", 3): (3, 1), ("so", 4): (6, 2), ("u", 3): (9, 3), ("su", 3): (8, 2)}
        for (kind, n), (dim, corank) in expected.items():
            alg = build_algebra(kind, n)
            assert alg.dim == dim
            assert alg.generic_corank() == corank

    def test_direct_sum(self):
        """Test direct sums keep Jacobi and tag invariants per summand"""
        su2 = unitary_algebra(2, special=True)
        alg = direct_sum(su2, su2)
        assert alg.dim == 6
        assert alg.jacobi_defect() <= 1e-12
        assert alg.generic_corank() == 2
        assert [p.name for p in alg.invariants] == ["tr((ix)^2)[1]", "tr((ix)^2)[2]"]

    def test_matrix_round_trip(self):
        """Test coords inverts matrix on random points"""
        alg = so_algebra(4)
        x = _points(alg, 1)[0]
        assert alg.coords(alg.matrix(x)) == pytest.approx(x)

    def test_unknown_presets(self):
        """Test unsupported algebras are rejected"""
        with pytest.raises(ParameterError):
            build_algebra("sp", 2)
        with pytest.raises(ParameterError):
            so_algebra(1)


class TestBrackets:
    """Lie-Poisson, a- and theta-brackets"""

    def setup_method(self):
        """Set up so(3) with basis (E12, E13, E23)"""
        self.alg = so_algebra(3)
        self.x = np.array([0.3, -1.1, 0.8])
        self.x1 = coordinate_function(3, 0)
        self.x2 = coordinate_function(3, 1)
        self.x3 = coordinate_function(3, 2)

    def test_coordinate_bracket_sign(self):
        """Test {x1, x2} = -x3 under {f, g} = <x, [grad f, grad g]>"""
        assert lie_poisson_bracket(self.x1, self.x2, self.x, self.alg) == pytest.approx(-self.x[2])
        assert lie_poisson_bracket(self.x2, self.x1, self.x, self.alg) == pytest.approx(self.x[2])

    def test_casimirs_commute_with_everything(self):
        """Test <x, x> brackets to zero with all coordinates"""
        c2 = self.alg.invariant("C2")
        for f in (self.x1, self.x2, self.x3):
            assert abs(lie_poisson_bracket(c2, f, self.x, self.alg)) <= 1e-11

    def test_unitary_invariants_commute(self):
        """Test tr(x^2) and tr(x^3) on u(3) are in involution"""
        alg = unitary_algebra(3)
        p2, p3 = alg.invariant("tr((ix)^2)"), alg.invariant("tr((ix)^3)")
        for x in _points(alg, 5):
            assert abs(lie_poisson_bracket(p2, p3, x, alg)) <= 1e-10

    def test_a_bracket_is_constant(self):
        """Test {x1, x2}_a = +1 for a = e3 at every point"""
        for x in (self.x, 5.0 * self.x, np.zeros(3)):
            value = modified_bracket("a_bracket", self.x1, self.x2, x, algebra=self.alg, a=[0.0, 0.0, 1.0])
            assert value == pytest.approx(1.0)

    def test_a_bracket_vanishes_for_zero_shift(self):
        """Test a = 0 gives the zero bracket"""
        assert modified_bracket("a_bracket", self.x1, self.x2, self.x, algebra=self.alg, a=np.zeros(3)) == 0.0

    def test_theta_bracket_kills_complement(self):
        """Test [w, w]_theta = 0 while the h-w brackets survive"""
        dec = ReductiveDecomposition(self.alg, [[1.0, 0.0, 0.0]], symmetric=True)
        assert modified_bracket("theta_bracket", self.x2, self.x3, self.x, decomposition=dec) == pytest.approx(0.0)
        assert modified_bracket("theta_bracket", self.x1, self.x2, self.x, decomposition=dec) == pytest.approx(
            lie_poisson_bracket(self.x1, self.x2, self.x, self.alg))

    def test_theta_bracket_satisfies_jacobi(self):
        """Test the contraction tensor passes the Schouten check"""
        dec = ReductiveDecomposition(so_algebra(4), [[1.0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1.0]], symmetric=True)
        structure = ThetaStructure(dec)
        for x in _points(dec.algebra, 3):
            assert tensor_jacobi_residual(structure, x) <= 1e-9

    def test_pencil_members_satisfy_jacobi(self):
        """Test Lie-Poisson and a-bracket are compatible"""
        alg = so_algebra(4)
        a, x = _points(alg, 2)
        for alpha, beta in ((1.0, 0.7), (0.3, -2.0), (1.0, 1.0)):
            member = PencilMember(LiePoissonStructure(alg), ShiftStructure(alg, a), alpha, beta)
            assert tensor_jacobi_residual(member, x) <= 1e-9

    def test_bad_bracket_requests(self):
        """Test unknown kinds and missing inputs"""
        with pytest.raises(ParameterError):
            modified_bracket("b_bracket", self.x1, self.x2, self.x)
        with pytest.raises(ParameterError):
            modified_bracket("a_bracket", self.x1, self.x2, self.x)
        with pytest.raises(PreconditionError):
            ThetaStructure(ReductiveDecomposition(self.alg, [[1.0, 0.0, 0.0]]))


class TestArgumentShift:
    """Shift families and leaf ranks"""

    def test_so3_hand_expansion(self):
        """Test <x + l a, x + l a> gives <x, x> and 2 <x, a>"""
        alg = so_algebra(3)
        family = argument_shift_family(alg, [0.0, 0.0, 1.0])
        assert family.names == ["C2|lambda^0", "C2|lambda^1"]
        x = np.array([0.4, 1.2, -0.9])
        assert family.members[0].eval(x) == pytest.approx(np.dot(x, x))
        assert family.members[1].eval(x) == pytest.approx(2.0 * x[2])

    @pytest.mark.parametrize("kind,n,rank", [("so", 3, 2), ("so", 4, 4), ("u", 3, 6)])
    def test_shift_family_is_involutive_and_full(self, kind, n, rank):
        """Test pairwise brackets vanish and the rank is (dim + corank) / 2"""
        alg = build_algebra(kind, n)
        a = alg.random_point(np.random.default_rng(SEED + 1))
        family = argument_shift_family(alg, a)
        points = _points(alg, 20)
        assert _max_residual(family, LiePoissonStructure(alg), points) <= 1e-10
        fam = family.as_function_family(LiePoissonStructure(alg))
        assert independence_rank(fam, points) == rank

    def test_so4_family_complete_on_orbit(self):
        """Test two independent members are tangent to a regular orbit"""
        alg = so_algebra(4)
        a = alg.random_point(np.random.default_rng(SEED + 2))
        family = argument_shift_family(alg, a)
        for x in _points(alg, 5):
            assert leaf_rank(family, x, alg) == 2

    def test_zero_shift_rejected(self):
        """Test a = 0 is refused"""
        with pytest.raises(ParameterError):
            argument_shift_family(so_algebra(3), np.zeros(3))

    def test_degree_cap(self):
        """Test the cap truncates the coefficient list"""
        family = argument_shift_family(so_algebra(5), np.arange(1.0, 11.0), degree_cap=1)
        assert family.names == ["C2|lambda^0", "C2|lambda^1", "tr(x^4)|lambda^0", "tr(x^4)|lambda^1"]

    def test_metadata(self):
        """Test family metadata carries provenance and residuals"""
        alg = so_algebra(3)
        family = argument_shift_family(alg, [0.0, 0.0, 1.0])
        meta = family.metadata(LiePoissonStructure(alg), _points(alg, 3))
        assert meta["provenance"] == "argument_shift(so(3))"
        assert meta["member_count"] == 2
        assert meta["max_commutation_residual"] <= 1e-10
        assert meta["a"] == [0.0, 0.0, 1.0]


class TestPencil:
    """Rank of Pi_1 + lambda Pi_2 over complex lambda"""

    def setup_method(self):
        """Set up so(4) and a self-dual point y"""
        self.so4 = so_algebra(4)
        # E12 + E34 + 0.5 (E13 - E24): one simple ideal of so(4)
        self.y = np.array([1.0, 0.5, 0.0, 0.0, -0.5, 1.0])

    def test_so3_shift_pencil_complete(self):
        """Test so(3) with a = e3 is complete at a generic point"""
        alg = so_algebra(3)
        report = pencil_completeness_check(LiePoissonStructure(alg), ShiftStructure(alg, [0.0, 0.0, 1.0]),
                                           np.array([0.3, -1.1, 0.8]))
        assert report.complete
        assert report.generic_rank == 2
        assert report.sampled == 40
        assert report.drops == []

    def test_proportional_pencil(self):
        """Test Pi_2 = -Pi_1 stays complete and reports the zero member"""
        first = LiePoissonStructure(self.so4)
        second = PencilMember(first, first, -1.0, 0.0)
        report = pencil_completeness_check(first, second, _points(self.so4, 1)[0])
        assert report.complete
        assert any(abs(re - 1.0) < 1e-8 and abs(im) < 1e-8 for re, im in report.degenerate_members)

    def test_degenerate_pencil_reports_drop(self):
        """Test x = 2a + y drops rank exactly at lambda = 2"""
        a = self.so4.random_point(np.random.default_rng(SEED + 3))
        x = 2.0 * a + self.y
        report = pencil_completeness_check(LiePoissonStructure(self.so4), ShiftStructure(self.so4, a), x)
        assert not report.complete
        assert report.base_rank == 4
        assert any(abs(re - 2.0) < 1e-6 and abs(im) < 1e-6 for re, im in report.drops)

    def test_non_generic_base_point(self):
        """Test a singular base point is refused"""
        with pytest.raises(NonGenericPointError):
            pencil_completeness_check(LiePoissonStructure(self.so4), ShiftStructure(self.so4, np.ones(6)), self.y)


class TestRestrictedFamilies:
    """Families on reductive complements"""

    def test_aloff_wallach_family(self):
        """Test f1..f4 commute on v and reach rank 7 - 3 = 4"""
        dec, family = aloff_wallach(1, 2)
        rng = np.random.default_rng(SEED)
        samples = [dec.random_v(rng) for _ in range(20)]
        assert dec.dim_v == 7
        assert _max_residual(family, RestrictedStructure(dec), samples) <= 1e-10
        report = completeness_on_v(dec, family, samples)
        assert report.orbit_dim == 6
        assert report.required_ddim == 4.0
        assert report.ddim == 4
        assert report.complete
        assert not report.nongeneric_warning

    def test_aloff_wallach_equal_weights(self):
        """Test k = l makes f1 vanish on v"""
        dec, family = aloff_wallach(1, 1)
        rng = np.random.default_rng(SEED)
        for _ in range(5):
            assert abs(family.members[0].eval(dec.random_v(rng))) <= 1e-12

    def test_aloff_wallach_needs_nonzero_weights(self):
        """Test k = l = 0 is rejected"""
        with pytest.raises(ParameterError):
            aloff_wallach(0, 0)

    def test_thimm_chain_on_u3(self):
        """Test u(1) < u(2) < u(3) is involutive with rank (9 + 3) / 2"""
        alg = unitary_algebra(3)
        dec = ReductiveDecomposition(alg, np.zeros((0, alg.dim)))
        family = restricted_invariant_family(dec, "chain", sizes=[1, 2, 3])
        samples = _points(alg, 10)
        assert len(family) == 6
        assert _max_residual(family, RestrictedStructure(dec), samples) <= 1e-10
        report = completeness_on_v(dec, family, samples)
        assert report.ddim == 6
        assert report.complete

    def test_shift_preset_on_so3(self):
        """Test (so(3), so(2)): |v|^2 alone is complete on v"""
        dec = ReductiveDecomposition(so_algebra(3), [[1.0, 0.0, 0.0]])
        family = restricted_invariant_family(dec, "shift", a=[1.0, 0.0, 0.0])
        rng = np.random.default_rng(SEED)
        report = completeness_on_v(dec, family, [dec.random_v(rng) for _ in range(10)])
        assert report.dim_ann_g == 1
        assert report.orbit_dim == 2
        assert report.required_ddim == 1.0
        assert report.ddim == 1
        assert report.complete

    def test_shift_preset_precondition(self):
        """Test h must annihilate a"""
        dec = ReductiveDecomposition(so_algebra(3), [[1.0, 0.0, 0.0]])
        with pytest.raises(PreconditionError):
            restricted_invariant_family(dec, "shift", a=[0.0, 1.0, 0.0])

    def test_casimirs_alone_are_incomplete(self):
        """Test (so(4), so(2)) with only Casimirs fails the verdict"""
        alg = so_algebra(4)
        dec = ReductiveDecomposition(alg, [[1.0, 0, 0, 0, 0, 0]])
        family = PolynomialFamily([dec.restrict(p) for p in alg.invariants], "casimirs", "v")
        rng = np.random.default_rng(SEED)
        report = completeness_on_v(dec, family, [dec.random_v(rng) for _ in range(10)])
        assert report.required_ddim == 3.0
        assert report.ddim == 2
        assert not report.complete

    def test_verdict_invariant_under_rotation(self):
        """Test rotating the basis of v leaves ddim and the verdict unchanged"""
        alg = so_algebra(4)
        rng = np.random.default_rng(SEED)
        verdicts = []
        for dec in (ReductiveDecomposition(alg, [[1.0, 0, 0, 0, 0, 0]]),
                    ReductiveDecomposition(alg, [[1.0, 0, 0, 0, 0, 0]]).rotated(rng)):
            family = PolynomialFamily([dec.restrict(p) for p in alg.invariants], "casimirs", "v")
            report = completeness_on_v(dec, family, [dec.random_v(rng) for _ in range(10)])
            verdicts.append((report.ddim, report.required_ddim, report.complete))
        assert verdicts[0] == verdicts[1]

    def test_non_subalgebra_rejected(self):
        """Test h must close under the bracket"""
        with pytest.raises(PreconditionError):
            ReductiveDecomposition(so_algebra(3), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def test_unknown_preset(self):
        """Test preset names are checked"""
        dec = ReductiveDecomposition(so_algebra(3), [[1.0, 0.0, 0.0]])
        with pytest.raises(ParameterError):
            restricted_invariant_family(dec, "spiral")


class TestSymmetricPairs:
    """Families p(lambda l + w) on symmetric pairs"""

    def test_so3_so2_pair(self):
        """Test coefficients of <x, x> commute with the coordinate on l"""
        alg = so_algebra(3)
        dec = ReductiveDecomposition(alg, [[1.0, 0.0, 0.0]], symmetric=True)
        family = symmetric_pair_family(dec, [coordinate_function(3, 0, "l1")])
        assert family.names == ["C2|lambda^0", "C2|lambda^2", "l1"]
        assert _max_residual(family, LiePoissonStructure(alg), _points(alg, 20)) <= 1e-10

    def test_diagonal_pair(self):
        """Test (su(2) + su(2), diagonal) is involutive"""
        su2 = unitary_algebra(2, special=True)
        alg = direct_sum(su2, su2)
        dec = ReductiveDecomposition(alg, np.hstack([np.eye(3), np.eye(3)]), symmetric=True)
        inner = linear_function([0.0, 0.0, 1.0, 0.0, 0.0, 1.0], "l3")
        family = symmetric_pair_family(dec, [inner])
        assert len(family) > 1
        assert _max_residual(family, LiePoissonStructure(alg), _points(alg, 20)) <= 1e-10

    def test_unit_member_is_the_invariant(self):
        """Test lambda = 1 returns p itself"""
        alg = so_algebra(3)
        dec = ReductiveDecomposition(alg, [[1.0, 0.0, 0.0]], symmetric=True)
        p = alg.invariant("C2")
        member = symmetric_pair_member(dec, p, 1.0)
        for x in _points(alg, 5):
            assert member.eval(x) == pytest.approx(p.eval(x))

    def test_needs_symmetric_flag(self):
        """Test the family refuses unflagged decompositions"""
        dec = ReductiveDecomposition(so_algebra(3), [[1.0, 0.0, 0.0]])
        with pytest.raises(PreconditionError):
            symmetric_pair_family(dec, [])

    def test_broken_symmetric_relations(self):
        """Test so(3) with h = 0 is not a symmetric pair"""
        with pytest.raises(PreconditionError):
            ReductiveDecomposition(so_algebra(3), np.zeros((0, 3)), symmetric=True)
