"""
Test one-way state generators, their repetition and puzzle view, and the PRSG construction
"""
import math

import numpy as np
import pytest

from owsg import (
    KeyedStateFamily,
    Owsg,
    canonical_pure_ver,
    dumps_family,
    family_from_states,
    haar_collision_expectation,
    haar_prsg,
    leaky_family,
    loads_family,
    orthonormal_family,
    overlap_family,
    owsg_as_puzzle,
    owsg_correctness,
    owsg_repetition,
    projective_owsg,
    prsg_cross_acceptance,
    prsg_to_owsg,
    self_acceptance,
)
from puzzles import BasisMeasurementSolver, exact_success
from qstate import DensityMatrix, PureState, RegisterShape, partial_trace, random_density_matrix
from utilities import KeyDistribution, PreconditionError, ShapeError, SizingError, within_sigmas


class TestKeyedStateFamily:
    def test_mixed_shapes_rejected(self):
        states = {
            0: PureState.basis(RegisterShape.of(("S", 2)), 0),
            1: PureState.basis(RegisterShape.of(("S", 3)), 0),
        }
        with pytest.raises(ShapeError):
            KeyedStateFamily(KeyDistribution.uniform((0, 1)), states.__getitem__)

    def test_canonical_purification(self, rng):
        shape = RegisterShape.of(("S", 3))
        family = family_from_states({k: random_density_matrix(shape, rng) for k in range(2)})
        purified = family.purified(1)
        assert purified.shape.labels == ("anc", "S")
        np.testing.assert_allclose(
            partial_trace(purified, ["S"]).matrix, family.state(1).matrix, atol=1e-10
        )

    def test_bad_purification(self):
        shape = RegisterShape.of(("S", 2))
        with pytest.raises(PreconditionError, match="does not reduce"):
            KeyedStateFamily(
                KeyDistribution.uniform((0, 1)),
                lambda key: PureState.basis(shape, key),
                purification=lambda key: PureState.basis(shape, 0),
            )

    def test_without_purification(self):
        mixed = DensityMatrix.maximally_mixed(RegisterShape.of(("S", 2)))
        family = KeyedStateFamily(KeyDistribution.uniform((0,)), lambda key: mixed)
        with pytest.raises(PreconditionError):
            family.purified(0)
        with pytest.raises(PreconditionError, match="mixed"):
            family.vector(0)

    def test_key_unitary(self):
        keys = KeyDistribution.from_mapping({0: 0.25, 1: 0.75})
        family = KeyedStateFamily(keys, orthonormal_family(2).output)
        unitary = family.key_unitary()
        np.testing.assert_allclose(unitary[:, 0], [0.5, math.sqrt(0.75)], atol=1e-12)

    def test_state_unitary(self):
        family = overlap_family(0.6)
        np.testing.assert_allclose(family.state_unitary(1)[:, 0], family.purified(1).amplitudes, atol=1e-12)


class TestOwsg:
    def test_orthonormal_is_insecure(self):
        o = projective_owsg(orthonormal_family(4))
        assert owsg_correctness(o) == pytest.approx(1.0)
        puzzle = owsg_as_puzzle(o)
        assert exact_success(puzzle, BasisMeasurementSolver(range(4)), 1) == pytest.approx(1.0)

    def test_unknown_answers_rejected(self):
        o = projective_owsg(orthonormal_family(2))
        assert o.verify(7, o.family.state(0)) == 0.0

    def test_leaky_inversion(self):
        o = projective_owsg(leaky_family(3, 0.4))
        solver = BasisMeasurementSolver(range(3))
        assert exact_success(owsg_as_puzzle(o), solver, 1) == pytest.approx(0.4)

    def test_repetition(self):
        o = projective_owsg(overlap_family(0.5))
        repeated = owsg_repetition(o, 2)
        assert len(repeated.keys) == 4
        state = repeated.family.state((0, 1))
        assert state.shape.labels == ("slot0.S", "slot1.S")
        assert repeated.verify((0, 1), state) == pytest.approx(1.0)
        assert repeated.verify((1, 1), state) == pytest.approx(0.25)

    def test_repetition_sizing(self, dimension_cap):
        dimension_cap(8)
        with pytest.raises(SizingError):
            owsg_repetition(projective_owsg(orthonormal_family(3)), 2)

    def test_canonical_ver(self):
        family = overlap_family(0.5)
        loose = Owsg(family, lambda key: np.eye(2), 0.0)
        canonical = canonical_pure_ver(loose)
        assert self_acceptance(canonical) == pytest.approx({0: 1.0, 1: 1.0})
        assert canonical.verify(0, family.state(1)) == pytest.approx(0.25)

    def test_canonical_ver_needs_correctness(self):
        family = overlap_family(0.5)
        weak = Owsg(family, lambda key: np.eye(2) / 2, 0.1)
        with pytest.raises(PreconditionError, match="accepts its own state"):
            canonical_pure_ver(weak)


class TestPrsg:
    def test_cross_acceptance(self, rng):
        g = haar_prsg(3, 1, rng)
        owsg = prsg_to_owsg(g, 2)
        matrix = prsg_cross_acceptance(g, 2)
        np.testing.assert_allclose(np.diagonal(matrix), 1.0)
        for k in range(3):
            for k2 in range(3):
                assert owsg.verify(k2, owsg.family.state(k)) == pytest.approx(matrix[k2, k], abs=1e-9)

    def test_sizing(self, rng, dimension_cap):
        dimension_cap(16)
        with pytest.raises(SizingError):
            prsg_to_owsg(haar_prsg(2, 2, rng), 3)

    @pytest.mark.parametrize("dim, r", [(2, 1), (4, 2), (8, 3)])
    def test_collision_expectation(self, rng, dim, r):
        estimate = haar_collision_expectation(haar_prsg(4, int(math.log2(dim)), rng), r, 4000, rng)
        assert estimate.expected == pytest.approx(4 / math.comb(dim + r - 1, r))
        assert estimate.expected <= estimate.upper_bound + 1e-12
        assert within_sigmas(estimate.mean, estimate.expected, estimate.standard_error, sigmas=4)


class TestFamilyManifest:
    def test_round_trip_keeps_states(self):
        family = overlap_family(0.3)
        loaded = loads_family(dumps_family(family))
        assert loaded.keys.keys == family.keys.keys
        np.testing.assert_array_equal(loaded.state(1).matrix, family.state(1).matrix)

    def test_malformed(self):
        with pytest.raises(ValueError):
            loads_family('{"keys": [0]}')
