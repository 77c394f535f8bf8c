"""
Test labeled registers, states, POVMs and distances
"""
import math

import numpy as np
import pytest

from qstate import (
    DensityMatrix,
    Povm,
    PureState,
    RegisterShape,
    apply_operator,
    complete_isometry,
    complete_to_unitary,
    conjugate,
    dumps_state,
    embed_operator,
    expectation,
    fidelity,
    haar_random_state,
    loads_matrix,
    loads_state,
    maximally_entangled,
    partial_trace,
    pauli_operator,
    permute,
    psd_sqrt_and_pinv,
    purify,
    random_density_matrix,
    random_unitary,
    tensor,
    tensor_power,
    trace_distance,
)
from utilities import PreconditionError, ShapeError, SizingError

QUBIT = RegisterShape.of(("A", 2))


def plus(label="A"):
    return PureState(RegisterShape.of((label, 2)), [1 / math.sqrt(2), 1 / math.sqrt(2)])


class TestRegisterShape:
    def test_dims_and_labels(self):
        shape = RegisterShape.of(("A", 2), ("B", 3))
        assert shape.labels == ("A", "B")
        assert shape.dim == 6
        assert shape.dim_of("B") == 3
        assert RegisterShape().dim == 1

    def test_duplicate_labels(self):
        with pytest.raises(ShapeError, match="Duplicate"):
            RegisterShape.of(("A", 2), ("A", 2))

    def test_concat_collision(self):
        with pytest.raises(ShapeError):
            QUBIT.concat(QUBIT)

    def test_select_keeps_order(self):
        shape = RegisterShape.of(("A", 2), ("B", 3), ("C", 4))
        assert shape.select(["C", "A"]).labels == ("A", "C")
        with pytest.raises(ShapeError, match="Unknown register"):
            shape.select(["D"])

    def test_tagged(self):
        assert QUBIT.tagged("copy0").labels == ("copy0.A",)


class TestStates:
    def test_density_validation(self):
        with pytest.raises(PreconditionError, match="trace"):
            DensityMatrix(QUBIT, np.eye(2))
        with pytest.raises(PreconditionError, match="positive"):
            DensityMatrix(QUBIT, np.diag([1.5, -0.5]))
        with pytest.raises(ShapeError):
            DensityMatrix(QUBIT, np.eye(3) / 3)

    def test_pure_validation(self):
        with pytest.raises(PreconditionError, match="norm"):
            PureState(QUBIT, [1.0, 1.0])
        with pytest.raises(PreconditionError):
            PureState.normalized(QUBIT, [0.0, 0.0])

    def test_states_are_immutable(self):
        state = plus()
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0

    def test_dimension_cap(self, dimension_cap):
        dimension_cap(8)
        with pytest.raises(SizingError):
            tensor_power(plus(), 4)


class TestPovm:
    def test_effects_must_sum_to_identity(self):
        with pytest.raises(PreconditionError, match="identity"):
            Povm(QUBIT, ((0, np.diag([1.0, 0.0])), (1, np.diag([0.0, 0.5]))))

    def test_probabilities(self, rng):
        povm = Povm(QUBIT, ((0, np.diag([1.0, 0.0])), (1, np.diag([0.0, 1.0]))))
        probabilities = povm.probabilities(plus())
        assert probabilities[0] == pytest.approx(0.5)
        assert povm.effect("missing").sum() == 0
        assert povm.measure(PureState.basis(QUBIT, 1), rng) == 1

    def test_wrong_register(self):
        povm = Povm(QUBIT, ((0, np.eye(2)),))
        with pytest.raises(ShapeError):
            povm.probabilities(DensityMatrix.maximally_mixed(RegisterShape.of(("B", 3))))


class TestTensorAndTrace:
    def test_partial_trace_of_product(self, rng):
        rho = random_density_matrix(RegisterShape.of(("A", 2)), rng)
        sigma = random_density_matrix(RegisterShape.of(("B", 3)), rng)
        joint = tensor(rho, sigma)
        np.testing.assert_allclose(partial_trace(joint, ["A"]).matrix, rho.matrix, atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, ["B"]).matrix, sigma.matrix, atol=1e-12)

    def test_bell_marginal_is_mixed(self):
        bell = maximally_entangled(1)
        np.testing.assert_allclose(partial_trace(bell, ["B"]).matrix, np.eye(2) / 2, atol=1e-12)

    def test_tensor_power_labels(self):
        assert tensor_power(plus(), 2).shape.labels == ("copy0.A", "copy1.A")

    def test_permute(self):
        state = tensor(PureState.basis(QUBIT, 1), PureState.basis(RegisterShape.of(("B", 3)), 2))
        swapped = permute(state, ["B", "A"])
        assert swapped.shape.labels == ("B", "A")
        assert np.argmax(np.abs(swapped.amplitudes)) == 2 * 2 + 1

    def test_purify_marginal(self, rng):
        rho = random_density_matrix(RegisterShape.of(("A", 3)), rng, rank=2)
        purified = purify(rho)
        assert purified.shape.dim_of("anc") == 2
        np.testing.assert_allclose(partial_trace(purified, ["A"]).matrix, rho.matrix, atol=1e-10)


class TestDistances:
    def test_orthogonal_states(self):
        zero, one = PureState.basis(QUBIT, 0), PureState.basis(QUBIT, 1)
        assert trace_distance(zero, one) == pytest.approx(1.0)
        assert fidelity(zero, one) == pytest.approx(0.0)

    def test_fuchs_van_de_graaf(self, rng):
        shape = RegisterShape.of(("A", 3))
        for _ in range(20):
            rho, sigma = random_density_matrix(shape, rng), random_density_matrix(shape, rng)
            distance, value = trace_distance(rho, sigma), fidelity(rho, sigma)
            assert 1 - math.sqrt(value) <= distance + 1e-9
            assert distance <= math.sqrt(1 - value) + 1e-9

    def test_pure_fidelity_matches_mixed_path(self, rng):
        a, b = haar_random_state(4, rng), haar_random_state(4, rng)
        assert fidelity(a, b) == pytest.approx(fidelity(a.density(), b.density()), abs=1e-9)

    def test_psd_sqrt_and_pinv(self):
        matrix = np.diag([4.0, 0.0]).astype(complex)
        sqrt, pinv = psd_sqrt_and_pinv(matrix)
        np.testing.assert_allclose(sqrt, np.diag([2.0, 0.0]))
        np.testing.assert_allclose(pinv, np.diag([0.5, 0.0]))
        with pytest.raises(PreconditionError):
            psd_sqrt_and_pinv(np.diag([1.0, -1.0]))


class TestOperators:
    def test_pauli_operator(self):
        np.testing.assert_allclose(pauli_operator((1,), (1,)), np.array([[0, -1], [1, 0]]))
        assert pauli_operator((0, 1), (1, 0)).shape == (4, 4)
        with pytest.raises(ShapeError):
            pauli_operator((0, 1), (1,))

    def test_random_unitary(self, rng):
        unitary = random_unitary(4, rng)
        np.testing.assert_allclose(unitary.conj().T @ unitary, np.eye(4), atol=1e-12)

    def test_complete_to_unitary(self, rng):
        vector = haar_random_state(3, rng).amplitudes
        unitary = complete_to_unitary(vector)
        np.testing.assert_allclose(unitary[:, 0], vector, atol=1e-12)
        np.testing.assert_allclose(unitary.conj().T @ unitary, np.eye(3), atol=1e-12)
        with pytest.raises(PreconditionError):
            complete_isometry(np.ones((3, 2)))

    def test_embed_matches_apply(self, rng):
        shape = RegisterShape.of(("A", 2), ("B", 3))
        state = PureState(shape, haar_random_state(6, rng).amplitudes)
        operator = random_unitary(3, rng)
        applied = apply_operator(state, operator, ["B"])
        np.testing.assert_allclose(
            applied.amplitudes, embed_operator(shape, operator, ["B"]) @ state.amplitudes, atol=1e-12
        )

    def test_conjugate_preserves_trace(self, rng):
        rho = random_density_matrix(QUBIT, rng)
        rotated = conjugate(rho, random_unitary(2, rng))
        assert np.trace(rotated.matrix).real == pytest.approx(1.0)
        assert expectation(np.eye(2), rotated) == pytest.approx(1.0)


class TestSerialization:
    def test_state_text(self, rng):
        rho = random_density_matrix(RegisterShape.of(("A", 2), ("B", 2)), rng)
        loaded = loads_state(dumps_state(rho), ["A", "B"])
        np.testing.assert_array_equal(loaded.matrix, rho.matrix)
        assert isinstance(loads_state(dumps_state(plus())), PureState)

    def test_one_dimensional_kind_kept(self):
        shape = RegisterShape.of(("S", 1))
        rho = loads_state(dumps_state(DensityMatrix(shape, [[1.0]])), ["S"])
        psi = loads_state(dumps_state(PureState(shape, [1.0])), ["S"])
        assert isinstance(rho, DensityMatrix)
        assert isinstance(psi, PureState)

    def test_missing_kind_header(self):
        with pytest.raises(ValueError, match="kind"):
            loads_state("dims: 2\n1,0 0,0\n")
        with pytest.raises(ValueError, match="one amplitude row"):
            loads_state("kind: pure\ndims: 2\n1,0 0,0\n0,0 1,0\n")

    def test_malformed(self):
        with pytest.raises(ValueError, match="dims"):
            loads_matrix("1,0 0,0")
        with pytest.raises(ValueError, match="Malformed"):
            loads_matrix("dims: 2\n1,0 x,y\n")
