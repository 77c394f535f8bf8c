"""
Test canonical commitments, EFI amplification, SV-SI-OWSGs and the commitment built from them
"""
import math

import numpy as np
import pytest

from commitefi import (
    CanonicalCommitment,
    SvSiOwsg,
    binding_attack_to_inverter,
    binding_overlap,
    commitment_from_svsi,
    efi_amplification_check,
    efi_amplify,
    fidelity_product_residual,
    hiding_distance,
    hiding_witness,
    identification_distance_bound,
    jensen_chain,
    key_identification_povm,
    min_pairwise_distance,
    optimal_binding_attack,
    random_commitment,
    secret_verification_success,
    sv_owsg_ver_canonicalize,
    svsi_amplify,
    svsi_from_efi,
    tensor_power_bound,
    trivial_advice,
    unbounded_binding_advantage,
)
from owsg import KeyedStateFamily, orthonormal_family, overlap_family
from puzzles import BasisMeasurementSolver
from qpotp import EfiPair
from qstate import DensityMatrix, PureState, RegisterShape, haar_random_state, random_unitary
from utilities import KeyDistribution, PreconditionError, ProvenanceError, ShapeError, SizingError

QUBIT = RegisterShape.of(("S", 2))


@pytest.fixture
def zero_mixed():
    return EfiPair(DensityMatrix.basis(QUBIT, 0), DensityMatrix.maximally_mixed(QUBIT), name="zero-mixed")


class TestCanonicalCommitment:
    def test_validation(self, rng):
        shape = RegisterShape.of(("C", 2), ("R", 2))
        unitary = random_unitary(4, rng)
        with pytest.raises(PreconditionError, match="unitary"):
            CanonicalCommitment(shape, ("C",), unitary, 2 * unitary)
        with pytest.raises(ShapeError):
            CanonicalCommitment(shape, ("X",), unitary, unitary)
        with pytest.raises(ShapeError):
            CanonicalCommitment(shape, ("C",), unitary, np.eye(2))

    def test_reveal_labels(self, rng):
        c = random_commitment(rng, commit_dims=(2, 3), reveal_dims=(2,))
        assert c.commit_labels == ("C0", "C1")
        assert c.reveal_labels == ("R0",)
        assert c.commit_marginal(0).dim == 6


class TestBinding:
    def test_optimal_attack_reaches_sqrt_fidelity(self, rng):
        for _ in range(10):
            c = random_commitment(rng, reveal_dims=(3,))
            attack = optimal_binding_attack(c)
            advantage = unbounded_binding_advantage(c)
            assert attack.value == pytest.approx(advantage, abs=1e-6)
            assert binding_overlap(c, attack.unitary, attack.tau) == pytest.approx(advantage, abs=1e-6)

    def test_random_attacks_never_beat_optimum(self, rng):
        c = random_commitment(rng)
        advantage = unbounded_binding_advantage(c)
        for _ in range(20):
            tau = haar_random_state(2, rng, label="Z")
            assert binding_overlap(c, random_unitary(4, rng), tau) <= advantage + 1e-9

    def test_hiding_and_binding_trade_off(self, rng):
        for _ in range(10):
            c = random_commitment(rng)
            advantage, hiding = unbounded_binding_advantage(c), hiding_distance(c)
            assert 1 - advantage <= hiding + 1e-9
            assert hiding <= math.sqrt(1 - advantage**2) + 1e-9

    def test_attack_size(self, rng):
        c = random_commitment(rng)
        with pytest.raises(ShapeError):
            binding_overlap(c, np.eye(3), trivial_advice())


class TestTensorPowers:
    def test_bound_holds(self, zero_mixed):
        for copies in range(1, 5):
            check = efi_amplification_check(zero_mixed, copies)
            assert check.distance == pytest.approx(1 - 2.0**-copies)
            assert check.holds

    def test_single_copy_is_identity(self, zero_mixed):
        assert efi_amplify(zero_mixed, 1) is zero_mixed
        with pytest.raises(PreconditionError):
            efi_amplify(zero_mixed, 0)

    def test_sizing(self, zero_mixed, dimension_cap):
        dimension_cap(8)
        with pytest.raises(SizingError):
            efi_amplify(zero_mixed, 4)

    def test_bound_value(self):
        assert tensor_power_bound(0.5, 4) == pytest.approx(1 - math.exp(-1))


class TestSvSiOwsg:
    def test_from_efi(self, zero_mixed):
        f = svsi_from_efi(zero_mixed, 2)
        assert len(f.keys) == 4 and f.key_bits == 2
        assert f.min_distance == pytest.approx(0.5)
        assert f.p == pytest.approx(2.0)
        assert fidelity_product_residual(f, zero_mixed) == pytest.approx(0.0, abs=1e-9)

    def test_distance_requirement(self):
        with pytest.raises(PreconditionError, match="below 1/p"):
            SvSiOwsg(overlap_family(0.8), 1.0)
        assert SvSiOwsg(overlap_family(0.8), 2.0).min_distance == pytest.approx(0.6)

    def test_needs_purification(self):
        family = KeyedStateFamily(KeyDistribution.uniform((0, 1)), orthonormal_family(2).output)
        with pytest.raises(PreconditionError, match="purification"):
            SvSiOwsg(family, 1.0)

    def test_indistinguishable_keys(self):
        with pytest.raises(PreconditionError):
            SvSiOwsg.measured(overlap_family(1.0))

    def test_single_key_distance(self):
        family = KeyedStateFamily(KeyDistribution.uniform((0,)), orthonormal_family(2).output)
        assert min_pairwise_distance(family) == 1.0

    def test_amplify_to_target(self, zero_mixed):
        f = svsi_from_efi(zero_mixed, 1)
        amplification = svsi_amplify(f, 2)
        assert amplification.nominal_copies == 8
        assert amplification.copies == 2
        assert amplification.min_distance == pytest.approx(0.75)
        assert amplification.reaches_target and amplification.holds

    def test_explicit_copies(self, zero_mixed):
        amplification = svsi_amplify(svsi_from_efi(zero_mixed, 1), 1, copies=3)
        assert amplification.copies == 3
        assert amplification.min_distance == pytest.approx(0.875)


class TestKeyIdentification:
    def test_orthonormal_family(self):
        f = SvSiOwsg.measured(orthonormal_family(3))
        povm, report = key_identification_povm(f, 1)
        assert povm is not None
        assert report.max_error == pytest.approx(0.0, abs=1e-12)
        assert report.meets_target and report.converse_holds

    def test_gram_path_beyond_cap(self, dimension_cap):
        f = SvSiOwsg.measured(overlap_family(0.6))
        _, exact = key_identification_povm(f, 3)
        dimension_cap(4)
        povm, report = key_identification_povm(f, 3)
        assert povm is None
        assert report.errors == pytest.approx(exact.errors)

    def test_mixed_family_beyond_cap(self, zero_mixed, dimension_cap):
        f = svsi_from_efi(zero_mixed, 1)
        dimension_cap(4)
        with pytest.raises(SizingError):
            key_identification_povm(f, 3)

    def test_distance_bound(self):
        assert identification_distance_bound(0.25, 2) == pytest.approx(0.25)


class TestCommitmentFromSvsi:
    def test_orthonormal_commitment_hides(self):
        f = SvSiOwsg.measured(orthonormal_family(2))
        c = commitment_from_svsi(f, 1)
        assert c.commit_labels[0] == "key"
        assert "R3" in c.reveal_labels
        assert hiding_distance(c) == pytest.approx(0.0, abs=1e-9)
        witness = hiding_witness(c, f)
        assert witness.overlap == pytest.approx(1.0)
        assert witness.holds

    @pytest.mark.parametrize("t", [1, 2])
    def test_overlap_witness(self, t):
        f = SvSiOwsg.measured(overlap_family(0.6))
        c = commitment_from_svsi(f, t)
        witness = hiding_witness(c, f)
        assert witness.overlap == pytest.approx(witness.expected_overlap, abs=1e-9)
        assert witness.holds

    def test_jensen_chain(self, rng):
        f = SvSiOwsg.measured(overlap_family(0.6))
        c = commitment_from_svsi(f, 1)
        reveal_dim = int(np.prod([c.shape.dim_of(label) for label in c.reveal_labels]))
        for _ in range(10):
            tau = haar_random_state(2, rng, label="Z")
            assert jensen_chain(c, random_unitary(reveal_dim * 2, rng), tau).holds

    def test_optimal_attack_gives_inverter(self):
        f = SvSiOwsg.measured(overlap_family(0.6))
        c = commitment_from_svsi(f, 1)
        attack = optimal_binding_attack(c)
        inverter = binding_attack_to_inverter(c, attack.unitary, attack.tau)
        assert inverter.holds
        assert sum(inverter.distributions[0].values()) == pytest.approx(1.0)

    def test_needs_provenance(self, rng):
        c = random_commitment(rng)
        with pytest.raises(ProvenanceError):
            hiding_witness(c, SvSiOwsg.measured(orthonormal_family(2)))
        with pytest.raises(ProvenanceError):
            binding_attack_to_inverter(c, np.eye(2), trivial_advice())

    def test_sizing(self, dimension_cap):
        dimension_cap(16)
        with pytest.raises(SizingError):
            commitment_from_svsi(SvSiOwsg.measured(orthonormal_family(3)), 1)


class TestSecretVerification:
    def test_canonical_ver(self):
        def raw(key, candidate):
            return 0.5

        ver = sv_owsg_ver_canonicalize(raw)
        assert ver.__wrapped__ is raw
        assert ver((0, 1), (0, 1)) == 1.0
        assert ver((0, 1), (1, 1)) == 0.0

    def test_basis_reading_inverts_orthonormal_family(self):
        f = SvSiOwsg.measured(orthonormal_family(3))
        assert secret_verification_success(f, BasisMeasurementSolver(range(3)), 1) == pytest.approx(1.0)

    def test_overlap_family(self):
        f = SvSiOwsg.measured(overlap_family(0.6))
        # Basis reading: key 0 always reads 0, key 1 reads 1 with probability 0.64.
        success = secret_verification_success(f, BasisMeasurementSolver(range(2)), 1)
        assert success == pytest.approx(0.5 * 1.0 + 0.5 * 0.64)
        assert isinstance(f.family.vector(1), PureState)
