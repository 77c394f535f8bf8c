"""
Quantum pseudo one-time pads: the OWSG and EFI constructions, the Pauli twirl and QSKE to QPKE.

Plaintexts and secret keys are bit tuples; decryption is a POVM so every game probability is an exact sum.
"""
# pylint: disable=too-many-arguments,too-many-locals,invalid-name

import operator
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np
from cachetools import LRUCache, cachedmethod

from owsg import KeyedStateFamily, Owsg
from qstate import (
    DensityMatrix,
    Povm,
    RegisterShape,
    conjugate,
    embed_operator,
    expectation,
    maximally_entangled,
    partial_trace,
    pauli_operator,
    tensor,
)
from utilities import (
    KeyDistribution,
    PreconditionError,
    ShapeError,
    all_bit_strings,
    bits,
    bits_to_int,
    check_dimension,
    xor_bits,
)


@dataclass(frozen=True, eq=False)
class QpotpScheme:
    """
    Secret keys of κ bits, plaintexts of ℓ bits, ciphertext states and a decryption POVM per key.
    """

    keys: KeyDistribution
    key_bits: int
    plaintext_bits: int
    enc: Callable
    dec_povm_gen: Callable
    ct_shape: RegisterShape
    qubits_per_bit: int = 1
    correctness_error: float = 0.0
    name: str = "qpotp"
    _povms: LRUCache = field(default_factory=lambda: LRUCache(maxsize=1024), init=False, repr=False)

    @property
    def short_key(self):
        """κ < ℓ, the hypothesis of both constructions."""
        return self.key_bits < self.plaintext_bits

    @property
    def plaintexts(self):
        return all_bit_strings(self.plaintext_bits)

    @cachedmethod(operator.attrgetter("_povms"))
    def dec_povm(self, sk):
        return self.dec_povm_gen(sk)

    def dec(self, sk, ciphertext):
        """Distribution of the decrypted plaintext."""
        return self.dec_povm(sk).probabilities(ciphertext)

    def decrypt_probability(self, sk, ciphertext, plaintext):
        return expectation(self.dec_povm(sk).effect(plaintext), ciphertext)

    def correctness(self):
        """min over x of Σ_sk Pr[sk] Pr[x ← Dec(sk, Enc(sk, x))]."""
        return min(
            sum(
                probability * self.decrypt_probability(sk, self.enc(sk, plaintext), plaintext)
                for sk, probability in self.keys.items()
            )
            for plaintext in self.plaintexts
        )


def toy_qpotp(kappa, ell):
    """
    Classical one-time pad on the first κ plaintext bits, identity on the rest, one qubit per bit.

    Exactly correct and, for κ < ℓ, statistically insecure.
    """
    if kappa < 0 or ell < 1 or kappa > ell:
        raise PreconditionError(f"Need 0 <= kappa <= ell and ell >= 1, got kappa={kappa}, ell={ell}.")
    check_dimension(2**ell, "Toy ciphertext")
    shape = RegisterShape(tuple((f"ct{position}", 2) for position in range(ell)))
    padding = (0,) * (ell - kappa)

    def enc(sk, plaintext):
        index = bits_to_int(xor_bits(tuple(plaintext), tuple(sk) + padding))
        return DensityMatrix.basis(shape, index)

    def dec_povm_gen(sk):
        effects = []
        for plaintext in all_bit_strings(ell):
            index = bits_to_int(xor_bits(plaintext, tuple(sk) + padding))
            effect = np.zeros((shape.dim, shape.dim), dtype=complex)
            effect[index, index] = 1.0
            effects.append((plaintext, effect))
        return Povm.unchecked(shape, effects)

    return QpotpScheme(
        KeyDistribution.uniform(all_bit_strings(kappa)),
        kappa,
        ell,
        enc,
        dec_povm_gen,
        shape,
        name=f"toy[{kappa},{ell}]",
    )


def owsg_from_qpotp(s):
    """
    k = (sk, x) with x uniform, φ_k = ct_{sk,x} ⊗ |x⟩⟨x|, and Ver(k') accepts iff Dec(sk', ct) = x' = x.
    """
    message_shape = RegisterShape.of(("x", 2**s.plaintext_bits))
    check_dimension(s.ct_shape.dim * message_shape.dim, f"OWSG from {s.name}")
    keys = KeyDistribution.product([s.keys, KeyDistribution.uniform(s.plaintexts)])

    def state_gen(key):
        sk, plaintext = key
        return tensor(s.enc(sk, plaintext), DensityMatrix.basis(message_shape, bits_to_int(plaintext)))

    def effect_gen(key):
        sk, plaintext = key
        register = np.zeros((message_shape.dim, message_shape.dim), dtype=complex)
        register[bits_to_int(plaintext), bits_to_int(plaintext)] = 1.0
        return np.kron(s.dec_povm(sk).effect(plaintext), register)

    family = KeyedStateFamily(keys, state_gen, name=f"ct[{s.name}]")
    return Owsg(family, effect_gen, s.correctness_error, name=f"owsg[{s.name}]")


class FixedKeyAdversary:
    """Always names `key`."""

    def __init__(self, key):
        self.key = tuple(key)

    def key_distribution(self, scheme, ciphertext, x0):
        return {self.key: 1.0}


class UniformKeyAdversary:
    """Names a uniformly random key."""

    def key_distribution(self, scheme, ciphertext, x0):
        weight = 1.0 / len(scheme.keys)
        return {key: weight for key in scheme.keys}


class DecodingAdversary:
    """
    Reads the toy ciphertext and names the key that decrypts it to x0 whenever one exists.

    On `toy_qpotp` this meets the 2^κ/2^ℓ bound with equality.
    """

    def key_distribution(self, scheme, ciphertext, x0):
        observed = bits(int(np.argmax(np.real(np.diagonal(ciphertext.matrix)))), scheme.plaintext_bits)
        pad = xor_bits(observed, tuple(x0))
        if any(pad[scheme.key_bits :]):
            return {scheme.keys.keys[0]: 1.0}
        return {pad[: scheme.key_bits]: 1.0}


@dataclass(frozen=True)
class WrongMessageBound:
    """
    lhs: Pr[x0 ← Dec(sk', ct_{sk,x1})] averaged over x0, x1, sk with sk' chosen by the adversary.
    adversary_free: the same sum with the adversary's weight dropped (summed over every sk').
    rhs: 2^κ/2^ℓ.
    """

    lhs: float
    adversary_free: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 1e-12 and self.adversary_free <= self.rhs + 1e-12


def wrong_message_bound_check(s, adversary):
    """
    Exact evaluation of the wrong-message probability chain for a key-choosing adversary.

    Raises:
        PreconditionError: Unless κ < ℓ.
    """
    if not s.short_key:
        raise PreconditionError(
            f"The wrong-message bound needs kappa < ell; got {s.key_bits} >= {s.plaintext_bits}."
        )
    plaintexts = s.plaintexts
    scale = 1.0 / len(plaintexts) ** 2
    lhs = 0.0
    adversary_free = 0.0
    for x0, x1 in product(plaintexts, repeat=2):
        for sk, probability in s.keys.items():
            ciphertext = s.enc(sk, x1)
            for guess, weight in adversary.key_distribution(s, ciphertext, x0).items():
                lhs += scale * probability * weight * s.decrypt_probability(guess, ciphertext, x0)
            adversary_free += scale * probability * sum(
                s.decrypt_probability(guess, ciphertext, x0) for guess in s.keys
            )
    return WrongMessageBound(lhs, adversary_free, 2.0**s.key_bits / 2.0**s.plaintext_bits)


def pauli_twirl(rho):
    """(1/4ⁿ) Σ_{x,z} X^x Z^z ρ (X^x Z^z)† on an n-qubit state; the result is I/2ⁿ."""
    dim = rho.dim
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise ShapeError(f"Pauli twirl needs a qubit register, got dimension {dim}.")
    total = np.zeros((dim, dim), dtype=complex)
    for x_bits in all_bit_strings(n):
        for z_bits in all_bit_strings(n):
            pauli = pauli_operator(x_bits, z_bits)
            total += pauli @ rho.matrix @ pauli.conj().T
    return DensityMatrix.unchecked(rho.shape, total / 4**n)


@dataclass(frozen=True, eq=False)
class EfiPair:
    """Two states on one shape, indexed by a bit."""

    rho0: DensityMatrix
    rho1: DensityMatrix
    name: str = "efi"

    def __post_init__(self):
        if self.rho0.shape.dims != self.rho1.shape.dims:
            raise ShapeError("Both EFI states must share one shape.")

    def state(self, b):
        return self.rho0 if b == 0 else self.rho1


def _payloads(n):
    psi = maximally_entangled(n).density()
    zero = np.zeros((2**n, 2**n), dtype=complex)
    zero[0, 0] = 1.0
    mixed = DensityMatrix.unchecked(psi.shape, np.kron(zero, np.eye(2**n) / 2**n))
    return psi, mixed


def _efi_states(s, n, hybrid):
    if s.plaintext_bits != 2 * n:
        raise PreconditionError(f"EFI construction needs ell = 2n; got ell={s.plaintext_bits}, n={n}.")
    check_dimension(s.ct_shape.dim * 4**n, f"EFI from {s.name}")
    entangled, product_payload = _payloads(n)
    zero = (0,) * (2 * n)
    states = []
    for payload in (entangled, product_payload):
        total = np.zeros((s.ct_shape.dim * 4**n,) * 2, dtype=complex)
        for sk, probability in s.keys.items():
            for x_bits in all_bit_strings(n):
                for z_bits in all_bit_strings(n):
                    ciphertext = s.enc(sk, zero if hybrid else x_bits + z_bits)
                    padded = conjugate(
                        payload, embed_operator(payload.shape, pauli_operator(x_bits, z_bits), ["A"])
                    )
                    total += probability * np.kron(ciphertext.matrix, padded.matrix)
        shape = s.ct_shape.concat(entangled.shape)
        states.append(DensityMatrix.unchecked(shape, total / 4**n))
    return EfiPair(states[0], states[1], name=f"efi[{s.name}]{'-hybrid' if hybrid else ''}")


def efi_from_qpotp(s, n):
    """
    ρ_b = 4^{-n} Σ_{sk,x,z} Pr[sk] ct_{sk,(x,z)} ⊗ (X^x Z^z ⊗ I) τ_b (X^x Z^z ⊗ I)† with τ_0 = |Ψ⟩⟨Ψ| and
    τ_1 = |0ⁿ⟩⟨0ⁿ| ⊗ I/2ⁿ, payload registers "A" and "B".

    Raises:
        PreconditionError: Unless ℓ = 2n.
        SizingError: If the pair exceeds the dimension cap.
    """
    return _efi_states(s, n, hybrid=False)


def efi_hybrids(s, n):
    """The hybrid pair with every ciphertext replaced by ct_{sk,(0ⁿ,0ⁿ)}; its two states coincide."""
    return _efi_states(s, n, hybrid=True)


def payload_marginal(rho):
    """Trace out the ciphertext, keeping the payload registers A and B."""
    return partial_trace(rho, ["A", "B"])


@dataclass(frozen=True, eq=False)
class QpkeScheme:
    """pk = (ct_0, ct_1); encrypting bit x hands out the ct_x slot."""

    base: QpotpScheme

    @property
    def keys(self):
        return self.base.keys

    def pk_gen(self, sk):
        return tensor(self.base.enc(sk, (0,)).tagged("ct0"), self.base.enc(sk, (1,)).tagged("ct1"))

    def encrypt(self, pk, bit):
        slot = f"ct{bit}"
        labels = [label for label in pk.shape.labels if label.startswith(f"{slot}.")]
        return partial_trace(pk, labels).with_shape(self.base.ct_shape)

    def dec(self, sk, ciphertext):
        return self.base.dec(sk, ciphertext)

    def correctness(self):
        return min(
            sum(
                probability * self.base.decrypt_probability(sk, self.encrypt(self.pk_gen(sk), bit), (bit,))
                for sk, probability in self.keys.items()
            )
            for bit in (0, 1)
        )


def qpke_from_qske(s):
    """
    Public-key encryption with quantum public keys from a one-bit secret-key scheme.

    Raises:
        PreconditionError: Unless the scheme encrypts single bits.
    """
    if s.plaintext_bits != 1:
        raise PreconditionError(f"QPKE construction needs one-bit messages, got {s.plaintext_bits} bits.")
    return QpkeScheme(s)
