"""
Canonical quantum commitments, EFI pairs and SV-SI-OWSGs.

A canonical commitment is a pair of unitaries (Q₀, Q₁) on a commitment register C and a reveal register R.
Hiding is the trace distance of the two C-marginals; statistical binding is the Uhlmann root-fidelity of the
same marginals, attained by an attack unitary on R read off the polar decomposition.
"""
# pylint: disable=too-many-arguments,too-many-locals,invalid-name

import math
import warnings
from dataclasses import dataclass, field
from functools import wraps
from itertools import combinations
from typing import Dict, Hashable, Optional, Tuple

import numpy as np

from discriminate import Ensemble, EnsembleItem, gram_pgm_success, naimark_isometry, pgm
from owsg import KeyedStateFamily, family_from_states
from qpotp import EfiPair
from qstate import (
    PureState,
    RegisterShape,
    apply_operator,
    complete_isometry,
    complete_to_unitary,
    expectation,
    fidelity,
    partial_trace,
    permute,
    random_unitary,
    tensor,
    tensor_all,
    tensor_power,
    trace_distance,
)
from utilities import (
    TOLERANCE,
    KeyDistribution,
    PreconditionError,
    ProvenanceError,
    ShapeError,
    SizingError,
    all_bit_strings,
    check_dimension,
    get_dimension_cap,
)

KEY_REGISTER = "key"
COPY_REGISTER = "R3"


@dataclass(frozen=True)
class CommitmentProvenance:
    """How `commitment_from_svsi` laid out its registers."""

    family: KeyedStateFamily
    t: int
    state_labels: Tuple[str, ...]
    copy_label: str = COPY_REGISTER


@dataclass(frozen=True, eq=False)
class CanonicalCommitment:
    """
    Unitaries Q₀, Q₁ on `shape`; `commit_labels` name C and every other register is R.

    Raises:
        ShapeError: If a commit label is unknown or a unitary has the wrong size.
        PreconditionError: If Q₀ or Q₁ is not unitary.
    """

    shape: RegisterShape
    commit_labels: Tuple[str, ...]
    q0: np.ndarray
    q1: np.ndarray
    provenance: Optional[CommitmentProvenance] = None
    name: str = "commitment"

    def __post_init__(self):
        commit_labels = tuple(self.commit_labels)
        for label in commit_labels:
            self.shape.index(label)
        if len(set(commit_labels)) != len(commit_labels):
            raise ShapeError(f"Commit labels {commit_labels} repeat a register.")
        object.__setattr__(self, "commit_labels", commit_labels)
        dim = self.shape.dim
        for bit, unitary in ((0, self.q0), (1, self.q1)):
            unitary = np.asarray(unitary, dtype=complex)
            if unitary.shape != (dim, dim):
                raise ShapeError(f"Q{bit} has shape {unitary.shape}, expected {(dim, dim)}.")
            if np.max(np.abs(unitary.conj().T @ unitary - np.eye(dim))) > TOLERANCE:
                raise PreconditionError(f"Q{bit} is not unitary.")
            object.__setattr__(self, f"q{bit}", unitary)

    @property
    def reveal_labels(self):
        return tuple(label for label in self.shape.labels if label not in self.commit_labels)

    def committed(self, b):
        """Q_b|0⟩ on C and R."""
        unitary = self.q0 if b == 0 else self.q1
        return PureState.unchecked(self.shape, unitary[:, 0])

    def commit_marginal(self, b):
        return partial_trace(self.committed(b), self.commit_labels)


def hiding_distance(c):
    """Trace distance between the two C-marginals."""
    return trace_distance(c.commit_marginal(0), c.commit_marginal(1))


def unbounded_binding_advantage(c):
    """max over attacks U on R∪Z and advice τ of ‖⟨0|Q₁†(I_C⊗U)Q₀|0⟩|τ⟩‖, which is √F of the C-marginals."""
    return math.sqrt(fidelity(c.commit_marginal(0), c.commit_marginal(1)))


def binding_overlap(c, attack, tau):
    """
    ‖(⟨0|Q₁† ⊗ I_Z)(I_C ⊗ U_{R,Z})(Q₀|0⟩ ⊗ |τ⟩)‖ for an attack unitary on R followed by τ's registers.

    Raises:
        ShapeError: If τ reuses a commitment label or U does not fit R∪Z.
    """
    state = tensor(c.committed(0), tau)
    labels = list(c.reveal_labels) + list(tau.shape.labels)
    dim = int(np.prod([state.shape.dim_of(label) for label in labels], dtype=np.int64))
    attack = np.asarray(attack, dtype=complex)
    if attack.shape != (dim, dim):
        raise ShapeError(f"Attack unitary has shape {attack.shape}, R∪Z needs {(dim, dim)}.")
    moved = apply_operator(state, attack, labels)
    block = moved.amplitudes.reshape(c.shape.dim, tau.dim)
    return float(np.linalg.norm(c.committed(1).amplitudes.conj() @ block))


@dataclass(frozen=True, eq=False)
class BindingAttack:
    unitary: np.ndarray
    tau: PureState
    value: float


def trivial_advice(label="Z"):
    return PureState.basis(RegisterShape.of((label, 1)), 0)


def optimal_binding_attack(c):
    """
    The Uhlmann-optimal U on R: with A, B the C×R coefficient matrices of Q₀|0⟩, Q₁|0⟩ and B†A = WΣV†,
    U = (VW†)ᵀ reaches Tr Σ = √F.
    """
    order = list(c.commit_labels) + list(c.reveal_labels)
    commit_dim = int(np.prod([c.shape.dim_of(label) for label in c.commit_labels], dtype=np.int64))
    a = permute(c.committed(0), order).amplitudes.reshape(commit_dim, -1)
    b = permute(c.committed(1), order).amplitudes.reshape(commit_dim, -1)
    w, singular_values, vh = np.linalg.svd(b.conj().T @ a)
    return BindingAttack(w.conj() @ vh.conj(), trivial_advice(), float(np.sum(singular_values)))


def random_commitment(rng, commit_dims=(2,), reveal_dims=(2,)):
    """Haar-random Q₀, Q₁ on registers C0.. and R0.."""
    shape = RegisterShape(
        tuple((f"C{position}", dim) for position, dim in enumerate(commit_dims))
        + tuple((f"R{position}", dim) for position, dim in enumerate(reveal_dims))
    )
    check_dimension(shape.dim, "Random commitment")
    return CanonicalCommitment(
        shape,
        tuple(f"C{position}" for position in range(len(commit_dims))),
        random_unitary(shape.dim, rng),
        random_unitary(shape.dim, rng),
        name="random",
    )


@dataclass(frozen=True)
class TensorPowerCheck:
    """Distance after `copies` copies against 1 − exp(−copies·‖ρ−σ‖₁/4)."""

    copies: int
    distance: float
    bound: float

    @property
    def holds(self):
        return self.distance >= self.bound - TOLERANCE


def tensor_power_bound(single_distance, copies):
    return 1.0 - math.exp(-copies * 2.0 * single_distance / 4.0)


def efi_amplify(e, n):
    """
    The pair (ρ₀^{⊗n}, ρ₁^{⊗n}).

    Raises:
        SizingError: If the n-fold state exceeds the dimension cap.
    """
    if n < 1:
        raise PreconditionError(f"Copy count must be at least 1, got {n}.")
    if n == 1:
        return e
    check_dimension(e.rho0.dim**n, f"{n}-fold {e.name}")
    return EfiPair(tensor_power(e.rho0, n), tensor_power(e.rho1, n), name=f"{e.name}^{n}")


def efi_amplification_check(e, n):
    amplified = efi_amplify(e, n)
    return TensorPowerCheck(
        n,
        trace_distance(amplified.rho0, amplified.rho1),
        tensor_power_bound(trace_distance(e.rho0, e.rho1), n),
    )


def min_pairwise_distance(family):
    """min over distinct keys of ½‖φ_k − φ_k'‖₁; 1 for a single-key family."""
    keys = family.keys.keys
    if len(keys) < 2:
        return 1.0
    return min(trace_distance(family.state(key), family.state(other)) for key, other in combinations(keys, 2))


@dataclass(frozen=True, eq=False)
class SvSiOwsg:
    """
    A purified keyed family whose distinct keys give states at least 1/p apart.

    Raises:
        PreconditionError: Without purification data, or if some pair is closer than 1/p.
    """

    family: KeyedStateFamily
    p: float
    min_distance: float = field(init=False)

    def __post_init__(self):
        if self.family.purification is None:
            raise PreconditionError(f"Family {self.family.name} needs purification data.")
        distance = min_pairwise_distance(self.family)
        if distance < 1.0 / self.p - TOLERANCE:
            raise PreconditionError(
                f"Family {self.family.name} has keys {distance:.6g} apart, below 1/p = {1.0 / self.p:.6g}."
            )
        object.__setattr__(self, "min_distance", distance)

    @classmethod
    def measured(cls, family):
        """Use p = 1/(measured minimum distance)."""
        distance = min_pairwise_distance(family)
        if distance <= TOLERANCE:
            raise PreconditionError(f"Family {family.name} has two indistinguishable keys.")
        return cls(family, 1.0 / distance)

    @property
    def keys(self):
        return self.family.keys

    @property
    def key_bits(self):
        return max(1, math.ceil(math.log2(len(self.keys))))


def svsi_from_efi(e, kappa):
    """
    φ_k = ⊗ᵢ ρ_{kᵢ} over uniform k ∈ {0,1}^κ, purified slot by slot.

    Raises:
        SizingError: If ρ^{⊗κ} exceeds the dimension cap.
        PreconditionError: If ρ₀ = ρ₁.
    """
    if kappa < 1:
        raise PreconditionError(f"Key length must be at least 1, got {kappa}.")
    check_dimension(e.rho0.dim**kappa, f"SV-SI-OWSG from {e.name}")
    base = family_from_states({0: e.rho0, 1: e.rho1}, name=e.name)

    def state_gen(key):
        return tensor_all([base.state(bit).tagged(f"slot{position}") for position, bit in enumerate(key)])

    def purification(key):
        return tensor_all([base.purified(bit).tagged(f"slot{position}") for position, bit in enumerate(key)])

    family = KeyedStateFamily(
        KeyDistribution.uniform(all_bit_strings(kappa)), state_gen, purification, name=f"{e.name}[{kappa}]"
    )
    return SvSiOwsg.measured(family)


def fidelity_product_residual(f, e):
    """max over key pairs of |F(φ_k, φ_k') − ∏ᵢ F(ρ_{kᵢ}, ρ_{k'ᵢ})|."""
    single = {(a, b): fidelity(e.state(a), e.state(b)) for a in (0, 1) for b in (0, 1)}
    residual = 0.0
    for key, other in combinations(f.keys.keys, 2):
        expected = math.prod(single[pair] for pair in zip(key, other))
        residual = max(residual, abs(fidelity(f.family.state(key), f.family.state(other)) - expected))
    return residual


def _power_family(family, copies):
    purification = None
    if family.purification is not None:

        def purification(key):
            return tensor_power(family.purified(key), copies)

    return KeyedStateFamily(
        family.keys,
        lambda key: tensor_power(family.output(key), copies),
        purification,
        family.key_junk,
        name=f"{family.name}^{copies}",
    )


@dataclass(frozen=True, eq=False)
class SvsiAmplification:
    """Amplified family with the nominal 2pq copy count, the count actually used and the pairwise checks."""

    owsg: SvSiOwsg
    nominal_copies: int
    copies: int
    target: float
    checks: Tuple[Tuple[Hashable, Hashable, TensorPowerCheck], ...]

    @property
    def min_distance(self):
        return self.owsg.min_distance

    @property
    def holds(self):
        return all(check.holds for _, _, check in self.checks)

    @property
    def reaches_target(self):
        return self.min_distance >= self.target - TOLERANCE


def _separated(family, copies, target):
    return min_pairwise_distance(_power_family(family, copies)) >= target - TOLERANCE


def svsi_amplify(f, q, copies=None):
    """
    φ_k^{⊗c}: with `copies` unset, c is the smallest count reaching 1 − 2^{-q}, at most ⌈2pq⌉ and within
    the dimension cap.

    Raises:
        SizingError: If an explicit copy count exceeds the dimension cap.
    """
    nominal = math.ceil(2 * f.p * q)
    target = 1.0 - 2.0 ** (-q)
    dim = f.family.purified(f.keys.keys[0]).dim
    if copies is None:
        copies = 1
        while copies < nominal and not _separated(f.family, copies, target):
            if dim ** (copies + 1) > get_dimension_cap():
                warnings.warn(f"Stopping {f.family.name} amplification at {copies} copies (dimension cap).")
                break
            copies += 1
    if copies < 1:
        raise PreconditionError(f"Copy count must be at least 1, got {copies}.")
    check_dimension(dim**copies, f"{copies} copies of {f.family.name}")
    family = f.family if copies == 1 else _power_family(f.family, copies)
    checks = tuple(
        (
            key,
            other,
            TensorPowerCheck(
                copies,
                trace_distance(family.state(key), family.state(other)),
                tensor_power_bound(trace_distance(f.family.state(key), f.family.state(other)), copies),
            ),
        )
        for key, other in combinations(f.keys.keys, 2)
    )
    return SvsiAmplification(SvSiOwsg.measured(family), nominal, copies, target, checks)


def identification_distance_bound(error, t):
    """A t-copy identifier with per-key error ε forces single-copy distance at least (1 − 2ε)/t."""
    return (1.0 - 2.0 * error) / t


@dataclass(frozen=True)
class IdentificationReport:
    """Per-key identification error ε_k of the t-copy square-root measurement."""

    t: int
    errors: Dict[Hashable, float]
    target: float
    min_distance: float

    @property
    def max_error(self):
        return max(self.errors.values())

    @property
    def meets_target(self):
        return 1.0 - self.max_error >= self.target - TOLERANCE

    @property
    def converse_bound(self):
        return identification_distance_bound(self.max_error, self.t)

    @property
    def converse_holds(self):
        return self.min_distance >= self.converse_bound - TOLERANCE


def _copies_ensemble(family, t):
    return Ensemble(
        tuple(
            EnsembleItem(key, probability, tensor_power(family.state(key), t))
            for key, probability in family.keys.items()
        )
    )


def key_identification_povm(f, t):
    """
    Square-root measurement identifying k from φ_k^{⊗t}.

    Pure families beyond the dimension cap are evaluated through the Gram matrix and get no POVM.

    Returns:
        tuple: (Povm or None, IdentificationReport).

    Raises:
        SizingError: For a mixed family whose t-copy state exceeds the cap.
    """
    if t < 1:
        raise PreconditionError(f"Copy count must be at least 1, got {t}.")
    family = f.family
    target = 1.0 - 2.0 ** (-f.key_bits + 1)
    if family.output_shape.dim**t > get_dimension_cap() and family.is_pure:
        keys = family.keys
        success = gram_pgm_success([family.vector(key) for key in keys], keys.probabilities, t)
        errors = {key: 1.0 - float(value) for key, value in zip(keys, success)}
        return None, IdentificationReport(t, errors, target, f.min_distance)
    check_dimension(family.output_shape.dim**t, f"{t} copies of {family.name}")
    ensemble = _copies_ensemble(family, t)
    povm = pgm(ensemble, weighted=True)
    errors = {item.label: 1.0 - expectation(povm.effect(item.label), item.state) for item in ensemble.items}
    return povm, IdentificationReport(t, errors, target, f.min_distance)


def _branch(family, t, key, copy_index, order):
    """|k⟩|μ_k⟩ ⊗ |ψ_k⟩^{⊗t} ⊗ |copy_index⟩ with registers in `order`."""
    keys = family.keys
    key_shape = RegisterShape.of((KEY_REGISTER, len(keys)))
    parts = [
        PureState.basis(key_shape, keys.index(key)),
        family.junk(key),
        tensor_power(family.purified(key), t),
        PureState.basis(RegisterShape.of((COPY_REGISTER, len(keys))), copy_index),
    ]
    return permute(tensor_all(parts), order)


def commitment_from_svsi(f, t):
    """
    Q_b|0⟩ = Σ_k √Pr[k] |k⟩|μ_k⟩_{C₁} |ψ_k⟩^{⊗t}_{C₂,R₂} |b·k⟩_{R₃}, each completed to a unitary.

    C₁ holds the key and its junk, C₂ the purifying halves of the t copies, R₂ the t copies of φ_k and R₃
    either |0⟩ or a copy of the key index.

    Raises:
        PreconditionError: Without purification data.
        SizingError: If the registers exceed the dimension cap.
    """
    family = f.family
    keys = family.keys
    first = keys.keys[0]
    output_labels = family.output_shape.labels
    purifying = [label for label in family.purified(first).shape.labels if label not in output_labels]
    junk_labels = list(family.junk(first).shape.labels)
    copies = [f"copy{j}" for j in range(t)]
    state_labels = tuple(f"{copy}.{label}" for copy in copies for label in output_labels)
    purifying_labels = [f"{copy}.{label}" for copy in copies for label in purifying]
    commit_labels = [KEY_REGISTER] + junk_labels + purifying_labels
    order = commit_labels + list(state_labels) + [COPY_REGISTER]
    needed = len(keys) ** 2 * family.junk(first).dim * family.purified(first).dim ** t
    check_dimension(needed, f"Commitment from {family.name}")

    vectors = []
    shape = None
    for b in (0, 1):
        total = None
        for position, (key, probability) in enumerate(keys.items()):
            branch = _branch(family, t, key, position if b else 0, order)
            shape = branch.shape
            term = np.sqrt(probability) * branch.amplitudes
            total = term if total is None else total + term
        vectors.append(total)
    return CanonicalCommitment(
        shape,
        tuple(commit_labels),
        complete_to_unitary(vectors[0]),
        complete_to_unitary(vectors[1]),
        provenance=CommitmentProvenance(family, t, state_labels),
        name=f"commit[{family.name},{t}]",
    )


def _provenance(c):
    if c.provenance is None:
        raise ProvenanceError(f"Commitment {c.name} was not built from an SV-SI-OWSG.")
    return c.provenance


def _naimark_unitary(povm):
    """Unitary on (system, outcome) extending the Naimark isometry on inputs |x⟩|0⟩."""
    isometry = naimark_isometry(povm)
    outcomes = len(povm.effects)
    dim = isometry.shape[0]
    full = complete_isometry(isometry)
    inputs = [x * outcomes for x in range(povm.shape.dim)]
    rest = [index for index in range(dim) if index % outcomes]
    unitary = np.empty((dim, dim), dtype=complex)
    unitary[:, inputs] = full[:, : len(inputs)]
    unitary[:, rest] = full[:, len(inputs) :]
    return unitary


def _copy_unitary(povm, keys):
    """|o⟩_Z|r⟩_{R₃} ↦ |o⟩_Z|r + index(o) mod K⟩_{R₃}; outcomes that are not keys leave R₃ alone."""
    count = len(keys)
    outcomes = povm.labels
    unitary = np.zeros((len(outcomes) * count,) * 2, dtype=complex)
    for position, label in enumerate(outcomes):
        shift = keys.index(label) if label in keys else 0
        for r in range(count):
            unitary[position * count + (r + shift) % count, position * count + r] = 1.0
    return unitary


@dataclass(frozen=True)
class HidingWitness:
    """
    overlap: ⟨0|Q₁†⟨0|_Z W Q₀|0⟩|0⟩_Z with W = U†VU; expected_overlap: Σ_k Pr[k](1 − ε_k).
    """

    overlap: float
    expected_overlap: float
    errors: Dict[Hashable, float]
    hiding_distance: float

    @property
    def bound(self):
        return math.sqrt(max(0.0, 1.0 - self.overlap**2))

    @property
    def holds(self):
        matches = abs(self.overlap - self.expected_overlap) <= TOLERANCE
        return matches and self.hiding_distance <= self.bound + TOLERANCE


def hiding_witness(c, f):
    """
    Build W from the Naimark dilation U of the t-copy key identification and the copy V into R₃.

    Raises:
        ProvenanceError: If `c` was not built by `commitment_from_svsi`.
    """
    provenance = _provenance(c)
    povm, report = key_identification_povm(f, provenance.t)
    if povm is None:
        raise SizingError(f"Key identification for {f.family.name} has no explicit POVM within the cap.")
    identify = _naimark_unitary(povm)
    copy = _copy_unitary(povm, f.keys)
    outcome = RegisterShape.of(("Z", len(povm.effects)))
    identify_labels = list(provenance.state_labels) + ["Z"]

    state = tensor(c.committed(0), PureState.basis(outcome, 0))
    state = apply_operator(state, identify, identify_labels)
    state = apply_operator(state, copy, ["Z", provenance.copy_label])
    state = apply_operator(state, identify.conj().T, identify_labels)
    target = tensor(c.committed(1), PureState.basis(outcome, 0))
    overlap = float(np.real(np.vdot(target.amplitudes, state.amplitudes)))
    expected = sum(probability * (1.0 - report.errors[key]) for key, probability in f.keys.items())
    return HidingWitness(overlap, expected, report.errors, hiding_distance(c))


def _copy_register_distribution(c, attack, tau, key):
    provenance = _provenance(c)
    family = provenance.family
    branch = _branch(family, provenance.t, key, 0, list(c.shape.labels))
    state = tensor(branch, tau)
    labels = list(c.reveal_labels) + list(tau.shape.labels)
    moved = apply_operator(state, np.asarray(attack, dtype=complex), labels)
    weights = np.abs(moved.amplitudes.reshape(state.shape.dims)) ** 2
    axis = state.shape.index(provenance.copy_label)
    other_axes = tuple(position for position in range(len(state.shape.dims)) if position != axis)
    marginal = weights.sum(axis=other_axes)
    return {guess: float(marginal[position]) for position, guess in enumerate(family.keys)}


@dataclass(frozen=True)
class BindingInverter:
    """Key guesses from measuring R₃ after the attack on |ψ_k⟩^{⊗t}|0⟩|τ⟩."""

    distributions: Dict[Hashable, Dict[Hashable, float]]
    success: float
    overlap_squared: float

    @property
    def holds(self):
        return self.success >= self.overlap_squared - TOLERANCE


def binding_attack_to_inverter(c, attack, tau):
    """
    Turn a binding attack into a key inverter and evaluate it exactly.

    Raises:
        ProvenanceError: If `c` was not built by `commitment_from_svsi`.
    """
    keys = _provenance(c).family.keys
    distributions = {key: _copy_register_distribution(c, attack, tau, key) for key in keys}
    success = sum(probability * distributions[key][key] for key, probability in keys.items())
    return BindingInverter(distributions, success, binding_overlap(c, attack, tau) ** 2)


@dataclass(frozen=True)
class JensenChain:
    """‖⟨0|Q₁†UQ₀|0⟩|τ⟩‖² against Σ_k Pr[k]‖⟨k|_{R₃}U|ψ_k⟩^{⊗t}|0⟩|τ⟩‖²."""

    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + TOLERANCE


def jensen_chain(c, attack, tau):
    inverter = binding_attack_to_inverter(c, attack, tau)
    return JensenChain(inverter.overlap_squared, inverter.success)


def sv_owsg_ver_canonicalize(raw_ver):
    """Replace a secret verification Ver(k, k') by the equality test k = k'."""

    @wraps(raw_ver)
    def ver(key, candidate):
        return 1.0 if key == candidate else 0.0

    return ver


def secret_verification_success(f, solver, t, ver=None):
    """Σ_k Pr[k] Σ_g Pr[g | φ_k^{⊗t}] Ver(k, g) for a solver with exact answer distributions."""
    ver = ver or sv_owsg_ver_canonicalize(lambda key, candidate: float(key == candidate))
    total = 0.0
    for key, probability in f.keys.items():
        answers = solver.answer_distribution([f.family.state(key)] * t)
        total += probability * sum(weight * ver(key, guess) for guess, weight in answers.items())
    return total
