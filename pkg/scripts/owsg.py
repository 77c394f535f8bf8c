"""
One-way state generators, their parallel repetition and puzzle view, and the PRSG r-copy construction.
"""
# pylint: disable=too-many-arguments,invalid-name

import json
import math
import operator
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Hashable, Optional

import numpy as np
from cachetools import LRUCache, cachedmethod
from scipy.special import comb

from puzzles import WeaklyVerifiablePuzzle
from qstate import (
    PureState,
    RegisterShape,
    as_density,
    complete_to_unitary,
    dumps_state,
    expectation,
    haar_random_state,
    haar_random_states,
    hermitize,
    loads_state,
    partial_trace,
    tensor,
    tensor_all,
    tensor_power,
)
from utilities import (
    TOLERANCE,
    KeyDistribution,
    PreconditionError,
    ShapeError,
    check_dimension,
    mean_and_standard_error,
)

TRIVIAL_JUNK = PureState.unchecked(RegisterShape.of(("junk", 1)), np.ones(1))
TRIVIAL_ANCILLA = PureState.unchecked(RegisterShape.of(("anc", 1)), np.ones(1))


def _trivial_junk(_key):
    return TRIVIAL_JUNK


def _canonical_purification(state):
    """√λ_a |a⟩_anc |e_a⟩ over the full eigenbasis, ancilla first, ancilla dimension = state dimension."""
    if isinstance(state, PureState):
        return tensor(TRIVIAL_ANCILLA, state)
    eigenvalues, vectors = np.linalg.eigh(hermitize(state.matrix))
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    amplitudes = (vectors * roots).T.reshape(-1)
    shape = RegisterShape.of(("anc", state.dim)).concat(state.shape)
    return PureState.unchecked(shape, amplitudes / np.linalg.norm(amplitudes))


@dataclass(frozen=True, eq=False)
class KeyedStateFamily:
    """
    Keys with exact probabilities and a state per key, optionally with purification data.

    `purification(k)` is a pure state on (A..., B...) whose marginal on the output registers is φ_k, and
    `key_junk(k)` is the |μ_k⟩ carried next to the key in U|0⟩ = Σ_k √Pr[k] |k⟩|μ_k⟩.
    """

    keys: KeyDistribution
    state_gen: Callable[[Hashable], object]
    purification: Optional[Callable[[Hashable], PureState]] = None
    key_junk: Callable[[Hashable], PureState] = _trivial_junk
    name: str = "family"
    _outputs: LRUCache = field(default_factory=lambda: LRUCache(maxsize=4096), init=False, repr=False)
    _purified: LRUCache = field(default_factory=lambda: LRUCache(maxsize=4096), init=False, repr=False)

    def __post_init__(self):
        shapes = {self.output(key).shape.dims for key in self.keys}
        if len(shapes) != 1:
            raise ShapeError(f"Family {self.name} produces states of several shapes: {sorted(shapes)}.")
        if self.purification is None:
            return
        for key in self.keys:
            reduced = partial_trace(self.purified(key), self.output_shape.labels)
            if np.max(np.abs(reduced.matrix - self.state(key).matrix)) > TOLERANCE:
                raise PreconditionError(f"Purification of key {key!r} does not reduce to its state.")

    @cachedmethod(operator.attrgetter("_outputs"))
    def output(self, key):
        """Raw output of the generator (PureState or DensityMatrix)."""
        return self.state_gen(key)

    def state(self, key):
        return as_density(self.output(key))

    def vector(self, key):
        """The pure output |φ_k⟩; a clearly mixed output is a precondition error."""
        output = self.output(key)
        if isinstance(output, PureState):
            return output
        if output.purity() < 1 - TOLERANCE:
            raise PreconditionError(f"Output for key {key!r} is mixed (purity {output.purity():.6g}).")
        eigenvalues, vectors = np.linalg.eigh(hermitize(output.matrix))
        return PureState.unchecked(output.shape, vectors[:, int(np.argmax(eigenvalues))])

    @property
    def is_pure(self):
        return all(self.state(key).purity() >= 1 - TOLERANCE for key in self.keys)

    @property
    def output_shape(self):
        return self.output(self.keys.keys[0]).shape

    @cachedmethod(operator.attrgetter("_purified"))
    def purified(self, key):
        if self.purification is None:
            raise PreconditionError(f"Family {self.name} carries no purification data.")
        return self.purification(key)

    def junk(self, key):
        return self.key_junk(key)

    def key_unitary(self):
        """Unitary U on (key, junk) with U|0⟩ = Σ_k √Pr[k] |k⟩|μ_k⟩."""
        junk_dim = self.junk(self.keys.keys[0]).dim
        vector = np.zeros(len(self.keys) * junk_dim, dtype=complex)
        for position, (key, probability) in enumerate(self.keys.items()):
            block = slice(position * junk_dim, (position + 1) * junk_dim)
            vector[block] = np.sqrt(probability) * self.junk(key).amplitudes
        return complete_to_unitary(vector)

    def state_unitary(self, key):
        """Unitary V_k with V_k|0⟩ = |ψ_k⟩."""
        return complete_to_unitary(self.purified(key).amplitudes)


def family_from_states(states, probabilities=None, name="family"):
    """
    Build a family from a key -> state mapping with the canonical eigenbasis purification.

    Args:
        states (dict): key -> PureState or DensityMatrix, all on one shape.
        probabilities (list): Key probabilities in mapping order; uniform when omitted.
    """
    keys = tuple(states)
    if probabilities is None:
        distribution = KeyDistribution.uniform(keys)
    else:
        distribution = KeyDistribution(keys, tuple(probabilities))
    return KeyedStateFamily(
        distribution,
        states.__getitem__,
        purification=lambda key: _canonical_purification(states[key]),
        name=name,
    )


@dataclass(frozen=True, eq=False)
class Owsg:
    """A keyed family with verification effects Π_{k'}."""

    family: KeyedStateFamily
    effect_gen: Callable[[Hashable], np.ndarray]
    correctness_error: float = 0.0
    name: str = "owsg"
    _effects: LRUCache = field(default_factory=lambda: LRUCache(maxsize=4096), init=False, repr=False)

    @property
    def keys(self):
        return self.family.keys

    @cachedmethod(operator.attrgetter("_effects"))
    def effect(self, key):
        return np.asarray(self.effect_gen(key), dtype=complex)

    def verify(self, key, state):
        """Acceptance probability Tr(Π_{k'} state); answers outside the key set are rejected."""
        if key not in self.family.keys:
            return 0.0
        return expectation(self.effect(key), state)


@dataclass(frozen=True, eq=False)
class Prsg:
    """A keyed generator of pure states |ξ_k⟩."""

    keys: KeyDistribution
    generator: Callable[[Hashable], PureState]
    name: str = "prsg"

    @property
    def family(self):
        family = KeyedStateFamily(self.keys, self.generator, name=self.name)
        if not family.is_pure:
            raise PreconditionError(f"PRSG {self.name} has a mixed output.")
        return family

    def vectors(self):
        """Outputs as rows of a (K, d) array in key order."""
        return np.array([self.generator(key).amplitudes for key in self.keys])


def _projector(vector):
    return np.outer(vector.amplitudes, vector.amplitudes.conj())


def projective_owsg(family, name=None):
    """Pure-output family verified by the projector onto |φ_{k'}⟩."""
    return Owsg(family, lambda key: _projector(family.vector(key)), 0.0, name or f"proj[{family.name}]")


def orthonormal_family(num_keys):
    """|φ_k⟩ = |k⟩ on a single register "S"; maximally insecure."""
    shape = RegisterShape.of(("S", num_keys))
    return KeyedStateFamily(
        KeyDistribution.uniform(range(num_keys)),
        lambda key: PureState.basis(shape, key),
        purification=lambda key: tensor(TRIVIAL_ANCILLA, PureState.basis(shape, key)),
        name=f"orthonormal[{num_keys}]",
    )


def overlap_family(c):
    """Two keys with |φ_0⟩ = |0⟩ and |φ_1⟩ = c|0⟩ + √(1-c²)|1⟩, so |⟨φ_0|φ_1⟩| = c."""
    if not 0.0 <= c <= 1.0:
        raise PreconditionError(f"Overlap {c} must lie in [0, 1].")
    shape = RegisterShape.of(("S", 2))
    states = {0: PureState(shape, [1.0, 0.0]), 1: PureState(shape, [c, math.sqrt(1 - c * c)])}
    return family_from_states(states, name=f"overlap[{c:.6g}]")


def leaky_family(num_keys, leak):
    """|φ_k⟩ = √leak |k⟩ + √(1-leak) |K⟩: a basis reading reveals k with probability `leak`."""
    if not 0.0 <= leak <= 1.0:
        raise PreconditionError(f"Leak {leak} must lie in [0, 1].")
    shape = RegisterShape.of(("S", num_keys + 1))
    states = {}
    for key in range(num_keys):
        amplitudes = np.zeros(num_keys + 1)
        amplitudes[key] = math.sqrt(leak)
        amplitudes[num_keys] = math.sqrt(1 - leak)
        states[key] = PureState(shape, amplitudes)
    return family_from_states(states, name=f"leaky[{num_keys},{leak:.6g}]")


def haar_prsg(num_keys, qubits, rng):
    """A table of Haar-random m-qubit states standing in for a PRSG."""
    dim = 2**qubits
    table = {key: haar_random_state(dim, rng) for key in range(num_keys)}
    keys = KeyDistribution.uniform(range(num_keys))
    return Prsg(keys, table.__getitem__, name=f"haar[{num_keys},{qubits}]")


def owsg_correctness(o):
    """Σ_k Pr[k] Tr(Π_k φ_k)."""
    return sum(probability * o.verify(key, o.family.state(key)) for key, probability in o.keys.items())


def owsg_repetition(o, n):
    """
    n-fold repetition: tuple keys, slot-tagged tensor states, Kronecker product of effects.

    Raises:
        SizingError: If the n-fold state exceeds the dimension cap.
    """
    if n < 1:
        raise PreconditionError(f"Repetition count must be at least 1, got {n}.")
    family = o.family
    check_dimension(family.output_shape.dim**n, f"{n}-fold repetition of {o.name}")

    def state_gen(keys):
        return tensor_all([family.output(key).tagged(f"slot{j}") for j, key in enumerate(keys)])

    purification = None
    if family.purification is not None:

        def purification(keys):
            return tensor_all([family.purified(key).tagged(f"slot{j}") for j, key in enumerate(keys)])

    repeated = KeyedStateFamily(
        KeyDistribution.product([family.keys] * n), state_gen, purification, name=f"{family.name}^{n}"
    )
    correctness_error = 1 - (1 - o.correctness_error) ** n
    return Owsg(
        repeated,
        lambda keys: reduce(np.kron, [o.effect(key) for key in keys]),
        correctness_error,
        name=f"{o.name}^{n}",
    )


def owsg_as_puzzle(o):
    """Check keys are OWSG keys, the puzzle is φ_k and Ver regenerates φ_k before applying Π_{k'}."""

    def verify(answer, key):
        return o.verify(answer, o.family.state(key))

    return WeaklyVerifiablePuzzle(o.keys, o.family.state, verify, name=f"puzzle[{o.name}]")


def canonical_pure_ver(o):
    """
    Replace Ver by the projective test onto |φ_{k'}⟩.

    Raises:
        PreconditionError: If an output is mixed or some key's own acceptance is below 1 - ε.
    """
    family = o.family
    for key in family.keys:
        vector = family.vector(key)
        accept = o.verify(key, vector.density())
        if accept < 1 - o.correctness_error - TOLERANCE:
            raise PreconditionError(
                f"Key {key!r} accepts its own state with probability {accept:.6g}"
                f" < 1 - {o.correctness_error}."
            )
    return projective_owsg(family, name=f"canon[{o.name}]")


def prsg_to_owsg(g, r):
    """
    |φ_k⟩ = |ξ_k⟩^{⊗r} with the projective Ver.

    Raises:
        SizingError: If d^r exceeds the cap; `prsg_cross_acceptance` handles larger r.
    """
    if r < 1:
        raise PreconditionError(f"Copy count must be at least 1, got {r}.")
    base = g.family
    check_dimension(base.output_shape.dim**r, f"{r}-copy PRSG output")
    family = KeyedStateFamily(
        g.keys, lambda key: tensor_power(g.generator(key), r), name=f"{g.name}x{r}"
    )
    return projective_owsg(family, name=f"owsg[{g.name}x{r}]")


def prsg_cross_acceptance(g, r):
    """K×K matrix of |⟨ξ_k|ξ_{k'}⟩|^{2r}, the r-copy projective cross-acceptance, from the Gram matrix."""
    vectors = g.vectors()
    return np.abs(vectors.conj() @ vectors.T) ** (2 * r)


@dataclass(frozen=True)
class CollisionEstimate:
    """Monte-Carlo E_ψ Σ_k |⟨ξ_k|ψ⟩|^{2r} with its exact value and the K·r!/d^r upper bound."""

    mean: float
    standard_error: float
    expected: float
    upper_bound: float
    samples: int


def haar_collision_expectation(g, r, samples, rng):
    """Estimate E over Haar ψ of Σ_k |⟨ξ_k|ψ⟩|^{2r}; the exact value is K / C(d+r-1, r)."""
    if samples < 1:
        raise PreconditionError(f"Need at least one sample, got {samples}.")
    vectors = g.vectors()
    count, dim = vectors.shape
    psi = haar_random_states(dim, samples, rng)
    values = np.sum(np.abs(psi @ vectors.conj().T) ** (2 * r), axis=1)
    mean, error = mean_and_standard_error(values)
    expected = count / float(comb(dim + r - 1, r, exact=True))
    upper = count * math.factorial(r) / dim**r
    return CollisionEstimate(mean, error, expected, upper, samples)


def dumps_family(family):
    """JSON manifest of keys, probabilities and serialized output states."""
    manifest = {
        "name": family.name,
        "labels": list(family.output_shape.labels),
        "keys": [list(key) if isinstance(key, tuple) else key for key in family.keys],
        "probabilities": list(family.keys.probabilities),
        "states": [dumps_state(family.output(key)) for key in family.keys],
    }
    return json.dumps(manifest, indent=2, ensure_ascii=False)


def loads_family(text):
    """Inverse of `dumps_family`; list keys come back as tuples."""
    try:
        manifest = json.loads(text)
        keys = [tuple(key) if isinstance(key, list) else key for key in manifest["keys"]]
        states = {key: loads_state(block, manifest["labels"]) for key, block in zip(keys, manifest["states"])}
    except (KeyError, TypeError, json.JSONDecodeError) as error:
        raise ValueError("Malformed family manifest.") from error
    return family_from_states(states, manifest["probabilities"], name=manifest.get("name", "family"))


def self_acceptance(o):
    """Per-key Tr(Π_k φ_k)."""
    return {key: o.verify(key, o.family.state(key)) for key in o.keys}

