"""
Private-key quantum money: Count, OWSGs from pure or symmetric money, and the counting cloner.
"""
# pylint: disable=too-many-arguments,invalid-name

import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Hashable

import numpy as np
from cachetools import LRUCache, cachedmethod
from scipy.stats import binom

from owsg import KeyedStateFamily, Owsg, projective_owsg
from qstate import PureState, RegisterShape, as_density, expectation
from utilities import TOLERANCE, KeyDistribution, PreconditionError, ShapeError


@dataclass(frozen=True, eq=False)
class MoneyScheme:
    """Key distribution, banknote mint and per-key verification effect."""

    keys: KeyDistribution
    mint: Callable[[Hashable], object]
    effect_gen: Callable[[Hashable], np.ndarray]
    correctness_error: float = 0.0
    name: str = "money"
    _notes: LRUCache = field(default_factory=lambda: LRUCache(maxsize=4096), init=False, repr=False)

    @cachedmethod(operator.attrgetter("_notes"))
    def note(self, key):
        return self.mint(key)

    @property
    def note_shape(self):
        return self.note(self.keys.keys[0]).shape

    def effect(self, key):
        return np.asarray(self.effect_gen(key), dtype=complex)

    def verify(self, key, state):
        """Acceptance probability of `state` as a banknote for `key`; unknown keys reject."""
        if key not in self.keys:
            return 0.0
        return expectation(self.effect(key), as_density(state))

    def correctness(self):
        return sum(probability * self.verify(key, self.note(key)) for key, probability in self.keys.items())

    def family(self):
        return KeyedStateFamily(self.keys, self.note, name=f"notes[{self.name}]")


def count(s, key, registers):
    """
    Exact distribution of the number of accepted registers.

    Submissions are product states, so Count is a sum of independent Bernoulli(verify(k, ξ_j)) variables.

    Returns:
        numpy.ndarray: Probabilities of counts 0..len(registers).

    Raises:
        ShapeError: If a register does not have the banknote's size.
    """
    dims = s.note_shape.dims
    distribution = np.ones(1)
    for position, register in enumerate(registers):
        if register.shape.dims != dims:
            raise ShapeError(f"Register {position} has dims {register.shape.dims}, banknotes have {dims}.")
        accept = s.verify(key, register)
        distribution = np.convolve(distribution, [1.0 - accept, accept])
    return distribution


def owsg_from_pure_money(s):
    """
    φ_k = |$_k⟩ with Ver the projective test onto |$_{k'}⟩.

    Raises:
        PreconditionError: If some banknote is mixed.
    """
    family = s.family()
    if not family.is_pure:
        raise PreconditionError(f"Money scheme {s.name} mints mixed banknotes.")
    return projective_owsg(family, name=f"owsg[{s.name}]")


def symmetry_violations(s, tolerance=TOLERANCE):
    """Key pairs with |Ver(k, $_k') - Ver(k', $_k)| above `tolerance`, with both values."""
    keys = s.keys.keys
    violations = []
    for position, key in enumerate(keys):
        for other in keys[position + 1 :]:
            forward = s.verify(key, s.note(other))
            backward = s.verify(other, s.note(key))
            if abs(forward - backward) > tolerance:
                violations.append((key, other, forward, backward))
    return violations


def owsg_from_symmetric_money(s):
    """
    φ_k = $_k and Ver(k', φ) = money verification under k'.

    Raises:
        PreconditionError: Naming the first key pair that breaks symmetric verifiability.
    """
    violations = symmetry_violations(s)
    if violations:
        key, other, forward, backward = violations[0]
        raise PreconditionError(
            f"Verification is not symmetric for keys ({key!r}, {other!r}): {forward:.6g} != {backward:.6g}."
        )
    return Owsg(s.family(), s.effect, s.correctness_error, name=f"owsg[{s.name}]")


def cross_acceptance(s):
    """Matrix of Ver(k, $_k') in key order."""
    keys = s.keys.keys
    return np.array([[s.verify(key, s.note(other)) for other in keys] for key in keys])


def binomial_count_tail(ell, per_copy_prob, threshold):
    """Exact Pr[Bin(ℓ, p) ≥ threshold]."""
    if not 0.0 <= per_copy_prob <= 1.0:
        raise PreconditionError(f"Per-copy probability {per_copy_prob} is outside [0, 1].")
    if threshold <= 0:
        return 1.0
    if threshold > ell:
        return 0.0
    if per_copy_prob == 0.0:
        return 0.0
    if per_copy_prob == 1.0:
        return 1.0
    return float(binom.sf(threshold - 1, ell, per_copy_prob))


def hoeffding_lower_bound(ell, p):
    """1 - 2 exp(-2ℓ/(16²p²)), the concentration bound on Count ≥ t+1."""
    return 1.0 - 2.0 * math.exp(-2.0 * ell / (256.0 * p * p))


def cloner_copies(p, t):
    """ℓ = max(16p(t+1), 16²p³), rounded up."""
    return math.ceil(max(16 * p * (t + 1), 256 * p**3))


def bernoulli_check(p, t):
    """(1 - 1/(8p(t+1)))^{t+1} and 1 - 1/(8p); the first is never below the second."""
    return (1.0 - 1.0 / (8 * p * (t + 1))) ** (t + 1), 1.0 - 1.0 / (8 * p)


def per_copy_floor(p):
    """1 - 1/(8p) - √(1 - 1/(2p)) and the 1/(8p) it dominates."""
    return 1.0 - 1.0 / (8 * p) - math.sqrt(1.0 - 1.0 / (2 * p)), 1.0 / (8 * p)


def overlap_slack(effect, a, b):
    """Tr(Π|a⟩⟨a|) - Tr(Π|b⟩⟨b|) and its fidelity bound √(1 - |⟨a|b⟩|²)."""
    difference = expectation(effect, a.density()) - expectation(effect, b.density())
    return difference, math.sqrt(max(0.0, 1.0 - abs(a.overlap(b)) ** 2))


@dataclass(frozen=True)
class CloneAttempt:
    guessed_key: Hashable
    per_copy_accept: float
    tail: float


class CountingCloner:
    """Inverts t banknotes to k', mints ℓ fresh notes under k' and submits them all to Count."""

    def __init__(self, scheme, inverter, p, t):
        if p < 1:
            raise PreconditionError(f"p must be at least 1, got {p}.")
        if inverter.copies != t:
            raise PreconditionError(f"Inverter uses {inverter.copies} copies, cloner is given t={t}.")
        self.scheme = scheme
        self.inverter = inverter
        self.p = p
        self.t = t
        self.ell = cloner_copies(p, t)

    def counterfeit(self, guessed_key):
        """The ℓ-register product submission; an invalid guess submits nothing."""
        if guessed_key not in self.scheme.keys:
            return []
        return [self.scheme.note(guessed_key)] * self.ell

    def _per_copy(self, key, guess):
        if guess not in self.scheme.keys:
            return 0.0
        return self.scheme.verify(key, self.scheme.note(guess))

    def evaluate(self, key, rng):
        """One attack on key `key`: the guess and the exact Pr[Count ≥ t+1] it leads to."""
        guess = self.inverter.solve([as_density(self.scheme.note(key))] * self.t, rng)
        per_copy = self._per_copy(key, guess)
        return CloneAttempt(guess, per_copy, binomial_count_tail(self.ell, per_copy, self.t + 1))

    def exact_success(self):
        """
        Σ_k Pr[k] Σ_k' Pr[k' | $_k^{⊗t}] Pr[Count(k, $_k'^{⊗ℓ}) ≥ t+1].

        Needs an inverter with exact output distributions.
        """
        total = 0.0
        for key, probability in self.scheme.keys.items():
            outputs = self.inverter.answer_distribution([as_density(self.scheme.note(key))] * self.t)
            for guess, weight in outputs.items():
                per_copy = self._per_copy(key, guess)
                total += probability * weight * binomial_count_tail(self.ell, per_copy, self.t + 1)
        return total


def inverter_to_cloner(s, inverter, p, t):
    return CountingCloner(s, inverter, p, t)


def _projective_money(notes, name):
    keys = KeyDistribution.uniform(range(len(notes)))
    return MoneyScheme(
        keys,
        notes.__getitem__,
        lambda key: np.outer(notes[key].amplitudes, notes[key].amplitudes.conj()),
        name=name,
    )


def orthonormal_money(num_keys):
    """$_k = |k⟩ with projective verification."""
    shape = RegisterShape.of(("M", num_keys))
    notes = [PureState.basis(shape, key) for key in range(num_keys)]
    return _projective_money(notes, f"orthonormal[{num_keys}]")


def overlap_money(c):
    """Two notes with |⟨$_0|$_1⟩| = c and projective verification."""
    if not 0.0 <= c <= 1.0:
        raise PreconditionError(f"Overlap {c} must lie in [0, 1].")
    shape = RegisterShape.of(("M", 2))
    notes = [PureState(shape, [1.0, 0.0]), PureState(shape, [c, math.sqrt(1 - c * c)])]
    return _projective_money(notes, f"overlap[{c:.6g}]")


def overlap_money_for(p):
    """Overlap fixture whose wrong key is accepted with probability exactly 1/(8p)."""
    return overlap_money(math.sqrt(1.0 / (8 * p)))


def asymmetric_money():
    """Ver(0, $_1) = 1/2 but Ver(1, $_0) = 0."""
    shape = RegisterShape.of(("M", 2))
    notes = [PureState.basis(shape, 0), PureState.basis(shape, 1)]
    effects = [np.diag([1.0, 0.5]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
    keys = KeyDistribution.uniform((0, 1))
    return MoneyScheme(keys, notes.__getitem__, effects.__getitem__, name="asymmetric")

