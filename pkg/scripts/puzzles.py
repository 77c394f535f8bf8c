"""
Weakly verifiable puzzles, parallel repetition and the hardness-amplification adversary.

A puzzle is a (CheckGen, PuzzleGen, Ver) triple with classical answers; `verify` returns the exact
acceptance probability and callers Bernoulli-sample it. The amplified solver builds a prefix of check
keys with Extend/Estimate and then embeds the instance in slot v of the repeated puzzle.
"""
# pylint: disable=too-many-arguments,too-many-locals,too-many-instance-attributes

import math
import operator
from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from cachetools import LRUCache, cachedmethod

from qstate import DensityMatrix, RegisterShape, tensor_all
from utilities import (
    GameError,
    KeyDistribution,
    PreconditionError,
    check_dimension,
    mean_and_standard_error,
)

BOTTOM = "⊥"
ABORT = None


@dataclass(frozen=True, eq=False)
class WeaklyVerifiablePuzzle:
    """
    A weakly verifiable puzzle.

    Attributes:
        check_keys: Distribution of CheckGen over a listable key alphabet.
        puzzle_gen: Deterministic map key -> DensityMatrix (mixedness models internal randomness).
        verify: Exact acceptance probability of (answer, key).
        repetitions: How many base slots the puzzle bundles (1 unless built by `parallel_repetition`).
    """

    check_keys: KeyDistribution
    puzzle_gen: Callable[[Hashable], DensityMatrix]
    verify: Callable[[Hashable, Hashable], float]
    name: str = "puzzle"
    repetitions: int = 1
    base: Optional["WeaklyVerifiablePuzzle"] = None
    _states: LRUCache = field(default_factory=lambda: LRUCache(maxsize=4096), init=False, repr=False)

    def check_gen(self, rng):
        return self.check_keys.sample(rng)

    @cachedmethod(operator.attrgetter("_states"))
    def puzzle(self, key):
        return self.puzzle_gen(key)


@dataclass(frozen=True)
class KeyProfile:
    """Accepted answers for one key and the probability each of them is accepted."""

    accepted: frozenset
    probability: float = 1.0


def synthetic_puzzle(alphabet_size, profile: Mapping[int, KeyProfile] = None, hint=1.0, prior=None):
    """
    Classical-answer puzzle with a tunable hint.

    Keys are 0..A-1 and the puzzle state on register "P" (dimension A+1) is
    h_k |k⟩⟨k| + (1 - h_k) |A⟩⟨A|, so reading the computational basis recovers the key with probability h_k
    and otherwise lands on the erasure symbol A.

    Args:
        alphabet_size (int): Number of keys A.
        profile (dict): key -> KeyProfile; defaults to accepting exactly the key itself with probability 1.
        hint (float | dict): Reveal probability h, either global or per key.
        prior (list): CheckGen probabilities; uniform when omitted.

    Returns:
        WeaklyVerifiablePuzzle: The fixture puzzle.

    Raises:
        PreconditionError: If the profile or hint is inconsistent with the alphabet.
    """
    if alphabet_size < 1:
        raise PreconditionError(f"Alphabet size must be at least 1, got {alphabet_size}.")
    keys = tuple(range(alphabet_size))
    profile = dict(profile) if profile is not None else {key: KeyProfile(frozenset({key})) for key in keys}
    if set(profile) != set(keys):
        raise PreconditionError("The profile must list every key exactly once.")
    for key, entry in profile.items():
        if not 0.0 <= entry.probability <= 1.0:
            raise PreconditionError(
                f"Acceptance probability {entry.probability} for key {key} is outside [0, 1]."
            )
        if BOTTOM in entry.accepted:
            raise PreconditionError(f"Key {key} accepts the rejection symbol.")
    hints = {key: float(hint[key] if isinstance(hint, Mapping) else hint) for key in keys}
    if any(not 0.0 <= value <= 1.0 for value in hints.values()):
        raise PreconditionError("Hint probabilities must lie in [0, 1].")
    distribution = KeyDistribution.uniform(keys) if prior is None else KeyDistribution(keys, tuple(prior))
    shape = RegisterShape.of(("P", alphabet_size + 1))

    def puzzle_gen(key):
        matrix = np.zeros((alphabet_size + 1, alphabet_size + 1), dtype=complex)
        matrix[key, key] = hints[key]
        matrix[alphabet_size, alphabet_size] += 1.0 - hints[key]
        return DensityMatrix.unchecked(shape, matrix)

    def verify(answer, key):
        entry = profile.get(key)
        if entry is None:
            return 0.0
        try:
            return entry.probability if answer in entry.accepted else 0.0
        except TypeError:
            return 0.0

    return WeaklyVerifiablePuzzle(distribution, puzzle_gen, verify, name=f"synthetic[{alphabet_size}]")


def parallel_repetition(puzzle, n):
    """
    n-fold parallel repetition: tuple keys, slot-tagged tensor puzzle, product acceptance.

    Raises:
        PreconditionError: If n < 1.
        SizingError: If the repeated puzzle would exceed the dimension cap.
    """
    if n < 1:
        raise PreconditionError(f"Repetition count must be at least 1, got {n}.")
    sample_state = puzzle.puzzle(puzzle.check_keys.keys[0])
    check_dimension(sample_state.dim**n, f"{n}-fold repetition of {puzzle.name}")

    def puzzle_gen(keys):
        return tensor_all([puzzle.puzzle(key).tagged(f"slot{j}") for j, key in enumerate(keys)])

    def verify(answers, keys):
        if not isinstance(answers, tuple) or len(answers) != n:
            return 0.0
        return math.prod(puzzle.verify(answer, key) for answer, key in zip(answers, keys))

    return WeaklyVerifiablePuzzle(
        KeyDistribution.product([puzzle.check_keys] * n),
        puzzle_gen,
        verify,
        name=f"{puzzle.name}^{n}",
        repetitions=n,
        base=puzzle,
    )


@dataclass(frozen=True, eq=False)
class PuzzleBatch:
    """Distinct puzzle states and a (rows, copies) index array selecting the copies each row receives."""

    states: Tuple[DensityMatrix, ...]
    index: np.ndarray

    @property
    def rows(self):
        return int(self.index.shape[0])

    def copies(self, row):
        return [self.states[position] for position in self.index[row]]


class PuzzleSolver:
    """Stochastic solver contract: `copies` puzzle copies in, a classical answer (or ABORT) out."""

    def __init__(self, copies=1, slots=None):
        if copies < 1:
            raise PreconditionError(f"Copy budget must be at least 1, got {copies}.")
        self.copies = int(copies)
        self.slots = slots

    def solve(self, copies: Sequence[DensityMatrix], rng):
        raise NotImplementedError

    def solve_batch(self, batch: PuzzleBatch, rng):
        """Answers for every row of `batch`."""
        return [self.solve(batch.copies(row), rng) for row in range(batch.rows)]

    def answer_distribution(self, copies: Sequence[DensityMatrix]) -> Dict[Hashable, float]:
        raise NotImplementedError(f"{type(self).__name__} has no exact answer distribution.")

    def _wrap(self, answers):
        return answers[0] if self.slots is None else tuple(answers)


class BasisMeasurementSolver(PuzzleSolver):
    """
    Reads the first copy in the computational basis and decodes each register digit through `alphabet`.

    Digits past the alphabet decode to BOTTOM. Each slot's answer is independently erased to BOTTOM with
    probability 1 - accuracy. With a `first_slot_gate`, every later slot answers BOTTOM unless the first
    slot's answer lies in the gate set, which makes the residual success depend on the first key.
    """

    def __init__(self, alphabet, copies=1, slots=None, accuracy=1.0, first_slot_gate=None):
        super().__init__(copies, slots)
        if not 0.0 <= accuracy <= 1.0:
            raise PreconditionError(f"Accuracy {accuracy} is outside [0, 1].")
        self.alphabet = tuple(alphabet)
        self.accuracy = float(accuracy)
        self.first_slot_gate = None if first_slot_gate is None else frozenset(first_slot_gate)
        self._symbols = np.array(list(self.alphabet) + [BOTTOM], dtype=object)

    def _decode_digits(self, digits, erased):
        digits = np.minimum(digits, len(self.alphabet))
        symbols = self._symbols[digits]
        symbols[erased] = BOTTOM
        if self.first_slot_gate is not None and symbols.shape[1] > 1:
            closed = np.array([symbol not in self.first_slot_gate for symbol in symbols[:, 0]], dtype=bool)
            symbols[closed, 1:] = BOTTOM
        return symbols

    def _sample_rows(self, state, rows, rng):
        weights = np.clip(np.real(np.diagonal(state.matrix)), 0.0, None)
        flat = rng.choice(weights.size, size=rows, p=weights / weights.sum())
        digits = np.stack(np.unravel_index(flat, state.shape.dims or (1,)), axis=1)
        erased = rng.random(digits.shape) >= self.accuracy
        return self._decode_digits(digits, erased)

    def solve(self, copies, rng):
        symbols = self._sample_rows(copies[0], 1, rng)[0]
        return self._wrap(list(symbols))

    def solve_batch(self, batch, rng):
        answers = [None] * batch.rows
        first = batch.index[:, 0]
        for position, state in enumerate(batch.states):
            rows = np.flatnonzero(first == position)
            if rows.size == 0:
                continue
            symbols = self._sample_rows(state, rows.size, rng)
            for row, row_symbols in zip(rows, symbols):
                answers[row] = self._wrap(list(row_symbols))
        return answers

    def answer_distribution(self, copies):
        state = copies[0]
        dims = state.shape.dims or (1,)
        weights = np.clip(np.real(np.diagonal(state.matrix)), 0.0, None)
        weights = weights / weights.sum()
        distribution = Counter()
        patterns = list(product((False, True), repeat=len(dims)))
        for flat in np.flatnonzero(weights > 0):
            digits = np.array(np.unravel_index(flat, dims)).reshape(1, -1)
            for pattern in patterns:
                erasures = sum(pattern)
                kept = len(dims) - erasures
                weight = weights[flat] * (1 - self.accuracy) ** erasures * self.accuracy**kept
                if weight == 0:
                    continue
                symbols = self._decode_digits(digits, np.array([pattern]))[0]
                distribution[self._wrap(list(symbols))] += weight
        return dict(distribution)


class RandomGuessSolver(PuzzleSolver):
    """Ignores the puzzle and answers uniformly from `alphabet` in every slot."""

    def __init__(self, alphabet, copies=1, slots=None):
        super().__init__(copies, slots)
        self.alphabet = tuple(alphabet)

    def solve(self, copies, rng):
        count = 1 if self.slots is None else self.slots
        picks = rng.integers(0, len(self.alphabet), size=count)
        return self._wrap([self.alphabet[pick] for pick in picks])

    def answer_distribution(self, copies):
        count = 1 if self.slots is None else self.slots
        weight = 1.0 / len(self.alphabet) ** count
        return {self._wrap(list(answers)): weight for answers in product(self.alphabet, repeat=count)}


class FixedAnswerSolver(PuzzleSolver):
    """Always returns `answer`."""

    def __init__(self, answer, copies=1):
        super().__init__(copies)
        self.answer = answer

    def solve(self, copies, rng):
        return self.answer

    def answer_distribution(self, copies):
        return {self.answer: 1.0}


@dataclass(frozen=True)
class SuccessEstimate:
    rate: float
    standard_error: float
    outcomes: np.ndarray
    aborts: int
    trials: int


def _check_budget(solver, t):
    if solver.copies != t:
        raise GameError(f"Solver advertises {solver.copies} copies but the game hands out {t}.")


def _acceptance(puzzle, answer, key):
    if answer is ABORT:
        return 0.0
    return float(puzzle.verify(answer, key))


def empirical_success(puzzle, solver, t, trials, rng):
    """
    Monte-Carlo success of `solver` on `puzzle` with t copies.

    Every trial samples a check key, hands the solver t copies and Bernoulli-samples the exact acceptance
    probability of its answer; aborts count as failures.

    Raises:
        PreconditionError: If trials < 1.
        GameError: If the solver's copy budget differs from t.
    """
    if trials < 1:
        raise PreconditionError(f"Need at least one trial, got {trials}.")
    _check_budget(solver, t)
    key_indices = puzzle.check_keys.sample_indices(rng, trials)
    used, inverse = np.unique(key_indices, return_inverse=True)
    keys = [puzzle.check_keys.keys[position] for position in used]
    batch = PuzzleBatch(tuple(puzzle.puzzle(key) for key in keys), np.repeat(inverse[:, None], t, axis=1))
    answers = solver.solve_batch(batch, rng)
    accept = np.array([_acceptance(puzzle, answer, keys[row]) for answer, row in zip(answers, inverse)])
    outcomes = (rng.random(trials) < accept).astype(float)
    rate, error = mean_and_standard_error(outcomes)
    return SuccessEstimate(rate, error, outcomes, sum(answer is ABORT for answer in answers), trials)


def exact_success(puzzle, solver, t):
    """Exact success probability, for solvers exposing `answer_distribution`."""
    _check_budget(solver, t)
    total = 0.0
    for key, weight in puzzle.check_keys.items():
        distribution = solver.answer_distribution([puzzle.puzzle(key)] * t)
        total += weight * sum(p * _acceptance(puzzle, answer, key) for answer, p in distribution.items())
    return total


def _slot_acceptance(puzzle, answers, keys, start):
    if answers is ABORT or not isinstance(answers, tuple):
        return 0.0
    return math.prod(puzzle.verify(answers[j], keys[j]) for j in range(start, len(keys)))


def exact_rsp(puzzle, solver, prefix, n, repeated=None):
    """
    Residual success probability of a repeated-puzzle solver given fixed keys for the first slots.

    rsp(prefix) is the probability that slots len(prefix)+1..n all verify when the remaining keys are
    fresh CheckGen samples.
    """
    repeated = repeated or parallel_repetition(puzzle, n)
    start = len(prefix)
    total = 0.0
    for fresh in product(puzzle.check_keys.items(), repeat=n - start):
        weight = math.prod(probability for _, probability in fresh)
        keys = tuple(prefix) + tuple(key for key, _ in fresh)
        distribution = solver.answer_distribution([repeated.puzzle(keys)] * solver.copies)
        total += weight * sum(
            p * _slot_acceptance(puzzle, answers, keys, start) for answers, p in distribution.items()
        )
    return total


@dataclass(frozen=True)
class AmplificationParams:
    """
    Loop bounds of the amplification adversary.

    `scale_loops` multiplies L, N_i, M_i and t' (rounded up, at least 1) for quick runs; 1.0 keeps the
    exact bounds.
    """

    n: int
    q: float
    delta: float
    t: int = 1
    scale_loops: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.q < 1 or self.t < 1:
            raise PreconditionError(f"Need n >= 1, q >= 1, t >= 1; got n={self.n}, q={self.q}, t={self.t}.")
        if not 0 < self.delta < 1:
            raise PreconditionError(f"delta must lie in (0, 1), got {self.delta}.")
        if self.scale_loops <= 0:
            raise PreconditionError(f"scale_loops must be positive, got {self.scale_loops}.")

    def _scaled(self, raw):
        return max(1, math.ceil(math.ceil(raw) * self.scale_loops))

    def threshold(self, i):
        """δ^{n-i}, the Extend acceptance threshold at step i."""
        return self.delta ** (self.n - i)

    def nominal_extend_trials(self, i):
        loops = 6 * self.q / self.delta ** (self.n - i + 1)
        return math.ceil(loops * math.log(18 * self.q * self.n / self.delta))

    def extend_trials(self, i):
        """N_i = ⌈6q/δ^{n-i+1} · ln(18qn/δ)⌉."""
        return self._scaled(self.nominal_extend_trials(i))

    def estimate_samples(self, i):
        """M_i = ⌈84q²/δ^{n-i} · ln(18qnN_i/δ)⌉ with the unscaled N_i."""
        inner = 18 * self.q * self.n * self.nominal_extend_trials(i) / self.delta
        return self._scaled(84 * self.q**2 / self.delta ** (self.n - i) * math.log(inner))

    def online_repetitions(self, v):
        """L = ⌈6q ln(6q)/δ^{n-v+1}⌉."""
        return self._scaled(6 * self.q * math.log(6 * self.q) / self.delta ** (self.n - v + 1))

    def instance_copies(self):
        """t' = ⌈6q ln(6q)/δⁿ⌉ · t."""
        return self.online_repetitions(1) * self.t

    def wrong_bound(self):
        """Per-step bound δ/(6qn) on the Wrong events."""
        return self.delta / (6 * self.q * self.n)


def _repeated_batch(repeated, prefix, key_rows, copies):
    used, inverse = np.unique(key_rows, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    keys = repeated.base.check_keys.keys
    key_tuples = [tuple(prefix) + tuple(keys[position] for position in row) for row in used]
    states = tuple(repeated.puzzle(key_tuple) for key_tuple in key_tuples)
    return PuzzleBatch(states, np.repeat(inverse[:, None], copies, axis=1)), key_tuples, inverse


def estimate(puzzle, solver, prefix, i, params, rng, repeated=None):
    """
    Estimate rsp(prefix) from exactly M_i runs of the repeated-puzzle solver.

    Args:
        puzzle: The base puzzle.
        solver: Solver for the n-fold repetition.
        prefix (sequence): Check keys for slots 1..i.
        i (int): Prefix length, at most n - 1.

    Returns:
        float: count / M_i.
    """
    if len(prefix) != i or not 0 <= i <= params.n - 1:
        raise PreconditionError(f"Estimate needs a prefix of length i <= n-1; got {len(prefix)} and i={i}.")
    repeated = repeated or parallel_repetition(puzzle, params.n)
    samples = params.estimate_samples(i)
    key_rows = puzzle.check_keys.sample_indices(rng, (samples, params.n - i))
    batch, key_tuples, inverse = _repeated_batch(repeated, prefix, key_rows, solver.copies)
    answers = solver.solve_batch(batch, rng)
    tally = Counter(zip(answers, inverse.tolist()))
    count = 0
    for (answers_row, row), hits in tally.items():
        acceptance = _slot_acceptance(puzzle, answers_row, key_tuples[row], i)
        count += int(rng.binomial(hits, min(max(acceptance, 0.0), 1.0)))
    return count / samples


def extend(puzzle, solver, prefix, i, params, rng, repeated=None):
    """
    Try up to N_i fresh keys k and return the first with estimate(prefix ∘ k) ≥ δ^{n-i}; None when none does.
    """
    if len(prefix) != i - 1:
        raise PreconditionError(f"Extend at step {i} needs a prefix of length {i - 1}, got {len(prefix)}.")
    repeated = repeated or parallel_repetition(puzzle, params.n)
    threshold = params.threshold(i)
    for _ in range(params.extend_trials(i)):
        candidate = puzzle.check_gen(rng)
        if estimate(puzzle, solver, list(prefix) + [candidate], i, params, rng, repeated) >= threshold:
            return candidate
    return None


@dataclass(frozen=True)
class AmplificationRun:
    """One execution of the amplified solver."""

    answer: Hashable
    prefix: Tuple[Hashable, ...]
    v: int
    iterations: int
    instance_copies_used: int

    @property
    def aborted(self):
        return self.answer is ABORT


class InstanceCopies:
    """The instance copies handed to the amplified solver, released t at a time."""

    def __init__(self, copies, budget):
        if len(copies) > budget:
            raise GameError(f"Got {len(copies)} instance copies for a budget of {budget}.")
        self._copies = list(copies)
        self.used = 0

    def take(self, count):
        if self.used + count > len(self._copies):
            raise GameError(f"Instance copies exhausted: {self.used} used, {count} more requested.")
        taken = self._copies[self.used : self.used + count]
        self.used += count
        return taken


class AmplifiedSolver(PuzzleSolver):
    """
    Solver for the base puzzle built from a solver for its n-fold repetition.

    It never sees the instance's check key: verification is only ever called on keys it sampled itself.
    """

    def __init__(self, puzzle, repeated_solver, params):
        super().__init__(params.instance_copies())
        if repeated_solver.copies != params.t:
            raise GameError(f"Repeated solver uses {repeated_solver.copies} copies, params say t={params.t}.")
        self.puzzle = puzzle
        self.repeated_solver = repeated_solver
        self.params = params
        self.repeated = parallel_repetition(puzzle, params.n)

    def _slot_states(self, keys, instance, position):
        slots = [self.puzzle.puzzle(key) for key in keys]
        slots.insert(position, instance)
        return tensor_all([state.tagged(f"slot{j}") for j, state in enumerate(slots)])

    def run(self, copies, rng):
        """Execute the preprocessing and online phases on the given instance copies."""
        params = self.params
        supply = InstanceCopies(copies, self.copies)
        prefix: List[Hashable] = []
        v = params.n
        for i in range(1, params.n):
            key = extend(self.puzzle, self.repeated_solver, prefix, i, params, rng, self.repeated)
            if key is None:
                v = i
                break
            prefix.append(key)
        if v == params.n:
            instance = supply.take(params.t)
            states = [self._slot_states(prefix, copy, v - 1) for copy in instance]
            answers = self.repeated_solver.solve(states, rng)
            answer = ABORT if answers is ABORT else answers[v - 1]
            return AmplificationRun(answer, tuple(prefix), v, 1, supply.used)
        repetitions = params.online_repetitions(v)
        for iteration in range(1, repetitions + 1):
            suffix = [self.puzzle.check_gen(rng) for _ in range(v, params.n)]
            instance = supply.take(params.t)
            states = [self._slot_states(prefix + suffix, copy, v - 1) for copy in instance]
            answers = self.repeated_solver.solve(states, rng)
            if answers is ABORT:
                continue
            acceptance = math.prod(
                self.puzzle.verify(answers[j], key) for j, key in zip(range(v, params.n), suffix)
            )
            if rng.random() < acceptance:
                return AmplificationRun(answers[v - 1], tuple(prefix), v, iteration, supply.used)
        return AmplificationRun(ABORT, tuple(prefix), v, repetitions, supply.used)

    def solve(self, copies, rng):
        return self.run(copies, rng).answer


def amplified_solver(puzzle, repeated_solver, params):
    """Build the amplified solver for `puzzle` from a solver of its n-fold repetition."""
    return AmplifiedSolver(puzzle, repeated_solver, params)


def wrong_events(puzzle, solver, params, run, repeated=None):
    """
    Exact Wrong_i indicators for a finished run, i = 1..n-1.

    Wrong_i needs prefix_{i-1} defined (i <= v) and either a committed prefix_i with
    rsp < δ^{n-i}(1 - 1/(6q)), or prefix_i = ⊥ while keys in Ext_i carry CheckGen mass ≥ δ^{n-i+1}/(6q),
    where Ext_i = {k : rsp(prefix_{i-1} ∘ k) ≥ δ^{n-i}(1 + 1/(6q))}.
    """
    repeated = repeated or parallel_repetition(puzzle, params.n)
    margin = 1 / (6 * params.q)
    events = {}
    for i in range(1, params.n):
        if i > run.v:
            events[i] = False
        elif i <= run.v - 1:
            rsp = exact_rsp(puzzle, solver, run.prefix[:i], params.n, repeated)
            events[i] = rsp < params.threshold(i) * (1 - margin)
        else:
            base = list(run.prefix[: i - 1])
            mass = sum(
                weight
                for key, weight in puzzle.check_keys.items()
                if exact_rsp(puzzle, solver, base + [key], params.n, repeated)
                >= params.threshold(i) * (1 + margin)
            )
            events[i] = mass >= params.delta ** (params.n - i + 1) * margin
    return events
