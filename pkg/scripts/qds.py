"""
Quantum digital signatures with quantum public keys.

One-time schemes from OWSGs and back, the forgery game with auditable transcripts, both reduction
wrappers, and the one-time to q-time conversion with its Good-event combinatorics.
"""
# pylint: disable=too-many-arguments,too-many-locals,too-many-instance-attributes,invalid-name

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Hashable, List, Optional, Tuple

import numpy as np

from owsg import KeyedStateFamily, Owsg
from puzzles import BOTTOM, PuzzleSolver
from qstate import RegisterShape, expectation, partial_trace, tensor, tensor_all
from utilities import (
    GameError,
    KeyDistribution,
    PreconditionError,
    check_dimension,
    draw_seed,
    make_rng,
    mean_and_standard_error,
)


@dataclass(frozen=True, eq=False)
class QdsScheme:
    """
    A signature scheme whose public key is a quantum state.

    `verify_effect(m, σ)` is the accepting effect on the public-key register; `secret_keys`, when given,
    is the exact distribution behind `sk_gen` and enables exact evaluation.
    """

    sk_gen: Callable
    pk_gen: Callable
    sign: Callable
    verify_effect: Callable
    messages: Tuple[Hashable, ...]
    pk_shape: RegisterShape
    secret_keys: Optional[KeyDistribution] = None
    correctness_error: float = 0.0
    name: str = "qds"

    def verify(self, pk, message, signature):
        """Acceptance probability of (message, signature) against the public-key state."""
        if message not in self.messages:
            return 0.0
        return expectation(self.verify_effect(message, signature), pk)

    def honest_acceptance(self, sk, message, rng=None):
        return self.verify(self.pk_gen(sk), message, self.sign(sk, message, rng))

    def correctness(self):
        """Exact min over messages of E_sk Ver(pk, m, Sign(sk, m)), for deterministic signing."""
        if self.secret_keys is None:
            raise PreconditionError(f"Scheme {self.name} has no exact secret-key distribution.")
        return min(
            sum(p * self.honest_acceptance(sk, message) for sk, p in self.secret_keys.items())
            for message in self.messages
        )


def _zero(shape):
    return np.zeros((shape.dim, shape.dim), dtype=complex)


def qds_from_owsg(o):
    """
    One-bit one-time scheme: sk = (k0, k1), pk = (φ_k0, φ_k1), Sign(m) = k_m, Ver runs OWSG Ver on slot m.
    """
    state_shape = o.family.output_shape
    pk_shape = state_shape.tagged("pk0").concat(state_shape.tagged("pk1"))
    identity = np.eye(state_shape.dim, dtype=complex)

    def sk_gen(rng):
        return (o.keys.sample(rng), o.keys.sample(rng))

    def pk_gen(sk):
        return tensor(o.family.state(sk[0]).tagged("pk0"), o.family.state(sk[1]).tagged("pk1"))

    def sign(sk, message, rng=None):
        return sk[message]

    def verify_effect(message, signature):
        if signature not in o.keys:
            return _zero(pk_shape)
        effect = o.effect(signature)
        return np.kron(effect, identity) if message == 0 else np.kron(identity, effect)

    return QdsScheme(
        sk_gen,
        pk_gen,
        sign,
        verify_effect,
        messages=(0, 1),
        pk_shape=pk_shape,
        secret_keys=KeyDistribution.product([o.keys, o.keys]),
        correctness_error=o.correctness_error,
        name=f"qds[{o.name}]",
    )


def owsg_from_qds(s):
    """k = sk, φ_k = pk, and Ver(k', φ) signs message 1 with k' and verifies it against φ."""
    if s.secret_keys is None:
        raise PreconditionError(f"Scheme {s.name} needs an exact secret-key distribution to become an OWSG.")
    family = KeyedStateFamily(s.secret_keys, s.pk_gen, name=f"pk[{s.name}]")
    return Owsg(
        family,
        lambda key: s.verify_effect(1, s.sign(key, 1, None)),
        s.correctness_error,
        name=f"owsg[{s.name}]",
    )


class ReductionAbort(Exception):
    """Raised inside a reduction when it has to give up on the current run."""


class SigningOracle:
    """Signs up to `budget` messages with the game's secret key and records every query."""

    def __init__(self, scheme, sk, budget, rng):
        self.scheme = scheme
        self._sk = sk
        self.budget = budget
        self.rng = rng
        self.queries: List[Hashable] = []

    def sign(self, message):
        if len(self.queries) >= self.budget:
            raise GameError(f"Forger exceeded its budget of {self.budget} signing queries.")
        if message not in self.scheme.messages:
            raise GameError(f"Message {message!r} is outside the message space.")
        self.queries.append(message)
        return self.scheme.sign(self._sk, message, self.rng)

    def leak_secret_key(self):
        """Out-of-band access used only by the key-holder sanity forger."""
        return self._sk


@dataclass(frozen=True)
class GameTranscript:
    seed: int
    t: int
    queries: Tuple[Hashable, ...]
    forgery: Optional[Tuple[Hashable, Hashable]]
    accept_probability: float
    outcome: int


@dataclass(frozen=True)
class GameResult:
    """Empirical win rate plus the mean exact acceptance probability of the forgeries."""

    win_rate: float
    standard_error: float
    mean_acceptance: float
    transcripts: Tuple[GameTranscript, ...]


def forgery_game(s, forger, q, t, trials, rng):
    """
    Run the q-query forgery experiment `trials` times.

    Each trial draws its own seed, so any transcript can be replayed alone. A forgery on a queried
    message scores 0.

    Raises:
        GameError: If the forger exceeds q queries.
    """
    if trials < 1:
        raise PreconditionError(f"Need at least one trial, got {trials}.")
    transcripts = []
    for _ in range(trials):
        seed = draw_seed(rng)
        trial_rng = make_rng(seed)
        sk = s.sk_gen(trial_rng)
        pk = s.pk_gen(sk)
        oracle = SigningOracle(s, sk, q, trial_rng)
        forgery = forger.forge([pk] * t, oracle, trial_rng)
        accept = 0.0
        if forgery is not None and forgery[0] not in oracle.queries:
            accept = s.verify(pk, forgery[0], forgery[1])
        outcome = int(trial_rng.random() < accept)
        transcripts.append(GameTranscript(seed, t, tuple(oracle.queries), forgery, accept, outcome))
    rate, error = mean_and_standard_error([transcript.outcome for transcript in transcripts])
    mean_accept = float(np.mean([transcript.accept_probability for transcript in transcripts]))
    return GameResult(rate, error, mean_accept, tuple(transcripts))


class ReplayForger:
    """Queries a message and re-submits its signature; always disallowed."""

    def __init__(self, scheme):
        self.scheme = scheme

    def forge(self, pk_copies, oracle, rng):
        message = self.scheme.messages[0]
        return message, oracle.sign(message)


class KeyHolderForger:
    """Harness sanity check: reads the secret key out of band and signs a fresh message."""

    def __init__(self, scheme):
        self.scheme = scheme

    def forge(self, pk_copies, oracle, rng):
        message = self.scheme.messages[-1]
        return message, self.scheme.sign(oracle.leak_secret_key(), message, rng)


class KeyGuessingForger:
    """Samples an independent secret key and signs with it."""

    def __init__(self, scheme):
        if scheme.secret_keys is None:
            raise PreconditionError("Key guessing needs an exact secret-key distribution.")
        self.scheme = scheme

    def forge(self, pk_copies, oracle, rng):
        message = self.scheme.messages[-1]
        return message, self.scheme.sign(self.scheme.secret_keys.sample(rng), message, rng)


def key_guessing_win(s, message=None):
    """Exact win probability of `KeyGuessingForger`: the average cross-acceptance."""
    message = s.messages[-1] if message is None else message
    keys = s.secret_keys
    return sum(
        p * p_guess * s.verify(s.pk_gen(sk), message, s.sign(guess, message, None))
        for sk, p in keys.items()
        for guess, p_guess in keys.items()
    )


def read_register(state, label, rng):
    """Computational-basis reading of one register of `state`."""
    reduced = partial_trace(state, [label])
    weights = np.clip(np.real(np.diagonal(reduced.matrix)), 0.0, None)
    return int(rng.choice(weights.size, p=weights / weights.sum()))


class MeasuringForger:
    """
    Planted forger for one-bit schemes over orthonormal families.

    It queries a random bit m, then reads slot m⊕1 of the first public-key copy in the computational basis
    and forges on m⊕1 with that reading; with probability 1 - accuracy it submits BOTTOM instead.
    """

    def __init__(self, accuracy=1.0, register="S"):
        self.accuracy = accuracy
        self.register = register

    def forge(self, pk_copies, oracle, rng):
        message = int(rng.integers(2))
        oracle.sign(message)
        target = message ^ 1
        reading = read_register(pk_copies[0], f"pk{target}.{self.register}", rng)
        return target, reading if rng.random() < self.accuracy else BOTTOM


class InverterForger:
    """Forger from an inverter of `owsg_from_qds(s)`: sk' ← inverter(pk^{⊗t}), output (1, Sign(sk', 1))."""

    def __init__(self, scheme, inverter):
        self.scheme = scheme
        self.inverter = inverter

    def forge(self, pk_copies, oracle, rng):
        guess = self.inverter.solve(pk_copies, rng)
        if guess is None or guess == BOTTOM:
            return None
        return 1, self.scheme.sign(guess, 1, rng)


def reduction_forger_from_owsg_breaker(s, inverter):
    return InverterForger(s, inverter)


class _EmbeddedKeyOracle:
    """Answers the single query with k' unless it hits the embedded slot r."""

    def __init__(self, r, key):
        self.r = r
        self._key = key
        self.queries: List[Hashable] = []

    def sign(self, message):
        if self.queries:
            raise GameError("The one-time reduction answers a single signing query.")
        self.queries.append(message)
        if message == self.r:
            raise ReductionAbort(f"query on embedded slot {message}")
        return self._key


class ForgerInverter(PuzzleSolver):
    """
    OWSG inverter from a one-time forger of `qds_from_owsg(o)`.

    The instance φ_k goes into slot r, a self-generated φ_k' into the other slot; a query on r aborts and
    otherwise the forger's signature is submitted as the key guess.
    """

    def __init__(self, o, forger, t=1):
        super().__init__(t)
        self.o = o
        self.forger = forger

    def solve(self, copies, rng):
        r = int(rng.integers(2))
        own_key = self.o.keys.sample(rng)
        own = self.o.family.state(own_key)
        pk_copies = []
        for copy in copies:
            slots = (copy, own) if r == 0 else (own, copy)
            pk_copies.append(tensor(slots[0].tagged("pk0"), slots[1].tagged("pk1")))
        oracle = _EmbeddedKeyOracle(r, own_key)
        try:
            forgery = self.forger.forge(pk_copies, oracle, rng)
        except ReductionAbort:
            return BOTTOM
        if forgery is None or forgery[0] != r:
            return BOTTOM
        return forgery[1]


def reduction_owsg_breaker_from_forger(o, forger, t=1):
    return ForgerInverter(o, forger, t)


@dataclass(frozen=True, eq=False)
class QTimeScheme(QdsScheme):
    """λ × q² grid of one-time components; `base` is the one-time scheme."""

    base: Optional[QdsScheme] = None
    q: int = 1
    lam: int = 1
    columns: int = field(init=False, default=1)

    def __post_init__(self):
        object.__setattr__(self, "columns", self.q * self.q)

    def component(self, a, b):
        return a * self.columns + b

    def component_label(self, a, b):
        return f"r{a}c{b}"


def one_time_to_q_time(s, q, lam):
    """
    q-time scheme from a one-time scheme.

    sk = (sk_{a,b}) for a < λ, b < q²; pk is the tensor of all component public keys; Sign picks b_a
    uniformly per row and signs with sk_{a,b_a}; the signature is ((b_a, σ_a))_a and Ver checks every row.

    Raises:
        SizingError: If the λq²-fold public key exceeds the dimension cap.
    """
    if q < 1 or lam < 1:
        raise PreconditionError(f"Need q >= 1 and lambda >= 1, got q={q}, lambda={lam}.")
    columns = q * q
    cells = [(a, b) for a in range(lam) for b in range(columns)]
    check_dimension(s.pk_shape.dim ** len(cells), f"{lam}x{columns} public key")
    pk_shape = reduce(
        lambda left, right: left.concat(right), [s.pk_shape.tagged(f"r{a}c{b}") for a, b in cells]
    )
    identity = np.eye(s.pk_shape.dim, dtype=complex)

    def sk_gen(rng):
        return tuple(s.sk_gen(rng) for _ in cells)

    def pk_gen(sk):
        return tensor_all([s.pk_gen(sk[a * columns + b]).tagged(f"r{a}c{b}") for a, b in cells])

    def sign(sk, message, rng=None):
        signature = []
        for a in range(lam):
            b = 0 if rng is None else int(rng.integers(columns))
            signature.append((b, s.sign(sk[a * columns + b], message, rng)))
        return tuple(signature)

    def verify_effect(message, signature):
        if not isinstance(signature, tuple) or len(signature) != lam:
            return _zero(pk_shape)
        factors = []
        for a, b in cells:
            chosen, component_signature = signature[a]
            factors.append(s.verify_effect(message, component_signature) if b == chosen else identity)
        return reduce(np.kron, factors)

    return QTimeScheme(
        sk_gen,
        pk_gen,
        sign,
        verify_effect,
        messages=s.messages,
        pk_shape=pk_shape,
        secret_keys=None,
        correctness_error=1 - (1 - s.correctness_error) ** lam,
        name=f"{s.name}^({q},{lam})",
        base=s,
        q=q,
        lam=lam,
    )


@dataclass(frozen=True)
class GoodEvent:
    """Pr[Good] analytic and Monte-Carlo, with the 1 - (1 - e^{-1})^λ lower bound."""

    analytic: float
    monte_carlo: float
    standard_error: float
    lower_bound: float
    trials: int


def bad_row_probability(q):
    """Pr[Bad_a] = 1 - q²(q²-1)...(q²-q+1)/(q²)^q."""
    columns = q * q
    return 1.0 - math.prod((columns - j) / columns for j in range(q))


def good_event_probability(q, lam, trials, rng):
    """Probability that some row's q column choices are all distinct."""
    if q < 1 or lam < 1:
        raise PreconditionError(f"Need q >= 1 and lambda >= 1, got q={q}, lambda={lam}.")
    analytic = 1.0 - bad_row_probability(q) ** lam
    draws = np.sort(rng.integers(0, q * q, size=(trials, lam, q)), axis=2)
    distinct_rows = np.all(np.diff(draws, axis=2) != 0, axis=2)
    good = np.any(distinct_rows, axis=1).astype(float)
    rate, error = mean_and_standard_error(good)
    return GoodEvent(analytic, rate, error, 1.0 - (1.0 - math.exp(-1)) ** lam, trials)


class QTimeReadingForger:
    """
    Planted q-time forger for `one_time_to_q_time(qds_from_owsg(orthonormal))`.

    It spends its q queries on message 0, then reads every row's column-0 slot pk1 and forges message 1 with
    b'_a = 0. Each reading is kept with probability `accuracy`.
    """

    def __init__(self, scheme, accuracy=1.0, register="S"):
        self.scheme = scheme
        self.accuracy = accuracy
        self.register = register

    def forge(self, pk_copies, oracle, rng):
        for _ in range(self.scheme.q):
            oracle.sign(0)
        signature = []
        for a in range(self.scheme.lam):
            reading = read_register(pk_copies[0], f"r{a}c0.pk1.{self.register}", rng)
            signature.append((0, reading if rng.random() < self.accuracy else BOTTOM))
        return 1, tuple(signature)


@dataclass(frozen=True)
class EmbeddingRecord:
    """Audit record of one embedding run: guesses, component queries and how it ended."""

    a_star: int
    b_star: int
    embedded_queries: int
    inner_queries: Tuple[Hashable, ...]
    aborted: bool


class _SimulatedQTimeOracle:
    """Signs for the q-time forger with self-made keys, forwarding the embedded component's query."""

    def __init__(self, scheme, own_keys, a_star, b_star, external, rng):
        self.scheme = scheme
        self.own_keys = own_keys
        self.a_star = a_star
        self.b_star = b_star
        self.external = external
        self.rng = rng
        self.queries: List[Hashable] = []
        self.embedded_queries = 0

    def sign(self, message):
        if len(self.queries) >= self.scheme.q:
            raise GameError(f"Forger exceeded its budget of {self.scheme.q} signing queries.")
        self.queries.append(message)
        base = self.scheme.base
        signature = []
        for a in range(self.scheme.lam):
            b = int(self.rng.integers(self.scheme.columns))
            if (a, b) == (self.a_star, self.b_star):
                if self.embedded_queries:
                    raise ReductionAbort("embedded component asked to sign twice")
                self.embedded_queries += 1
                signature.append((b, self.external.sign(message)))
            else:
                own_key = self.own_keys[self.scheme.component(a, b)]
                signature.append((b, base.sign(own_key, message, self.rng)))
        return tuple(signature)


class QTimeEmbeddingForger:
    """
    One-time forger from a q-time forger: guess (a*, b*), plant the challenge public key there and
    simulate every other component.

    Aborts when the embedded component would sign twice or the forgery does not use column b* in row a*.
    """

    def __init__(self, scheme, q_time_forger):
        self.scheme = scheme
        self.q_time_forger = q_time_forger
        self.records: List[EmbeddingRecord] = []

    def forge(self, pk_copies, oracle, rng):
        scheme = self.scheme
        base = scheme.base
        a_star = int(rng.integers(scheme.lam))
        b_star = int(rng.integers(scheme.columns))
        own_keys = [base.sk_gen(rng) for _ in range(scheme.lam * scheme.columns)]
        embedded = scheme.component(a_star, b_star)
        public = []
        for challenge in pk_copies:
            components = []
            for a in range(scheme.lam):
                for b in range(scheme.columns):
                    position = scheme.component(a, b)
                    state = challenge if position == embedded else base.pk_gen(own_keys[position])
                    components.append(state.tagged(scheme.component_label(a, b)))
            public.append(tensor_all(components))
        simulated = _SimulatedQTimeOracle(scheme, own_keys, a_star, b_star, oracle, rng)
        result = None
        try:
            forgery = self.q_time_forger.forge(public, simulated, rng)
            if forgery is not None:
                message, signature = forgery
                chosen, component_signature = signature[a_star]
                if chosen == b_star:
                    result = (message, component_signature)
        except ReductionAbort:
            result = None
        self.records.append(
            EmbeddingRecord(
                a_star, b_star, simulated.embedded_queries, tuple(simulated.queries), result is None
            )
        )
        return result
