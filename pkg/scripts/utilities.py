"""Common utility functions for the workbench: numeric policy, errors, seeded randomness and keys."""
# pylint: disable=too-many-arguments

import math
import os
from dataclasses import dataclass
from itertools import product
from typing import Hashable, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

TOLERANCE = 1e-9
EXACT_TOLERANCE = 1e-12
SUPPORT_CUTOFF = 1e-12
DEFAULT_DIMENSION_CAP = 4096

_dimension_cap = int(os.getenv("OWSG_WB_DIM_CAP", str(DEFAULT_DIMENSION_CAP)))


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""


class ShapeError(WorkbenchError):
    """An exception that represents a register shape or label mismatch."""


class SizingError(WorkbenchError):
    """An exception that represents a construction exceeding the dimension cap."""


class PreconditionError(WorkbenchError):
    """An exception that represents a violated operation precondition."""


class GameError(WorkbenchError):
    """An exception that represents a broken security-game contract (query or copy budget)."""


class ProvenanceError(WorkbenchError):
    """An exception that represents a commitment without construction provenance."""


class UnknownExperimentError(WorkbenchError):
    """An exception that represents a request for an unregistered experiment."""


def get_dimension_cap():
    """
    Returns the current total-dimension cap.
    """
    return _dimension_cap


def set_dimension_cap(cap):
    """
    Set the total-dimension cap used by every tensor-growing construction.

    Args:
        cap (int): The new cap. Must be at least 1.

    Returns:
        int: The previous cap, so callers can restore it.

    Raises:
        ValueError: If the cap is not a positive integer.
    """
    global _dimension_cap  # pylint: disable=global-statement
    try:
        cap = int(cap)
    except (TypeError, ValueError) as error:
        raise ValueError(f"Invalid dimension cap {cap!r}. Should be a positive integer.") from error
    if cap < 1:
        raise ValueError(f"Invalid dimension cap {cap}. Should be a positive integer.")
    previous, _dimension_cap = _dimension_cap, cap
    return previous


def check_dimension(dim, what="state"):
    """
    Fail fast when a construction would exceed the dimension cap.

    Args:
        dim (int): The total dimension about to be built.
        what (str): A short description used in the error message.

    Raises:
        SizingError: If `dim` exceeds the configured cap.
    """
    if dim > _dimension_cap:
        raise SizingError(f"{what} needs total dimension {dim}, above the cap of {_dimension_cap}.")


def make_rng(seed):
    """
    Build the seeded counter-based generator threaded through every stochastic operation.

    Args:
        seed (int): A non-negative 64-bit seed.

    Returns:
        numpy.random.Generator: A Philox-backed generator.
    """
    return np.random.Generator(np.random.Philox(int(seed)))


def draw_seed(rng):
    """Draw a fresh 63-bit child seed from `rng` so a trial can be replayed on its own."""
    return int(rng.integers(0, 2**63 - 1))


def get_default_seed():
    """
    Gets the default seed from the OWSG_WB_SEED environment variable.

    Returns:
        int: The seed, or 0 when the variable is unset.
    """
    value = os.getenv("OWSG_WB_SEED")
    if value is None or value.strip() == "":
        return 0
    try:
        return int(value, 0)
    except ValueError as error:
        raise ValueError(f"Invalid OWSG_WB_SEED {value!r}. Should be an integer.") from error


def mean_and_standard_error(outcomes):
    """
    Mean and standard error of a sequence of 0/1 (or real) trial outcomes.

    :param outcomes: Iterable of per-trial outcomes.
    :return: (mean, standard error); the error is 0 for fewer than two trials.
    """
    values = np.asarray(list(outcomes) if not isinstance(outcomes, np.ndarray) else outcomes, dtype=float)
    if values.size == 0:
        return 0.0, 0.0
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def binomial_standard_error(probability, trials):
    """Standard error of a Bernoulli rate with success `probability` over `trials` trials."""
    probability = min(max(float(probability), 0.0), 1.0)
    return math.sqrt(probability * (1.0 - probability) / max(int(trials), 1))


def within_sigmas(observed, expected, standard_error, sigmas=3.0):
    """
    Check that `observed` lies within `sigmas` standard errors of `expected`.

    A zero standard error degenerates to an exact comparison with EXACT_TOLERANCE slack.
    """
    return abs(observed - expected) <= sigmas * standard_error + EXACT_TOLERANCE


def format_value(value):
    """Format a number with 17 significant digits, the precision every report uses."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def bits(value, width):
    """Return the `width`-bit big-endian tuple of `value`."""
    return tuple((int(value) >> (width - 1 - position)) & 1 for position in range(width))


def bits_to_int(bit_tuple):
    """Inverse of `bits`."""
    value = 0
    for bit in bit_tuple:
        value = (value << 1) | int(bit)
    return value


def all_bit_strings(width):
    """Every `width`-bit tuple in lexicographic order."""
    return [tuple(bit_tuple) for bit_tuple in product((0, 1), repeat=width)]


def xor_bits(left, right):
    """Bitwise XOR of two equal-length bit tuples."""
    if len(left) != len(right):
        raise ValueError(f"Bit strings of lengths {len(left)} and {len(right)} cannot be combined.")
    return tuple(a ^ b for a, b in zip(left, right))


@dataclass(frozen=True)
class KeyDistribution:
    """
    A finite key alphabet with exact probabilities.

    Keys are arbitrary hashable values (ints, bit tuples, tuples of keys). The support is listable so
    every exact sum in the workbench can enumerate it.
    """

    keys: Tuple[Hashable, ...]
    probabilities: Tuple[float, ...]

    def __post_init__(self):
        keys = tuple(self.keys)
        probabilities = tuple(float(probability) for probability in self.probabilities)
        if not keys:
            raise PreconditionError("A key distribution needs at least one key.")
        if len(keys) != len(probabilities):
            raise PreconditionError(f"Got {len(keys)} keys but {len(probabilities)} probabilities.")
        if len(set(keys)) != len(keys):
            raise PreconditionError("Keys must be unique.")
        if min(probabilities) < 0:
            raise PreconditionError("Key probabilities must be non-negative.")
        if abs(sum(probabilities) - 1.0) > EXACT_TOLERANCE:
            raise PreconditionError(f"Key probabilities sum to {sum(probabilities)!r}, not 1.")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "probabilities", probabilities)
        object.__setattr__(self, "_index", {key: position for position, key in enumerate(keys)})
        object.__setattr__(self, "_weights", np.array(probabilities, dtype=float))

    @classmethod
    def uniform(cls, keys: Iterable[Hashable]):
        """Uniform distribution over `keys`."""
        keys = tuple(keys)
        return cls(keys, tuple(1.0 / len(keys) for _ in keys))

    @classmethod
    def from_mapping(cls, weights: Mapping[Hashable, float]):
        """Build a distribution from a key -> probability mapping."""
        return cls(tuple(weights.keys()), tuple(weights.values()))

    @classmethod
    def product(cls, components: Sequence["KeyDistribution"]):
        """
        Independent product of component distributions; keys become tuples.

        Args:
            components (list): The component distributions, in slot order.

        Returns:
            KeyDistribution: The joint distribution over key tuples.
        """
        keys = tuple(product(*(component.keys for component in components)))
        probabilities = tuple(
            math.prod(probability_tuple)
            for probability_tuple in product(*(component.probabilities for component in components))
        )
        total = sum(probabilities)
        return cls(keys, tuple(probability / total for probability in probabilities))

    def __len__(self):
        return len(self.keys)

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self.keys)

    def __contains__(self, key):
        try:
            return key in self._index
        except TypeError:
            return False

    def items(self):
        """Pairs (key, probability)."""
        return zip(self.keys, self.probabilities)

    def index(self, key):
        """Position of `key` in the alphabet."""
        try:
            return self._index[key]
        except (KeyError, TypeError) as error:
            raise PreconditionError(f"Unknown key {key!r}.") from error

    def probability(self, key):
        """Exact probability of `key` (0 for keys outside the support)."""
        if key not in self:
            return 0.0
        return self.probabilities[self._index[key]]

    def sample(self, rng):
        """Draw one key."""
        return self.keys[int(rng.choice(len(self.keys), p=self._weights))]

    def sample_indices(self, rng, size):
        """Draw key positions with the given array `size`."""
        return rng.choice(len(self.keys), size=size, p=self._weights)

    def most_likely(self):
        """The key with the largest prior weight (first one on ties)."""
        return self.keys[int(np.argmax(self._weights))]


def optional_float(value: Optional[str], default):
    """Parse an optional config string as float, keeping `default` when absent."""
    if value is None or str(value).strip() == "":
        return default
    return float(value)
