"""
Exact linear algebra on small labeled tensor-product registers.

States, POVMs, distances and the standard constructions every other module builds on. All values are
immutable after construction and every stochastic function takes a numpy Generator explicitly.
"""
# pylint: disable=too-many-arguments,invalid-name

import io
from dataclasses import dataclass, field
from functools import reduce
from typing import Hashable, Sequence, Tuple

import numpy as np
from cachetools import LRUCache, cached
from scipy import linalg

from utilities import (
    EXACT_TOLERANCE,
    SUPPORT_CUTOFF,
    TOLERANCE,
    PreconditionError,
    ShapeError,
    check_dimension,
)


@dataclass(frozen=True)
class RegisterShape:
    """Ordered (label, dim) factors of a tensor-product register; the empty shape is the scalar space."""

    factors: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise ShapeError(f"Duplicate register labels in {labels}.")
        for label, dim in factors:
            if dim < 1:
                raise ShapeError(f"Register {label!r} has dimension {dim}; dims must be at least 1.")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *factors):
        """Build a shape from (label, dim) pairs."""
        return cls(tuple(factors))

    @property
    def labels(self):
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self):
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self):
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def index(self, label):
        """Position of `label` in the factor list."""
        try:
            return self.labels.index(label)
        except ValueError as error:
            raise ShapeError(f"Unknown register label {label!r}; shape has {self.labels}.") from error

    def dim_of(self, label):
        return self.dims[self.index(label)]

    def concat(self, other):
        """Concatenate two shapes; a label collision is a shape error."""
        collision = set(self.labels) & set(other.labels)
        if collision:
            raise ShapeError(f"Register labels {sorted(collision)} appear on both sides of a tensor product.")
        return RegisterShape(self.factors + other.factors)

    def select(self, labels):
        """Sub-shape with the given labels, kept in this shape's order."""
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return RegisterShape(tuple(factor for factor in self.factors if factor[0] in wanted))

    def tagged(self, tag):
        return RegisterShape(tuple((f"{tag}.{label}", dim) for label, dim in self.factors))

    def relabeled(self, mapping):
        return RegisterShape(tuple((mapping.get(label, label), dim) for label, dim in self.factors))

    def __str__(self):
        return " ".join(f"{label}:{dim}" for label, dim in self.factors) or "scalar"


def hermitize(matrix):
    """Replace M by (M + M†)/2."""
    matrix = np.asarray(matrix, dtype=complex)
    return (matrix + matrix.conj().T) / 2


def _check_square(matrix, shape, what):
    if matrix.shape != (shape.dim, shape.dim):
        expected = (shape.dim, shape.dim)
        raise ShapeError(f"{what} has matrix shape {matrix.shape}, expected {expected} for {shape}.")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A unit-trace PSD matrix on a labeled register."""

    shape: RegisterShape
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        _check_square(matrix, self.shape, "Density matrix")
        check_dimension(self.shape.dim, "Density matrix")
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > TOLERANCE:
            raise PreconditionError("Density matrix is not Hermitian.")
        if abs(np.trace(matrix) - 1) > TOLERANCE:
            raise PreconditionError(f"Density matrix has trace {np.trace(matrix).real:.12g}, not 1.")
        if np.linalg.eigvalsh(hermitize(matrix)).min() < -TOLERANCE:
            raise PreconditionError("Density matrix is not positive semidefinite.")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def unchecked(cls, shape, matrix):
        """Wrap a matrix already known to be a valid state, skipping validation."""
        state = object.__new__(cls)
        matrix = np.asarray(matrix, dtype=complex)
        matrix.setflags(write=False)
        object.__setattr__(state, "shape", shape)
        object.__setattr__(state, "matrix", matrix)
        return state

    @classmethod
    def maximally_mixed(cls, shape):
        return cls.unchecked(shape, np.eye(shape.dim, dtype=complex) / shape.dim)

    @classmethod
    def basis(cls, shape, index):
        """The projector onto computational-basis vector `index`."""
        matrix = np.zeros((shape.dim, shape.dim), dtype=complex)
        matrix[index, index] = 1.0
        return cls.unchecked(shape, matrix)

    @property
    def dim(self):
        return self.shape.dim

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def tagged(self, tag):
        return DensityMatrix.unchecked(self.shape.tagged(tag), self.matrix)

    def relabeled(self, mapping):
        return DensityMatrix.unchecked(self.shape.relabeled(mapping), self.matrix)

    def with_shape(self, shape):
        """Same matrix on a shape with the same factor dims."""
        if shape.dims != self.shape.dims:
            raise ShapeError(f"Cannot reinterpret {self.shape} as {shape}.")
        return DensityMatrix.unchecked(shape, self.matrix)


@dataclass(frozen=True, eq=False)
class PureState:
    """A unit vector on a labeled register."""

    shape: RegisterShape
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != self.shape.dim:
            raise ShapeError(
                f"State has {amplitudes.size} amplitudes, expected {self.shape.dim} for {self.shape}."
            )
        check_dimension(self.shape.dim, "Pure state")
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1) > TOLERANCE:
            raise PreconditionError(f"State has norm {norm:.12g}, not 1.")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def unchecked(cls, shape, amplitudes):
        state = object.__new__(cls)
        amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
        amplitudes.setflags(write=False)
        object.__setattr__(state, "shape", shape)
        object.__setattr__(state, "amplitudes", amplitudes)
        return state

    @classmethod
    def basis(cls, shape, index):
        amplitudes = np.zeros(shape.dim, dtype=complex)
        amplitudes[index] = 1.0
        return cls.unchecked(shape, amplitudes)

    @classmethod
    def normalized(cls, shape, vector):
        """Normalize an arbitrary non-zero vector into a state."""
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm <= EXACT_TOLERANCE:
            raise PreconditionError("Cannot normalize the zero vector.")
        return cls(shape, vector / norm)

    @property
    def dim(self):
        return self.shape.dim

    def density(self):
        return DensityMatrix.unchecked(self.shape, np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other):
        """Inner product ⟨self|other⟩."""
        if self.shape.dims != other.shape.dims:
            raise ShapeError(f"Cannot take overlap of {self.shape} and {other.shape}.")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tagged(self, tag):
        return PureState.unchecked(self.shape.tagged(tag), self.amplitudes)

    def relabeled(self, mapping):
        return PureState.unchecked(self.shape.relabeled(mapping), self.amplitudes)


def as_density(state):
    """Density matrix of a PureState or a DensityMatrix."""
    return state.density() if isinstance(state, PureState) else state


@dataclass(frozen=True, eq=False)
class Povm:
    """Labeled PSD effects summing to the identity."""

    shape: RegisterShape
    effects: Tuple[Tuple[Hashable, np.ndarray], ...]
    _lookup: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        effects = tuple((label, np.array(effect, dtype=complex)) for label, effect in self.effects)
        if not effects:
            raise PreconditionError("A POVM needs at least one effect.")
        total = np.zeros((self.shape.dim, self.shape.dim), dtype=complex)
        for label, effect in effects:
            _check_square(effect, self.shape, f"Effect {label!r}")
            if np.linalg.eigvalsh(hermitize(effect)).min() < -TOLERANCE:
                raise PreconditionError(f"Effect {label!r} is not positive semidefinite.")
            total += effect
        if np.max(np.abs(total - np.eye(self.shape.dim))) > TOLERANCE:
            raise PreconditionError("POVM effects do not sum to the identity.")
        self._finish(effects)

    def _finish(self, effects):
        object.__setattr__(self, "effects", effects)
        self._lookup.clear()
        self._lookup.update({label: position for position, (label, _) in enumerate(effects)})
        if len(self._lookup) != len(effects):
            raise PreconditionError("POVM outcome labels must be unique.")

    @classmethod
    def unchecked(cls, shape, effects):
        povm = object.__new__(cls)
        object.__setattr__(povm, "shape", shape)
        object.__setattr__(povm, "_lookup", {})
        povm._finish(tuple((label, np.asarray(effect, dtype=complex)) for label, effect in effects))
        return povm

    @property
    def labels(self):
        return tuple(label for label, _ in self.effects)

    def effect(self, label):
        """Effect for `label`; the zero matrix when the outcome is not listed."""
        position = self._lookup.get(label)
        if position is None:
            return np.zeros((self.shape.dim, self.shape.dim), dtype=complex)
        return self.effects[position][1]

    def probabilities(self, state):
        """Outcome distribution on `state` as a label -> probability dict."""
        rho = as_density(state)
        if rho.shape.dims != self.shape.dims:
            raise ShapeError(f"POVM on {self.shape} applied to a state on {rho.shape}.")
        return {label: expectation(effect, rho) for label, effect in self.effects}

    def probability(self, label, state):
        return expectation(self.effect(label), as_density(state))

    def measure(self, state, rng):
        """Sample one outcome label."""
        distribution = self.probabilities(state)
        weights = np.clip(np.array(list(distribution.values())), 0.0, None)
        return self.labels[int(rng.choice(len(weights), p=weights / weights.sum()))]


def expectation(effect, state):
    """Tr(E ρ) clipped to [0, 1]."""
    rho = as_density(state)
    value = float(np.real(np.einsum("ij,ji->", effect, rho.matrix)))
    return min(max(value, 0.0), 1.0)


def tensor(a, b):
    """
    Tensor product of two states on disjoint registers.

    PureState inputs give a PureState; otherwise the result is a DensityMatrix.

    Raises:
        ShapeError: If the label sets overlap.
    """
    shape = a.shape.concat(b.shape)
    check_dimension(shape.dim, "Tensor product")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState.unchecked(shape, np.kron(a.amplitudes, b.amplitudes))
    return DensityMatrix.unchecked(shape, np.kron(as_density(a).matrix, as_density(b).matrix))


def tensor_all(states):
    """Left fold of `tensor`."""
    return reduce(tensor, states)


def tensor_power(state, copies, tag="copy"):
    """`copies` tagged copies of `state`, labels `f"{tag}{j}.{label}"`."""
    if copies < 1:
        raise PreconditionError(f"Copy count must be at least 1, got {copies}.")
    check_dimension(state.shape.dim**copies, "Tensor power")
    return tensor_all([state.tagged(f"{tag}{j}") for j in range(copies)])


def partial_trace(state, keep):
    """
    Trace out every register not in `keep`.

    Args:
        state (DensityMatrix | PureState): The state to reduce.
        keep (iterable): Labels to keep; the result keeps them in the state's order.

    Returns:
        DensityMatrix: The reduced state.

    Raises:
        ShapeError: If a label in `keep` is not a register of the state.
    """
    shape = state.shape
    keep_set = set(keep)
    for label in keep_set:
        shape.index(label)
    kept = [position for position, label in enumerate(shape.labels) if label in keep_set]
    traced = [position for position, label in enumerate(shape.labels) if label not in keep_set]
    kept_shape = RegisterShape(tuple(shape.factors[position] for position in kept))
    kept_dim = kept_shape.dim
    traced_dim = int(np.prod([shape.dims[position] for position in traced], dtype=np.int64)) if traced else 1
    if isinstance(state, PureState):
        tensor_ = state.amplitudes.reshape(shape.dims or (1,))
        tensor_ = np.transpose(tensor_, kept + traced) if shape.dims else tensor_
        block = tensor_.reshape(kept_dim, traced_dim)
        return DensityMatrix.unchecked(kept_shape, block @ block.conj().T)
    count = len(shape.dims)
    if count == 0:
        return state
    tensor_ = state.matrix.reshape(shape.dims + shape.dims)
    order = kept + traced + [count + position for position in kept + traced]
    tensor_ = np.transpose(tensor_, order).reshape(kept_dim, traced_dim, kept_dim, traced_dim)
    return DensityMatrix.unchecked(kept_shape, np.trace(tensor_, axis1=1, axis2=3))


def permute(state, labels):
    """Reorder the registers of `state` into `labels` order."""
    shape = state.shape
    if sorted(labels) != sorted(shape.labels):
        raise ShapeError(f"Permutation {labels} does not match registers {shape.labels}.")
    order = [shape.index(label) for label in labels]
    new_shape = RegisterShape(tuple(shape.factors[position] for position in order))
    if isinstance(state, PureState):
        data = np.transpose(state.amplitudes.reshape(shape.dims), order).reshape(-1)
        return PureState.unchecked(new_shape, data)
    count = len(order)
    data = np.transpose(state.matrix.reshape(shape.dims + shape.dims), order + [count + k for k in order])
    return DensityMatrix.unchecked(new_shape, data.reshape(shape.dim, shape.dim))


def _same_dims(rho, sigma):
    if rho.shape.dims != sigma.shape.dims:
        raise ShapeError(f"States on {rho.shape} and {sigma.shape} cannot be compared.")


def trace_distance(rho, sigma):
    """½‖ρ − σ‖₁, from the eigenvalues of the hermitized difference."""
    rho, sigma = as_density(rho), as_density(sigma)
    _same_dims(rho, sigma)
    eigenvalues = np.linalg.eigvalsh(hermitize(rho.matrix - sigma.matrix))
    return float(min(max(0.5 * np.sum(np.abs(eigenvalues)), 0.0), 1.0))


def psd_sqrt_and_pinv(matrix, cutoff=SUPPORT_CUTOFF):
    """
    Square root and support-restricted inverse square root of a Hermitian PSD matrix.

    Args:
        matrix (numpy.ndarray): Hermitian PSD input (within TOLERANCE).
        cutoff (float): Eigenvalues at or below this are treated as zero for the inverse.

    Returns:
        tuple: (sqrt, pinv_sqrt) as numpy arrays.

    Raises:
        PreconditionError: If the input is not Hermitian or has a clearly negative eigenvalue.
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"Expected a square matrix, got shape {matrix.shape}.")
    if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > TOLERANCE:
        raise PreconditionError("psd_sqrt_and_pinv needs a Hermitian matrix.")
    eigenvalues, vectors = np.linalg.eigh(hermitize(matrix))
    if eigenvalues.size and eigenvalues.min() < -TOLERANCE:
        raise PreconditionError(f"Matrix has negative eigenvalue {eigenvalues.min():.3g}.")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    roots = np.sqrt(eigenvalues)
    inverse_roots = np.zeros_like(roots)
    support = eigenvalues > cutoff
    inverse_roots[support] = 1.0 / roots[support]
    sqrt = (vectors * roots) @ vectors.conj().T
    pinv_sqrt = (vectors * inverse_roots) @ vectors.conj().T
    return sqrt, pinv_sqrt


def fidelity(rho, sigma):
    """Uhlmann fidelity ‖√ρ√σ‖₁², clipped to [0, 1]."""
    if isinstance(rho, PureState) and isinstance(sigma, PureState):
        return float(min(abs(rho.overlap(sigma)) ** 2, 1.0))
    rho, sigma = as_density(rho), as_density(sigma)
    _same_dims(rho, sigma)
    sqrt_rho, _ = psd_sqrt_and_pinv(rho.matrix)
    sqrt_sigma, _ = psd_sqrt_and_pinv(sigma.matrix)
    value = float(np.sum(linalg.svdvals(sqrt_rho @ sqrt_sigma)) ** 2)
    return min(max(value, 0.0), 1.0)


_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@cached(LRUCache(maxsize=512))
def _pauli(x_bits, z_bits):
    factors = [
        np.linalg.matrix_power(_PAULI_X, x) @ np.linalg.matrix_power(_PAULI_Z, z)
        for x, z in zip(x_bits, z_bits)
    ]
    result = reduce(np.kron, factors, np.eye(1, dtype=complex))
    result.setflags(write=False)
    return result


def pauli_operator(x_bits, z_bits):
    """
    X^x Z^z = ⊗ᵢ X^{xᵢ} Z^{zᵢ} on n qubits.

    Raises:
        ShapeError: If the bit strings differ in length.
    """
    x_bits = tuple(int(bit) & 1 for bit in x_bits)
    z_bits = tuple(int(bit) & 1 for bit in z_bits)
    if len(x_bits) != len(z_bits):
        raise ShapeError(f"Pauli strings of lengths {len(x_bits)} and {len(z_bits)} differ.")
    check_dimension(2 ** len(x_bits), "Pauli operator")
    return _pauli(x_bits, z_bits)


def maximally_entangled(n, left="A", right="B"):
    """(1/√2ⁿ) Σᵢ |i⟩|i⟩ on registers `left` and `right` of dimension 2ⁿ each."""
    if n < 1:
        raise PreconditionError(f"Maximally entangled state needs n >= 1, got {n}.")
    dim = 2**n
    check_dimension(dim * dim, "Maximally entangled state")
    amplitudes = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    return PureState.unchecked(RegisterShape.of((left, dim), (right, dim)), amplitudes)


def haar_random_states(dim, count, rng):
    """`count` Haar-random unit vectors as rows of a (count, dim) array."""
    gaussians = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return gaussians / np.linalg.norm(gaussians, axis=1, keepdims=True)


def haar_random_state(dim, rng, label="S"):
    """A Haar-random pure state on a single register, from normalized complex Gaussians."""
    if dim < 1:
        raise PreconditionError(f"Dimension must be at least 1, got {dim}.")
    check_dimension(dim, "Haar state")
    return PureState.unchecked(RegisterShape.of((label, dim)), haar_random_states(dim, 1, rng)[0])


def random_unitary(dim, rng):
    """Haar-random unitary from the QR decomposition of a Ginibre matrix with phases fixed."""
    ginibre = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(ginibre)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def random_density_matrix(shape, rng, rank=None):
    """Random mixed state of the given rank (full rank by default) via a Ginibre factor."""
    rank = shape.dim if rank is None else rank
    factor = rng.standard_normal((shape.dim, rank)) + 1j * rng.standard_normal((shape.dim, rank))
    matrix = factor @ factor.conj().T
    return DensityMatrix.unchecked(shape, hermitize(matrix / np.trace(matrix).real))


def conjugate(state, unitary):
    """U ρ U† for a full-register unitary."""
    rho = as_density(state)
    return DensityMatrix.unchecked(rho.shape, hermitize(unitary @ rho.matrix @ unitary.conj().T))


def complete_isometry(isometry):
    """Extend an isometry (orthonormal columns) to a square unitary by appending a null-space basis."""
    isometry = np.asarray(isometry, dtype=complex)
    rows, cols = isometry.shape
    if np.max(np.abs(isometry.conj().T @ isometry - np.eye(cols)), initial=0.0) > TOLERANCE:
        raise PreconditionError("Columns are not orthonormal.")
    if cols == rows:
        return isometry
    complement = linalg.null_space(isometry.conj().T)
    return np.hstack([isometry, complement[:, : rows - cols]])


def complete_to_unitary(vector):
    """A unitary whose first column is the unit `vector`."""
    vector = np.asarray(vector, dtype=complex).reshape(-1, 1)
    return complete_isometry(vector / np.linalg.norm(vector))


def embed_operator(shape, operator, labels):
    """
    Lift an operator acting on `labels` (in the given order) to the whole register, identity elsewhere.
    """
    positions = [shape.index(label) for label in labels]
    rest = [position for position in range(len(shape.dims)) if position not in positions]
    rest_dim = int(np.prod([shape.dims[position] for position in rest], dtype=np.int64)) if rest else 1
    full = np.kron(np.asarray(operator, dtype=complex), np.eye(rest_dim, dtype=complex))
    order = positions + rest
    dims = [shape.dims[position] for position in order]
    inverse = list(np.argsort(order))
    count = len(order)
    full = full.reshape(dims + dims).transpose(inverse + [count + k for k in inverse])
    return full.reshape(shape.dim, shape.dim)


def apply_operator(state, operator, labels):
    """Apply `operator` on the registers `labels` of a pure state (no renormalization)."""
    shape = state.shape
    positions = [shape.index(label) for label in labels]
    sub_dims = [shape.dims[position] for position in positions]
    operator = np.asarray(operator, dtype=complex).reshape(sub_dims + sub_dims)
    data = state.amplitudes.reshape(shape.dims)
    count = len(positions)
    result = np.tensordot(operator, data, axes=(list(range(count, 2 * count)), positions))
    result = np.moveaxis(result, list(range(count)), positions)
    return PureState.unchecked(shape, result.reshape(-1))


def marginal(state, keep):
    """Reduced state on `keep`; alias used where the input is usually a purification."""
    return partial_trace(state, keep)


def purify(state, label="anc"):
    """
    Canonical purification Σ_a √λ_a |e_a⟩|a⟩ of a density matrix.

    The ancilla register `label` has dimension equal to the rank of the state.
    """
    rho = as_density(state)
    eigenvalues, vectors = np.linalg.eigh(hermitize(rho.matrix))
    support = eigenvalues > SUPPORT_CUTOFF
    eigenvalues, vectors = eigenvalues[support], vectors[:, support]
    rank = int(support.sum())
    amplitudes = np.zeros((rho.dim, rank), dtype=complex)
    for position in range(rank):
        amplitudes[:, position] = np.sqrt(eigenvalues[position]) * vectors[:, position]
    shape = rho.shape.concat(RegisterShape.of((label, rank)))
    amplitudes = amplitudes.reshape(-1)
    return PureState.unchecked(shape, amplitudes / np.linalg.norm(amplitudes))


def dumps_matrix(matrix, dims):
    """Text form: a `dims:` header, then one row per line of `re,im` pairs at 17 significant digits."""
    buffer = io.StringIO()
    buffer.write("dims: " + " ".join(str(dim) for dim in dims) + "\n")
    for row in np.atleast_2d(np.asarray(matrix, dtype=complex)):
        buffer.write(" ".join(f"{value.real:.17g},{value.imag:.17g}" for value in row) + "\n")
    return buffer.getvalue()


def loads_matrix(text):
    """Parse `dumps_matrix` output back into (matrix, dims)."""
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines or not lines[0].startswith("dims:"):
        raise ValueError("Matrix text must start with a 'dims:' header.")
    dims = tuple(int(token) for token in lines[0][len("dims:") :].split())
    rows = []
    for line in lines[1:]:
        try:
            pairs = (pair.split(",") for pair in line.split())
            rows.append([complex(float(re), float(im)) for re, im in pairs])
        except ValueError as error:
            raise ValueError(f"Malformed matrix row {line!r}.") from error
    return np.array(rows, dtype=complex), dims


def dumps_state(state):
    """Serialize a state as a `kind: pure` or `kind: density` line followed by its `dumps_matrix` text."""
    if isinstance(state, PureState):
        return "kind: pure\n" + dumps_matrix(state.amplitudes.reshape(1, -1), state.shape.dims)
    return "kind: density\n" + dumps_matrix(state.matrix, state.shape.dims)


def loads_state(text, labels: Sequence[str] = None):
    """
    Inverse of `dumps_state`; registers are labeled `r0, r1, ...` unless `labels` are given.

    Raises:
        ValueError: If the `kind:` header is missing or a pure state has more than one amplitude row.
    """
    header, _, body = text.strip().partition("\n")
    kind = header[len("kind:") :].strip() if header.startswith("kind:") else None
    if kind not in ("pure", "density"):
        raise ValueError("State text must start with a 'kind: pure' or 'kind: density' header.")
    data, dims = loads_matrix(body)
    labels = labels or [f"r{position}" for position in range(len(dims))]
    shape = RegisterShape(tuple(zip(labels, dims)))
    if kind == "density":
        return DensityMatrix(shape, data)
    if data.shape[0] != 1:
        raise ValueError(f"A pure state has one amplitude row, got {data.shape[0]}.")
    return PureState(shape, data[0])
