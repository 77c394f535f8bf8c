"""
Quantum state discrimination: Helstrom advantage, the pretty-good measurement and its Gram-matrix path.
"""
# pylint: disable=invalid-name

from dataclasses import dataclass
from itertools import permutations
from typing import Dict, Hashable, Tuple

import numpy as np

from qstate import (
    DensityMatrix,
    Povm,
    PureState,
    as_density,
    expectation,
    fidelity,
    hermitize,
    psd_sqrt_and_pinv,
    trace_distance,
)
from utilities import SUPPORT_CUTOFF, TOLERANCE, PreconditionError, ShapeError

OUTSIDE_SUPPORT = "⊥"


@dataclass(frozen=True)
class EnsembleItem:
    label: Hashable
    weight: float
    state: DensityMatrix


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted states on one shape."""

    items: Tuple[EnsembleItem, ...]

    def __post_init__(self):
        items = tuple(
            EnsembleItem(item.label, float(item.weight), as_density(item.state)) for item in self.items
        )
        if not items:
            raise PreconditionError("An ensemble needs at least one state.")
        dims = items[0].state.shape.dims
        if any(item.state.shape.dims != dims for item in items):
            raise ShapeError("Every ensemble state must share one register shape.")
        if any(item.weight < 0 for item in items):
            raise PreconditionError("Ensemble weights must be non-negative.")
        if abs(sum(item.weight for item in items) - 1.0) > TOLERANCE:
            raise PreconditionError("Ensemble weights must sum to 1.")
        if len({item.label for item in items}) != len(items):
            raise PreconditionError("Ensemble labels must be unique.")
        object.__setattr__(self, "items", items)

    @classmethod
    def uniform(cls, labeled_states):
        """Equal weights over (label, state) pairs."""
        labeled_states = list(labeled_states)
        weight = 1.0 / len(labeled_states)
        return cls(tuple(EnsembleItem(label, weight, state) for label, state in labeled_states))

    @property
    def shape(self):
        return self.items[0].state.shape

    @property
    def labels(self):
        return tuple(item.label for item in self.items)


def helstrom_advantage(rho, sigma):
    """Optimal two-state distinguishing advantage, ½‖ρ − σ‖₁."""
    return trace_distance(rho, sigma)


def helstrom_measurement(rho, sigma):
    """Projector onto the positive part of ρ − σ; Tr(P(ρ−σ)) equals the Helstrom advantage."""
    rho, sigma = as_density(rho), as_density(sigma)
    eigenvalues, vectors = np.linalg.eigh(hermitize(rho.matrix - sigma.matrix))
    positive = vectors[:, eigenvalues > 0]
    return positive @ positive.conj().T


def pgm(ensemble, weighted=False):
    """
    Pretty-good measurement μ_i = Σ^{-1/2} ρ_i Σ^{-1/2} with Σ = Σ_i ρ_i.

    With `weighted=True` the square-root measurement Σ_w = Σ_i w_i ρ_i, μ_i = w_i Σ_w^{-1/2} ρ_i Σ_w^{-1/2}
    is built instead. The part of the space outside supp(Σ) is assigned to an extra outcome
    OUTSIDE_SUPPORT when it is non-empty.

    Returns:
        Povm: Labeled by the ensemble labels, plus OUTSIDE_SUPPORT when needed.
    """
    weights = [item.weight if weighted else 1.0 for item in ensemble.items]
    total = sum(weight * item.state.matrix for weight, item in zip(weights, ensemble.items))
    _, inverse_root = psd_sqrt_and_pinv(hermitize(total), SUPPORT_CUTOFF)
    effects = [
        (item.label, hermitize(weight * inverse_root @ item.state.matrix @ inverse_root))
        for weight, item in zip(weights, ensemble.items)
    ]
    dim = ensemble.shape.dim
    remainder = hermitize(np.eye(dim) - sum(effect for _, effect in effects))
    if np.max(np.abs(remainder)) > TOLERANCE:
        effects.append((OUTSIDE_SUPPORT, remainder))
    return Povm.unchecked(ensemble.shape, effects)


@dataclass(frozen=True)
class PgmReport:
    """Per-label error 1 − Tr(μ_i ρ_i), the max and weighted average, and the Σ_{i≠j} √F bound."""

    errors: Dict[Hashable, float]
    max_error: float
    average_error: float
    bound: float

    @property
    def holds(self):
        return self.max_error <= self.bound + TOLERANCE


def pgm_error_report(ensemble, weighted=False):
    """Evaluate the PGM on its own ensemble and the pairwise-fidelity bound on its worst error."""
    povm = pgm(ensemble, weighted=weighted)
    errors = {item.label: 1.0 - expectation(povm.effect(item.label), item.state) for item in ensemble.items}
    bound = sum(
        np.sqrt(fidelity(first.state, second.state)) for first, second in permutations(ensemble.items, 2)
    )
    return PgmReport(
        errors=errors,
        max_error=max(errors.values()),
        average_error=sum(item.weight * errors[item.label] for item in ensemble.items),
        bound=float(bound),
    )


def gram_pgm_success(states, weights=None, t=1):
    """
    Square-root measurement success per state for t copies, from the Gram matrix alone.

    G_kk' = ⟨φ_k|φ_k'⟩^t and D = diag(√w); the success of label k is |(√(D G D))_kk|² / w_k. With equal
    weights this is the PGM of the t-copy ensemble.

    Args:
        states (list): PureState inputs.
        weights (list): Prior weights (uniform when omitted).
        t (int): Copy count.

    Returns:
        numpy.ndarray: Success probabilities in input order.

    Raises:
        PreconditionError: On mixed input or t < 1.
    """
    if t < 1:
        raise PreconditionError(f"Copy count must be at least 1, got {t}.")
    if not all(isinstance(state, PureState) for state in states):
        raise PreconditionError("The Gram-matrix path needs pure states.")
    count = len(states)
    weights = np.full(count, 1.0 / count) if weights is None else np.asarray(weights, dtype=float)
    vectors = np.array([state.amplitudes for state in states])
    gram = (vectors.conj() @ vectors.T) ** t
    scale = np.sqrt(weights)
    root, _ = psd_sqrt_and_pinv(hermitize(scale[:, None] * gram * scale[None, :]))
    diagonal = np.abs(np.diagonal(root)) ** 2
    success = np.zeros(count)
    positive = weights > 0
    success[positive] = diagonal[positive] / weights[positive]
    return np.clip(success, 0.0, 1.0)


def naimark_isometry(povm):
    """
    Isometry V = Σ_o √μ_o ⊗ |o⟩ from the system into (system, outcome register).

    Rows are ordered system-major, outcome-minor; outcome o occupies index `povm.labels.index(o)`.
    """
    count = len(povm.effects)
    dim = povm.shape.dim
    isometry = np.zeros((dim * count, dim), dtype=complex)
    for position, (_, effect) in enumerate(povm.effects):
        root, _ = psd_sqrt_and_pinv(hermitize(effect))
        basis = np.zeros((count, 1))
        basis[position, 0] = 1.0
        isometry += np.kron(root, basis)
    return isometry
