#!/usr/bin/env python
# pylint: disable=import-error,too-many-locals,too-many-arguments

"""
This script runs the workbench experiments: property checks of the distance and measurement toolkit,
the amplification adversary, the signature and money reductions, the one-time-pad constructions and the
commitment metrics. Every experiment is seeded, and its checks are written as rows of a CSV report.

Refer to the project's README for setup prerequisites and usage instructions.
"""

import argparse
import functools
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from dotenv import dotenv_values, load_dotenv

from commitefi import (
    SvSiOwsg,
    binding_attack_to_inverter,
    binding_overlap,
    commitment_from_svsi,
    efi_amplification_check,
    hiding_distance,
    hiding_witness,
    jensen_chain,
    optimal_binding_attack,
    random_commitment,
    svsi_amplify,
    unbounded_binding_advantage,
)
from discriminate import Ensemble, gram_pgm_success, pgm, pgm_error_report
from money import (
    CountingCloner,
    asymmetric_money,
    bernoulli_check,
    binomial_count_tail,
    cloner_copies,
    hoeffding_lower_bound,
    overlap_money_for,
    owsg_from_symmetric_money,
)
from owsg import (
    haar_collision_expectation,
    haar_prsg,
    orthonormal_family,
    overlap_family,
    owsg_as_puzzle,
    projective_owsg,
)
from puzzles import (
    AmplificationParams,
    BasisMeasurementSolver,
    amplified_solver,
    empirical_success,
    exact_success,
    synthetic_puzzle,
    wrong_events,
)
from qds import (
    MeasuringForger,
    QTimeEmbeddingForger,
    QTimeReadingForger,
    forgery_game,
    good_event_probability,
    one_time_to_q_time,
    qds_from_owsg,
    reduction_owsg_breaker_from_forger,
)
from qpotp import (
    DecodingAdversary,
    EfiPair,
    FixedKeyAdversary,
    UniformKeyAdversary,
    efi_from_qpotp,
    efi_hybrids,
    pauli_twirl,
    payload_marginal,
    toy_qpotp,
    wrong_message_bound_check,
)
from qstate import (
    DensityMatrix,
    PureState,
    RegisterShape,
    expectation,
    fidelity,
    haar_random_state,
    random_density_matrix,
    random_unitary,
    tensor_power,
    trace_distance,
)
from utilities import (
    DEFAULT_DIMENSION_CAP,
    EXACT_TOLERANCE,
    TOLERANCE,
    PreconditionError,
    UnknownExperimentError,
    WorkbenchError,
    binomial_standard_error,
    format_value,
    get_default_seed,
    make_rng,
    mean_and_standard_error,
    set_dimension_cap,
    within_sigmas,
)

# Load environment variables
load_dotenv()

COLUMNS = ["experiment", "param_json", "metric", "value", "reference", "comparator", "pass", "ms"]
CONFIG_KEYS = {"seed", "dim_cap", "scale_loops", "trials", "output", "json", "reproducible"}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    dim_cap: int = DEFAULT_DIMENSION_CAP
    output: Optional[str] = None
    scale_loops: Optional[float] = None
    trials: Optional[int] = None
    json_output: bool = False
    reproducible: bool = False


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    param_json: str
    metric: str
    value: float
    reference: Optional[float]
    comparator: str
    passed: bool
    ms: int

    def record(self):
        return {
            "experiment": self.experiment,
            "param_json": self.param_json,
            "metric": self.metric,
            "value": format_value(self.value),
            "reference": format_value(self.reference),
            "comparator": self.comparator,
            "pass": format_value(self.passed),
            "ms": self.ms,
        }


def row_passes(row):
    """
    Recompute the pass flag of a row from its value, reference, comparator and param_json alone.

    Args:
        row (ReportRow): The row to check.

    Returns:
        bool: Whether the comparison holds.
    """
    params = json.loads(row.param_json)
    value, reference = float(row.value), row.reference
    if row.comparator == "info":
        return True
    reference = float(reference)
    tol = float(params.get("tol", 0.0))
    se = float(params.get("se", 0.0))
    sigmas = float(params.get("sigmas", 3.0))
    if row.comparator == "<=":
        return value <= reference + tol
    if row.comparator == ">=":
        return value >= reference - tol
    if row.comparator == "==":
        return abs(value - reference) <= tol
    if row.comparator == "~3sigma":
        return within_sigmas(value, reference, se, sigmas)
    if row.comparator == ">=3sigma":
        return value >= reference - sigmas * se - EXACT_TOLERANCE
    if row.comparator == "<=3sigma":
        return value <= reference + sigmas * se + EXACT_TOLERANCE
    raise ValueError(f"Unknown comparator {row.comparator!r}.")


class Checks:
    """Collects (metric, value, reference, comparator, extra params) tuples for one experiment."""

    def __init__(self):
        self.entries = []

    def add(self, metric, value, reference, comparator, **extra):
        self.entries.append((metric, value, reference, comparator, extra))


@dataclass(frozen=True)
class Experiment:
    """
    A registered experiment: its function, parameter defaults and the scalar flags that select one grid
    entry.

    `grid_flags` name the columns of the experiment's "grid" parameter; `--p 2 --t 1` on a grid of (p, t)
    pairs runs the single pair "2,1".
    """

    function: Callable
    defaults: Dict[str, object]
    description: str
    in_default_suite: bool = True
    grid_flags: Tuple[str, ...] = ()

    @property
    def accepted(self):
        return set(self.defaults) | set(self.grid_flags)

    def resolve(self, name, overrides):
        """
        Merge overrides into the defaults.

        Raises:
            PreconditionError: If an override names a parameter the experiment does not use.
        """
        unknown = sorted(set(overrides) - self.accepted)
        if unknown:
            accepted = ", ".join(sorted(self.accepted))
            raise PreconditionError(f"{name} does not use {', '.join(unknown)}. It accepts: {accepted}.")
        params = {**self.defaults, **overrides}
        if any(flag in overrides for flag in self.grid_flags):
            fallback = _grid(params["grid"])[0]
            values = [params.pop(flag, default) for flag, default in zip(self.grid_flags, fallback)]
            params["grid"] = ",".join(str(value) for value in values)
        return params


def _grid(text):
    """Parse "a,b;c,d" into [(a, b), (c, d)] of ints or floats."""
    return [tuple(_coerce(value) for value in item.split(",")) for item in str(text).split(";") if item]


def check_fvdg(params, rng, checks):
    pairs = int(params["pairs"])
    lower = upper = -math.inf
    for _ in range(pairs):
        dim = int(rng.integers(2, int(params["max_dim"]) + 1))
        shape = RegisterShape.of(("S", dim))
        rho = random_density_matrix(shape, rng, rank=int(rng.integers(1, dim + 1)))
        sigma = random_density_matrix(shape, rng, rank=int(rng.integers(1, dim + 1)))
        distance = trace_distance(rho, sigma)
        value = fidelity(rho, sigma)
        lower = max(lower, 1.0 - math.sqrt(value) - distance)
        upper = max(upper, distance - math.sqrt(max(0.0, 1.0 - value)))
    checks.add("max(1-sqrtF-TD)", lower, 0.0, "<=", tol=TOLERANCE, pairs=pairs)
    checks.add("max(TD-sqrt(1-F))", upper, 0.0, "<=", tol=TOLERANCE, pairs=pairs)


def check_twirl(params, rng, checks):
    residual = 0.0
    for _ in range(int(params["states"])):
        qubits = int(rng.integers(1, 3))
        rho = random_density_matrix(RegisterShape.of(("S", 2**qubits)), rng)
        uniform = DensityMatrix.maximally_mixed(rho.shape)
        residual = max(residual, 2 * trace_distance(pauli_twirl(rho), uniform))
    states = int(params["states"])
    checks.add("max_twirl_residual_norm", residual, 0.0, "<=", tol=EXACT_TOLERANCE, states=states)
    hybrids = efi_hybrids(toy_qpotp(1, 2), 1)
    hybrid_distance = trace_distance(hybrids.rho0, hybrids.rho1)
    checks.add("hybrid_trace_distance", hybrid_distance, 0.0, "<=", tol=EXACT_TOLERANCE)


def check_pgm(params, rng, checks):
    violation = -math.inf
    for _ in range(int(params["ensembles"])):
        dim = int(rng.integers(2, 5))
        shape = RegisterShape.of(("S", dim))
        states = [
            random_density_matrix(shape, rng, rank=int(rng.integers(1, dim + 1)))
            for _ in range(int(rng.integers(2, 5)))
        ]
        report = pgm_error_report(Ensemble.uniform(enumerate(states)))
        violation = max(violation, report.max_error - report.bound)
    ensembles = int(params["ensembles"])
    checks.add("max(pgm_error-bound)", violation, 0.0, "<=", tol=TOLERANCE, ensembles=ensembles)
    # Every (dim, states, copies) cell with dim <= 4, at most 4 states and t <= 4.
    cells = list(product(range(2, 5), range(2, 5), range(1, 5)))
    draws = int(params["gram_draws"])
    deviation = 0.0
    for dim, count, t in cells:
        for _ in range(draws):
            states = [haar_random_state(dim, rng) for _ in range(count)]
            fast = gram_pgm_success(states, t=t)
            ensemble = Ensemble.uniform(
                (position, tensor_power(state, t)) for position, state in enumerate(states)
            )
            povm = pgm(ensemble)
            full = [expectation(povm.effect(item.label), item.state) for item in ensemble.items]
            deviation = max(deviation, float(np.max(np.abs(fast - np.array(full)))))
    instances = len(cells) * draws
    checks.add("max|gram-full|", deviation, 0.0, "<=", tol=TOLERANCE, instances=instances, cells=len(cells))


def check_sym_subspace(params, rng, checks):
    samples = int(params["samples"])
    for dim, r, count in _grid(params["grid"]):
        estimate = haar_collision_expectation(haar_prsg(count, int(math.log2(dim)), rng), r, samples, rng)
        label = f"[d={dim},r={r},K={count}]"
        checks.add(
            f"collision{label}",
            estimate.mean,
            estimate.expected,
            "~3sigma",
            se=estimate.standard_error,
            trials=samples,
        )
        checks.add(f"collision_bound_order{label}", estimate.expected, estimate.upper_bound, "<=")


def _amplification_setup(params):
    n, t = int(params["n"]), int(params["t"])
    delta = float(params["delta"])
    puzzle = synthetic_puzzle(int(params["alphabet"]))
    amplification = AmplificationParams(n, float(params["q"]), delta, t, float(params["scale_loops"]))
    alphabet = range(int(params["alphabet"]))
    repeated_solver = BasisMeasurementSolver(alphabet, copies=t, slots=n, accuracy=delta)
    return puzzle, amplification, repeated_solver, amplified_solver(puzzle, repeated_solver, amplification)


def amplify(params, rng, checks):
    puzzle, amplification, repeated_solver, solver = _amplification_setup(params)
    trials, wrong_runs = int(params["trials"]), int(params["wrong_runs"])
    outcomes, aborts = [], 0
    wrong = dict.fromkeys(range(1, amplification.n), 0)
    for trial in range(trials):
        key = puzzle.check_gen(rng)
        run = solver.run([puzzle.puzzle(key)] * solver.copies, rng)
        accept = 0.0 if run.aborted else puzzle.verify(run.answer, key)
        outcomes.append(float(rng.random() < accept))
        aborts += run.aborted
        if trial < wrong_runs:
            for i, hit in wrong_events(puzzle, repeated_solver, amplification, run, solver.repeated).items():
                wrong[i] += hit
    rate, error = mean_and_standard_error(outcomes)
    delta, q = amplification.delta, amplification.q
    checks.add("base_success", rate, delta * (1 - 1 / q), ">=3sigma", se=error, trials=trials)
    checks.add(
        "repeated_success",
        exact_success(solver.repeated, repeated_solver, amplification.t),
        delta**amplification.n,
        "==",
        tol=TOLERANCE,
    )
    checks.add("t_prime", amplification.instance_copies(), None, "info")
    checks.add("abort_rate", aborts / trials, None, "info", trials=trials)
    runs = min(trials, wrong_runs)
    bound = amplification.wrong_bound()
    for i, hits in wrong.items():
        se = binomial_standard_error(bound, runs)
        checks.add(f"wrong_{i}", hits / runs, bound, "<=3sigma", se=se, trials=runs)


def amplify_degenerate(params, rng, checks):
    puzzle, amplification, repeated_solver, solver = _amplification_setup(params)
    trials = int(params["trials"])
    expected = exact_success(solver.repeated, repeated_solver, amplification.t)
    estimate = empirical_success(puzzle, solver, solver.copies, trials, rng)
    se = binomial_standard_error(expected, trials)
    checks.add("base_success", estimate.rate, expected, "~3sigma", se=se, trials=trials)


def _embedding_win(q):
    """
    Win rate of the embedding reduction around the reading forger.

    The column guess must be right (1/q²) and the embedded cell picked at most once by the q queries.
    """
    columns = q * q
    at_most_once = (1 - 1 / columns) ** q + q / columns * (1 - 1 / columns) ** (q - 1)
    return at_most_once / columns


def qds_game(params, rng, checks):
    o = projective_owsg(orthonormal_family(int(params["keys"])))
    scheme = qds_from_owsg(o)
    puzzle = owsg_as_puzzle(o)
    trials, t = int(params["trials"]), int(params["t"])
    for w in (float(value) for value in str(params["rates"]).split(",")):
        forger = MeasuringForger(accuracy=w)
        game = forgery_game(scheme, forger, 1, t, trials, rng)
        se = binomial_standard_error(w, trials)
        checks.add(f"forger_win[w={w:g}]", game.win_rate, w, "~3sigma", se=se, trials=trials)
        inverter = reduction_owsg_breaker_from_forger(o, forger, t)
        estimate = empirical_success(puzzle, inverter, t, trials, rng)
        se = binomial_standard_error(w / 2, trials)
        checks.add(f"inverter_success[w={w:g}]", estimate.rate, w / 2, "~3sigma", se=se, trials=trials)

    q, lam, q_trials = int(params["q"]), int(params["lambda"]), int(params["q_trials"])
    label = f"[q={q},lambda={lam}]"
    q_time = one_time_to_q_time(scheme, q, lam)
    reading = forgery_game(q_time, QTimeReadingForger(q_time), q, t, q_trials, rng)
    checks.add(f"q_time_win{label}", reading.win_rate, 1.0, "==", trials=q_trials)
    embedding = QTimeEmbeddingForger(q_time, QTimeReadingForger(q_time))
    game = forgery_game(scheme, embedding, 1, t, q_trials, rng)
    expected = _embedding_win(q)
    se = binomial_standard_error(expected, q_trials)
    checks.add(f"embedding_win{label}", game.win_rate, expected, "~3sigma", se=se, trials=q_trials)
    most = max(record.embedded_queries for record in embedding.records)
    checks.add(f"embedded_queries_max{label}", most, 1, "<=")
    event = good_event_probability(q, lam, trials, rng)
    checks.add(f"good_analytic{label}", event.analytic, event.lower_bound, ">=", tol=EXACT_TOLERANCE)
    se = binomial_standard_error(event.analytic, trials)
    checks.add(f"good_empirical{label}", event.monte_carlo, event.analytic, "~3sigma", se=se, trials=trials)


def qds_good_event(params, rng, checks):
    trials = int(params["trials"])
    for q, lam in _grid(params["grid"]):
        event = good_event_probability(q, lam, trials, rng)
        se = binomial_standard_error(event.analytic, trials)
        label = f"[q={q},lambda={lam}]"
        checks.add(f"good{label}", event.monte_carlo, event.analytic, "~3sigma", se=se, trials=trials)
        checks.add(f"good_lower{label}", event.analytic, event.lower_bound, ">=", tol=EXACT_TOLERANCE)


def money_clone(params, rng, checks):
    for p, t in _grid(params["grid"]):
        label = f"[p={p},t={t}]"
        target = 1.0 - 2.0 * math.exp(-2.0 * p)
        ell = cloner_copies(p, t)
        tail = binomial_count_tail(ell, 1.0 / (8 * p), t + 1)
        checks.add(f"count_tail{label}", tail, target, ">=", ell=ell)
        scheme = overlap_money_for(p)
        inverter = BasisMeasurementSolver(scheme.keys.keys, copies=t)
        cloner = CountingCloner(scheme, inverter, p, t)
        checks.add(f"cloner_success{label}", cloner.exact_success(), target, ">=", ell=ell)
        attempt = cloner.evaluate(scheme.keys.sample(rng), rng)
        checks.add(f"sampled_attempt_tail{label}", attempt.tail, target, ">=", guess=str(attempt.guessed_key))
        repeated, single = bernoulli_check(p, t)
        checks.add(f"bernoulli{label}", repeated, single, ">=", tol=EXACT_TOLERANCE)
        checks.add(f"hoeffding{label}", hoeffding_lower_bound(ell, p), None, "info")
    try:
        owsg_from_symmetric_money(asymmetric_money())
        rejected = 0.0
    except PreconditionError:
        rejected = 1.0
    checks.add("asymmetric_rejected", rejected, 1.0, "==")


def qpotp_efi(params, rng, checks):
    kappa, ell = int(params["kappa"]), int(params["ell"])
    scheme = toy_qpotp(kappa, ell)
    n = ell // 2
    pair = efi_from_qpotp(scheme, n)
    checks.add("dims", pair.rho0.dim, None, "info", kappa=kappa, ell=ell, n=n)
    checks.add("trace_distance", trace_distance(pair.rho0, pair.rho1), float(params["threshold"]), ">=")
    hybrids = efi_hybrids(scheme, n)
    hybrid_distance = trace_distance(hybrids.rho0, hybrids.rho1)
    checks.add("hybrid_trace_distance", hybrid_distance, 0.0, "<=", tol=EXACT_TOLERANCE)
    payload = payload_marginal(hybrids.rho0)
    residual = 2 * trace_distance(payload, DensityMatrix.maximally_mixed(payload.shape))
    checks.add("twirl_residual_norm", residual, 0.0, "<=", tol=EXACT_TOLERANCE)


def qpotp_wrong_msg(params, rng, checks):
    for kappa, ell in _grid(params["grid"]):
        scheme = toy_qpotp(kappa, ell)
        adversaries = {
            "fixed": FixedKeyAdversary((0,) * kappa),
            "uniform": UniformKeyAdversary(),
            "decoding": DecodingAdversary(),
        }
        for name, adversary in adversaries.items():
            bound = wrong_message_bound_check(scheme, adversary)
            label = f"[{name},kappa={kappa},ell={ell}]"
            checks.add(f"lhs{label}", bound.lhs, bound.rhs, "<=", tol=EXACT_TOLERANCE)
            checks.add(f"adversary_free{label}", bound.adversary_free, bound.rhs, "==", tol=EXACT_TOLERANCE)
            if name == "decoding":
                checks.add(f"tight{label}", bound.lhs, bound.rhs, "==", tol=EXACT_TOLERANCE)


def commit_metrics(params, rng, checks):
    commitments, attacks = int(params["commitments"]), int(params["attacks"])
    optimum_gap = dominance = lower = upper = 0.0
    for _ in range(commitments):
        c = random_commitment(rng)
        advantage = unbounded_binding_advantage(c)
        attack = optimal_binding_attack(c)
        optimum_gap = max(optimum_gap, abs(binding_overlap(c, attack.unitary, attack.tau) - advantage))
        reveal_dim = attack.unitary.shape[0]
        for _ in range(attacks):
            tau = haar_random_state(2, rng, label="Z")
            value = binding_overlap(c, random_unitary(reveal_dim * 2, rng), tau)
            dominance = max(dominance, value - advantage)
        hiding = hiding_distance(c)
        lower = max(lower, 1.0 - advantage - hiding)
        upper = max(upper, hiding - math.sqrt(max(0.0, 1.0 - advantage**2)))
    checks.add("max|optimal_attack-sqrtF|", optimum_gap, 0.0, "<=", tol=1e-6, commitments=commitments)
    checks.add("max(overlap-advantage)", dominance, 0.0, "<=", tol=TOLERANCE, attacks=commitments * attacks)
    checks.add("max(1-sqrtF-hiding)", lower, 0.0, "<=", tol=TOLERANCE)
    checks.add("max(hiding-sqrt(1-F))", upper, 0.0, "<=", tol=TOLERANCE)


def _svsi_fixture(params):
    if params["fixture"] == "overlap":
        return SvSiOwsg.measured(overlap_family(float(params["c"])))
    if params["fixture"] == "orthonormal":
        return SvSiOwsg.measured(orthonormal_family(int(params["keys"])))
    raise PreconditionError(f"Unknown SV-SI-OWSG fixture {params['fixture']!r}.")


def commit_from_svsi(params, rng, checks):
    f = _svsi_fixture(params)
    t = int(params["t"])
    c = commitment_from_svsi(f, t)
    hiding = hiding_distance(c)
    if params["fixture"] == "orthonormal":
        checks.add("hiding_distance", hiding, 0.0, "<=", tol=1e-6, t=t)
    witness = hiding_witness(c, f)
    checks.add("witness_overlap", witness.overlap, witness.expected_overlap, "==", tol=TOLERANCE)
    checks.add("hiding_vs_witness", hiding, witness.bound, "<=", tol=TOLERANCE)
    gap = -math.inf
    reveal_dim = int(np.prod([c.shape.dim_of(label) for label in c.reveal_labels]))
    for _ in range(int(params["attacks"])):
        tau = haar_random_state(2, rng, label="Z")
        chain = jensen_chain(c, random_unitary(reveal_dim * 2, rng), tau)
        gap = max(gap, chain.lhs - chain.rhs)
    checks.add("max(jensen_lhs-rhs)", gap, 0.0, "<=", tol=TOLERANCE, attacks=int(params["attacks"]))
    attack = optimal_binding_attack(c)
    inverter = binding_attack_to_inverter(c, attack.unitary, attack.tau)
    checks.add("optimal_attack_inverter", inverter.success, inverter.overlap_squared, ">=", tol=TOLERANCE)


EFI_FIXTURES = ("zero-plus", "toy-qpotp", "overlap-svsi")


def _efi_pair(name):
    if name == "zero-plus":
        shape = RegisterShape.of(("S", 2))
        plus = PureState(shape, [1 / math.sqrt(2), 1 / math.sqrt(2)]).density()
        return EfiPair(PureState.basis(shape, 0).density(), plus, name="zero-plus")
    return efi_from_qpotp(toy_qpotp(1, 2), 1)


def efi_amplify(params, rng, checks):
    n, fixture = int(params["n"]), str(params["fixture"])
    if fixture != "all" and fixture not in EFI_FIXTURES:
        raise PreconditionError(f"Unknown EFI fixture {fixture!r}. Known: all, {', '.join(EFI_FIXTURES)}.")
    selected = EFI_FIXTURES if fixture == "all" else (fixture,)
    for name in (name for name in selected if name != "overlap-svsi"):
        pair = _efi_pair(name)
        previous = -math.inf
        for copies in range(1, n + 1):
            check = efi_amplification_check(pair, copies)
            checks.add(f"efi[{name},n={copies}]", check.distance, check.bound, ">=", tol=TOLERANCE)
            checks.add(f"efi_monotone[{name},n={copies}]", check.distance, previous, ">=", tol=TOLERANCE)
            previous = check.distance
    if "overlap-svsi" not in selected:
        return
    f = SvSiOwsg.measured(overlap_family(math.sqrt(3) / 2))
    previous = -math.inf
    for copies in range(1, n + 1):
        amplification = svsi_amplify(f, int(params["q"]), copies=copies)
        worst = min((check.distance - check.bound for _, _, check in amplification.checks), default=0.0)
        checks.add(f"svsi[n={copies}]", worst, 0.0, ">=", tol=TOLERANCE, nominal=amplification.nominal_copies)
        checks.add(f"svsi_monotone[n={copies}]", amplification.min_distance, previous, ">=", tol=TOLERANCE)
        previous = amplification.min_distance


def planted_failure(params, rng, checks):
    checks.add("planted_false_inequality", 1.0, 0.0, "<=")


EXPERIMENTS = {
    "check-fvdg": Experiment(check_fvdg, {"pairs": 1000, "max_dim": 8}, "Fuchs-van de Graaf on random pairs"),
    "check-twirl": Experiment(check_twirl, {"states": 100}, "Pauli twirl identity and EFI hybrids"),
    "check-pgm": Experiment(
        check_pgm, {"ensembles": 200, "gram_draws": 1}, "PGM error bound and the Gram fast path"
    ),
    "check-sym-subspace": Experiment(
        check_sym_subspace, {"samples": 20000, "grid": "2,2,1;4,2,3;4,3,2"}, "Haar collision moments"
    ),
    "amplify": Experiment(
        amplify,
        {
            "n": 2,
            "q": 3,
            "delta": 0.75,
            "t": 1,
            "alphabet": 4,
            "trials": 2000,
            "wrong_runs": 200,
            "scale_loops": 1.0,
        },
        "Amplification adversary on a planted puzzle",
    ),
    "amplify-degenerate": Experiment(
        amplify_degenerate,
        {"n": 1, "q": 3, "delta": 0.75, "t": 1, "alphabet": 4, "trials": 2000, "scale_loops": 1.0},
        "Amplification with n = 1",
    ),
    "qds-game": Experiment(
        qds_game,
        {"keys": 2, "trials": 10000, "rates": "0.25,0.5,1.0", "t": 1, "q": 2, "lambda": 1, "q_trials": 400},
        "Forger to OWSG inverter reduction and the q-time scheme",
    ),
    "qds-good-event": Experiment(
        qds_good_event,
        {"trials": 100000, "grid": "2,3;3,5;4,4"},
        "q-time Good event probability",
        grid_flags=("q", "lambda"),
    ),
    "money-clone": Experiment(
        money_clone, {"grid": "1,1;1,2;2,1;2,2"}, "Counting cloner against money", grid_flags=("p", "t")
    ),
    "qpotp-efi": Experiment(
        qpotp_efi, {"kappa": 1, "ell": 2, "threshold": 0.05}, "EFI pair from a toy QPOTP"
    ),
    "qpotp-wrong-msg": Experiment(
        qpotp_wrong_msg,
        {"grid": "1,2;1,3;2,3;2,4"},
        "Wrong-message probability bound",
        grid_flags=("kappa", "ell"),
    ),
    "commit-metrics": Experiment(
        commit_metrics, {"commitments": 100, "attacks": 50}, "Hiding and binding of random commitments"
    ),
    "commit-from-svsi": Experiment(
        commit_from_svsi,
        {"fixture": "orthonormal", "keys": 2, "c": 0.5, "t": 1, "attacks": 50},
        "Commitment from an SV-SI-OWSG",
    ),
    "efi-amplify": Experiment(
        efi_amplify, {"n": 3, "q": 1, "fixture": "all"}, "Tensor-power amplification bounds"
    ),
    "planted-failure": Experiment(
        planted_failure, {}, "Deliberately false inequality", in_default_suite=False
    ),
}

DEFAULT_SUITE = [name for name, experiment in EXPERIMENTS.items() if experiment.in_default_suite]


def _overrides(config):
    """Explicit parameters of a config, including the trial count and loop scale when they are set."""
    overrides = dict(config.params)
    if config.trials is not None:
        overrides["trials"] = config.trials
    if config.scale_loops is not None:
        overrides["scale_loops"] = config.scale_loops
    return overrides


def run(config):
    """
    Run one registered experiment.

    Args:
        config (ExperimentConfig): The experiment name, parameters and seed.

    Returns:
        list: ReportRow objects, one per check.

    Raises:
        UnknownExperimentError: If the experiment is not registered.
        PreconditionError: If the config sets a parameter the experiment does not use.
        SizingError: If a construction exceeds the configured dimension cap.
    """
    experiment = EXPERIMENTS.get(config.name)
    if experiment is None:
        raise UnknownExperimentError(f"Unknown experiment {config.name!r}. Known: {', '.join(EXPERIMENTS)}.")
    params = experiment.resolve(config.name, _overrides(config))
    previous = set_dimension_cap(config.dim_cap)
    print(f"Running {config.name} (seed {config.seed})...")
    try:
        checks = Checks()
        start = time.perf_counter()
        experiment.function(params, make_rng(config.seed), checks)
        ms = 0 if config.reproducible else int(round((time.perf_counter() - start) * 1000))
    finally:
        set_dimension_cap(previous)

    rows = []
    for metric, value, reference, comparator, extra in checks.entries:
        embedded = {**params, "seed": config.seed, "dim_cap": config.dim_cap, **extra}
        param_json = json.dumps(embedded, sort_keys=True, default=str)
        row = ReportRow(config.name, param_json, metric, value, reference, comparator, False, ms)
        rows.append(replace(row, passed=row_passes(row)))
    return rows


def _restrict(config, experiment):
    """Keep only the suite-wide overrides this experiment uses, printing the ones left out."""
    skipped = sorted(set(_overrides(config)) - experiment.accepted)
    if skipped:
        print(f"Not passing {', '.join(skipped)} to {config.name}")
    return replace(
        config,
        params={key: value for key, value in config.params.items() if key in experiment.accepted},
        trials=config.trials if "trials" in experiment.accepted else None,
        scale_loops=config.scale_loops if "scale_loops" in experiment.accepted else None,
    )


def suite(names, config):
    """
    Run several experiments with per-experiment seeds `config.seed ^ index`.

    Each experiment gets the overrides it uses. Assertion failures are collected in the rows; structural
    errors propagate.
    """
    rows = []
    for index, name in enumerate(names):
        experiment_config = replace(config, name=name, seed=config.seed ^ index)
        if name in EXPERIMENTS:
            experiment_config = _restrict(experiment_config, EXPERIMENTS[name])
        rows.extend(run(experiment_config))
    return rows


def _replace_file(path, text):
    """Write `text` to a temporary file next to `path`, then move it over `path` in one step."""
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
            stream.write(text)
        os.replace(temporary, path)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise


def write_report(rows, path, json_output=False):
    """
    Append rows to a CSV report, writing the header only for a new file.

    The file is replaced as a whole, so a reader sees either the old report or the old report plus every new
    row.

    Args:
        rows (list): ReportRow objects.
        path (str): Output CSV path.
        json_output (bool): Also write a JSON mirror of the whole report next to the CSV.
    """
    frame = pd.DataFrame([row.record() for row in rows], columns=COLUMNS)
    path = Path(path)
    exists = path.exists()
    previous = path.read_text(encoding="utf-8") if exists else ""
    report = previous + frame.to_csv(index=False, header=not exists, lineterminator="\n")
    _replace_file(path, report)
    if json_output:
        merged = pd.read_csv(io.StringIO(report), dtype=str, keep_default_na=False)
        mirror = merged.to_json(orient="records", indent=2, force_ascii=False)
        _replace_file(path.with_suffix(".json"), mirror)
    print(f"Wrote {len(frame)} rows to {path}")


def read_report(path):
    """Load a CSV report back into ReportRow objects."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return [
        ReportRow(
            record["experiment"],
            record["param_json"],
            record["metric"],
            float(record["value"]),
            float(record["reference"]) if record["reference"] else None,
            record["comparator"],
            record["pass"] == "true",
            int(record["ms"]),
        )
        for record in frame.to_dict(orient="records")
    ]


def _coerce(value):
    """Interpret a config string as bool, int or float where it looks like one."""
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("true", "false"):
            return text.lower() == "true"
        for convert in (int, float):
            try:
                return convert(text)
            except ValueError:
                pass
        return text
    return value


def _first(*values):
    return next((value for value in values if value is not None), None)


def build_config(args):
    """
    Merge CLI flags, an optional `key = value` config file, the environment and the built-in defaults.

    Raises:
        ValueError: If a --set entry is not KEY=VALUE.
    """
    raw_file = dotenv_values(args.config) if args.config else {}
    file_values = {key: _coerce(value) for key, value in raw_file.items()}
    env_cap = os.getenv("OWSG_WB_DIM_CAP")
    params = {key: value for key, value in file_values.items() if key not in CONFIG_KEYS}
    for flag in ("n", "q", "delta", "t", "p", "kappa", "ell", "lam", "fixture"):
        value = getattr(args, flag, None)
        if value is not None:
            params["lambda" if flag == "lam" else flag] = value
    for entry in args.set or []:
        key, separator, value = entry.partition("=")
        if not separator:
            raise ValueError(f"Invalid --set entry {entry!r}. Should be KEY=VALUE.")
        params[key.strip()] = _coerce(value)
    scale_loops = _first(args.scale_loops, file_values.get("scale_loops"))
    return ExperimentConfig(
        name="",
        params=params,
        seed=int(_first(args.seed, file_values.get("seed"), get_default_seed())),
        dim_cap=int(_first(args.dim_cap, file_values.get("dim_cap"), env_cap, DEFAULT_DIMENSION_CAP)),
        output=_first(args.output, file_values.get("output")),
        scale_loops=None if scale_loops is None else float(scale_loops),
        trials=_first(args.trials, file_values.get("trials")),
        json_output=bool(args.json or file_values.get("json", False)),
        reproducible=bool(args.reproducible or file_values.get("reproducible", False)),
    )


def resolve_names(command):
    """
    Map a positional command to experiment names.

    `check fvdg` names "check-fvdg"; `suite [names...]` names the listed experiments or the default suite.
    """
    if command[0] == "suite":
        return command[1:] or list(DEFAULT_SUITE)
    return ["-".join(command)]


def handle_workbench_errors(func):
    """
    A decorator to handle workbench errors.

    This decorator catches structural and usage errors, prints an error message and exits with code 2.

    Args:
        func (callable): The function to decorate.

    Returns:
        callable: The decorated function.
    """

    @functools.wraps(func)
    def wrapper(*wrapper_args, **kwargs):
        try:
            return func(*wrapper_args, **kwargs)
        except (WorkbenchError, ValueError) as error:
            print(f"Error: {error}")
            sys.exit(2)

    return wrapper


def get_argument_parser():
    """
    Parses command line arguments.

    Returns:
        argparse.ArgumentParser: The argument parser.
    """
    parser = argparse.ArgumentParser(description="Run seeded workbench experiments and write CSV reports.")
    parser.add_argument(
        "command",
        nargs="+",
        help="Experiment to run, e.g. 'check fvdg', 'amplify', 'qpotp efi' or 'suite [names...]'.",
    )
    parser.add_argument("--seed", type=int, help="Seed (default: OWSG_WB_SEED, then 0).")
    parser.add_argument("--config", help="Config file with 'key = value' lines.")
    parser.add_argument("--output", help="CSV report path; rows are appended.")
    parser.add_argument("--json", action="store_true", help="Also write a JSON mirror of the report.")
    parser.add_argument("--reproducible", action="store_true", help="Write 0 for wall times.")
    parser.add_argument("--dim-cap", type=int, help="Total-dimension cap (default: OWSG_WB_DIM_CAP or 4096).")
    parser.add_argument("--scale-loops", type=float, help="Scale factor for the amplification loop bounds.")
    parser.add_argument("--trials", type=int, help="Monte-Carlo trial count.")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="Experiment parameter override.")
    parser.add_argument("--n", type=int, help="Repetition or copy count.")
    parser.add_argument("--q", type=int, help="Amplification or query parameter q.")
    parser.add_argument("--delta", type=float, help="Repeated-solver success parameter.")
    parser.add_argument("--t", type=int, help="Copies handed to a solver.")
    parser.add_argument("--p", type=float, help="Invertibility or money parameter p.")
    parser.add_argument("--kappa", type=int, help="Secret-key length.")
    parser.add_argument("--ell", type=int, help="Plaintext length.")
    parser.add_argument("--lambda", dest="lam", type=int, help="Number of q-time rows.")
    parser.add_argument("--fixture", help="Fixture name.")
    return parser


@handle_workbench_errors
def main():
    """
    Main function to run the script.
    """
    argparser = get_argument_parser()
    args = argparser.parse_args()
    config = build_config(args)
    names = resolve_names(args.command)
    rows = suite(names, config) if args.command[0] == "suite" else run(replace(config, name=names[0]))

    for row in rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"{status} {row.experiment} {row.metric}: {format_value(row.value)} {row.comparator} "
              f"{format_value(row.reference)}")
    if config.output:
        write_report(rows, config.output, config.json_output)
    failed = sum(not row.passed for row in rows)
    print(f"{len(rows) - failed} checks passed, {failed} failed")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
