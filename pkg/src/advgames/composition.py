"""Composition of a screening oracle with a task oracle.

The composed system trains the screen during the first block of rounds and
the task half during the rest, keeps the two models side by side as a pair,
and at inference time lets the task half propose a result that the screen
must accept before it is released; a rejected proposal yields the empty
result.  ``check_composition_bounds`` tests the additive relations that make
this worthwhile: composing costs at most the sum of the halves' completeness
shortfalls, and any attack on the composition is explained by an attack on
one of the halves.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .core import (
    ACCEPT,
    EMPTY,
    REJECT,
    ConfigurationError,
    Context,
    ContractViolationError,
    Corpus,
    GameReport,
    Prompt,
    Result,
    SchemaError,
    Trace,
    TracePredicate,
)
from .oracles import Oracle


@dataclass(frozen=True)
class ComposedSpec:
    """The two halves of a screened oracle; the screen trains first."""

    screen: Oracle
    proposer: Oracle

    @property
    def split(self) -> int:
        return self.screen.rounds

    @property
    def rounds(self) -> int:
        return self.screen.rounds + self.proposer.rounds


def _as_pair(model: Any) -> tuple[Any, Any]:
    if not (isinstance(model, tuple) and len(model) == 2):
        raise SchemaError(f"composed model must be a (screen, proposer) pair, got {model!r}")
    return model


def composed_learn(
    spec: ComposedSpec,
    round_index: int,
    model: Any,
    corpus: Corpus,
    rng: np.random.Generator,
) -> tuple[Any, Any]:
    """Route one learning round to the half that owns it.

    Round 1 initializes the pair.  The half that is not being trained is
    carried through untouched (the same object, bit for bit).
    """
    if round_index == 1:
        model = (EMPTY, EMPTY)
    screen_model, proposer_model = _as_pair(model)
    split = spec.split
    if not 1 <= round_index <= spec.rounds:
        raise ConfigurationError(f"round {round_index} outside 1..{spec.rounds}")
    if round_index <= split:
        screen_model = spec.screen.learners[round_index - 1](screen_model, corpus, rng)
    else:
        proposer_model = spec.proposer.learners[round_index - split - 1](
            proposer_model, corpus, rng
        )
    return (screen_model, proposer_model)


def composed_infer(spec: ComposedSpec, prompt: Prompt, context: Context, model: Any) -> Result:
    """Propose, screen, then release or withhold.

    The screen is asked about the pair (original prompt, proposed result);
    any screen output other than the two decision tokens is a contract
    violation, not a soft failure.
    """
    screen_model, proposer_model = _as_pair(model)
    proposed = spec.proposer.inferrer(prompt, context, proposer_model)
    decision = spec.screen.inferrer(
        Prompt((prompt.value, proposed.value)), context, screen_model
    )
    if decision.value == ACCEPT:
        return proposed
    if decision.value == REJECT:
        return Result(EMPTY)
    raise ContractViolationError(
        f"screen produced {decision.value!r}, expected one of {ACCEPT!r}/{REJECT!r}"
    )


def composed_oracle(spec: ComposedSpec) -> Oracle:
    """Bundle the routed rounds and the screened inference as one oracle."""
    data_gens = []
    learners = []
    for i in range(1, spec.rounds + 1):
        if i <= spec.split:
            data_gens.append(spec.screen.data_gens[i - 1])
        else:
            data_gens.append(spec.proposer.data_gens[i - spec.split - 1])

        def learn(model, corpus, rng, _i=i):
            return composed_learn(spec, _i, model, corpus, rng)

        learners.append(learn)

    def infer(prompt: Prompt, context: Context, model: Any) -> Result:
        return composed_infer(spec, prompt, context, model)

    return Oracle(
        kind=f"screened[{spec.screen.kind}+{spec.proposer.kind}]",
        rounds=spec.rounds,
        data_gens=tuple(data_gens),
        learners=tuple(learners),
        inferrer=infer,
    )


def _restrict_trace(trace: Trace, lo: int, hi: int) -> Trace:
    """View of a composed trace covering rounds lo..hi (1-based, inclusive)."""
    return Trace(
        rounds=trace.rounds[lo - 1 : hi],
        prompt=trace.prompt,
        context=trace.context,
        result=trace.result,
        master_seed=trace.master_seed,
        trial_index=trace.trial_index,
        atk_used=trace.atk_used,
    )


def composed_trace_predicate(
    screen_psi: TracePredicate, proposer_psi: TracePredicate, split: int
) -> TracePredicate:
    """A composed trial is trivial when either half's judgment fires on its own rounds."""

    def fires(trace: Trace) -> bool:
        return screen_psi(_restrict_trace(trace, 1, split)) or proposer_psi(
            _restrict_trace(trace, split + 1, len(trace.rounds))
        )

    return TracePredicate(name=f"either[{screen_psi.name},{proposer_psi.name}]", evaluator=fires)


@dataclass(frozen=True)
class CompositionVerdict:
    """Measured additive bounds with their margins (slack net of tolerance).

    ``completeness_margin`` is how far the composed completeness sits above
    the additive floor; ``security_margin`` is how far the attack account's
    right side sits above its left.  Negative margin means the bound failed
    even after granting the statistical tolerance.
    """

    completeness_ok: bool
    completeness_margin: float
    completeness_tolerance: float
    security_ok: bool
    security_margin: float
    security_tolerance: float
    composed_p: Fraction
    screen_p: Fraction
    proposer_p: Fraction

    @property
    def all_ok(self) -> bool:
        return self.completeness_ok and self.security_ok


def check_composition_bounds(
    screen_report: GameReport,
    proposer_report: GameReport,
    composed_report: GameReport,
) -> CompositionVerdict:
    """Test both additive relations between the halves and the composition.

    Each report must carry a baseline (its half's benign validity rate) and
    therefore an advantage.  Tolerances are the summed confidence widths of
    the estimates entering each inequality; nothing else is added.
    """
    for name, report in (
        ("screen", screen_report),
        ("proposer", proposer_report),
        ("composed", composed_report),
    ):
        if report.baseline_p is None:
            raise ConfigurationError(f"{name} report carries no baseline estimate")
    deltas = {screen_report.ci_delta, proposer_report.ci_delta, composed_report.ci_delta}
    if len(deltas) != 1:
        raise ConfigurationError(
            f"reports come from mismatched runs (confidence deltas {sorted(deltas)})"
        )

    p1, p2, p = screen_report.baseline_p, proposer_report.baseline_p, composed_report.baseline_p
    comp_tol = (
        screen_report.ci_half_width
        + proposer_report.ci_half_width
        + composed_report.ci_half_width
    )
    # The widths above already combine each report's baseline and attack
    # estimates, so they serve both inequalities.
    completeness_gap = float(p - (p1 + p2 - 1))
    lhs = composed_report.advantage + (1 - p)
    rhs = screen_report.advantage + (1 - p1) + proposer_report.advantage + (1 - p2)
    security_gap = float(rhs - lhs)
    return CompositionVerdict(
        completeness_ok=completeness_gap >= -comp_tol,
        completeness_margin=completeness_gap,
        completeness_tolerance=comp_tol,
        security_ok=security_gap >= -comp_tol,
        security_margin=security_gap,
        security_tolerance=comp_tol,
        composed_p=p,
        screen_p=p1,
        proposer_p=p2,
    )
