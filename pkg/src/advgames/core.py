"""Shared domain types for game-based evaluation of learned oracles.

Everything defined here is immutable after construction, so values can be
recorded in traces and compared exactly between runs.  Probabilities that
come from counting trial outcomes are kept as exact rationals; only derived
confidence widths are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Iterator


class GameError(Exception):
    """Base class for everything this package raises on purpose."""


class SchemaError(GameError):
    """A value did not have the shape the receiving component requires."""


class ConfigurationError(GameError):
    """A run was requested with inconsistent or unknown settings."""


class UnsupportedConfigurationError(ConfigurationError):
    """A requested capability combination cannot be simulated faithfully.

    Raised instead of running an approximation that would silently change
    what is being measured.
    """


class DegenerateCorpusError(GameError):
    """A learner received a corpus it cannot train on (e.g. a missing label)."""


class ContractViolationError(GameError):
    """A component produced output outside its declared range."""


class QueryBudgetExceeded(GameError):
    """An adversary exceeded its per-trial oracle query budget."""


class _Empty:
    """Distinguished sentinel for absent model/context/result values.

    There is exactly one instance, ``EMPTY``.  It is distinct from every
    ordinary value (including the empty string and the empty tuple), so a
    withheld view or a rejected result can never be confused with data.
    """

    _instance: "_Empty | None" = None

    def __new__(cls) -> "_Empty":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "empty"

    def __bool__(self) -> bool:
        return False

    def __copy__(self) -> "_Empty":
        return self

    def __deepcopy__(self, memo: dict) -> "_Empty":
        return self


EMPTY = _Empty()

# Decision tokens emitted by screening oracles.
ACCEPT = "accept"
REJECT = "reject"


def is_empty(value: Any) -> bool:
    return value is EMPTY


@dataclass(frozen=True)
class DataItem:
    """One element of a source or corpus.

    ``payload`` is scenario data: a token tuple for text scenarios or a
    ``(features, label)`` pair for vector scenarios.  ``meta`` is a small
    tuple of key/value pairs (kept as a tuple so items stay hashable); it
    carries bookkeeping such as the item's index in its source.
    """

    payload: Any
    meta: tuple[tuple[str, Any], ...] = ()

    def get(self, key: str, default: Any = None) -> Any:
        for k, v in self.meta:
            if k == key:
                return v
        return default

    def with_payload(self, payload: Any) -> "DataItem":
        return replace(self, payload=payload)


@dataclass(frozen=True)
class SourceSet:
    """Immutable collection of data items with random read access."""

    items: tuple[DataItem, ...]
    schema_tag: str

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, index: int) -> DataItem:
        return self.items[index]

    def __iter__(self) -> Iterator[DataItem]:
        return iter(self.items)

    def where(self, key: str, value: Any) -> tuple[DataItem, ...]:
        return tuple(item for item in self.items if item.get(key) == value)


@dataclass(frozen=True)
class Corpus:
    """Ordered snapshot of training data for one learning round."""

    items: tuple[DataItem, ...]
    round_index: int = 1

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[DataItem]:
        return iter(self.items)


@dataclass(frozen=True)
class Prompt:
    value: Any


@dataclass(frozen=True)
class Context:
    value: Any

    @classmethod
    def none(cls) -> "Context":
        return cls(EMPTY)

    @property
    def is_empty(self) -> bool:
        return self.value is EMPTY


@dataclass(frozen=True)
class Result:
    value: Any

    @classmethod
    def none(cls) -> "Result":
        return cls(EMPTY)

    @property
    def is_empty(self) -> bool:
        return self.value is EMPTY


@dataclass(frozen=True)
class AttackFlags:
    """Capability grants for one adversarial run against an r-round oracle.

    ``see_model`` holds round indices 0..rounds at whose boundary the model
    is shown; ``inject_learn`` holds round indices 1..rounds whose training
    corpus the adversary may replace; ``inject_infer`` lets the adversary
    supply the inference context; ``black_box`` grants query access to the
    trained model before the final output.
    """

    rounds: int
    see_model: frozenset[int] = frozenset()
    inject_learn: frozenset[int] = frozenset()
    inject_infer: bool = False
    black_box: bool = False

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigurationError(f"rounds must be >= 1, got {self.rounds}")
        bad = [i for i in self.see_model if not 0 <= i <= self.rounds]
        if bad:
            raise ConfigurationError(f"see_model indices out of range: {sorted(bad)}")
        bad = [i for i in self.inject_learn if not 1 <= i <= self.rounds]
        if bad:
            raise ConfigurationError(f"inject_learn indices out of range: {sorted(bad)}")
        object.__setattr__(self, "see_model", frozenset(self.see_model))
        object.__setattr__(self, "inject_learn", frozenset(self.inject_learn))

    @classmethod
    def simple(cls, rounds: int) -> "AttackFlags":
        """Final model shown, context injectable, nothing else granted."""
        return cls(rounds=rounds, see_model=frozenset({rounds}), inject_infer=True)

    @property
    def is_simple(self) -> bool:
        return self == AttackFlags.simple(self.rounds)

    @property
    def passive_learning(self) -> bool:
        return not self.inject_learn

    def describe(self) -> str:
        parts = [f"see_model_{i}" for i in sorted(self.see_model)]
        parts += [f"inject_learn_{i}" for i in sorted(self.inject_learn)]
        if self.inject_infer:
            parts.append("inject_infer")
        if self.black_box:
            parts.append("black_box")
        return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class ValidityPredicate:
    """Boolean judgment over one (prompt, context, result) triple.

    A predicate may be a conjunction of named parts; the parts are kept so
    reports can say which requirement failed.
    """

    name: str
    evaluator: Callable[[Prompt, Context, Result], bool]
    conjuncts: tuple["ValidityPredicate", ...] = ()

    def __call__(self, prompt: Prompt, context: Context, result: Result) -> bool:
        return bool(self.evaluator(prompt, context, result))

    @classmethod
    def conjunction(cls, name: str, *parts: "ValidityPredicate") -> "ValidityPredicate":
        if not parts:
            raise ConfigurationError("conjunction needs at least one part")

        def every(prompt: Prompt, context: Context, result: Result) -> bool:
            return all(p(prompt, context, result) for p in parts)

        return cls(name=name, evaluator=every, conjuncts=tuple(parts))

    def failing_parts(self, prompt: Prompt, context: Context, result: Result) -> tuple[str, ...]:
        if not self.conjuncts:
            return () if self(prompt, context, result) else (self.name,)
        return tuple(p.name for p in self.conjuncts if not p(prompt, context, result))


def decisional_lift(predicate: ValidityPredicate) -> ValidityPredicate:
    """Turn a validity judgment into a judgment of accept/reject decisions.

    The lifted predicate receives prompts of the form ``(base_prompt_value,
    candidate_result_value)`` and holds exactly when the decision token in
    ``result`` is the correct answer to "does the base predicate hold for
    this candidate?".  Any result other than the two decision tokens fails.
    """

    def decide(prompt: Prompt, context: Context, result: Result) -> bool:
        value = prompt.value
        if not (isinstance(value, tuple) and len(value) == 2):
            raise SchemaError(
                f"decisional prompt must be a (prompt, candidate) pair, got {value!r}"
            )
        base_prompt, candidate = value
        verdict = predicate(Prompt(base_prompt), context, Result(candidate))
        if result.value == ACCEPT:
            return verdict
        if result.value == REJECT:
            return not verdict
        return False

    return ValidityPredicate(name=f"decides[{predicate.name}]", evaluator=decide)


@dataclass(frozen=True)
class RoundRecord:
    """What one learning round saw: sampled corpus, trained corpus, view gate."""

    corpus_before: Corpus
    corpus_after: Corpus
    view_shown: bool


@dataclass(frozen=True)
class Trace:
    """Complete record of one adversarial trial, sufficient to re-derive its verdict."""

    rounds: tuple[RoundRecord, ...]
    prompt: Prompt
    context: Context
    result: Result
    master_seed: int
    trial_index: int
    atk_used: AttackFlags

    @property
    def final(self) -> tuple[Prompt, Context, Result]:
        return (self.prompt, self.context, self.result)


@dataclass(frozen=True)
class TracePredicate:
    """Boolean judgment over a trace, used to discard trivial wins."""

    name: str
    evaluator: Callable[[Trace], bool]

    def __call__(self, trace: Trace) -> bool:
        return bool(self.evaluator(trace))


#: Trace predicate that never fires; the default when learning is not injectable.
NEVER_TRIVIAL = TracePredicate(name="never", evaluator=lambda trace: False)


def hoeffding_half_width(trials: int, delta: float) -> float:
    """Two-sided Hoeffding confidence half-width for a mean of [0,1] samples.

    With probability at least 1 - delta the empirical mean of ``trials``
    independent bounded samples is within this distance of its expectation.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * trials))


def advantage(win_rate: Fraction | float, baseline_p: Fraction | float) -> Fraction | float:
    """Excess of an adversary's win rate over what a blind adversary gets.

    A target that is valid with probability ``baseline_p`` on benign play
    hands any adversary a free win rate of ``1 - baseline_p``; only wins
    beyond that are attributable to the attack.  The value is signed and
    deliberately not clamped at zero.
    """
    for name, value in (("win_rate", win_rate), ("baseline_p", baseline_p)):
        if not 0 <= value <= 1:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    return win_rate - (1 - baseline_p)


@dataclass(frozen=True)
class GameReport:
    """Outcome counts for one batch of game trials.

    ``trials`` counts completed trials; trials aborted by a degenerate
    oracle error are tallied in ``failures`` and belong to neither wins nor
    losses.  ``win_rate`` and ``advantage`` are exact rationals derived from
    the counts; ``ci_half_width`` is the statistical tolerance at confidence
    level ``1 - ci_delta`` (for advantage estimates it already includes the
    baseline estimate's own width).
    """

    trials: int
    wins: int
    ci_delta: float
    ci_half_width: float
    baseline_p: Fraction | None = None
    failures: int = 0

    @classmethod
    def from_counts(
        cls,
        trials: int,
        wins: int,
        ci_delta: float,
        baseline_p: Fraction | None = None,
        failures: int = 0,
        ci_half_width: float | None = None,
    ) -> "GameReport":
        if not 0 <= wins <= max(trials, 0):
            raise ValueError(f"wins {wins} outside 0..{trials}")
        if ci_half_width is None:
            ci_half_width = hoeffding_half_width(max(trials, 1), ci_delta)
        return cls(
            trials=trials,
            wins=wins,
            ci_delta=ci_delta,
            ci_half_width=ci_half_width,
            baseline_p=baseline_p,
            failures=failures,
        )

    @property
    def win_rate(self) -> Fraction:
        if self.trials == 0:
            return Fraction(0)
        return Fraction(self.wins, self.trials)

    @property
    def advantage(self) -> Fraction | None:
        if self.baseline_p is None:
            return None
        return advantage(self.win_rate, self.baseline_p)

    def with_baseline(self, baseline_p: Fraction, extra_width: float = 0.0) -> "GameReport":
        return replace(
            self,
            baseline_p=baseline_p,
            ci_half_width=self.ci_half_width + extra_width,
        )
