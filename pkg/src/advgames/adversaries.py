"""Adversaries and benign players for the security games.

An ``Adversary`` exposes one procedure per game phase.  Both phases receive
the trial context and a dedicated generator, and must be deterministic given
those, so a trial can be replayed exactly.  ``required_flags`` is advisory
metadata naming the capabilities an attack needs to be effective; the game
enforces capability gating regardless of what an adversary returns, so
running an attack without its flags is allowed and simply neutralizes it.

The two ``to_*_adversary`` constructors at the bottom turn an adversary
against a screened composition into an adversary against one of its halves,
simulating the other half internally from the shared seed schedule.  The
simulation replays the composed game's draws bit for bit, which is what
makes the attack-accounting bounds checkable trial by trial rather than
only on averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from .composition import ComposedSpec
from .core import (
    ACCEPT,
    EMPTY,
    REJECT,
    AttackFlags,
    ConfigurationError,
    Context,
    ContractViolationError,
    Corpus,
    DataItem,
    Prompt,
    QueryBudgetExceeded,
    Result,
    SchemaError,
    SourceSet,
    UnsupportedConfigurationError,
)
from .oracles import (
    COMMAND_MARKER,
    NEWLINE,
    CentroidModel,
    ClusterParams,
    Inferrer,
    Learner,
    NgramModel,
    perplexity,
)
from .seeds import ROLE_ACTOR, ROLE_ADV_LEARN, ROLE_DATA, ROLE_LEARN, TrialCtx


class QueryHandle:
    """Counted access to a trained model's inference procedure."""

    def __init__(self, fn: Callable[[Prompt, Context], Result], budget: int):
        self._fn = fn
        self._budget = budget
        self.queries_made = 0

    def __call__(self, prompt: Prompt, context: Context) -> Result:
        self.queries_made += 1
        if self.queries_made > self._budget:
            raise QueryBudgetExceeded(
                f"query {self.queries_made} exceeds budget {self._budget}"
            )
        return self._fn(prompt, context)


LearnPhase = Callable[
    [Any, Any, SourceSet, Corpus, TrialCtx, np.random.Generator],
    tuple[Corpus, Any],
]
InferPhase = Callable[
    [Any, Any, SourceSet, "QueryHandle | None", TrialCtx, np.random.Generator],
    tuple[Context, Prompt],
]


@dataclass(frozen=True)
class Adversary:
    kind_tag: str
    learn_phase: LearnPhase
    infer_phase: InferPhase
    required_flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class BenignGenerator:
    """Draws an in-distribution (prompt, context) pair; never touches a model."""

    name: str
    sample: Callable[[SourceSet, np.random.Generator], tuple[Prompt, Context]]

    def __call__(self, source: SourceSet, rng: np.random.Generator) -> tuple[Prompt, Context]:
        return self.sample(source, rng)


@dataclass(frozen=True)
class DistinguishingAdversary:
    """Player of the one-element-difference corpus game.

    ``build_phase`` proposes a corpus one element short plus the candidate
    pair; ``guess_phase`` sees the trained model and guesses which candidate
    was trained on.
    """

    kind_tag: str
    build_phase: Callable[
        [int, SourceSet, TrialCtx, np.random.Generator],
        tuple[Corpus, DataItem, DataItem, Any],
    ]
    guess_phase: Callable[
        [Any, Corpus, DataItem, DataItem, Any, SourceSet, TrialCtx, np.random.Generator],
        int,
    ]


# ---------------------------------------------------------------------------
# Benign play.
# ---------------------------------------------------------------------------


def cluster_generator(params: ClusterParams) -> BenignGenerator:
    """Fresh labeled-vector prompts drawn from the generating distribution."""

    def sample(source: SourceSet, rng: np.random.Generator) -> tuple[Prompt, Context]:
        label = params.label_a if rng.integers(2) == 0 else params.label_b
        vec = rng.standard_normal(params.dim)
        mean = params.mean(label)
        prompt = tuple(float(v + m) for v, m in zip(vec, mean))
        return Prompt(prompt), Context.none()

    return BenignGenerator(name="cluster-benign", sample=sample)


def text_prompt_generator(prefix_len: int = 2) -> BenignGenerator:
    """Prompts with the leading tokens of a random ordinary source line."""

    def sample(source: SourceSet, rng: np.random.Generator) -> tuple[Prompt, Context]:
        lines = [
            item for item in source
            if item.get("kind", "line") == "line" and item.get("record") is None
        ]
        if not lines:
            raise ConfigurationError("source has no ordinary lines to prompt from")
        item = lines[int(rng.integers(len(lines)))]
        return Prompt(tuple(item.payload[:prefix_len])), Context.none()

    return BenignGenerator(name="text-benign", sample=sample)


def screen_candidate_generator(prefix_len: int = 2) -> BenignGenerator:
    """Benign decision tasks: (prompt, candidate) pairs built from source lines."""
    inner = text_prompt_generator(prefix_len)

    def sample(source: SourceSet, rng: np.random.Generator) -> tuple[Prompt, Context]:
        prompt, context = inner(source, rng)
        lines = [item for item in source if item.get("kind", "line") == "line"]
        candidate = lines[int(rng.integers(len(lines)))].payload
        return Prompt((prompt.value, candidate)), context

    return BenignGenerator(name="screen-benign", sample=sample)


BENIGN_FACTORIES: dict[str, Callable[..., BenignGenerator]] = {
    "cluster": cluster_generator,
    "textgen": text_prompt_generator,
    "screen": screen_candidate_generator,
}


def benign_sampler(scenario: str, **settings: Any) -> BenignGenerator:
    try:
        factory = BENIGN_FACTORIES[scenario]
    except KeyError:
        raise ConfigurationError(
            f"no benign generator registered for scenario {scenario!r}"
        ) from None
    return factory(**settings)


def as_adversary(generator: BenignGenerator) -> Adversary:
    """Benign player in adversary clothing: leaves corpora alone, plays the generator."""

    def learn(state, view, source, corpus, ctx, rng):
        return corpus, state

    def infer(state, view, source, oracle, ctx, rng):
        prompt, context = generator(source, rng)
        return context, prompt

    return Adversary(kind_tag=f"benign[{generator.name}]", learn_phase=learn, infer_phase=infer)


# ---------------------------------------------------------------------------
# Learning-phase attacks.
# ---------------------------------------------------------------------------


def flip_label(item: DataItem, labels: tuple[str, str]) -> DataItem:
    vec, label = item.payload
    a, b = labels
    if label == a:
        return item.with_payload((vec, b))
    if label == b:
        return item.with_payload((vec, a))
    raise SchemaError(f"cannot flip label {label!r} outside {labels}")


def label_flip_poisoner(
    fraction: float,
    labels: tuple[str, str],
    generator: BenignGenerator,
) -> Adversary:
    """Swaps the labels of the leading ``fraction`` of the sampled corpus."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigurationError(f"fraction must be in [0, 1], got {fraction}")

    def learn(state, view, source, corpus, ctx, rng):
        n_flip = math.ceil(fraction * len(corpus))
        flipped = tuple(
            flip_label(item, labels) if pos < n_flip else item
            for pos, item in enumerate(corpus.items)
        )
        return Corpus(items=flipped, round_index=corpus.round_index), state

    def infer(state, view, source, oracle, ctx, rng):
        prompt, context = generator(source, rng)
        return context, prompt

    return Adversary(
        kind_tag=f"label-flip[{fraction}]",
        learn_phase=learn,
        infer_phase=infer,
        required_flags=("inject_learn_1",),
    )


def backdoor_injector(
    trigger: tuple[str, ...],
    payload: tuple[str, ...],
    copies: int,
    prompt_full_line: bool = False,
) -> Adversary:
    """Appends copies of the line trigger+payload, then prompts the trigger.

    The trigger must not occur in the clean corpus; a collision would make
    trigger behavior unattributable to the injection, so it is rejected up
    front.  With ``prompt_full_line`` the final prompt is the entire
    injected line, the deliberately lazy variant that verbatim-overlap
    trace screening catches.
    """
    if not trigger or not payload:
        raise ConfigurationError("trigger and payload must be non-empty")
    planted = trigger + payload

    def contains(seq: tuple[str, ...], sub: tuple[str, ...]) -> bool:
        return any(seq[j : j + len(sub)] == sub for j in range(len(seq) - len(sub) + 1))

    def learn(state, view, source, corpus, ctx, rng):
        for item in corpus:
            if contains(tuple(item.payload), trigger):
                raise ConfigurationError(
                    f"trigger {trigger!r} collides with the clean corpus"
                )
        extra = tuple(
            DataItem(payload=planted, meta=(("kind", "line"), ("injected", True)))
            for _ in range(copies)
        )
        return Corpus(items=corpus.items + extra, round_index=corpus.round_index), state

    def infer(state, view, source, oracle, ctx, rng):
        return Context.none(), Prompt(planted if prompt_full_line else trigger)

    return Adversary(
        kind_tag="backdoor" + ("-verbatim" if prompt_full_line else ""),
        learn_phase=learn,
        infer_phase=infer,
        required_flags=("inject_learn_1",),
    )


# ---------------------------------------------------------------------------
# Inference-phase attacks.
# ---------------------------------------------------------------------------


def prompt_injector(
    instruction: tuple[str, ...],
    placement: str,
    generator: BenignGenerator,
    cover_tokens: tuple[str, ...] = ("status", "report", "ready"),
) -> Adversary:
    """Smuggles a command line into the prompt (direct) or the context (indirect).

    Indirect placement models a poisoned tool output: cover text followed by
    a line that starts with the command marker.  The benign task itself is
    untouched; the generator still supplies the user prompt.
    """
    if placement not in ("direct", "indirect"):
        raise ConfigurationError(f"placement must be direct or indirect, got {placement!r}")
    command_line = (NEWLINE, COMMAND_MARKER) + instruction + (NEWLINE,)

    def learn(state, view, source, corpus, ctx, rng):
        return corpus, state

    def infer(state, view, source, oracle, ctx, rng):
        prompt, context = generator(source, rng)
        if placement == "direct":
            return context, Prompt(tuple(prompt.value) + command_line)
        poisoned = cover_tokens + command_line
        return Context(poisoned), prompt

    return Adversary(
        kind_tag=f"inject-{placement}",
        learn_phase=learn,
        infer_phase=infer,
        required_flags=("inject_infer",),
    )


def extraction_prompter(prefix_len: int = 2) -> Adversary:
    """Prompts with the leading tokens of a repeated record to extract the rest."""

    def learn(state, view, source, corpus, ctx, rng):
        return corpus, state

    def infer(state, view, source, oracle, ctx, rng):
        records = [item for item in source if item.get("record") is not None]
        if not records:
            raise ConfigurationError("source marks no repeated records to extract")
        target = records[int(rng.integers(len(records)))]
        return Context.none(), Prompt(tuple(target.payload[:prefix_len]))

    return Adversary(kind_tag="extract-prefix", learn_phase=learn, infer_phase=infer)


# ---------------------------------------------------------------------------
# Corpus-distinguishing players.
# ---------------------------------------------------------------------------


def _sample_distinct(
    source: SourceSet, count: int, rng: np.random.Generator, kind: str | None = None
) -> list[DataItem]:
    pool = [item for item in source if kind is None or item.get("kind", "line") == kind]
    if count > len(pool):
        raise ConfigurationError(f"need {count} items, source offers {len(pool)}")
    idx = rng.choice(len(pool), size=count, replace=False)
    return [pool[int(i)] for i in idx]


def _repeat_record(item: DataItem, copies: int) -> DataItem:
    tokens = tuple(item.payload)
    packed = (tokens + (NEWLINE,)) * copies
    return DataItem(
        payload=packed,
        meta=item.meta + (("record", tokens), ("copies", copies)),
    )


def _membership_score(score: str, model: Any, item: DataItem) -> float:
    if score == "perplexity":
        if not isinstance(model, NgramModel):
            raise SchemaError("perplexity scoring needs an n-gram model")
        return perplexity(model, item.get("record", tuple(item.payload)))
    if score == "distance":
        if not isinstance(model, CentroidModel):
            raise SchemaError("distance scoring needs a centroid model")
        vec, label = item.payload
        return math.dist(vec, model.centroid(label))
    raise ConfigurationError(f"unknown score {score!r}")


def membership_adversary(
    score: str,
    duplication: int = 10,
    mode: str = "fixed",
    shadow_trainer: Learner | None = None,
    shadow_runs: int = 6,
) -> DistinguishingAdversary:
    """Distinguishes trained-on from held-out candidates by a memorization score.

    For text targets the candidate pair are two fresh source lines, each
    packed as a record repeated ``duplication`` times so that training on it
    leaves a strong count signature; the score is the perplexity of the
    single line.  For vector targets the candidates are fresh labeled points
    and the score is the distance to the trained centroid of the candidate's
    own label.  ``fixed`` mode guesses the lower-scored candidate was
    trained on; ``calibrated`` mode first learns the comparison direction
    from self-trained shadow models.
    """
    if mode not in ("fixed", "calibrated"):
        raise ConfigurationError(f"mode must be fixed or calibrated, got {mode!r}")
    if mode == "calibrated" and shadow_trainer is None:
        raise ConfigurationError("calibrated mode needs a shadow trainer")
    kind = "line" if score == "perplexity" else None

    def pack(item: DataItem) -> DataItem:
        if score == "perplexity":
            return _repeat_record(item, duplication)
        return item

    def calibrate(n: int, source: SourceSet, rng: np.random.Generator) -> int:
        votes = 0
        for _ in range(shadow_runs):
            drawn = _sample_distinct(source, n + 1, rng, kind=kind)
            corpus = Corpus(items=tuple(pack(i) for i in drawn[: n - 1]) + (pack(drawn[n - 1]),))
            model = shadow_trainer(EMPTY, corpus, rng)
            inside = _membership_score(score, model, pack(drawn[n - 1]))
            outside = _membership_score(score, model, pack(drawn[n]))
            votes += 1 if inside < outside else -1
        return 1 if votes >= 0 else -1

    def build(n, source, ctx, rng):
        drawn = _sample_distinct(source, n + 1, rng, kind=kind)
        corpus = Corpus(items=tuple(pack(i) for i in drawn[: n - 1]), round_index=1)
        z0, z1 = pack(drawn[n - 1]), pack(drawn[n])
        direction = calibrate(n, source, rng) if mode == "calibrated" else 1
        return corpus, z0, z1, direction

    def guess(state, corpus_prime, z0, z1, model, source, ctx, rng):
        direction = state
        s0 = _membership_score(score, model, z0)
        s1 = _membership_score(score, model, z1)
        return int(direction * (s1 - s0) < 0)

    return DistinguishingAdversary(
        kind_tag=f"membership-{score}[{mode}]", build_phase=build, guess_phase=guess
    )


def coin_flip_guesser() -> DistinguishingAdversary:
    """Null player: well-formed corpus, but the guess is a fresh coin."""

    def build(n, source, ctx, rng):
        drawn = _sample_distinct(source, n + 1, rng)
        return Corpus(items=tuple(drawn[: n - 1]), round_index=1), drawn[n - 1], drawn[n], None

    def guess(state, corpus_prime, z0, z1, model, source, ctx, rng):
        return int(rng.integers(2))

    return DistinguishingAdversary(kind_tag="coin-flip", build_phase=build, guess_phase=guess)


def hybrid_flip_adversary(
    index: int,
    labels: tuple[str, str],
    inferrer: Inferrer,
) -> DistinguishingAdversary:
    """Step ``index`` of the label-flipping chain between a clean and a flipped corpus.

    The build phase samples a fresh size-n corpus, flips the labels of the
    first ``index - 1`` items, and offers the item at position ``index`` in
    clean and flipped form as the candidate pair, keeping every item at its
    original position.  Training on the clean candidate therefore equals
    step ``index - 1`` training on its flipped candidate, which is the
    overlap that makes the chain telescope.  Step 0 offers the same clean
    item on both sides, so its two branches coincide and the chain's lower
    endpoint is the fully clean corpus.

    The guess phase samples a fresh labeled item and guesses "flipped
    candidate" exactly when the model classifies it correctly.
    """
    if index < 0:
        raise ConfigurationError(f"index must be >= 0, got {index}")

    def build(n, source, ctx, rng):
        if index > n:
            raise ConfigurationError(f"chain index {index} exceeds corpus size {n}")
        drawn = _sample_distinct(source, n, rng)
        pivot = max(index, 1)
        head = tuple(flip_label(item, labels) for item in drawn[: pivot - 1])
        z = drawn[pivot - 1]
        tail = tuple(drawn[pivot:])
        corpus = Corpus(items=head + tail, round_index=1)
        z1 = flip_label(z, labels) if index >= 1 else z
        return corpus, z, z1, None

    def guess(state, corpus_prime, z0, z1, model, source, ctx, rng):
        probe = source[int(rng.integers(len(source)))]
        vec, label = probe.payload
        result = inferrer(Prompt(vec), Context.none(), model)
        return int(result.value == label)

    return DistinguishingAdversary(
        kind_tag=f"flip-chain[{index}]", build_phase=build, guess_phase=guess
    )


# ---------------------------------------------------------------------------
# Reductions from a composed-oracle adversary to single-half adversaries.
# ---------------------------------------------------------------------------


def screen_game_flags(flags: AttackFlags, split: int) -> AttackFlags:
    """Capability set for the screen-half game induced by a composed-game set.

    Views of the composed model during or after the task-half rounds contain
    the final screen model; the induced player can only forward those if the
    composed set also shows the model at the split boundary, where its own
    game hands the screen model over.  Without that there is nothing honest
    to show, so the combination is refused.
    """
    if any(i > split for i in flags.see_model) and split not in flags.see_model:
        raise UnsupportedConfigurationError(
            f"composed views after round {split} include the final screen model, "
            f"which needs see_model_{split} granted as well"
        )
    return AttackFlags(
        rounds=split,
        see_model=frozenset(i for i in flags.see_model if i <= split),
        inject_learn=frozenset(i for i in flags.inject_learn if i <= split),
        inject_infer=flags.inject_infer,
        black_box=flags.black_box,
    )


def proposer_game_flags(flags: AttackFlags, split: int) -> AttackFlags:
    """Capability set for the task-half game induced by a composed-game set."""
    return AttackFlags(
        rounds=flags.rounds - split,
        see_model=frozenset(i - split for i in flags.see_model if i >= split),
        inject_learn=frozenset(i - split for i in flags.inject_learn if i > split),
        inject_infer=flags.inject_infer,
        black_box=flags.black_box,
    )


def _screen_decide(spec: ComposedSpec, prompt: Prompt, context: Context,
                   screen_model: Any, proposed: Result) -> Result:
    decision = spec.screen.inferrer(
        Prompt((prompt.value, proposed.value)), context, screen_model
    )
    if decision.value == ACCEPT:
        return proposed
    if decision.value == REJECT:
        return Result(EMPTY)
    raise ContractViolationError(f"screen produced {decision.value!r}")


def to_proposer_adversary(
    outer: Adversary, spec: ComposedSpec, flags: AttackFlags
) -> Adversary:
    """Play ``outer`` against the task half alone, simulating the screen half.

    The screen's learning block is replayed locally from the shared seed
    schedule before the first real round, with the outer adversary driven
    through it exactly as the composed game would; composed views and oracle
    answers are assembled from the local screen model plus whatever the real
    game provides.  The real game must run with its per-round seed indices
    offset by the screen's round count for the replay to match.
    """
    if flags.rounds != spec.rounds:
        raise ConfigurationError(
            f"flag set covers {flags.rounds} rounds, composition has {spec.rounds}"
        )
    split = spec.split

    def run_screen_block(source: SourceSet, ctx: TrialCtx):
        screen_model: Any = EMPTY
        ostate: Any = EMPTY
        for i in range(1, split + 1):
            corpus = spec.screen.data_gens[i - 1](source, ctx.rng(ROLE_DATA, i))
            corpus = replace(corpus, round_index=i)
            if (i - 1) in flags.see_model and i > 1:
                view = (screen_model, EMPTY)
            else:
                view = EMPTY  # before round 1 the composed model is not a pair yet
            modified, ostate = outer.learn_phase(
                ostate, view, source, corpus, ctx, ctx.rng(ROLE_ADV_LEARN, i)
            )
            if i not in flags.inject_learn:
                modified = corpus
            screen_model = spec.screen.learners[i - 1](
                screen_model, modified, ctx.rng(ROLE_LEARN, i)
            )
        return screen_model, ostate

    def learn(state, view, source, corpus, ctx, rng):
        if state is EMPTY:
            screen_model, ostate = run_screen_block(source, ctx)
            state = (ostate, screen_model, 0)
        ostate, screen_model, done = state
        j = done + 1
        i = split + j
        if (i - 1) in flags.see_model:
            composed_view = (screen_model, view)
        else:
            composed_view = EMPTY
        renumbered = replace(corpus, round_index=i)
        modified, ostate = outer.learn_phase(
            ostate, composed_view, source, renumbered, ctx, rng
        )
        modified = replace(modified, round_index=corpus.round_index)
        return modified, (ostate, screen_model, j)

    def infer(state, view, source, oracle, ctx, rng):
        if state is EMPTY:  # defensive; the task half always has a round
            screen_model, ostate = run_screen_block(source, ctx)
        else:
            ostate, screen_model, _ = state
        if spec.rounds in flags.see_model:
            composed_view = (screen_model, view)
        else:
            composed_view = EMPTY
        composed_oracle_fn = None
        if flags.black_box and oracle is not None:
            def composed_oracle_fn(p: Prompt, c: Context) -> Result:
                return _screen_decide(spec, p, c, screen_model, oracle(p, c))
        context, prompt = outer.infer_phase(
            ostate, composed_view, source, composed_oracle_fn, ctx, rng
        )
        return context, prompt

    return Adversary(
        kind_tag=f"as-proposer[{outer.kind_tag}]",
        learn_phase=learn,
        infer_phase=infer,
        required_flags=outer.required_flags,
    )


def to_screen_adversary(
    outer: Adversary, spec: ComposedSpec, flags: AttackFlags
) -> Adversary:
    """Play ``outer`` against the screen half alone, simulating the task half.

    Real rounds coincide with the composed game's opening block and are
    forwarded directly.  The task half's block is then replayed locally
    (again from the shared seed schedule) inside the final phase, after
    which the outer adversary's chosen prompt is extended with the locally
    proposed result, since the screen's game poses decision problems.
    """
    if flags.rounds != spec.rounds:
        raise ConfigurationError(
            f"flag set covers {flags.rounds} rounds, composition has {spec.rounds}"
        )
    screen_game_flags(flags, spec.split)  # raises on unsupported view demands
    split = spec.split
    total = spec.rounds

    def learn(state, view, source, corpus, ctx, rng):
        if state is EMPTY:
            state = (EMPTY, 0)
        ostate, done = state
        j = done + 1
        if (j - 1) in flags.see_model and j > 1:
            composed_view = (view, EMPTY)
        else:
            composed_view = EMPTY
        modified, ostate = outer.learn_phase(
            ostate, composed_view, source, corpus, ctx, rng
        )
        return modified, (ostate, j)

    def infer(state, view, source, oracle, ctx, rng):
        ostate = EMPTY if state is EMPTY else state[0]
        proposer_model: Any = EMPTY
        for i in range(split + 1, total + 1):
            corpus = spec.proposer.data_gens[i - split - 1](source, ctx.rng(ROLE_DATA, i))
            corpus = replace(corpus, round_index=i)
            if (i - 1) in flags.see_model:
                composed_view = (view, proposer_model)  # view is the final screen model
            else:
                composed_view = EMPTY
            modified, ostate = outer.learn_phase(
                ostate, composed_view, source, corpus, ctx, ctx.rng(ROLE_ADV_LEARN, i)
            )
            if i not in flags.inject_learn:
                modified = corpus
            proposer_model = spec.proposer.learners[i - split - 1](
                proposer_model, modified, ctx.rng(ROLE_LEARN, i)
            )
        if total in flags.see_model:
            composed_view = (view, proposer_model)
        else:
            composed_view = EMPTY
        composed_oracle_fn = None
        if flags.black_box and oracle is not None:
            def composed_oracle_fn(p: Prompt, c: Context) -> Result:
                proposed = spec.proposer.inferrer(p, c, proposer_model)
                decision = oracle(Prompt((p.value, proposed.value)), c)
                if decision.value == ACCEPT:
                    return proposed
                if decision.value == REJECT:
                    return Result(EMPTY)
                raise ContractViolationError(f"screen produced {decision.value!r}")
        context, prompt = outer.infer_phase(
            ostate, composed_view, source, composed_oracle_fn, ctx, rng
        )
        inference_context = context if flags.inject_infer else Context.none()
        proposed = spec.proposer.inferrer(prompt, inference_context, proposer_model)
        return context, Prompt((prompt.value, proposed.value))

    return Adversary(
        kind_tag=f"as-screen[{outer.kind_tag}]",
        learn_phase=learn,
        infer_phase=infer,
        required_flags=outer.required_flags,
    )
