"""The evaluation games: completeness, security, and corpus distinguishing.

All games are Monte Carlo estimators.  A trial is fully determined by the
master seed and its trial index through the derivation scheme in ``seeds``,
so any trial can be replayed, and two games sharing a master seed share
their benign draws trial for trial.  That coupling is load-bearing: the
completeness game and the security game played by a benign adversary are
exact complements of each other, and reduction arguments can be checked on
individual trials instead of only on rates.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Iterable

from .adversaries import Adversary, BenignGenerator, DistinguishingAdversary, QueryHandle
from .core import (
    EMPTY,
    AttackFlags,
    ConfigurationError,
    Context,
    Corpus,
    DataItem,
    DegenerateCorpusError,
    GameReport,
    NEVER_TRIVIAL,
    Prompt,
    Result,
    RoundRecord,
    SchemaError,
    SourceSet,
    Trace,
    TracePredicate,
    ValidityPredicate,
)
from .oracles import Generation, Oracle
from .seeds import ROLE_ACTOR, ROLE_ADV_LEARN, ROLE_DATA, ROLE_GAME, ROLE_LEARN, TrialCtx


@dataclass(frozen=True)
class GameConfig:
    """Shared knobs for a batch of trials.

    ``round_offset`` shifts the per-round seed indices; a game standing in
    for the later rounds of a composed schedule runs with the offset set to
    the number of earlier rounds, so its draws match the composed game's.
    The final-phase actor stream is never shifted.
    """

    trials: int
    master_seed: int
    atk: AttackFlags | None = None
    phi: ValidityPredicate | None = None
    psi: TracePredicate | None = None
    query_budget: int = 64
    ci_delta: float = 0.01
    round_offset: int = 0

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.round_offset < 0:
            raise ConfigurationError(f"round_offset must be >= 0, got {self.round_offset}")


def _require(value: Any, name: str) -> Any:
    if value is None:
        raise ConfigurationError(f"this game needs {name} configured")
    return value


# ---------------------------------------------------------------------------
# Completeness.
# ---------------------------------------------------------------------------


def run_completeness(
    oracle: Oracle,
    source: SourceSet,
    generator: BenignGenerator,
    cfg: GameConfig,
) -> tuple[GameReport, list[Trace]]:
    """Benign play: train untouched, draw one task, score it with the validity judgment.

    The win rate estimates the probability that honest use of the oracle
    produces a valid outcome; its complement is the free win rate any
    adversary inherits before doing anything adversarial.
    """
    phi = _require(cfg.phi, "a validity predicate")
    off = cfg.round_offset
    no_grants = AttackFlags(rounds=oracle.rounds)
    wins = 0
    failures = 0
    traces: list[Trace] = []
    for t in range(cfg.trials):
        ctx = TrialCtx(cfg.master_seed, t)
        try:
            model = EMPTY
            rounds = []
            for i in range(1, oracle.rounds + 1):
                corpus = oracle.data_gens[i - 1](source, ctx.rng(ROLE_DATA, i + off))
                corpus = replace(corpus, round_index=i)
                model = oracle.learners[i - 1](model, corpus, ctx.rng(ROLE_LEARN, i + off))
                rounds.append(
                    RoundRecord(corpus_before=corpus, corpus_after=corpus, view_shown=False)
                )
            prompt, context = generator(source, ctx.rng(ROLE_ACTOR, 0))
            result = oracle.inferrer(prompt, context, model)
        except DegenerateCorpusError:
            failures += 1
            continue
        trace = Trace(
            rounds=tuple(rounds),
            prompt=prompt,
            context=context,
            result=result,
            master_seed=cfg.master_seed,
            trial_index=t,
            atk_used=no_grants,
        )
        traces.append(trace)
        wins += int(phi(prompt, context, result))
    report = GameReport.from_counts(
        cfg.trials - failures, wins, cfg.ci_delta, failures=failures
    )
    return report, traces


# ---------------------------------------------------------------------------
# Security.
# ---------------------------------------------------------------------------


def _effective_psi(flags: AttackFlags, psi: TracePredicate | None) -> TracePredicate:
    if flags.passive_learning:
        return psi if psi is not None else NEVER_TRIVIAL
    if psi is None:
        raise ConfigurationError(
            "learning-phase injection is granted; a trace triviality judgment "
            "must be configured explicitly"
        )
    return psi


def run_security(
    oracle: Oracle,
    source: SourceSet,
    adversary: Adversary,
    cfg: GameConfig,
) -> tuple[GameReport, list[Trace]]:
    """The adversarial game under the configured capability grants.

    Per round: sample the benign corpus, show the adversary the model if the
    preceding boundary's view is granted, let it propose a replacement
    corpus, discard the replacement unless that round's injection is
    granted, then train.  After the last round the adversary picks the final
    context and prompt; the context is discarded unless context injection is
    granted.  A trial is won when the outcome breaks validity and the trace
    is not judged trivial.
    """
    flags = _require(cfg.atk, "an attack flag set")
    phi = _require(cfg.phi, "a validity predicate")
    if flags.rounds != oracle.rounds:
        raise ConfigurationError(
            f"flag set covers {flags.rounds} rounds, oracle has {oracle.rounds}"
        )
    psi = _effective_psi(flags, cfg.psi)
    off = cfg.round_offset
    wins = 0
    failures = 0
    traces: list[Trace] = []
    for t in range(cfg.trials):
        ctx = TrialCtx(cfg.master_seed, t)
        try:
            trace = _play_security_trial(oracle, source, adversary, flags, cfg, ctx, off)
        except DegenerateCorpusError:
            failures += 1
            continue
        traces.append(trace)
        wins += int(_security_win(trace, phi, psi))
    report = GameReport.from_counts(
        cfg.trials - failures, wins, cfg.ci_delta, failures=failures
    )
    return report, traces


def _play_security_trial(
    oracle: Oracle,
    source: SourceSet,
    adversary: Adversary,
    flags: AttackFlags,
    cfg: GameConfig,
    ctx: TrialCtx,
    off: int,
) -> Trace:
    model: Any = EMPTY
    state: Any = EMPTY
    rounds = []
    for i in range(1, flags.rounds + 1):
        corpus = oracle.data_gens[i - 1](source, ctx.rng(ROLE_DATA, i + off))
        corpus = replace(corpus, round_index=i)
        shown = (i - 1) in flags.see_model
        view = model if shown else EMPTY
        modified, state = adversary.learn_phase(
            state, view, source, corpus, ctx, ctx.rng(ROLE_ADV_LEARN, i + off)
        )
        if i not in flags.inject_learn:
            modified = corpus
        model = oracle.learners[i - 1](model, modified, ctx.rng(ROLE_LEARN, i + off))
        rounds.append(
            RoundRecord(corpus_before=corpus, corpus_after=modified, view_shown=shown)
        )
    view = model if flags.rounds in flags.see_model else EMPTY
    handle = None
    if flags.black_box:
        handle = QueryHandle(
            lambda p, c: oracle.inferrer(p, c, model), cfg.query_budget
        )
    context, prompt = adversary.infer_phase(
        state, view, source, handle, ctx, ctx.rng(ROLE_ACTOR, 0)
    )
    if not flags.inject_infer:
        context = Context.none()
    result = oracle.inferrer(prompt, context, model)
    return Trace(
        rounds=tuple(rounds),
        prompt=prompt,
        context=context,
        result=result,
        master_seed=cfg.master_seed,
        trial_index=ctx.trial_index,
        atk_used=flags,
    )


def _security_win(trace: Trace, phi: ValidityPredicate, psi: TracePredicate) -> bool:
    return (not phi(trace.prompt, trace.context, trace.result)) and not psi(trace)


def run_simple_security(
    oracle: Oracle,
    source: SourceSet,
    adversary: Adversary,
    cfg: GameConfig,
) -> tuple[GameReport, list[Trace]]:
    """Security under the canonical minimal grant: final view plus context injection."""
    if cfg.atk is None:
        cfg = replace(cfg, atk=AttackFlags.simple(oracle.rounds))
    elif not cfg.atk.is_simple:
        raise ConfigurationError(
            f"simple security requires the simple flag set, got {cfg.atk.describe()}"
        )
    return run_security(oracle, source, adversary, cfg)


def recheck_verdict(trace: Trace, phi: ValidityPredicate, psi: TracePredicate) -> bool:
    """Recompute a stored trace's win verdict; serialization must preserve this."""
    return _security_win(trace, phi, psi)


def trial_verdicts(
    traces: Iterable[Trace], phi: ValidityPredicate, psi: TracePredicate
) -> dict[int, bool]:
    """Win verdict per trial index, for trial-level comparisons across games."""
    return {t.trial_index: _security_win(t, phi, psi) for t in traces}


def estimate_baseline_then_advantage(
    oracle: Oracle,
    source: SourceSet,
    generator: BenignGenerator,
    adversary: Adversary,
    cfg: GameConfig,
) -> tuple[GameReport, GameReport, list[Trace]]:
    """Benign run for the baseline, adversarial run for the advantage.

    The returned security report carries the measured baseline; because the
    baseline is itself an estimate, its confidence width is added to the
    advantage's, so the stated tolerance covers both sources of error.
    """
    baseline_report, _ = run_completeness(oracle, source, generator, cfg)
    security_report, traces = run_security(oracle, source, adversary, cfg)
    security_report = security_report.with_baseline(
        baseline_report.win_rate, baseline_report.ci_half_width
    )
    return baseline_report, security_report, traces


# ---------------------------------------------------------------------------
# Corpus distinguishing.
# ---------------------------------------------------------------------------


def _canonical_order(items: tuple[DataItem, ...]) -> tuple[DataItem, ...]:
    # Train on a position-independent ordering so corpora that are equal as
    # multisets produce bit-identical learner inputs.
    def key(pair: tuple[int, DataItem]):
        pos, item = pair
        idx = item.get("idx")
        return (0, idx, pos) if isinstance(idx, int) else (1, pos)

    return tuple(item for _, item in sorted(enumerate(items), key=key))


def run_dpd(
    oracle: Oracle,
    source: SourceSet,
    n: int,
    adversary: DistinguishingAdversary,
    cfg: GameConfig,
    force_coin: int | None = None,
) -> GameReport:
    """One-element-difference distinguishing game at corpus size ``n``.

    The adversary proposes a corpus of n-1 items and two candidates; a
    hidden coin picks which candidate completes the training corpus, and
    the adversary wins by guessing the coin from the trained model.  A
    proposal of the wrong size forfeits the trial.  ``force_coin`` pins the
    coin to measure one branch's rate directly; the baseline stays the fair
    coin either way, so the report's advantage reads win_rate - 1/2.
    """
    if oracle.rounds != 1:
        raise ConfigurationError(
            f"the distinguishing game trains in one round, oracle has {oracle.rounds}"
        )
    if n < 1:
        raise ConfigurationError(f"corpus size must be >= 1, got {n}")
    if force_coin not in (None, 0, 1):
        raise ConfigurationError(f"force_coin must be 0, 1, or None, got {force_coin}")
    wins = 0
    failures = 0
    for t in range(cfg.trials):
        ctx = TrialCtx(cfg.master_seed, t)
        if force_coin is None:
            coin = int(ctx.rng(ROLE_GAME, 0).integers(2))
        else:
            coin = force_coin
        corpus_prime, z0, z1, st = adversary.build_phase(
            n, source, ctx, ctx.rng(ROLE_ACTOR, 0)
        )
        if len(corpus_prime) != n - 1:
            continue  # forfeited: counted as a completed loss
        chosen = z1 if coin == 1 else z0
        train = Corpus(
            items=_canonical_order(corpus_prime.items + (chosen,)), round_index=1
        )
        try:
            model = oracle.learners[0](EMPTY, train, ctx.rng(ROLE_LEARN, 1))
        except DegenerateCorpusError:
            failures += 1
            continue
        guess = adversary.guess_phase(
            st, corpus_prime, z0, z1, model, source, ctx, ctx.rng(ROLE_ACTOR, 1)
        )
        if guess not in (0, 1):
            raise SchemaError(f"guess must be a bit, got {guess!r}")
        wins += int(guess == coin)
    report = GameReport.from_counts(
        cfg.trials - failures, wins, cfg.ci_delta, failures=failures
    )
    return report.with_baseline(Fraction(1, 2))


# ---------------------------------------------------------------------------
# Built-in trace judgments.
# ---------------------------------------------------------------------------


def verbatim_overlap_psi() -> TracePredicate:
    """Flags a trial whose final prompt is exactly a line the adversary injected.

    Prompting with the entire planted line proves nothing about learned
    behavior, so such wins are discarded as trivial.  Only whole-payload
    equality fires; prompting with a proper part of a planted line (say, a
    trigger) is a genuine attack and passes.
    """

    def fires(trace: Trace) -> bool:
        prompt_value = trace.prompt.value
        if not isinstance(prompt_value, tuple):
            return False
        for record in trace.rounds:
            before = Counter(tuple(item.payload) for item in record.corpus_before)
            after = Counter(tuple(item.payload) for item in record.corpus_after)
            added = after - before
            if prompt_value in added:
                return True
        return False

    return TracePredicate(name="verbatim-overlap", evaluator=fires)


# ---------------------------------------------------------------------------
# Trace serialization: newline-delimited JSON, exact round trip.
# ---------------------------------------------------------------------------


def _encode(value: Any) -> Any:
    if value is EMPTY:
        return {"t": "empty"}
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return {"t": "f", "v": value.hex()}  # hex form survives json exactly
    if isinstance(value, tuple):
        return {"t": "tuple", "v": [_encode(x) for x in value]}
    if isinstance(value, Generation):
        return {"t": "gen", "tokens": list(value.tokens), "action": list(value.action)}
    if isinstance(value, DataItem):
        return {
            "t": "item",
            "payload": _encode(value.payload),
            "meta": [[k, _encode(v)] for k, v in value.meta],
        }
    raise SchemaError(f"cannot serialize value of type {type(value).__name__}")


def _decode(value: Any) -> Any:
    if isinstance(value, dict):
        tag = value["t"]
        if tag == "empty":
            return EMPTY
        if tag == "f":
            return float.fromhex(value["v"])
        if tag == "tuple":
            return tuple(_decode(x) for x in value["v"])
        if tag == "gen":
            return Generation(tokens=tuple(value["tokens"]), action=tuple(value["action"]))
        if tag == "item":
            return DataItem(
                payload=_decode(value["payload"]),
                meta=tuple((k, _decode(v)) for k, v in value["meta"]),
            )
        raise SchemaError(f"unknown serialization tag {tag!r}")
    return value


def _encode_corpus(corpus: Corpus) -> dict:
    return {
        "items": [_encode(item) for item in corpus.items],
        "round_index": corpus.round_index,
    }


def _decode_corpus(data: dict) -> Corpus:
    return Corpus(
        items=tuple(_decode(item) for item in data["items"]),
        round_index=data["round_index"],
    )


def trace_to_json(trace: Trace) -> str:
    atk = trace.atk_used
    doc = {
        "master_seed": trace.master_seed,
        "trial_index": trace.trial_index,
        "atk": {
            "rounds": atk.rounds,
            "see_model": sorted(atk.see_model),
            "inject_learn": sorted(atk.inject_learn),
            "inject_infer": atk.inject_infer,
            "black_box": atk.black_box,
        },
        "rounds": [
            {
                "before": _encode_corpus(r.corpus_before),
                "after": _encode_corpus(r.corpus_after),
                "view_shown": r.view_shown,
            }
            for r in trace.rounds
        ],
        "prompt": _encode(trace.prompt.value),
        "context": _encode(trace.context.value),
        "result": _encode(trace.result.value),
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def trace_from_json(line: str) -> Trace:
    doc = json.loads(line)
    atk = doc["atk"]
    return Trace(
        rounds=tuple(
            RoundRecord(
                corpus_before=_decode_corpus(r["before"]),
                corpus_after=_decode_corpus(r["after"]),
                view_shown=r["view_shown"],
            )
            for r in doc["rounds"]
        ),
        prompt=Prompt(_decode(doc["prompt"])),
        context=Context(_decode(doc["context"])),
        result=Result(_decode(doc["result"])),
        master_seed=doc["master_seed"],
        trial_index=doc["trial_index"],
        atk_used=AttackFlags(
            rounds=atk["rounds"],
            see_model=frozenset(atk["see_model"]),
            inject_learn=frozenset(atk["inject_learn"]),
            inject_infer=atk["inject_infer"],
            black_box=atk["black_box"],
        ),
    )


def write_traces(path: str, traces: Iterable[Trace]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(trace_to_json(trace) + "\n")


def read_traces(path: str) -> list[Trace]:
    with open(path, "r", encoding="utf-8") as fh:
        return [trace_from_json(line) for line in fh if line.strip()]
