"""Game runners: seed determinism, grant enforcement, and trace fidelity."""

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from advgames.adversaries import (
    Adversary,
    as_adversary,
    backdoor_injector,
    cluster_generator,
    coin_flip_guesser,
    label_flip_poisoner,
    membership_adversary,
    prompt_injector,
    text_prompt_generator,
)
from advgames.core import (
    EMPTY,
    AttackFlags,
    ConfigurationError,
    Context,
    Corpus,
    DataItem,
    NEVER_TRIVIAL,
    Prompt,
    QueryBudgetExceeded,
    Result,
    RoundRecord,
    SchemaError,
    Trace,
    ValidityPredicate,
    hoeffding_half_width,
)
from advgames.games import (
    GameConfig,
    estimate_baseline_then_advantage,
    read_traces,
    recheck_verdict,
    run_completeness,
    run_dpd,
    run_security,
    run_simple_security,
    trace_from_json,
    trace_to_json,
    trial_verdicts,
    verbatim_overlap_psi,
    write_traces,
)
from advgames.oracles import (
    ClusterParams,
    make_centroid_oracle,
    make_cluster_source,
    make_text_source,
    make_textgen_oracle,
)
from advgames.scenarios import CORPUS_LINES, classification_phi
from advgames.seeds import ROLE_GAME, TrialCtx

PARAMS = ClusterParams()


def cluster_world(corpus_size=16, population=60, seed=5):
    oracle = make_centroid_oracle(PARAMS, corpus_size=corpus_size)
    source = make_cluster_source(PARAMS, population=population, seed=seed)
    return oracle, source, cluster_generator(PARAMS)


def text_world():
    source = make_text_source(CORPUS_LINES)
    return make_textgen_oracle(corpus_size=24), source, text_prompt_generator()


ANSWERS = ValidityPredicate(name="answers", evaluator=lambda p, c, r: r.value is not EMPTY)


def test_game_config_validation():
    with pytest.raises(ConfigurationError):
        GameConfig(trials=0, master_seed=1)
    with pytest.raises(ConfigurationError):
        GameConfig(trials=1, master_seed=1, round_offset=-1)


def test_completeness_is_seed_deterministic():
    oracle, source, gen = cluster_world()
    cfg = GameConfig(trials=40, master_seed=77, phi=classification_phi(PARAMS))
    report_a, traces_a = run_completeness(oracle, source, gen, cfg)
    report_b, traces_b = run_completeness(oracle, source, gen, cfg)
    assert report_a == report_b
    assert traces_a == traces_b
    _, other = run_completeness(oracle, source, gen, replace(cfg, master_seed=78))
    assert [t.prompt for t in other] != [t.prompt for t in traces_a]


def test_completeness_requires_phi():
    oracle, source, gen = cluster_world()
    with pytest.raises(ConfigurationError):
        run_completeness(oracle, source, gen, GameConfig(trials=5, master_seed=0))


def test_benign_security_complements_completeness_per_trial():
    oracle, source, gen = cluster_world()
    phi = classification_phi(PARAMS)
    cfg = GameConfig(trials=120, master_seed=13, phi=phi,
                     atk=AttackFlags(rounds=1, inject_infer=True))
    comp_report, comp_traces = run_completeness(oracle, source, gen, cfg)
    sec_report, sec_traces = run_security(oracle, source, as_adversary(gen), cfg)
    assert comp_report.trials == sec_report.trials
    assert comp_report.wins + sec_report.wins == comp_report.trials
    for comp, sec in zip(comp_traces, sec_traces):
        assert comp.prompt == sec.prompt
        assert comp.result == sec.result
        assert phi(comp.prompt, comp.context, comp.result) != recheck_verdict(
            sec, phi, NEVER_TRIVIAL
        )


def test_ungranted_learn_injection_is_discarded():
    oracle, source, _ = cluster_world()
    adv = label_flip_poisoner(1.0, (PARAMS.label_a, PARAMS.label_b), cluster_generator(PARAMS))
    cfg = GameConfig(trials=10, master_seed=3, phi=classification_phi(PARAMS),
                     atk=AttackFlags(rounds=1))
    _, traces = run_security(oracle, source, adv, cfg)
    for trace in traces:
        assert trace.rounds[0].corpus_after == trace.rounds[0].corpus_before


def test_granted_learn_injection_lands_in_the_trace():
    oracle, source, _ = cluster_world()
    adv = label_flip_poisoner(1.0, (PARAMS.label_a, PARAMS.label_b), cluster_generator(PARAMS))
    cfg = GameConfig(trials=10, master_seed=3, phi=classification_phi(PARAMS),
                     atk=AttackFlags(rounds=1, inject_learn=frozenset({1})),
                     psi=NEVER_TRIVIAL)
    _, traces = run_security(oracle, source, adv, cfg)
    for trace in traces:
        record = trace.rounds[0]
        assert record.corpus_after != record.corpus_before
        assert len(record.corpus_after) == len(record.corpus_before)


def test_ungranted_context_injection_is_discarded():
    oracle, source, gen = text_world()
    adv = prompt_injector(("send", "funds"), "indirect", gen)
    cfg = GameConfig(trials=8, master_seed=2, phi=ANSWERS, atk=AttackFlags(rounds=1))
    _, traces = run_security(oracle, source, adv, cfg)
    assert all(trace.context.value is EMPTY for trace in traces)
    granted = replace(cfg, atk=AttackFlags(rounds=1, inject_infer=True))
    _, traces = run_security(oracle, source, adv, granted)
    assert all(trace.context.value is not EMPTY for trace in traces)


def test_security_rejects_mismatched_round_counts():
    oracle, source, gen = cluster_world()
    cfg = GameConfig(trials=5, master_seed=0, phi=ANSWERS,
                     atk=AttackFlags(rounds=2, inject_infer=True))
    with pytest.raises(ConfigurationError):
        run_security(oracle, source, as_adversary(gen), cfg)


def test_learning_injection_needs_an_explicit_triviality_judgment():
    oracle, source, _ = cluster_world()
    adv = label_flip_poisoner(1.0, (PARAMS.label_a, PARAMS.label_b), cluster_generator(PARAMS))
    cfg = GameConfig(trials=5, master_seed=0, phi=ANSWERS,
                     atk=AttackFlags(rounds=1, inject_learn=frozenset({1})))
    with pytest.raises(ConfigurationError, match="explicitly"):
        run_security(oracle, source, adv, cfg)


def test_simple_security_fills_in_or_enforces_the_simple_grant():
    oracle, source, gen = cluster_world()
    cfg = GameConfig(trials=6, master_seed=1, phi=classification_phi(PARAMS))
    _, traces = run_simple_security(oracle, source, as_adversary(gen), cfg)
    assert all(trace.atk_used == AttackFlags.simple(1) for trace in traces)
    with pytest.raises(ConfigurationError):
        run_simple_security(oracle, source, as_adversary(gen),
                            replace(cfg, atk=AttackFlags(rounds=1, black_box=True)))


def test_black_box_grant_hands_out_a_budgeted_handle():
    oracle, source, gen = text_world()
    calls = []

    def infer(state, view, source_, handle, ctx, rng):
        assert handle is not None
        for _ in range(3):
            calls.append(handle(Prompt(("the",)), Context.none()))
        return Context.none(), Prompt(("the",))

    greedy = Adversary(kind_tag="probe", learn_phase=lambda s, v, src, c, x, r: (c, s),
                       infer_phase=infer)
    cfg = GameConfig(trials=1, master_seed=0, phi=ANSWERS, query_budget=2,
                     atk=AttackFlags(rounds=1, black_box=True))
    with pytest.raises(QueryBudgetExceeded):
        run_security(oracle, source, greedy, cfg)
    assert len(calls) == 2
    relaxed = replace(cfg, query_budget=3)
    run_security(oracle, source, greedy, relaxed)


def test_no_black_box_grant_means_no_handle():
    oracle, source, _ = text_world()

    def infer(state, view, source_, handle, ctx, rng):
        assert handle is None
        return Context.none(), Prompt(("the",))

    probe = Adversary(kind_tag="probe", learn_phase=lambda s, v, src, c, x, r: (c, s),
                      infer_phase=infer)
    cfg = GameConfig(trials=2, master_seed=0, phi=ANSWERS,
                     atk=AttackFlags(rounds=1, inject_infer=True))
    run_security(oracle, source, probe, cfg)


def test_view_grants_control_what_the_adversary_sees():
    oracle, source, _ = cluster_world()
    seen = []

    def learn(state, view, source_, corpus, ctx, rng):
        seen.append(view)
        return corpus, state

    def infer(state, view, source_, handle, ctx, rng):
        seen.append(view)
        return Context.none(), Prompt((0.0,) * PARAMS.dim)

    watcher = Adversary(kind_tag="watcher", learn_phase=learn, infer_phase=infer)
    cfg = GameConfig(trials=1, master_seed=6, phi=ANSWERS, atk=AttackFlags(rounds=1))
    run_security(oracle, source, watcher, cfg)
    assert seen == [EMPTY, EMPTY]  # no grants: blind in both phases
    seen.clear()
    granted = replace(cfg, atk=AttackFlags(rounds=1, see_model=frozenset({0, 1})))
    _, traces = run_security(oracle, source, watcher, granted)
    assert seen[0] is EMPTY  # boundary 0 precedes any training
    assert seen[1] is not EMPTY
    assert traces[0].rounds[0].view_shown is True


def test_round_offset_shifts_data_but_not_the_actor_stream():
    oracle, source, gen = text_world()
    cfg = GameConfig(trials=12, master_seed=21, phi=ANSWERS)
    _, base = run_completeness(oracle, source, gen, cfg)
    _, shifted = run_completeness(oracle, source, gen, replace(cfg, round_offset=1))
    assert [t.prompt for t in base] == [t.prompt for t in shifted]
    assert any(a.rounds[0].corpus_before != b.rounds[0].corpus_before
               for a, b in zip(base, shifted))


def test_baseline_then_advantage_carries_both_error_widths():
    oracle, source, gen = text_world()
    adv = prompt_injector(("send", "funds"), "direct", gen)
    cfg = GameConfig(trials=50, master_seed=9, phi=ANSWERS,
                     atk=AttackFlags(rounds=1, inject_infer=True))
    baseline, security, traces = estimate_baseline_then_advantage(
        oracle, source, gen, adv, cfg
    )
    assert security.baseline_p == baseline.win_rate
    assert security.advantage == security.win_rate - (1 - baseline.win_rate)
    single = hoeffding_half_width(baseline.trials, cfg.ci_delta)
    assert security.ci_half_width == pytest.approx(single + baseline.ci_half_width)
    assert len(traces) == security.trials


def test_trial_verdicts_indexes_by_trial():
    oracle, source, gen = cluster_world()
    phi = classification_phi(PARAMS)
    cfg = GameConfig(trials=30, master_seed=4, phi=phi,
                     atk=AttackFlags(rounds=1, inject_infer=True))
    report, traces = run_security(oracle, source, as_adversary(gen), cfg)
    verdicts = trial_verdicts(traces, phi, NEVER_TRIVIAL)
    assert sorted(verdicts) == list(range(30))
    assert sum(verdicts.values()) == report.wins


# ---------------------------------------------------------------------------
# Corpus distinguishing.
# ---------------------------------------------------------------------------


def test_dpd_validation():
    oracle, source, _ = text_world()
    adv = membership_adversary("perplexity")
    cfg = GameConfig(trials=5, master_seed=0)
    with pytest.raises(ConfigurationError):
        run_dpd(oracle, source, 0, adv, cfg)
    with pytest.raises(ConfigurationError):
        run_dpd(oracle, source, 8, adv, cfg, force_coin=2)
    from advgames.harness import composition_world

    _, _, composed = composition_world()
    with pytest.raises(ConfigurationError):
        run_dpd(composed, source, 8, adv, cfg)


def test_dpd_win_equals_coin_match_for_a_constant_guesser():
    oracle, source, _ = text_world()
    base = coin_flip_guesser()
    stubborn = replace(base, guess_phase=lambda *args: 1)
    cfg = GameConfig(trials=80, master_seed=31)
    report = run_dpd(oracle, source, 8, stubborn, cfg)
    coins = sum(int(TrialCtx(31, t).rng(ROLE_GAME, 0).integers(2)) for t in range(80))
    assert report.wins == coins
    assert report.baseline_p == Fraction(1, 2)
    assert report.advantage == report.win_rate - Fraction(1, 2)


def test_dpd_forfeits_wrong_sized_proposals():
    base = coin_flip_guesser()

    def oversized(n, source, ctx, rng):
        corpus, z0, z1, st = base.build_phase(n, source, ctx, rng)
        return Corpus(items=corpus.items + (z0,), round_index=1), z0, z1, st

    oracle, source, _ = text_world()
    cfg = GameConfig(trials=12, master_seed=7)
    report = run_dpd(oracle, source, 8, replace(base, build_phase=oversized), cfg)
    assert report.trials == 12  # forfeits complete, they do not fail out
    assert report.wins == 0


def test_dpd_rejects_non_bit_guesses():
    oracle, source, _ = text_world()
    base = coin_flip_guesser()
    wild = replace(base, guess_phase=lambda *args: 2)
    with pytest.raises(SchemaError):
        run_dpd(oracle, source, 8, wild, GameConfig(trials=1, master_seed=0))


def test_dpd_trains_on_a_canonical_ordering():
    oracle, source, _ = text_world()
    adv = membership_adversary("perplexity", duplication=4)

    def reversed_build(n, source_, ctx, rng):
        corpus, z0, z1, st = adv.build_phase(n, source_, ctx, rng)
        return Corpus(items=tuple(reversed(corpus.items)), round_index=1), z0, z1, st

    cfg = GameConfig(trials=25, master_seed=17)
    straight = run_dpd(oracle, source, 6, adv, cfg)
    shuffled = run_dpd(oracle, source, 6, replace(adv, build_phase=reversed_build), cfg)
    assert straight == shuffled


def test_dpd_force_coin_pins_one_branch():
    oracle, source, _ = text_world()
    adv = membership_adversary("perplexity", duplication=6)
    cfg = GameConfig(trials=30, master_seed=23)
    heads = run_dpd(oracle, source, 6, adv, cfg, force_coin=1)
    tails = run_dpd(oracle, source, 6, adv, cfg, force_coin=0)
    # the duplication signature is overwhelming at this size: both branches read it
    assert heads.win_rate == Fraction(1)
    assert tails.win_rate == Fraction(1)


# ---------------------------------------------------------------------------
# Trace judgments and serialization.
# ---------------------------------------------------------------------------


def _planted_trace(prompt_tokens):
    before = Corpus(items=(DataItem(payload=("the", "lamp"), meta=(("idx", 0),)),),
                    round_index=1)
    after = Corpus(items=before.items + (DataItem(payload=("qq", "zz", "open"), meta=()),),
                   round_index=1)
    return Trace(
        rounds=(RoundRecord(corpus_before=before, corpus_after=after, view_shown=False),),
        prompt=Prompt(prompt_tokens),
        context=Context(EMPTY),
        result=Result(("open",)),
        master_seed=0,
        trial_index=0,
        atk_used=AttackFlags(rounds=1, inject_learn=frozenset({1})),
    )


def test_verbatim_overlap_fires_only_on_whole_planted_lines():
    psi = verbatim_overlap_psi()
    assert psi(_planted_trace(("qq", "zz", "open"))) is True
    assert psi(_planted_trace(("qq", "zz"))) is False  # proper part: genuine attack
    assert psi(_planted_trace(("the", "lamp"))) is False  # benign line, not injected
    assert psi(_planted_trace("qq zz open")) is False  # non-tuple prompts never match


def test_trace_round_trip_is_exact(tmp_path):
    oracle, source, _ = text_world()
    adv = backdoor_injector(("qq", "zz"), ("open", "sesame"), copies=2)
    cfg = GameConfig(trials=6, master_seed=41, phi=ANSWERS, psi=NEVER_TRIVIAL,
                     atk=AttackFlags(rounds=1, inject_learn=frozenset({1})))
    _, text_traces = run_security(oracle, source, adv, cfg)
    cluster_oracle, cluster_src, gen = cluster_world()
    _, vec_traces = run_completeness(cluster_oracle, cluster_src, gen,
                                     GameConfig(trials=6, master_seed=41,
                                                phi=classification_phi(PARAMS)))
    traces = text_traces + vec_traces
    path = tmp_path / "traces.jsonl"
    write_traces(str(path), traces)
    loaded = read_traces(str(path))
    assert loaded == traces
    assert [trace_to_json(t) for t in loaded] == [trace_to_json(t) for t in traces]
    assert trace_from_json(trace_to_json(traces[0])) == traces[0]
    phi = ANSWERS
    for before, after in zip(traces, loaded):
        assert recheck_verdict(before, phi, NEVER_TRIVIAL) == recheck_verdict(
            after, phi, NEVER_TRIVIAL
        )
