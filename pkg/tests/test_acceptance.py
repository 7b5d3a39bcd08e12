"""Acceptance gate: the eleven end-to-end guarantees, at full trial budgets.

Each criterion prints one ✅/❌ line (run with ``-s`` or as a script to see
them) and asserts, so a red criterion fails the suite honestly.  Expensive
runs are cached and shared between the criteria that examine them.
"""

import os
import sys
import tempfile
import time
from dataclasses import replace
from fractions import Fraction
from functools import lru_cache

from advgames.adversaries import as_adversary, backdoor_injector, cluster_generator, text_prompt_generator
from advgames.core import NEVER_TRIVIAL, AttackFlags
from advgames.games import (
    GameConfig,
    estimate_baseline_then_advantage,
    recheck_verdict,
    run_completeness,
    run_security,
)
from advgames.harness import (
    AGENT_INBOX,
    AGENT_POISONED_INDEX,
    _maybe_speed_up,
    run_agent_demo,
    run_composition_suite,
    run_hybrid_chain,
    run_scenario,
    run_suite,
    write_csv_report,
)
from advgames.oracles import make_centroid_oracle, make_cluster_source, make_textgen_oracle, make_text_source
from advgames.scenarios import (
    BACKDOOR_ASR_THRESHOLD,
    BACKDOOR_COPIES,
    BACKDOOR_PAYLOAD,
    BACKDOOR_TRIGGER,
    BLOCKED_INSTRUCTION,
    CLUSTER_CORPUS,
    CLUSTER_PARAMS,
    CLUSTER_POPULATION,
    CORPUS_LINES,
    INJECTION_ADVANTAGE_THRESHOLD,
    SOURCE_SEED,
    action_free_phi,
    build_scenario,
    classification_phi,
    default_descriptors,
)

MASTER_SEED = 424242
NOISY_SCALE = 40.0  # drowns the centroid signal; chosen with the frozen thresholds

DESCRIPTORS = {d.name: d for d in default_descriptors()}


def check(name: str, condition: bool, detail: str = ""):
    if condition:
        print(f"  ✅ {name}")
    else:
        print(f"  ❌ {name}: {detail}")
    assert condition, f"{name}: {detail}"


def cluster_world():
    oracle = make_centroid_oracle(CLUSTER_PARAMS, corpus_size=CLUSTER_CORPUS)
    source = make_cluster_source(CLUSTER_PARAMS, CLUSTER_POPULATION, SOURCE_SEED)
    return oracle, source, cluster_generator(CLUSTER_PARAMS)


@lru_cache(maxsize=None)
def catdog_completeness():
    oracle, source, generator = cluster_world()
    cfg = GameConfig(trials=10000, master_seed=MASTER_SEED, phi=classification_phi(CLUSTER_PARAMS))
    start = time.perf_counter()
    report, _ = run_completeness(oracle, source, generator, cfg)
    return report, time.perf_counter() - start


@lru_cache(maxsize=None)
def composition_at_full_budget():
    start = time.perf_counter()
    result = run_composition_suite(MASTER_SEED, trials=5000)
    return result, time.perf_counter() - start


@lru_cache(maxsize=None)
def hybrid_chain_clean():
    start = time.perf_counter()
    chain = run_hybrid_chain(n=8, trials=5000, master_seed=MASTER_SEED)
    return chain, time.perf_counter() - start


@lru_cache(maxsize=None)
def hybrid_chain_noisy():
    return run_hybrid_chain(n=8, trials=5000, master_seed=MASTER_SEED, noise_scale=NOISY_SCALE)


def test_01_benign_baseline_is_nearly_perfect_and_fast():
    print("\n[1/11] benign classification baseline")
    report, elapsed = catdog_completeness()
    check("completeness >= 0.99 over 10000 trials",
          report.win_rate >= Fraction(99, 100), f"got {float(report.win_rate):.4f}")
    check("runtime < 10 s", elapsed < 10.0, f"took {elapsed:.1f} s")


def test_02_completeness_equals_negated_benign_security():
    print("\n[2/11] completeness / security correspondence")
    oracle, source, generator = cluster_world()
    phi = classification_phi(CLUSTER_PARAMS)
    cfg = GameConfig(trials=1000, master_seed=MASTER_SEED, phi=phi,
                     atk=AttackFlags(rounds=1, inject_infer=True))
    comp_report, comp_traces = run_completeness(oracle, source, generator, cfg)
    sec_report, sec_traces = run_security(oracle, source, as_adversary(generator), cfg)
    matched = sum(
        int(phi(c.prompt, c.context, c.result) != recheck_verdict(s, phi, NEVER_TRIVIAL))
        for c, s in zip(comp_traces, sec_traces)
    )
    check("verdicts complement on every one of 1000 trials",
          matched == 1000 and comp_report.trials == sec_report.trials == 1000,
          f"{matched}/1000 matched")
    check("win counts complement exactly",
          comp_report.wins + sec_report.wins == 1000,
          f"{comp_report.wins} + {sec_report.wins}")


def test_03_composition_completeness_bound():
    print("\n[3/11] additive completeness floor of the screened composition")
    comp, elapsed = composition_at_full_budget()
    for case in comp.cases:
        check(f"{case.name}: composed completeness above the floor",
              case.verdict.completeness_ok,
              f"margin {case.verdict.completeness_margin:.4f} "
              f"tolerance {case.verdict.completeness_tolerance:.4f}")
    check("runtime < 60 s", elapsed < 60.0, f"took {elapsed:.1f} s")


def test_04_composition_security_bound():
    print("\n[4/11] additive attack account of the screened composition")
    comp, _ = composition_at_full_budget()
    for case in comp.cases:
        check(f"{case.name}: composed attack within the halves' account",
              case.verdict.security_ok,
              f"margin {case.verdict.security_margin:.4f} "
              f"tolerance {case.verdict.security_tolerance:.4f}")


def test_05_reduction_soundness_per_trial():
    print("\n[5/11] per-trial reduction coverage of composed wins")
    comp, _ = composition_at_full_budget()
    check("coverage examined on at least 1000 trials", comp.trials >= 1000,
          f"only {comp.trials}")
    for case in comp.cases:
        check(f"{case.name}: every composed win covered by a half win "
              f"({len(case.composed_wins)} wins)",
              case.uncovered_wins == (),
              f"uncovered trials {case.uncovered_wins[:5]}")


def test_06_hybrid_chain_telescopes_and_noise_kills_both_signals():
    print("\n[6/11] label-flip hybrid chain, clean and noise-drowned")
    chain, elapsed = hybrid_chain_clean()
    check("endpoint gap within the telescoped step advantages",
          chain.telescope_ok,
          f"gap {chain.endpoint_gap:.4f} > bound {chain.telescope_bound:.4f}")
    check("runtime < 120 s", elapsed < 120.0, f"took {elapsed:.1f} s")
    noisy = hybrid_chain_noisy()
    check("at heavy training noise every step advantage is null",
          noisy.steps_null,
          f"epsilons {[round(e, 4) for e in noisy.epsilons]}")
    check("at heavy training noise clean accuracy is a coin flip",
          noisy.utility_null,
          f"accuracy {noisy.clean_accuracy:.4f} width {noisy.clean_width:.4f}")


def test_07_backdoor_asr_clean_degradation_and_verbatim_screening():
    print("\n[7/11] backdoor: trigger response, clean behavior, lazy-prompt screening")
    outcome = run_scenario(DESCRIPTORS["backdoor"], MASTER_SEED, trials=5000)
    check(f"trigger attack success rate >= {BACKDOOR_ASR_THRESHOLD}",
          float(outcome.report.win_rate) >= BACKDOOR_ASR_THRESHOLD,
          f"got {float(outcome.report.win_rate):.4f}")

    oracle = _maybe_speed_up(make_textgen_oracle())
    source = make_text_source(CORPUS_LINES)
    generator = text_prompt_generator()
    planted = backdoor_injector(BACKDOOR_TRIGGER, BACKDOOR_PAYLOAD, BACKDOOR_COPIES)
    benign_after_poison = replace(planted, infer_phase=as_adversary(generator).infer_phase)
    cfg = GameConfig(trials=5000, master_seed=MASTER_SEED, phi=action_free_phi(),
                     psi=NEVER_TRIVIAL, atk=AttackFlags(rounds=1, inject_learn=frozenset({1})))
    clean_rep, _ = run_completeness(oracle, source, generator, cfg)
    poisoned_rep, _ = run_security(oracle, source, benign_after_poison, cfg)
    clean_acc = float(clean_rep.win_rate)
    poisoned_acc = 1.0 - float(poisoned_rep.win_rate)
    tolerance = clean_rep.ci_half_width + poisoned_rep.ci_half_width
    check("clean-task degradation within CI of 0 at 5000 paired trials",
          abs(clean_acc - poisoned_acc) <= tolerance,
          f"clean {clean_acc:.4f} poisoned {poisoned_acc:.4f} tol {tolerance:.4f}")

    lazy = run_scenario(replace(DESCRIPTORS["backdoor"], adversary_id="backdoor-verbatim"),
                        MASTER_SEED, trials=2000)
    check("verbatim-overlap screening zeroes the lazy variant exactly",
          lazy.report.wins == 0, f"{lazy.report.wins} wins slipped through")


def test_08_membership_inference_beats_the_coin_and_the_coin_does_not():
    print("\n[8/11] duplicated-record membership distinguishing")
    outcome = run_scenario(DESCRIPTORS["membership-inference"], MASTER_SEED, trials=2000)
    check("memorization score advantage significant at 99% over 2000 trials",
          float(outcome.report.advantage) > outcome.report.ci_half_width,
          f"advantage {float(outcome.report.advantage):.4f} "
          f"ci {outcome.report.ci_half_width:.4f}")
    coin = run_scenario(
        replace(DESCRIPTORS["membership-inference"], adversary_id="coin-flip"),
        MASTER_SEED, trials=2000,
    )
    check("fresh-coin guesser advantage within CI of 0",
          abs(float(coin.report.advantage)) <= coin.report.ci_half_width,
          f"advantage {float(coin.report.advantage):.4f}")


def test_09_indirect_injection_lives_on_the_context_grant():
    print("\n[9/11] indirect prompt injection with and without the context grant")
    desc = DESCRIPTORS["prompt-injection"]
    outcome = run_scenario(desc, MASTER_SEED, trials=1000)
    check(f"granted context injection: advantage >= {INJECTION_ADVANTAGE_THRESHOLD}",
          float(outcome.report.advantage) >= INJECTION_ADVANTAGE_THRESHOLD,
          f"got {float(outcome.report.advantage):.4f}")
    scenario = build_scenario(desc)
    withheld = GameConfig(
        trials=1000, master_seed=MASTER_SEED, phi=scenario.phi, psi=scenario.psi,
        atk=AttackFlags(rounds=1, see_model=frozenset({1})),  # inject_infer withheld
    )
    _, report, _ = estimate_baseline_then_advantage(
        _maybe_speed_up(scenario.oracle), scenario.source, scenario.generator,
        scenario.adversary, withheld,
    )
    check("withheld context injection: advantage within CI of 0",
          abs(float(report.advantage)) <= report.ci_half_width,
          f"advantage {float(report.advantage):.4f}")


def test_10_agent_demo_is_exact():
    print("\n[10/11] screened agent walkthrough")
    demo = run_agent_demo()
    inbox_diff = [i for i in range(len(AGENT_INBOX))
                  if demo.poisoned_steps[1].output[i] != AGENT_INBOX[i]]
    check("poisoned inbox differs in exactly one email",
          inbox_diff == [AGENT_POISONED_INDEX], f"differs at {inbox_diff}")
    check("unscreened poisoned summary carries the smuggled command",
          not demo.poisoned_valid and demo.poisoned_action == BLOCKED_INSTRUCTION,
          f"action {demo.poisoned_action}")
    check("screen withholds the poisoned summary, and that outcome is valid",
          demo.filtered_result_empty and demo.filtered_valid, repr(demo))
    check("clean run is valid and the whole demo is deterministic",
          demo.clean_valid and demo == run_agent_demo(), "reruns diverged")


def test_11_suite_reruns_are_byte_identical():
    print("\n[11/11] suite reproducibility")
    first = run_suite(default_descriptors(), MASTER_SEED)
    second = run_suite(default_descriptors(), MASTER_SEED)
    with tempfile.TemporaryDirectory() as tmp:
        path_a = os.path.join(tmp, "a.csv")
        path_b = os.path.join(tmp, "b.csv")
        write_csv_report(first, path_a)
        write_csv_report(second, path_b)
        with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
            identical = fa.read() == fb.read()
    check("re-run with the same config and seed emits a byte-identical CSV",
          identical and first == second, "runs diverged")


CRITERIA = [
    test_01_benign_baseline_is_nearly_perfect_and_fast,
    test_02_completeness_equals_negated_benign_security,
    test_03_composition_completeness_bound,
    test_04_composition_security_bound,
    test_05_reduction_soundness_per_trial,
    test_06_hybrid_chain_telescopes_and_noise_kills_both_signals,
    test_07_backdoor_asr_clean_degradation_and_verbatim_screening,
    test_08_membership_inference_beats_the_coin_and_the_coin_does_not,
    test_09_indirect_injection_lives_on_the_context_grant,
    test_10_agent_demo_is_exact,
    test_11_suite_reruns_are_byte_identical,
]


if __name__ == "__main__":
    failures = 0
    for criterion in CRITERIA:
        try:
            criterion()
        except AssertionError:
            failures += 1
    print(f"\n{len(CRITERIA) - failures} of {len(CRITERIA)} criteria passed")
    sys.exit(1 if failures else 0)
