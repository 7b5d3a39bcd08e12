"""Command line front end.

Subcommands mirror the harness drivers: single-game runs (completeness,
security, dpd), the hybrid chain, the composition suite, the scripted agent
walkthrough, and the full scenario suite.  Exit status: 0 when every
checked bound holds, 1 when any bound is violated, 2 on configuration
errors.  ``--out`` (or the ADVGAMES_OUT environment variable) selects a
directory for report files and rendered figures.
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys

from .core import ConfigurationError, GameReport
from .games import GameConfig, run_completeness
from .harness import (
    ScenarioOutcome,
    SuiteResult,
    _maybe_speed_up,
    emit_report,
    run_agent_demo,
    run_composition_suite,
    run_hybrid_chain,
    run_scenario,
    run_suite,
    suite_fingerprint,
    verdict_string,
)
from .scenarios import (
    DistinguishingScenario,
    ScenarioDescriptor,
    build_scenario,
    load_config,
)

OUT_ENV_VAR = "ADVGAMES_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advgames",
        description="Game-based security evaluation for trainable oracles.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario config file (default: the shipped catalog)")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--trials", type=int, help="override every scenario's trial count")
    common.add_argument("--delta", type=float, default=0.01,
                        help="confidence parameter for interval half-widths (default 0.01)")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV_VAR} if set)")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both",
                        help="report formats to write (default both)")
    common.add_argument("--jobs", type=int, default=1, help="parallel scenario workers")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("completeness", parents=[common],
                       help="benign-play validity rate for one scenario")
    p.add_argument("--scenario", required=True, help="scenario name from the catalog")

    p = sub.add_parser("security", parents=[common],
                       help="baseline then attack run for one scenario")
    p.add_argument("--scenario", required=True, help="scenario name from the catalog")

    p = sub.add_parser("dpd", parents=[common],
                       help="corpus-distinguishing run for one scenario")
    p.add_argument("--scenario", required=True, help="scenario name from the catalog")

    p = sub.add_parser("hybrid-chain", parents=[common],
                       help="label-flip chain with telescoping and utility bounds")
    p.add_argument("--length", type=int, default=8, help="chain length n (default 8)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="learner noise scale (default 0)")

    sub.add_parser("composition", parents=[common],
                   help="screened-composition bounds and reduction coverage")
    sub.add_parser("agent-demo", parents=[common],
                   help="deterministic poisoned-tool walkthrough")
    sub.add_parser("suite", parents=[common],
                   help="run the whole scenario catalog and emit reports")
    return parser


def _descriptors(args) -> list[ScenarioDescriptor]:
    if args.config:
        return load_config(args.config)
    resource = importlib.resources.files("advgames").joinpath("data/table1.cfg")
    with importlib.resources.as_file(resource) as path:
        return load_config(str(path))


def _pick(args) -> ScenarioDescriptor:
    descriptors = {d.name: d for d in _descriptors(args)}
    try:
        return descriptors[args.scenario]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {args.scenario!r}; catalog has {sorted(descriptors)}"
        ) from None


def _out_dir(args) -> str | None:
    return args.out or os.environ.get(OUT_ENV_VAR) or None


def _print_report(name: str, report: GameReport, baseline: GameReport | None = None) -> None:
    print(f"scenario        {name}")
    print(f"trials          {report.trials} (failures {report.failures})")
    print(f"win rate        {float(report.win_rate):.6f}")
    if baseline is not None:
        print(f"baseline        {float(baseline.win_rate):.6f}")
    if report.baseline_p is not None:
        print(f"advantage       {float(report.advantage):+.6f} (ci {report.ci_half_width:.6f})")
        print(f"verdict         {verdict_string(report)}")


def _emit_scenario_outputs(args, outcome: ScenarioOutcome) -> None:
    out = _out_dir(args)
    if not out:
        return
    result = SuiteResult(
        fingerprint=suite_fingerprint(args.seed, args.delta, []),
        outcomes=(outcome,),
    )
    paths = emit_report(result, out, args.format)
    for kind, path in sorted(paths.items()):
        print(f"wrote {kind:4} {path}")


def _cmd_completeness(args) -> int:
    desc = _pick(args)
    scenario = build_scenario(desc)
    if isinstance(scenario, DistinguishingScenario):
        raise ConfigurationError(
            f"scenario {desc.name!r} is a distinguishing game; use the dpd subcommand"
        )
    cfg = GameConfig(
        trials=args.trials or desc.trials,
        master_seed=args.seed,
        phi=scenario.phi,
        ci_delta=args.delta,
    )
    oracle = _maybe_speed_up(scenario.oracle)
    report, _ = run_completeness(oracle, scenario.source, scenario.generator, cfg)
    _print_report(desc.name, report)
    print(f"ci half-width   {report.ci_half_width:.6f}")
    _emit_scenario_outputs(args, ScenarioOutcome(name=desc.name, report=report))
    return 0


def _cmd_security(args) -> int:
    desc = _pick(args)
    if desc.kind != "security":
        raise ConfigurationError(
            f"scenario {desc.name!r} is a {desc.kind} game; use the dpd subcommand"
        )
    outcome = run_scenario(desc, args.seed, ci_delta=args.delta, trials=args.trials)
    _print_report(desc.name, outcome.report, outcome.baseline)
    _emit_scenario_outputs(args, outcome)
    return 0


def _cmd_dpd(args) -> int:
    desc = _pick(args)
    if desc.kind != "distinguishing":
        raise ConfigurationError(
            f"scenario {desc.name!r} is a {desc.kind} game; use the security subcommand"
        )
    outcome = run_scenario(desc, args.seed, ci_delta=args.delta, trials=args.trials)
    _print_report(desc.name, outcome.report)
    _emit_scenario_outputs(args, outcome)
    return 0


def _cmd_hybrid_chain(args) -> int:
    chain = run_hybrid_chain(
        n=args.length,
        trials=args.trials or 5000,
        master_seed=args.seed,
        ci_delta=args.delta,
        noise_scale=args.noise,
    )
    print(f"chain length    {chain.n}, trials per step {chain.trials}, noise {chain.noise_scale:g}")
    for step in chain.steps:
        print(
            f"  step {step.index:2}  win rate {float(step.report.win_rate):.4f}"
            f"  eps {step.epsilon:.4f}  (ci {step.report.ci_half_width:.4f})"
        )
    print(f"clean accuracy  {chain.clean_accuracy:.4f}   flipped accuracy {chain.flipped_accuracy:.4f}")
    print(f"endpoint gap    {chain.endpoint_gap:.4f} <= bound {chain.telescope_bound:.4f}: "
          + ("ok" if chain.telescope_ok else "VIOLATED"))
    print(f"utility         {chain.clean_accuracy:.4f} <= bound {chain.utility_bound:.4f}: "
          + ("ok" if chain.utility_ok else "VIOLATED"))
    out = _out_dir(args)
    if out:
        from .figures import render_hybrid_figure

        os.makedirs(out, exist_ok=True)
        print("wrote fig  " + render_hybrid_figure(chain, os.path.join(out, "hybrid-chain.png")))
    return 0 if chain.all_ok else 1


def _cmd_composition(args) -> int:
    comp = run_composition_suite(
        master_seed=args.seed,
        trials=args.trials or 2000,
        ci_delta=args.delta,
    )
    print(
        "completeness    composed "
        f"{float(comp.composed_completeness.win_rate):.4f}, screen "
        f"{float(comp.screen_completeness.win_rate):.4f}, proposer "
        f"{float(comp.proposer_completeness.win_rate):.4f}"
    )
    for case in comp.cases:
        v = case.verdict
        print(f"  {case.name}:")
        print(
            f"    completeness margin {v.completeness_margin:+.4f} "
            f"(tolerance {v.completeness_tolerance:.4f}): "
            + ("ok" if v.completeness_ok else "VIOLATED")
        )
        print(
            f"    security margin     {v.security_margin:+.4f} "
            f"(tolerance {v.security_tolerance:.4f}): "
            + ("ok" if v.security_ok else "VIOLATED")
        )
        print(
            f"    composed wins {len(case.composed_wins)}, uncovered by reductions "
            f"{len(case.uncovered_wins)}: " + ("ok" if case.sound else "VIOLATED")
        )
    out = _out_dir(args)
    if out:
        from .figures import render_composition_figure

        os.makedirs(out, exist_ok=True)
        print("wrote fig  " + render_composition_figure(comp, os.path.join(out, "composition.png")))
    return 0 if comp.all_ok else 1


def _cmd_agent_demo(args) -> int:
    demo = run_agent_demo()

    def show(tag, steps):
        print(f"{tag} run:")
        for step in steps:
            print(f"  [{step.role}] prompt={' '.join(step.prompt) or '-'}")
            if step.role == "tool":
                for i, line in enumerate(step.output):
                    print(f"      email {i}: {line}")
            else:
                print(f"      output: {step.output!r}")

    show("clean", demo.clean_steps)
    show("poisoned", demo.poisoned_steps)
    print(f"changed email index      {demo.changed_email_index}")
    print(f"clean summary valid      {demo.clean_valid}")
    print(f"poisoned summary valid   {demo.poisoned_valid} "
          f"(smuggled action {demo.poisoned_action})")
    print(f"screened result empty    {demo.filtered_result_empty}, "
          f"valid {demo.filtered_valid}")
    return 0 if demo.all_ok else 1


def _cmd_suite(args) -> int:
    descriptors = _descriptors(args)
    result = run_suite(
        descriptors,
        master_seed=args.seed,
        ci_delta=args.delta,
        jobs=args.jobs,
        trials=args.trials,
    )
    width = max((len(o.name) for o in result.outcomes), default=8)
    for outcome in result.outcomes:
        rep = outcome.report
        adv = "" if rep.baseline_p is None else f"  adv {float(rep.advantage):+.4f}"
        print(
            f"{outcome.name:<{width}}  trials {rep.trials:>5}  "
            f"win rate {float(rep.win_rate):.4f}{adv}  [{outcome.verdict}]"
        )
    out = _out_dir(args)
    if out:
        paths = emit_report(result, out, args.format)
        from .figures import render_suite_figure

        paths["fig"] = render_suite_figure(result, os.path.join(out, "advantages.png"))
        for kind, path in sorted(paths.items()):
            print(f"wrote {kind:4} {path}")
    return 0


_COMMANDS = {
    "completeness": _cmd_completeness,
    "security": _cmd_security,
    "dpd": _cmd_dpd,
    "hybrid-chain": _cmd_hybrid_chain,
    "composition": _cmd_composition,
    "agent-demo": _cmd_agent_demo,
    "suite": _cmd_suite,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
