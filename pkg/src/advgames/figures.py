"""Figure rendering for harness results.

Everything draws through the Agg backend straight to files; nothing here
opens a window.  Each renderer takes a harness result object and a target
path and returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import CompositionSuiteResult, HybridChainResult, SuiteResult


def render_suite_figure(result: SuiteResult, path: str) -> str:
    """Advantage per scenario with its confidence whisker."""
    names = [outcome.name for outcome in result.outcomes]
    advantages = []
    widths = []
    for outcome in result.outcomes:
        rep = outcome.report
        if rep.baseline_p is None:
            advantages.append(float(rep.win_rate))
            widths.append(rep.ci_half_width)
        else:
            advantages.append(float(rep.advantage))
            widths.append(rep.ci_half_width)

    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(names)), 4.0))
    positions = range(len(names))
    ax.bar(positions, advantages, yerr=widths, capsize=4, color="#4878a8")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(list(positions))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("estimated advantage")
    ax.set_title("scenario advantages with confidence half-widths")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_hybrid_figure(chain: HybridChainResult, path: str) -> str:
    """Per-step distinguishing rates plus the pinned endpoint accuracies."""
    indices = [step.index for step in chain.steps]
    rates = [float(step.report.win_rate) for step in chain.steps]
    widths = [step.report.ci_half_width for step in chain.steps]

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    top.errorbar(indices, rates, yerr=widths, fmt="o-", capsize=3, color="#4878a8")
    top.axhline(0.5, color="black", linewidth=0.8, linestyle="--")
    top.set_ylabel("step win rate")
    top.set_title(
        f"flip chain, n={chain.n}, noise={chain.noise_scale:g}: "
        f"gap {chain.endpoint_gap:.3f} vs bound {chain.telescope_bound:.3f}"
    )

    bottom.bar([0, 1], [chain.clean_accuracy, chain.flipped_accuracy],
               yerr=[chain.clean_width, chain.flipped_width], capsize=4,
               color=["#58a066", "#b05050"])
    bottom.axhline(0.5, color="black", linewidth=0.8, linestyle="--")
    bottom.set_xticks([0, 1])
    bottom.set_xticklabels(["clean corpus", "fully flipped"])
    bottom.set_ylabel("probe accuracy")
    bottom.set_xlabel("chain step")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_composition_figure(comp: CompositionSuiteResult, path: str) -> str:
    """Bound margins per adversary; a bar below its tolerance line is a violation."""
    names = [case.name for case in comp.cases]
    comp_margins = [case.verdict.completeness_margin for case in comp.cases]
    sec_margins = [case.verdict.security_margin for case in comp.cases]
    tolerance = comp.cases[0].verdict.completeness_tolerance if comp.cases else 0.0

    fig, ax = plt.subplots(figsize=(max(6.0, 2.0 * len(names)), 4.0))
    positions = range(len(names))
    width = 0.38
    ax.bar([p - width / 2 for p in positions], comp_margins, width,
           label="completeness margin", color="#4878a8")
    ax.bar([p + width / 2 for p in positions], sec_margins, width,
           label="security margin", color="#d09040")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.axhline(-tolerance, color="red", linewidth=0.8, linestyle="--",
               label="failure line (-tolerance)")
    ax.set_xticks(list(positions))
    ax.set_xticklabels(names)
    ax.set_ylabel("margin")
    ax.set_title("composition bound margins per adversary")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
