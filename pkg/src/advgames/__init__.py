"""Game-based empirical security evaluation for multi-stage learning systems.

The package models an AI system as a short list of algorithms (per-round
data generation and learning, plus inference) and evaluates it by playing
completeness, security, and corpus-distinguishing games against pluggable
adversaries, reporting win rates with distribution-free confidence
intervals.
"""

__version__ = "0.1.0"

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
    DegenerateCorpusError,
    GameError,
    GameReport,
    Prompt,
    QueryBudgetExceeded,
    Result,
    SchemaError,
    SourceSet,
    Trace,
    TracePredicate,
    UnsupportedConfigurationError,
    ValidityPredicate,
    advantage,
    decisional_lift,
    hoeffding_half_width,
)
from .seeds import TrialCtx, scenario_seed
from .oracles import Oracle, make_centroid_oracle, make_keyword_screen_oracle, make_textgen_oracle
from .adversaries import Adversary, BenignGenerator, DistinguishingAdversary
from .composition import ComposedSpec, check_composition_bounds, composed_oracle
from .games import (
    GameConfig,
    estimate_baseline_then_advantage,
    run_completeness,
    run_dpd,
    run_security,
    run_simple_security,
)
from .scenarios import (
    ScenarioDescriptor,
    build_scenario,
    default_descriptors,
    load_config,
    validate_descriptor,
)
from .harness import (
    SuiteResult,
    emit_report,
    run_agent_demo,
    run_composition_suite,
    run_hybrid_chain,
    run_scenario,
    run_suite,
)
