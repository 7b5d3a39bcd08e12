"""Small, fully analyzable learned oracles used as game targets.

An oracle is a bundle of 2r+1 procedures: one corpus sampler and one learner
per learning round, plus a single inference procedure.  Learners return new
immutable model values (never mutate), and inference is pure and
deterministic (greedy decoding with a fixed tie-break), so an entire game
trial is a function of the source and the seed schedule.

Three families ship here:

* a nearest-centroid classifier over a two-cluster labeled vector source,
* an order-k token n-gram language model with add-k smoothing and a
  deliberate vulnerability: input or generated lines that start with the
  command marker are echoed into the result's action field,
* a keyword screen that answers accept/reject about a proposed result.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    ACCEPT,
    EMPTY,
    REJECT,
    Context,
    Corpus,
    DataItem,
    DegenerateCorpusError,
    ConfigurationError,
    Prompt,
    Result,
    SchemaError,
    SourceSet,
)

DataGen = Callable[[SourceSet, np.random.Generator], Corpus]
Learner = Callable[[Any, Corpus, np.random.Generator], Any]
Inferrer = Callable[[Prompt, Context, Any], Result]


@dataclass(frozen=True)
class Oracle:
    """2r+1 procedures defining one learned system."""

    kind: str
    rounds: int
    data_gens: tuple[DataGen, ...]
    learners: tuple[Learner, ...]
    inferrer: Inferrer

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigurationError(f"oracle needs at least one round, got {self.rounds}")
        if len(self.data_gens) != self.rounds or len(self.learners) != self.rounds:
            raise ConfigurationError(
                f"oracle {self.kind!r}: {len(self.data_gens)} samplers and "
                f"{len(self.learners)} learners for {self.rounds} rounds"
            )


# ---------------------------------------------------------------------------
# Labeled-vector scenario: two Gaussian clusters, nearest-centroid classifier.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterParams:
    """Geometry of the two-cluster labeled source.

    Cluster means sit at +/- separation/2 along the first axis with unit
    isotropic spread, so ``separation`` is measured in within-cluster
    standard deviations.  ``noise_scale`` perturbs learned centroids, which
    is the knob that trades memorization leakage against utility.
    """

    label_a: str = "cat"
    label_b: str = "dog"
    dim: int = 2
    separation: float = 6.0
    noise_scale: float = 0.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {self.dim}")
        if self.separation <= 0:
            raise ConfigurationError(f"separation must be > 0, got {self.separation}")
        if self.noise_scale < 0:
            raise ConfigurationError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.label_a == self.label_b:
            raise ConfigurationError("labels must differ")

    def mean(self, label: str) -> tuple[float, ...]:
        if label == self.label_a:
            first = +self.separation / 2.0
        elif label == self.label_b:
            first = -self.separation / 2.0
        else:
            raise SchemaError(f"unknown label {label!r}")
        return (first,) + (0.0,) * (self.dim - 1)

    def true_label(self, vector: Sequence[float]) -> str:
        """Ground truth by distance to the generating means (ties to the smaller label)."""
        da = math.dist(vector, self.mean(self.label_a))
        db = math.dist(vector, self.mean(self.label_b))
        if da < db:
            return self.label_a
        if db < da:
            return self.label_b
        return min(self.label_a, self.label_b)

    @property
    def labels(self) -> tuple[str, str]:
        return (self.label_a, self.label_b)


def make_cluster_source(params: ClusterParams, population: int, seed: int) -> SourceSet:
    """Balanced labeled source of ``population`` items.

    Features are drawn before labels are attached, so building the source
    again with the two labels swapped yields identical feature vectors with
    every label flipped.
    """
    if population < 2 or population % 2:
        raise ConfigurationError(f"population must be even and >= 2, got {population}")
    rng = np.random.default_rng(seed)
    half = population // 2
    feats = rng.standard_normal((population, params.dim))
    feats[:half, 0] += params.separation / 2.0
    feats[half:, 0] -= params.separation / 2.0
    items = []
    for i in range(population):
        label = params.label_a if i < half else params.label_b
        payload = (tuple(float(x) for x in feats[i]), label)
        items.append(DataItem(payload=payload, meta=(("idx", i),)))
    return SourceSet(items=tuple(items), schema_tag="labeled-vectors")


def _vector_payload(item: DataItem) -> tuple[tuple[float, ...], str]:
    payload = item.payload
    if not (isinstance(payload, tuple) and len(payload) == 2 and isinstance(payload[1], str)):
        raise SchemaError(f"expected (features, label) payload, got {payload!r}")
    return payload


@dataclass(frozen=True)
class CentroidModel:
    """Per-label mean vectors, stored sorted by label."""

    centroids: tuple[tuple[str, tuple[float, ...]], ...]

    @property
    def dim(self) -> int:
        return len(self.centroids[0][1])

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.centroids)

    def centroid(self, label: str) -> tuple[float, ...]:
        for lab, vec in self.centroids:
            if lab == label:
                return vec
        raise SchemaError(f"model has no centroid for label {label!r}")


def centroid_learn(
    model: Any,
    corpus: Corpus,
    rng: np.random.Generator,
    required_labels: tuple[str, str],
    noise_scale: float = 0.0,
) -> CentroidModel:
    """Average the corpus per label, then perturb each coordinate with seeded noise.

    Single-round learner: the incoming model must be the empty model.
    """
    if model is not EMPTY:
        raise SchemaError("centroid learner is single-round; expected the empty model")
    if len(corpus) == 0:
        raise DegenerateCorpusError("empty corpus")
    groups: dict[str, list[tuple[float, ...]]] = {}
    for item in corpus:
        vec, label = _vector_payload(item)
        groups.setdefault(label, []).append(vec)
    missing = [lab for lab in required_labels if lab not in groups]
    if missing:
        raise DegenerateCorpusError(f"corpus has no items labeled {missing}")
    centroids = []
    for label in sorted(groups):
        vecs = groups[label]
        mean = tuple(math.fsum(v[j] for v in vecs) / len(vecs) for j in range(len(vecs[0])))
        if noise_scale > 0.0:
            noise = rng.normal(0.0, noise_scale, size=len(mean))
            mean = tuple(m + float(e) for m, e in zip(mean, noise))
        centroids.append((label, mean))
    return CentroidModel(centroids=tuple(centroids))


def centroid_infer(prompt: Prompt, context: Context, model: CentroidModel) -> Result:
    """Label of the nearest centroid; equidistant prompts go to the smaller label.

    The context plays no role for this oracle.
    """
    vector = prompt.value
    if not isinstance(vector, tuple) or len(vector) != model.dim:
        raise SchemaError(
            f"prompt must be a {model.dim}-dimensional vector, got {vector!r}"
        )
    best_label = None
    best_dist = math.inf
    for label, centroid in model.centroids:  # sorted order makes the tie-break lexical
        d = math.dist(vector, centroid)
        if d < best_dist:
            best_label, best_dist = label, d
    return Result(best_label)


def make_centroid_oracle(params: ClusterParams, corpus_size: int = 64) -> Oracle:
    """Single-round centroid oracle drawing ``corpus_size`` source items per trial."""

    def sample(source: SourceSet, rng: np.random.Generator) -> Corpus:
        if corpus_size > len(source):
            raise ConfigurationError(
                f"corpus_size {corpus_size} exceeds source population {len(source)}"
            )
        idx = rng.choice(len(source), size=corpus_size, replace=False)
        return Corpus(items=tuple(source[int(i)] for i in idx), round_index=1)

    def learn(model: Any, corpus: Corpus, rng: np.random.Generator) -> CentroidModel:
        return centroid_learn(
            model, corpus, rng,
            required_labels=params.labels,
            noise_scale=params.noise_scale,
        )

    return Oracle(
        kind="centroid",
        rounds=1,
        data_gens=(sample,),
        learners=(learn,),
        inferrer=centroid_infer,
    )


# ---------------------------------------------------------------------------
# Token-sequence scenario: order-k n-gram language model, greedy decoding.
# ---------------------------------------------------------------------------

UNK = "<unk>"
NEWLINE = "<nl>"
COMMAND_MARKER = "CMD"


@dataclass(frozen=True)
class Generation:
    """Output of the text oracle: generated tokens plus an action field.

    The action field holds the payload of every input or generated line
    that begins with the command marker.  An agent runtime is assumed to
    execute whatever lands there; that is the modeled injection surface.
    """

    tokens: tuple[str, ...]
    action: tuple[str, ...] = ()


@dataclass(frozen=True, eq=True)
class NgramModel:
    """Token transition counts of fixed order with add-k smoothing.

    ``counts`` maps a (order-1)-token context to per-token counts.  The
    alphabet is every token seen in training plus the unknown token, sorted,
    so smoothed probabilities and tie-breaks are reproducible.
    """

    order: int
    k_smoothing: float
    counts: tuple[tuple[tuple[str, ...], tuple[tuple[str, int], ...]], ...]
    alphabet: tuple[str, ...]

    @property
    def vocab_size(self) -> int:
        return len(self.alphabet)

    def count_table(self) -> dict[tuple[str, ...], dict[str, int]]:
        return {ctx: dict(row) for ctx, row in self.counts}


def _token_payload(item: DataItem) -> tuple[str, ...]:
    payload = item.payload
    if not (isinstance(payload, tuple) and all(isinstance(t, str) for t in payload)):
        raise SchemaError(f"expected a token tuple payload, got {payload!r}")
    return payload


def _freeze_counts(table: Mapping[tuple[str, ...], Mapping[str, int]]):
    return tuple(
        (ctx, tuple(sorted(row.items())))
        for ctx, row in sorted(table.items())
    )


def ngram_learn(
    model: Any,
    corpus: Corpus,
    rng: np.random.Generator | None = None,
    order: int = 2,
    k_smoothing: float = 0.1,
) -> NgramModel:
    """Accumulate transition counts from the corpus into a new model.

    Called with the empty model it starts from zero; called with an existing
    model it adds to that model's counts, so multi-round learning composes.
    """
    if model is EMPTY:
        table: dict[tuple[str, ...], dict[str, int]] = {}
        tokens_seen: set[str] = set()
    else:
        if not isinstance(model, NgramModel):
            raise SchemaError(f"expected an n-gram model, got {type(model).__name__}")
        if model.order != order or model.k_smoothing != k_smoothing:
            raise SchemaError("cannot continue training with different n-gram settings")
        table = model.count_table()
        tokens_seen = set(model.alphabet) - {UNK}
    if len(corpus) == 0:
        raise DegenerateCorpusError("empty corpus")
    for item in corpus:
        seq = _token_payload(item)
        tokens_seen.update(seq)
        for j in range(order - 1, len(seq)):
            ctx = seq[j - order + 1 : j]
            row = table.setdefault(ctx, {})
            row[seq[j]] = row.get(seq[j], 0) + 1
    alphabet = tuple(sorted(tokens_seen | {UNK}))
    return NgramModel(
        order=order,
        k_smoothing=k_smoothing,
        counts=_freeze_counts(table),
        alphabet=alphabet,
    )


def _lookup(model: NgramModel) -> dict[tuple[str, ...], dict[str, int]]:
    # Rebuilt per inference call; tables are tiny at this scale.
    return {ctx: dict(row) for ctx, row in model.counts}


def _map_unknown(model: NgramModel, tokens: Iterable[str]) -> tuple[str, ...]:
    known = set(model.alphabet)
    return tuple(t if t in known else UNK for t in tokens)


def conditional_probability(model: NgramModel, context: Sequence[str], token: str) -> float:
    """Add-k smoothed probability of ``token`` after ``context``."""
    table = _lookup(model)
    ctx = _map_unknown(model, tuple(context)[-(model.order - 1):] if model.order > 1 else ())
    tok = token if token in model.alphabet else UNK
    row = table.get(tuple(ctx), {})
    total = sum(row.values())
    k = model.k_smoothing
    return (row.get(tok, 0) + k) / (total + k * model.vocab_size)


def _greedy_next(row: Mapping[str, int], alphabet: Sequence[str]) -> str:
    # With add-k smoothing the argmax over smoothed probabilities is the
    # argmax over raw counts, so no float math is needed here.  Ties go to
    # the lexically smallest token; an unseen context yields alphabet[0].
    best_token = alphabet[0]
    best_count = row.get(best_token, 0)
    for token in alphabet[1:]:
        c = row.get(token, 0)
        if c > best_count:
            best_token, best_count = token, c
    return best_token


def _scan_command_lines(tokens: Sequence[str]) -> tuple[str, ...]:
    actions: list[str] = []
    line: list[str] = []
    for token in tuple(tokens) + (NEWLINE,):
        if token == NEWLINE:
            if line and line[0] == COMMAND_MARKER:
                actions.extend(line[1:])
            line = []
        else:
            line.append(token)
    return tuple(actions)


def ngram_infer(
    prompt: Prompt,
    context: Context,
    model: NgramModel,
    max_len: int = 12,
) -> Result:
    """Greedy continuation of context followed by prompt, plus command echo.

    The input is the concatenation of the context tokens (if any) and the
    prompt tokens.  Unknown tokens are mapped to the unknown marker rather
    than rejected.  Any line of the combined input or of the generated
    continuation that starts with the command marker has its remaining
    tokens echoed into the action field.
    """
    if not isinstance(model, NgramModel):
        raise SchemaError(f"expected an n-gram model, got {type(model).__name__}")
    ctx_tokens: tuple[str, ...] = ()
    if not context.is_empty:
        ctx_tokens = tuple(context.value)
    prompt_tokens = tuple(prompt.value)
    seq = list(_map_unknown(model, ctx_tokens + prompt_tokens))
    table = _lookup(model)
    generated: list[str] = []
    for _ in range(max_len):
        ctx = tuple(seq[-(model.order - 1):]) if model.order > 1 else ()
        row = table.get(ctx, {})
        token = _greedy_next(row, model.alphabet)
        generated.append(token)
        seq.append(token)
    action = _scan_command_lines(ctx_tokens + prompt_tokens + tuple(generated))
    return Result(Generation(tokens=tuple(generated), action=action))


def perplexity(model: NgramModel, sequence: Sequence[str]) -> float:
    """Exponential of the mean negative log transition probability.

    Only transitions with a full-length context are scored; if the sequence
    is too short for any, the uniform smoothed floor applies and the value
    is exactly the alphabet size.
    """
    tokens = tuple(sequence)
    if not tokens:
        raise ValueError("cannot score an empty sequence")
    mapped = _map_unknown(model, tokens)
    table = _lookup(model)
    k = model.k_smoothing
    v = model.vocab_size
    logs: list[float] = []
    for j in range(model.order - 1, len(mapped)):
        ctx = mapped[j - model.order + 1 : j]
        row = table.get(ctx, {})
        total = sum(row.values())
        p = (row.get(mapped[j], 0) + k) / (total + k * v)
        logs.append(-math.log(p))
    if not logs:
        return float(v)
    return math.exp(math.fsum(logs) / len(logs))


def make_textgen_oracle(
    order: int = 2,
    k_smoothing: float = 0.1,
    max_len: int = 12,
    corpus_size: int | None = None,
    duplicate_meta_key: str = "copies",
) -> Oracle:
    """Single-round text oracle over a source of line items.

    The sampler takes every item whose ``kind`` is ``line`` (a deterministic
    subset), or a seeded subset of them when ``corpus_size`` is given.  An
    item carrying a ``copies`` count enters the corpus that many times,
    modeling a poorly deduplicated ingestion pipeline.
    """

    def sample(source: SourceSet, rng: np.random.Generator) -> Corpus:
        lines = [item for item in source if item.get("kind", "line") == "line"]
        if corpus_size is not None:
            if corpus_size > len(lines):
                raise ConfigurationError(
                    f"corpus_size {corpus_size} exceeds line count {len(lines)}"
                )
            idx = rng.choice(len(lines), size=corpus_size, replace=False)
            lines = [lines[int(i)] for i in sorted(idx)]
        expanded: list[DataItem] = []
        for item in lines:
            expanded.extend([item] * int(item.get(duplicate_meta_key, 1)))
        return Corpus(items=tuple(expanded), round_index=1)

    def learn(model: Any, corpus: Corpus, rng: np.random.Generator) -> NgramModel:
        return ngram_learn(model, corpus, rng, order=order, k_smoothing=k_smoothing)

    def infer(prompt: Prompt, context: Context, model: Any) -> Result:
        return ngram_infer(prompt, context, model, max_len=max_len)

    return Oracle(
        kind="textgen",
        rounds=1,
        data_gens=(sample,),
        learners=(learn,),
        inferrer=infer,
    )


# ---------------------------------------------------------------------------
# Screening oracle: keyword rules answering accept/reject about a candidate.
# ---------------------------------------------------------------------------

SECRET_MARKER = "SECRET"


@dataclass(frozen=True)
class ScreenModel:
    """Keyword rule set: tokens whose presence in a candidate forces reject."""

    forbidden: frozenset[str]
    secret_marker: str = SECRET_MARKER


def screen_learn(
    model: Any,
    corpus: Corpus,
    rng: np.random.Generator | None = None,
    secret_marker: str = SECRET_MARKER,
) -> ScreenModel:
    """Union the rule tokens found in the corpus into the rule set."""
    if model is EMPTY:
        forbidden: set[str] = set()
    elif isinstance(model, ScreenModel):
        forbidden = set(model.forbidden)
    else:
        raise SchemaError(f"expected a screen model, got {type(model).__name__}")
    if len(corpus) == 0:
        raise DegenerateCorpusError("empty corpus")
    for item in corpus:
        forbidden.update(_token_payload(item))
    return ScreenModel(forbidden=frozenset(forbidden), secret_marker=secret_marker)


def candidate_tokens(value: Any) -> tuple[str, ...]:
    """Flatten a candidate result value into the tokens a screen inspects."""
    if value is EMPTY:
        return ()
    if isinstance(value, Generation):
        return value.tokens + value.action
    if isinstance(value, str):
        return (value,)
    if isinstance(value, tuple) and all(isinstance(t, str) for t in value):
        return value
    raise SchemaError(f"cannot screen candidate value {value!r}")


def marked_secrets(context: Context, marker: str) -> frozenset[str]:
    """Tokens that follow the secret marker on any context line."""
    if context.is_empty:
        return frozenset()
    secrets: set[str] = set()
    line: list[str] = []
    for token in tuple(context.value) + (NEWLINE,):
        if token == NEWLINE:
            for pos, tok in enumerate(line):
                if tok == marker:
                    secrets.update(line[pos + 1 :])
                    break
            line = []
        else:
            line.append(token)
    return frozenset(secrets)


def screen_infer(prompt: Prompt, context: Context, model: ScreenModel) -> Result:
    """Accept or reject a (prompt, candidate) pair; the output is always one of the two.

    Rejects when the candidate contains a forbidden token, or when it leaks
    a token that the context marks as secret.
    """
    value = prompt.value
    if not (isinstance(value, tuple) and len(value) == 2):
        raise SchemaError(f"screen prompt must be a (prompt, candidate) pair, got {value!r}")
    _, candidate = value
    tokens = set(candidate_tokens(candidate))
    if tokens & model.forbidden:
        return Result(REJECT)
    if tokens & marked_secrets(context, model.secret_marker):
        return Result(REJECT)
    return Result(ACCEPT)


def make_keyword_screen_oracle() -> Oracle:
    """Single-round screen whose rules come from the source's rule items."""

    def sample(source: SourceSet, rng: np.random.Generator) -> Corpus:
        rules = source.where("kind", "rule")
        return Corpus(items=rules, round_index=1)

    def learn(model: Any, corpus: Corpus, rng: np.random.Generator) -> ScreenModel:
        return screen_learn(model, corpus, rng)

    return Oracle(
        kind="keyword-screen",
        rounds=1,
        data_gens=(sample,),
        learners=(learn,),
        inferrer=screen_infer,
    )


# ---------------------------------------------------------------------------
# Source construction and file loading.
# ---------------------------------------------------------------------------


def tokenize(text: str, mode: str = "whitespace") -> tuple[str, ...]:
    if mode == "whitespace":
        return tuple(text.split())
    if mode == "char":
        return tuple(text.replace(" ", ""))
    raise ConfigurationError(f"unknown tokenize mode {mode!r}")


def make_text_source(
    lines: Sequence[str],
    rules: Sequence[str] = (),
    records: Mapping[str, int] | None = None,
    schema_tag: str = "token-lines",
    tokenize_mode: str = "whitespace",
) -> SourceSet:
    """Token-line source with optional rule items and repeated records.

    ``rules`` become items tagged ``kind=rule`` (consumed by screen oracles).
    ``records`` maps a line to a copies count; such items are tagged
    ``kind=line`` plus ``record`` and ``copies``, and samplers that honor
    the copies count will ingest them repeatedly.
    """
    items: list[DataItem] = []
    idx = 0
    for line in lines:
        items.append(DataItem(payload=tokenize(line, tokenize_mode), meta=(("idx", idx), ("kind", "line"))))
        idx += 1
    for line, copies in (records or {}).items():
        tokens = tokenize(line, tokenize_mode)
        items.append(
            DataItem(
                payload=tokens,
                meta=(("idx", idx), ("kind", "line"), ("record", tokens), ("copies", int(copies))),
            )
        )
        idx += 1
    for rule in rules:
        items.append(DataItem(payload=tokenize(rule, tokenize_mode), meta=(("idx", idx), ("kind", "rule"))))
        idx += 1
    return SourceSet(items=tuple(items), schema_tag=schema_tag)


def load_text_source(path: str, tokenize_mode: str = "whitespace") -> SourceSet:
    """Newline-delimited text file, one item per non-empty line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    return make_text_source(lines, tokenize_mode=tokenize_mode)


def load_vector_source(path: str) -> SourceSet:
    """CSV with columns f1..fd,label, one labeled vector per row."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label" or len(header) < 2:
            raise SchemaError(f"{path}: expected header f1..fd,label")
        dim = len(header) - 1
        if header[:dim] != [f"f{j + 1}" for j in range(dim)]:
            raise SchemaError(f"{path}: feature columns must be named f1..f{dim}")
        items = []
        for i, row in enumerate(reader):
            if len(row) != dim + 1:
                raise SchemaError(f"{path}: row {i + 2} has {len(row)} fields, expected {dim + 1}")
            vec = tuple(float(x) for x in row[:dim])
            items.append(DataItem(payload=(vec, row[dim]), meta=(("idx", i),)))
    return SourceSet(items=tuple(items), schema_tag="labeled-vectors")


def save_vector_source(source: SourceSet, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        first = _vector_payload(source[0])[0]
        writer.writerow([f"f{j + 1}" for j in range(len(first))] + ["label"])
        for item in source:
            vec, label = _vector_payload(item)
            writer.writerow([repr(x) for x in vec] + [label])
