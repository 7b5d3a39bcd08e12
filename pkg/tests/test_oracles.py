"""Toy oracles: frozen expected values for the learners and inferrers."""

import math
from fractions import Fraction

import numpy as np
import pytest

from advgames.core import (
    ACCEPT,
    EMPTY,
    REJECT,
    ConfigurationError,
    Context,
    Corpus,
    DataItem,
    DegenerateCorpusError,
    Prompt,
    Result,
    SchemaError,
)
from advgames.oracles import (
    COMMAND_MARKER,
    NEWLINE,
    UNK,
    ClusterParams,
    Generation,
    candidate_tokens,
    centroid_infer,
    centroid_learn,
    conditional_probability,
    load_vector_source,
    make_centroid_oracle,
    make_cluster_source,
    make_keyword_screen_oracle,
    make_text_source,
    make_textgen_oracle,
    marked_secrets,
    ngram_infer,
    ngram_learn,
    perplexity,
    save_vector_source,
    screen_infer,
    screen_learn,
    tokenize,
)

RNG = lambda s=0: np.random.default_rng(s)


def _vec_corpus(rows):
    items = tuple(
        DataItem(payload=(vec, label), meta=(("idx", i),))
        for i, (vec, label) in enumerate(rows)
    )
    return Corpus(items=items, round_index=1)


def _line_corpus(lines):
    src = make_text_source(lines)
    return Corpus(items=tuple(src), round_index=1)


# ---------------------------------------------------------------------------
# cluster geometry / centroid oracle
# ---------------------------------------------------------------------------


def test_cluster_params_geometry():
    params = ClusterParams(separation=6.0, dim=2)
    assert params.mean("cat") == (3.0, 0.0)
    assert params.mean("dog") == (-3.0, 0.0)
    assert params.true_label((2.0, 5.0)) == "cat"
    assert params.true_label((-0.1, 0.0)) == "dog"
    assert params.true_label((0.0, 7.0)) == "cat"  # equidistant, smaller label
    with pytest.raises(ConfigurationError):
        ClusterParams(label_a="x", label_b="x")
    with pytest.raises(ConfigurationError):
        ClusterParams(separation=0.0)


def test_cluster_source_is_seed_deterministic():
    a = make_cluster_source(ClusterParams(), 40, seed=9)
    b = make_cluster_source(ClusterParams(), 40, seed=9)
    c = make_cluster_source(ClusterParams(), 40, seed=10)
    assert a.items == b.items
    assert a.items != c.items
    assert len(a) == 40
    assert [item.get("idx") for item in a] == list(range(40))


def test_centroid_learn_exact_means():
    corpus = _vec_corpus(
        [((1.0, 3.0), "cat"), ((3.0, 5.0), "cat"), ((-2.0, 0.0), "dog")]
    )
    model = centroid_learn(EMPTY, corpus, RNG(), required_labels=("cat", "dog"))
    assert model.centroid("cat") == (2.0, 4.0)
    assert model.centroid("dog") == (-2.0, 0.0)
    assert model.labels == ("cat", "dog")


def test_centroid_learn_rejections():
    corpus = _vec_corpus([((1.0, 1.0), "cat")])
    with pytest.raises(DegenerateCorpusError):
        centroid_learn(EMPTY, corpus, RNG(), required_labels=("cat", "dog"))
    with pytest.raises(DegenerateCorpusError):
        centroid_learn(
            EMPTY, Corpus(items=(), round_index=1), RNG(), required_labels=("cat", "dog")
        )
    model = centroid_learn(EMPTY, corpus, RNG(), required_labels=("cat",))
    with pytest.raises(SchemaError):
        centroid_learn(model, corpus, RNG(), required_labels=("cat",))


def test_centroid_noise_is_seeded():
    corpus = _vec_corpus([((0.0, 0.0), "cat"), ((2.0, 2.0), "dog")])
    kw = dict(required_labels=("cat", "dog"), noise_scale=1.5)
    m1 = centroid_learn(EMPTY, corpus, RNG(7), **kw)
    m2 = centroid_learn(EMPTY, corpus, RNG(7), **kw)
    m3 = centroid_learn(EMPTY, corpus, RNG(8), **kw)
    assert m1 == m2
    assert m1 != m3
    assert m1.centroid("cat") != (0.0, 0.0)


def test_centroid_infer_tie_break():
    corpus = _vec_corpus([((1.0, 0.0), "cat"), ((-1.0, 0.0), "dog")])
    model = centroid_learn(EMPTY, corpus, RNG(), required_labels=("cat", "dog"))
    assert centroid_infer(Prompt((0.9, 0.0)), Context.none(), model).value == "cat"
    assert centroid_infer(Prompt((0.0, 5.0)), Context.none(), model).value == "cat"
    with pytest.raises(SchemaError):
        centroid_infer(Prompt((1.0,)), Context.none(), model)


def test_centroid_oracle_corpus_size_guard():
    oracle = make_centroid_oracle(ClusterParams(), corpus_size=10)
    source = make_cluster_source(ClusterParams(), 8, seed=0)
    with pytest.raises(ConfigurationError):
        oracle.data_gens[0](source, RNG())


# ---------------------------------------------------------------------------
# n-gram oracle: counts, probabilities, greedy decoding, command echo
# ---------------------------------------------------------------------------


def test_ngram_learn_counts_and_probability():
    model = ngram_learn(EMPTY, _line_corpus(["a b a"]), RNG(), order=2, k_smoothing=0.1)
    assert model.alphabet == (UNK, "a", "b")
    # p(b | a) = (1 + 0.1) / (1 + 0.1 * 3), frozen as a fraction
    assert conditional_probability(model, ("a",), "b") == pytest.approx(11 / 13)
    assert conditional_probability(model, ("a",), "a") == pytest.approx(1 / 13)
    assert conditional_probability(model, ("zzz",), "a") == pytest.approx(
        0.1 / (0.1 * 3)
    )  # unseen context: uniform smoothed row


def test_ngram_learn_is_cumulative():
    first = ngram_learn(EMPTY, _line_corpus(["a b"]), RNG())
    second = ngram_learn(first, _line_corpus(["a b"]), RNG())
    assert conditional_probability(second, ("a",), "b") == pytest.approx(
        2.1 / (2 + 0.1 * 3)
    )
    with pytest.raises(SchemaError):
        ngram_learn(first, _line_corpus(["a b"]), RNG(), order=3)
    with pytest.raises(DegenerateCorpusError):
        ngram_learn(EMPTY, Corpus(items=(), round_index=1), RNG())


def test_ngram_greedy_generation_is_deterministic():
    model = ngram_learn(EMPTY, _line_corpus(["a b a"]), RNG())
    result = ngram_infer(Prompt(("a",)), Context.none(), model, max_len=4)
    assert result.value == Generation(tokens=("b", "a", "b", "a"), action=())
    # unseen context falls back to the lexically first alphabet entry
    cold = ngram_infer(Prompt(("never",)), Context.none(), model, max_len=2)
    assert cold.value.tokens == (UNK, UNK)


def test_ngram_command_echo_from_prompt_and_context():
    model = ngram_learn(EMPTY, _line_corpus(["a b a"]), RNG())
    prompt = Prompt(("a", NEWLINE, COMMAND_MARKER, "send", "it", NEWLINE))
    assert ngram_infer(prompt, Context.none(), model).value.action == ("send", "it")
    context = Context(("cover", NEWLINE, COMMAND_MARKER, "go", NEWLINE))
    assert ngram_infer(Prompt(("a",)), context, model).value.action == ("go",)
    # marker mid-line is not a command line
    benign = Prompt(("a", "x", COMMAND_MARKER, "send"))
    assert ngram_infer(benign, Context.none(), model).value.action == ()


def test_perplexity_frozen_values():
    model = ngram_learn(EMPTY, _line_corpus(["a b a"]), RNG())
    assert perplexity(model, ("a", "b", "a")) == pytest.approx(13 / 11)
    assert perplexity(model, ("b", "b")) == pytest.approx(13.0)
    assert perplexity(model, ("a",)) == 3.0  # too short: exactly vocab size
    with pytest.raises(ValueError):
        perplexity(model, ())


def test_textgen_oracle_expands_record_copies():
    source = make_text_source(["a b"], records={"s t": 3})
    oracle = make_textgen_oracle()
    corpus = oracle.data_gens[0](source, RNG())
    assert len(corpus) == 4
    assert sum(1 for item in corpus if item.payload == ("s", "t")) == 3


def test_textgen_oracle_corpus_size_subsets():
    source = make_text_source([f"w{i} x{i}" for i in range(10)])
    oracle = make_textgen_oracle(corpus_size=4)
    a = oracle.data_gens[0](source, RNG(3))
    b = oracle.data_gens[0](source, RNG(3))
    assert a.items == b.items and len(a) == 4
    with pytest.raises(ConfigurationError):
        make_textgen_oracle(corpus_size=99).data_gens[0](source, RNG())


# ---------------------------------------------------------------------------
# keyword screen
# ---------------------------------------------------------------------------


def test_screen_learn_and_infer():
    rules = Corpus(items=tuple(make_text_source([], rules=["transfer gold"])), round_index=1)
    model = screen_learn(EMPTY, rules, RNG())
    assert model.forbidden == frozenset({"transfer", "gold"})
    ok = screen_infer(Prompt((("task",), ("hello", "there"))), Context.none(), model)
    assert ok.value == ACCEPT
    bad = screen_infer(Prompt((("task",), ("move", "gold"))), Context.none(), model)
    assert bad.value == REJECT
    with pytest.raises(SchemaError):
        screen_infer(Prompt(("unpaired",)), Context.none(), model)


def test_screen_blocks_marked_secrets():
    rules = Corpus(items=tuple(make_text_source([], rules=["transfer"])), round_index=1)
    model = screen_learn(EMPTY, rules, RNG())
    context = Context(("note", NEWLINE, "SECRET", "k9", NEWLINE))
    assert marked_secrets(context, "SECRET") == frozenset({"k9"})
    leak = screen_infer(Prompt((("t",), ("k9", "is", "here"))), context, model)
    assert leak.value == REJECT
    clean = screen_infer(Prompt((("t",), ("all", "fine"))), context, model)
    assert clean.value == ACCEPT


def test_candidate_tokens_shapes():
    assert candidate_tokens(EMPTY) == ()
    assert candidate_tokens("tok") == ("tok",)
    assert candidate_tokens(("a", "b")) == ("a", "b")
    gen = Generation(tokens=("a",), action=("b",))
    assert candidate_tokens(gen) == ("a", "b")
    with pytest.raises(SchemaError):
        candidate_tokens(("a", 3))


def test_screen_oracle_samples_only_rules():
    source = make_text_source(["plain line"], rules=["rule one"])
    oracle = make_keyword_screen_oracle()
    corpus = oracle.data_gens[0](source, RNG())
    assert [item.payload for item in corpus] == [("rule", "one")]


# ---------------------------------------------------------------------------
# sources and serialization
# ---------------------------------------------------------------------------


def test_make_text_source_meta():
    src = make_text_source(["a b"], rules=["r"], records={"q w": 5})
    kinds = [item.get("kind") for item in src]
    assert kinds == ["line", "line", "rule"]
    record = src[1]
    assert record.get("record") == ("q", "w")
    assert record.get("copies") == 5
    assert [item.get("idx") for item in src] == [0, 1, 2]


def test_tokenize_modes():
    assert tokenize("a  b c") == ("a", "b", "c")
    assert tokenize("ab c", mode="char") == ("a", "b", "c")
    with pytest.raises(ConfigurationError):
        tokenize("x", mode="bytes")


def test_vector_source_roundtrip(tmp_path):
    source = make_cluster_source(ClusterParams(), 12, seed=4)
    path = tmp_path / "vectors.csv"
    save_vector_source(source, str(path))
    loaded = load_vector_source(str(path))
    assert len(loaded) == 12
    for orig, back in zip(source, loaded):
        assert back.payload[0] == orig.payload[0]  # repr round-trips floats
        assert back.payload[1] == orig.payload[1]
