import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eliteness.corpus import (CorpusError, CorpusIndex, Document, TokenizerConfig, build_index,
                              normalized_tf, parse_trec, read_jsonl, tf_histogram, tokenize)


class TestTokenize:
    def test_basic(self):
        assert tokenize("The cat sat") == ["the", "cat", "sat"]

    def test_empty(self):
        assert tokenize("") == []

    def test_case_folding(self):
        assert tokenize("A a A") == ["a", "a", "a"]

    def test_no_lowercase(self):
        assert tokenize("A a", TokenizerConfig(lowercase=False)) == ["A", "a"]

    def test_stopwords_after_lowercasing(self):
        cfg = TokenizerConfig(stopwords=frozenset({"the"}))
        assert tokenize("The THE cat", cfg) == ["cat"]

    def test_punctuation_and_underscore_split(self):
        assert tokenize("foo-bar, baz_qux 42x") == ["foo", "bar", "baz", "qux", "42x"]

    @given(st.text())
    def test_deterministic(self, text):
        assert tokenize(text) == tokenize(text)


class TestBuildIndex:
    def test_hand_counts(self, tiny_index):
        idx = tiny_index
        assert idx.N == 2
        assert idx.avg_doc_len == 2.0
        assert idx.df("a") == 1 and idx.df("b") == 2
        assert idx.tf("a", "d1") == 2
        assert idx.tf("a", "d2") == 0

    def test_case_folded_tf(self):
        idx = build_index([Document("x", "A a A")])
        assert idx.tf("a", "x") == 3

    def test_single_empty_doc(self):
        idx = build_index([Document("e", "")])
        assert idx.N == 1
        assert idx.avg_doc_len == 0.0
        assert idx.terms == ()

    def test_avgdl_exact(self):
        rng = random.Random(7)
        words = [f"w{i}" for i in range(40)]
        docs = [Document(f"d{i}", " ".join(rng.choice(words) for _ in range(50)))
                for i in range(1000)]
        idx = build_index(docs)
        assert idx.avg_doc_len == sum(len(d.text.split()) for d in docs) / 1000 == 50.0

    def test_duplicate_id_named(self):
        with pytest.raises(CorpusError, match="'d1'"):
            build_index([Document("d1", "x"), Document("d1", "y")])

    def test_empty_stream(self):
        with pytest.raises(CorpusError):
            build_index([])

    def test_empty_doc_never_in_postings(self):
        idx = build_index([Document("a", "x y"), Document("z", "")])
        assert all(idx.doc_index("z") not in idx.postings(t)[0] for t in idx.terms)

    def test_invariants(self, synth_index):
        idx = synth_index
        assert np.all(idx.post_tfs >= 1)
        per_doc = np.zeros(idx.N, dtype=np.int64)
        np.add.at(per_doc, idx.post_docs, idx.post_tfs)
        assert np.all(per_doc <= idx.doc_len)
        for t in idx.terms:
            assert idx.df(t) <= idx.N

    def test_immutable_arrays(self, tiny_index):
        with pytest.raises(ValueError):
            tiny_index.post_tfs[0] = 9

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.text(alphabet="abc ", max_size=12), min_size=1, max_size=8),
           st.randoms(use_true_random=False))
    def test_permutation_invariance(self, texts, rnd):
        docs = [Document(f"doc{i}", t) for i, t in enumerate(texts)]
        shuffled = docs[:]
        rnd.shuffle(shuffled)
        a, b = build_index(docs), build_index(shuffled)
        assert a.to_dict() == b.to_dict()
        assert a.fingerprint() == b.fingerprint()


class TestHistogram:
    def test_hand(self, tiny_index):
        hb = tf_histogram(tiny_index, "b")
        assert hb.as_dict() == {1: 2} and hb.zero_count == 0
        ha = tf_histogram(tiny_index, "a")
        assert ha.as_dict() == {2: 1} and ha.zero_count == 1

    def test_unknown_term(self, tiny_index):
        with pytest.raises(KeyError):
            tf_histogram(tiny_index, "zzz")

    def test_matches_generator_tallies(self, synth, synth_index):
        for term in synth_index.terms:
            h = tf_histogram(synth_index, term)
            assert {0: h.zero_count, **h.as_dict()} == synth.tf_tally(term)

    def test_completeness(self, synth_index):
        for term in synth_index.terms:
            h = tf_histogram(synth_index, term)
            assert h.zero_count + int(h.counts.sum()) == synth_index.N

    def test_buckets_include_zero_first(self, tiny_index):
        v, c = tf_histogram(tiny_index, "a").buckets()
        assert v.tolist() == [0.0, 2.0] and c.tolist() == [1.0, 1.0]


class TestNormalizedTf:
    @pytest.mark.parametrize("b", [0.0, 0.25, 0.64, 1.0])
    def test_identity_at_average_length(self, b):
        assert normalized_tf(4, 7.3, 7.3, b) == 4.0

    @pytest.mark.parametrize("dl", [1, 5, 100])
    def test_b_one_disables(self, dl):
        assert normalized_tf(4, dl, 10.0, 1.0) == 4.0

    def test_default_b(self):
        assert normalized_tf(4, 20.0, 10.0, 0.64) == pytest.approx(3.28, abs=1e-12)

    def test_zero_tf(self):
        assert normalized_tf(0, 0, 10.0, 0.3) == 0.0

    def test_b_out_of_range(self):
        with pytest.raises(ValueError):
            normalized_tf(1, 1, 1, 1.5)

    def test_vectorised(self):
        out = normalized_tf(np.array([1, 2, 0]), np.array([10, 20, 5]), 10.0, 0.5)
        np.testing.assert_allclose(out, [1.0, 2 * 0.75, 0.0])

    @given(st.integers(1, 50), st.floats(0, 0.999), st.floats(1, 100), st.floats(1, 100))
    def test_strictly_decreasing_in_dl(self, tf, b, dl, avg):
        bigger = dl * 1.5
        assert normalized_tf(tf, bigger, avg, b) < normalized_tf(tf, dl, avg, b)

    @given(st.integers(1, 50), st.floats(1, 100), st.floats(1, 100))
    def test_constant_at_b_one(self, tf, dl, avg):
        assert normalized_tf(tf, dl, avg, 1.0) == tf


class TestIO:
    def test_roundtrip(self, synth_index, tmp_path):
        p = tmp_path / "idx.json"
        synth_index.save(p)
        back = CorpusIndex.load(p)
        assert back.to_dict() == synth_index.to_dict()
        assert back.fingerprint() == synth_index.fingerprint()
        assert back.avg_doc_len == synth_index.avg_doc_len
        back.save(tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == p.read_bytes()

    def test_tokenizer_persisted(self, tmp_path):
        cfg = TokenizerConfig(lowercase=False, stopwords=frozenset({"x"}))
        idx = build_index([Document("a", "X y")], cfg)
        idx.save(tmp_path / "i.json")
        assert CorpusIndex.load(tmp_path / "i.json").tokenizer == cfg

    def test_jsonl(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"id": "d1", "text": "a b a"}\n\n{"id": "d2", "text": "b"}\n')
        assert [d.doc_id for d in read_jsonl(p)] == ["d1", "d2"]

    def test_jsonl_bad_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"id": "d1", "text": "a"}\n{"id": 3}\n')
        with pytest.raises(CorpusError, match=":2:"):
            list(read_jsonl(p))

    def test_trec_matches_jsonl(self):
        sgml = """<DOC>
<DOCNO> FT911-1 </DOCNO>
<HEADLINE>Cat news</HEADLINE>
<TEXT>The cat sat. The cat ran.</TEXT>
</DOC>
<DOC><DOCNO>FT911-2</DOCNO><TEXT>dog</TEXT></DOC>"""
        from_trec = build_index(parse_trec(sgml))
        as_jsonl = [json.dumps({"id": "FT911-1", "text": "Cat news The cat sat. The cat ran."}),
                    json.dumps({"id": "FT911-2", "text": "dog"})]
        from_json = build_index(Document(o["id"], o["text"]) for o in map(json.loads, as_jsonl))
        assert from_trec.to_dict() == from_json.to_dict()

    def test_trec_missing_docno(self):
        with pytest.raises(CorpusError, match="DOCNO"):
            list(parse_trec("<DOC>text</DOC>"))
