"""Tokenization, the inverted index and the collection statistics built on it."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

INDEX_FORMAT = "eliteness-index"
INDEX_VERSION = 1

_TOKEN_RE = re.compile(r"[^\W_]+")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {"lowercase": self.lowercase, "stopwords": sorted(self.stopwords)}

    @classmethod
    def from_dict(cls, d: dict) -> TokenizerConfig:
        return cls(lowercase=bool(d["lowercase"]), stopwords=frozenset(d["stopwords"]))


def tokenize(text: str, cfg: TokenizerConfig | None = None) -> list[str]:
    """Split text into alphanumeric runs, lowercase, then drop stopwords."""
    cfg = cfg or TokenizerConfig()
    tokens = _TOKEN_RE.findall(text)
    if cfg.lowercase:
        tokens = [t.lower() for t in tokens]
    if cfg.stopwords:
        tokens = [t for t in tokens if t not in cfg.stopwords]
    return tokens


class CorpusIndex:
    """Immutable inverted index.

    Documents are stored in doc_id order and terms in lexicographic order, so
    internal ids (and therefore every statistic and the serialized form) do
    not depend on the order documents were supplied in. Postings are held in
    CSR layout: the postings of term ``i`` are
    ``post_docs[offsets[i]:offsets[i+1]]`` with matching ``post_tfs``.
    """

    def __init__(self, doc_ids, doc_len, vocab, offsets, post_docs, post_tfs,
                 tokenizer: TokenizerConfig | None = None):
        self.doc_ids: tuple[str, ...] = tuple(doc_ids)
        self.doc_len = np.asarray(doc_len, dtype=np.int64)
        self.terms: tuple[str, ...] = tuple(vocab)
        self.vocab: dict[str, int] = {t: i for i, t in enumerate(self.terms)}
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.post_docs = np.asarray(post_docs, dtype=np.int64)
        self.post_tfs = np.asarray(post_tfs, dtype=np.int64)
        self.tokenizer = tokenizer or TokenizerConfig()
        for arr in (self.doc_len, self.offsets, self.post_docs, self.post_tfs):
            arr.setflags(write=False)

        self.N = len(self.doc_ids)
        if self.N == 0:
            raise CorpusError("index must contain at least one document")
        self.avg_doc_len = float(self.doc_len.sum()) / self.N
        self._doc_pos = {d: i for i, d in enumerate(self.doc_ids)}
        self._fingerprint: str | None = None

    def __repr__(self):
        return (f"CorpusIndex(N={self.N}, vocab={len(self.terms)}, "
                f"avgDL={self.avg_doc_len:.3f})")

    def __len__(self):
        return self.N

    def doc_index(self, doc_id: str) -> int:
        try:
            return self._doc_pos[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    def term_id(self, term: str) -> int:
        try:
            return self.vocab[term]
        except KeyError:
            raise KeyError(f"unknown term {term!r}") from None

    def postings(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        """(internal doc ids, tf counts) for ``term``; empty arrays if unknown."""
        i = self.vocab.get(term)
        if i is None:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return self.post_docs[lo:hi], self.post_tfs[lo:hi]

    def df(self, term: str) -> int:
        i = self.vocab.get(term)
        if i is None:
            return 0
        return int(self.offsets[i + 1] - self.offsets[i])

    def cf(self, term: str) -> int:
        return int(self.postings(term)[1].sum())

    def tf(self, term: str, doc: int | str) -> int:
        d = self.doc_index(doc) if isinstance(doc, str) else doc
        docs, tfs = self.postings(term)
        j = np.searchsorted(docs, d)
        if j < len(docs) and docs[j] == d:
            return int(tfs[j])
        return 0

    def dl(self, doc: int | str) -> int:
        d = self.doc_index(doc) if isinstance(doc, str) else doc
        return int(self.doc_len[d])

    def fingerprint(self) -> str:
        """Content hash binding fitted models to this exact index."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(f"{INDEX_FORMAT}/{INDEX_VERSION}\n{self.N}\n".encode())
            h.update("\0".join(self.doc_ids).encode())
            h.update(b"\1")
            h.update("\0".join(self.terms).encode())
            for arr in (self.doc_len, self.offsets, self.post_docs, self.post_tfs):
                h.update(b"\1")
                h.update(arr.astype("<i8").tobytes())
            self._fingerprint = h.hexdigest()[:32]
        return self._fingerprint

    # serialization

    def to_dict(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "tokenizer": self.tokenizer.to_dict(),
            "doc_ids": list(self.doc_ids),
            "doc_len": self.doc_len.tolist(),
            "vocab": list(self.terms),
            "offsets": self.offsets.tolist(),
            "post_docs": self.post_docs.tolist(),
            "post_tfs": self.post_tfs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> CorpusIndex:
        if d.get("format") != INDEX_FORMAT:
            raise CorpusError("not an index file")
        if d.get("version") != INDEX_VERSION:
            raise CorpusError(f"unsupported index version {d.get('version')!r}")
        return cls(d["doc_ids"], d["doc_len"], d["vocab"], d["offsets"],
                   d["post_docs"], d["post_tfs"],
                   tokenizer=TokenizerConfig.from_dict(d["tokenizer"]))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> CorpusIndex:
        with open(path, encoding="utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}: not a valid index file ({e})") from None
        return cls.from_dict(d)


def index_from_counts(doc_counts: dict[str, dict[str, int]],
                      doc_len: dict[str, int] | None = None,
                      tokenizer: TokenizerConfig | None = None) -> CorpusIndex:
    """Build an index from per-document term counts.

    ``doc_len`` defaults to the sum of each document's counts.
    """
    if not doc_counts:
        raise CorpusError("cannot build an index from an empty corpus")
    doc_ids = sorted(doc_counts)
    pos = {d: i for i, d in enumerate(doc_ids)}
    by_term: dict[str, list[tuple[int, int]]] = {}
    for d in doc_ids:
        for term, tf in doc_counts[d].items():
            if tf > 0:
                by_term.setdefault(term, []).append((pos[d], int(tf)))
    lens = [int(doc_len[d]) if doc_len is not None else sum(doc_counts[d].values())
            for d in doc_ids]

    vocab = sorted(by_term)
    offsets = [0]
    post_docs: list[int] = []
    post_tfs: list[int] = []
    for term in vocab:
        plist = by_term[term]  # already in doc order
        post_docs.extend(p[0] for p in plist)
        post_tfs.extend(p[1] for p in plist)
        offsets.append(len(post_docs))
    return CorpusIndex(doc_ids, lens, vocab, offsets, post_docs, post_tfs, tokenizer)


def build_index(docs: Iterable[Document], cfg: TokenizerConfig | None = None) -> CorpusIndex:
    cfg = cfg or TokenizerConfig()
    counts: dict[str, dict[str, int]] = {}
    lens: dict[str, int] = {}
    for doc in docs:
        if not doc.doc_id:
            raise CorpusError("empty doc_id")
        if doc.doc_id in counts:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        tokens = tokenize(doc.text, cfg)
        tf: dict[str, int] = {}
        for t in tokens:
            tf[t] = tf.get(t, 0) + 1
        counts[doc.doc_id] = tf
        lens[doc.doc_id] = len(tokens)
    if not counts:
        raise CorpusError("cannot build an index from an empty document stream")
    return index_from_counts(counts, lens, cfg)


@dataclass(frozen=True)
class TfHistogram:
    """Collection-wide tf distribution of one term.

    ``values``/``counts`` cover only tf >= 1; ``zero_count`` is N - df.
    """
    term: str
    values: np.ndarray
    counts: np.ndarray
    zero_count: int

    @property
    def n_docs(self) -> int:
        return self.zero_count + int(self.counts.sum())

    @property
    def df(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[int, int]:
        return {int(v): int(c) for v, c in zip(self.values, self.counts)}

    def buckets(self) -> tuple[np.ndarray, np.ndarray]:
        """All buckets, including the tf=0 bucket first (omitted if empty)."""
        if self.zero_count > 0:
            v = np.concatenate(([0], self.values)).astype(np.float64)
            c = np.concatenate(([self.zero_count], self.counts)).astype(np.float64)
        else:
            v = self.values.astype(np.float64)
            c = self.counts.astype(np.float64)
        return v, c


def tf_histogram(index: CorpusIndex, term: str) -> TfHistogram:
    if term not in index.vocab:
        raise KeyError(f"unknown term {term!r}")
    _, tfs = index.postings(term)
    values, counts = np.unique(tfs, return_counts=True)
    return TfHistogram(term, values.astype(np.int64), counts.astype(np.int64),
                       index.N - len(tfs))


def normalized_tf(tf, dl, avg_dl: float, b: float):
    """Length-normalized term frequency ``tf * (b + (1-b) * avgDL/DL)``.

    Written as ``1 + (1-b)(avgDL/DL - 1)`` so that DL == avgDL and b == 1
    both give the multiplier 1.0 exactly. Works elementwise on arrays; a
    zero tf maps to 0 whatever DL is.
    """
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    tf_arr = np.asarray(tf, dtype=np.float64)
    dl_arr = np.asarray(dl, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = 1.0 + (1.0 - b) * (avg_dl / dl_arr - 1.0)
        out = np.where(tf_arr == 0, 0.0, tf_arr * mult)
    if np.ndim(out) == 0:
        return float(out)
    return out


# ingestion

def read_jsonl(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id, text = obj["id"], obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CorpusError(f"{path}:{lineno}: malformed document line ({e})") from None
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise CorpusError(f"{path}:{lineno}: 'id' and 'text' must be strings")
            yield Document(doc_id, text)


_DOC_RE = re.compile(r"<DOC>(.*?)</DOC>", re.S | re.I)
_DOCNO_RE = re.compile(r"<DOCNO>\s*(.*?)\s*</DOCNO>", re.S | re.I)
_TAG_RE = re.compile(r"<[^>]*>")


def parse_trec(text: str, source: str = "<string>") -> Iterator[Document]:
    """Documents from TREC SGML: ``<DOC><DOCNO>id</DOCNO> ... </DOC>``.

    Markup is stripped; everything else inside the DOC element is text.
    """
    for m in _DOC_RE.finditer(text):
        body = m.group(1)
        no = _DOCNO_RE.search(body)
        if no is None:
            line = text.count("\n", 0, m.start()) + 1
            raise CorpusError(f"{source}:{line}: <DOC> without <DOCNO>")
        rest = body[:no.start()] + " " + body[no.end():]
        yield Document(no.group(1), _TAG_RE.sub(" ", rest))


def read_trec(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8", errors="replace") as f:
        yield from parse_trec(f.read(), str(path))


def read_documents(path: str | Path, fmt: str = "jsonl") -> Iterator[Document]:
    if fmt == "jsonl":
        return read_jsonl(path)
    if fmt == "trec":
        return read_trec(path)
    raise ValueError(f"unknown corpus format {fmt!r}")
