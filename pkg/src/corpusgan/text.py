"""Tokenization, vocabulary, tf-idf and corpus loading for multi-corpus text.

Documents are lower-cased, split on runs of ASCII letters and Porter-stemmed.
The vocabulary keeps the most frequent stems across all training documents
and idf weights are computed from the training split only, so validation and
test documents never leak into the weighting.
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from nltk.stem.porter import PorterStemmer

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")

_ALPHA_RUN = re.compile(r"[a-z]+")

# Super-category grouping of the 20 Newsgroups collection; misc.forsale is dropped.
NEWSGROUPS_GROUPS: dict[str, tuple[str, ...]] = {
    "religion": ("alt.atheism", "soc.religion.christian", "talk.religion.misc"),
    "computer": (
        "comp.graphics",
        "comp.os.ms-windows.misc",
        "comp.sys.ibm.pc.hardware",
        "comp.sys.mac.hardware",
        "comp.windows.x",
    ),
    "cars": ("rec.autos", "rec.motorcycles"),
    "sport": ("rec.sport.baseball", "rec.sport.hockey"),
    "science": ("sci.crypt", "sci.electronics", "sci.med", "sci.space"),
    "politics": ("talk.politics.guns", "talk.politics.mideast", "talk.politics.misc"),
}

REUTERS_CATEGORIES: tuple[str, ...] = (
    "earn",
    "acq",
    "crude",
    "trade",
    "money-fx",
    "interest",
    "money-supply",
    "ship",
)

# Display-only stop list (bag-of-words sample tables); never applied to the vocabulary.
STOP_WORDS = frozenset(
    """a about above after again against all also am an and any are as at be because
    been before being below between both but by can could did do does doing down during
    each few for from further had has have having he her here hers herself him himself
    his how i if in into is it its itself just me more most my myself no nor not now of
    off on once only or other our ours ourselves out over own said same she should so
    some such than that the their theirs them themselves then there these they this
    those through to too under until up very was we were what when where which while
    who whom why will with would you your yours yourself yourselves""".split()
)


@dataclass
class RawCorpus:
    corpus_id: int
    documents: list[str]
    splits: list[str]
    name: str = ""

    def __post_init__(self):
        if len(self.documents) != len(self.splits):
            raise ValueError("documents and splits must have equal length")
        bad = set(self.splits) - set(SPLITS)
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")
        if "train" not in self.splits:
            raise ValueError(f"corpus {self.corpus_id} has no training document")


@dataclass
class Vocabulary:
    terms: list[str]
    doc_freq: list[int]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise ValueError("duplicate terms in vocabulary")

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to indices, dropping out-of-vocabulary tokens."""
        idx = self.index
        return [idx[t] for t in tokens if t in idx]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, (t, df) in enumerate(zip(self.terms, self.doc_freq)):
                fh.write(f"{t}\t{i}\t{df}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected term, index, doc_freq")
                rows.append((int(parts[1]), parts[0], int(parts[2])))
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: indices are not 0..V-1")
        return cls([r[1] for r in rows], [r[2] for r in rows])


@dataclass
class TfIdfDoc:
    corpus_id: int
    label: int
    weights: dict[int, float]
    split: str = "train"
    degenerate: bool = False


@lru_cache(maxsize=1)
def _stemmer() -> PorterStemmer:
    return PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=1)
def _stemmed_stop_words() -> frozenset:
    return frozenset(tokenize(" ".join(STOP_WORDS)))


def tokenize(raw_text: str) -> list[str]:
    """Lower-case, split on alphabetic runs and Porter-stem ``raw_text``.

    A run the stemmer reduces to nothing (a lone "s") is dropped.
    """
    stem = _stemmer().stem
    return [t for t in (stem(w) for w in _ALPHA_RUN.findall(raw_text.lower())) if t]


def build_vocabulary(
    corpora: Sequence[RawCorpus],
    v_max: int,
    tokenized: Sequence[Sequence[Sequence[str]]] | None = None,
) -> Vocabulary:
    """Keep the ``v_max`` most frequent stems over all training documents.

    Ties in total frequency are broken lexicographically.  ``tokenized`` may
    carry pre-tokenized documents aligned with ``corpora`` to avoid re-stemming.
    """
    if v_max < 1:
        raise ValueError("v_max must be >= 1")
    freq: Counter = Counter()
    df: Counter = Counter()
    for ci, corpus in enumerate(corpora):
        for di, (text, split) in enumerate(zip(corpus.documents, corpus.splits)):
            if split != "train":
                continue
            toks = tokenized[ci][di] if tokenized is not None else tokenize(text)
            freq.update(toks)
            df.update(set(toks))
    if not freq:
        raise ValueError("all training documents tokenize to empty")
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:v_max]
    terms = [t for t, _ in ranked]
    return Vocabulary(terms, [df[t] for t in terms])


def tf_idf(tokens: Sequence[str], vocab: Vocabulary, n_train_docs: int) -> dict[int, float]:
    """Raw-count tf times ``ln(N / df)``; zero weights are not stored."""
    counts = Counter(vocab.encode(tokens))
    out = {}
    for j in sorted(counts):
        df = vocab.doc_freq[j]
        if df > n_train_docs:
            raise ValueError(f"doc_freq of term {vocab.terms[j]!r} exceeds n_train_docs")
        w = counts[j] * math.log(n_train_docs / df)
        if w > 0:
            out[j] = w
    return out


def l1_normalize(weights: Mapping[int, float]) -> tuple[dict[int, float], bool]:
    """Return ``(normalized, degenerate)``; an all-zero vector comes back unchanged."""
    total = math.fsum(weights.values())
    if total <= 0:
        return dict(weights), True
    return {j: w / total for j, w in weights.items()}, False


def docs_to_matrix(docs: Sequence[TfIdfDoc], n_terms: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for i, d in enumerate(docs):
        for j, w in d.weights.items():
            rows.append(i)
            cols.append(j)
            vals.append(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(docs), n_terms), dtype=np.float64)


def count_matrix(token_ids: Sequence[Sequence[int]], n_terms: int) -> sp.csr_matrix:
    rows, cols = [], []
    for i, ids in enumerate(token_ids):
        rows.extend([i] * len(ids))
        cols.extend(ids)
    data = np.ones(len(cols), dtype=np.int64)
    m = sp.csr_matrix((data, (rows, cols)), shape=(len(token_ids), n_terms))
    m.sum_duplicates()
    return m


@dataclass
class PreparedCorpora:
    """Everything downstream models need from the text pipeline."""

    vocab: Vocabulary
    names: list[str]
    docs: list[TfIdfDoc]
    token_ids: list[list[int]]

    @property
    def n_corpora(self) -> int:
        return len(self.names)

    def select(self, split: str | None = None, include_degenerate: bool = True) -> list[int]:
        return [
            i
            for i, d in enumerate(self.docs)
            if (split is None or d.split == split) and (include_degenerate or not d.degenerate)
        ]

    def matrix(self, indices: Sequence[int] | None = None) -> sp.csr_matrix:
        docs = self.docs if indices is None else [self.docs[i] for i in indices]
        return docs_to_matrix(docs, len(self.vocab))

    def labels(self, indices: Sequence[int] | None = None) -> np.ndarray:
        docs = self.docs if indices is None else [self.docs[i] for i in indices]
        return np.array([d.label for d in docs], dtype=np.int64)

    def corpus_ids(self, indices: Sequence[int] | None = None) -> np.ndarray:
        docs = self.docs if indices is None else [self.docs[i] for i in indices]
        return np.array([d.corpus_id for d in docs], dtype=np.int64)


def prepare_corpora(
    corpora: Sequence[RawCorpus],
    v_max: int,
    labels: Sequence[Sequence[int]] | None = None,
) -> PreparedCorpora:
    """Tokenize, build the vocabulary and produce L1-normalized tf-idf documents.

    Labels default to corpus membership.  Degenerate documents (no weighted
    term survives) are kept and flagged.
    """
    tokenized = [[tokenize(t) for t in c.documents] for c in corpora]
    vocab = build_vocabulary(corpora, v_max, tokenized)
    n_train = sum(s == "train" for c in corpora for s in c.splits)
    docs, token_ids = [], []
    n_degenerate = 0
    for ci, corpus in enumerate(corpora):
        for di, split in enumerate(corpus.splits):
            toks = tokenized[ci][di]
            weights, degenerate = l1_normalize(tf_idf(toks, vocab, n_train))
            n_degenerate += degenerate
            label = corpus.corpus_id if labels is None else labels[ci][di]
            docs.append(TfIdfDoc(corpus.corpus_id, int(label), weights, split, degenerate))
            token_ids.append(vocab.encode(toks))
    if n_degenerate:
        logger.warning("%d degenerate documents (no in-vocabulary weighted terms)", n_degenerate)
    names = [c.name or str(c.corpus_id) for c in corpora]
    return PreparedCorpora(vocab, names, docs, token_ids)


# ---------------------------------------------------------------------------
# corpus loading


def hash_split(key: str, ratios: Sequence[float] = (0.78, 0.10, 0.12), seed: int = 0) -> str:
    """Deterministic split assignment from a content-independent key."""
    h = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    u = int.from_bytes(h[:8], "big") / 2**64
    acc = 0.0
    for name, r in zip(SPLITS, ratios):
        acc += r
        if u < acc:
            return name
    return SPLITS[-1]


def read_manifest(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in SPLITS:
                raise ValueError(f"{path}:{lineno}: expected 'relative-path<TAB>split'")
            out[parts[0]] = parts[1]
    return out


def _read_text(path: Path) -> str:
    return path.read_bytes().decode("utf-8", errors="ignore")


def _list_files(d: Path) -> list[Path]:
    return sorted(p for p in d.rglob("*") if p.is_file() and not p.name.startswith("."))


def load_directory_corpora(
    root,
    grouping: Mapping[str, Sequence[str]] | None = None,
    manifest=None,
    ratios: Sequence[float] = (0.78, 0.10, 0.12),
    seed: int = 0,
    max_train_per_corpus: int | None = None,
) -> list[RawCorpus]:
    """Load ``root/<corpus>/<file>`` documents, one file per document.

    ``grouping`` maps a corpus name to the subdirectories merged into it; by
    default every subdirectory is its own corpus.  Splits come from the TSV
    ``manifest`` when given, otherwise from a seeded hash split.  If ``root``
    instead holds ``*train*`` and ``*test*`` subdirectories, those fix the
    train/test split and validation documents are held out of the training
    part per corpus with the validation share of ``ratios``.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    train_dirs = [p for p in subdirs if "train" in p.name.lower()]
    test_dirs = [p for p in subdirs if "test" in p.name.lower()]
    presplit = len(train_dirs) == 1 and len(test_dirs) == 1
    bases = [train_dirs[0], test_dirs[0]] if presplit else [root]
    available = sorted({p.name for b in bases for p in b.iterdir() if p.is_dir()})
    if grouping is None:
        grouping = {name: (name,) for name in available}
    missing = [s for members in grouping.values() for s in members if s not in available]
    if missing:
        raise FileNotFoundError(f"missing corpus subdirectories under {root}: {missing}")
    mf = read_manifest(manifest) if manifest else None
    val_share = ratios[1] / (ratios[0] + ratios[1])

    corpora = []
    for cid, (name, members) in enumerate(grouping.items()):
        docs, splits = [], []
        for base, fixed in zip(bases, ["train", "test"] if presplit else [None]):
            for member in members:
                d = base / member
                if not d.is_dir():
                    continue
                for path in _list_files(d):
                    rel = path.relative_to(root).as_posix()
                    if mf is not None:
                        if rel not in mf:
                            continue
                        split = mf[rel]
                    elif fixed == "train":
                        split = "validation" if hash_split(rel, (1 - val_share, val_share, 0.0), seed) == "validation" else "train"
                    elif fixed == "test":
                        split = "test"
                    else:
                        split = hash_split(rel, ratios, seed)
                    docs.append(_read_text(path))
                    splits.append(split)
        if not docs:
            raise ValueError(f"corpus {name!r} is empty")
        docs, splits = _cap_train(docs, splits, max_train_per_corpus)
        corpora.append(RawCorpus(cid, docs, splits, name))
    return corpora


def load_labelled_lines(
    paths: Mapping[str, os.PathLike | str],
    grouping: Mapping[str, Sequence[str]] | None = None,
    val_share: float = 0.125,
    seed: int = 0,
    max_train_per_corpus: int | None = None,
) -> list[RawCorpus]:
    """Load ``label<TAB>text`` line files (one per split, ``train``/``test``).

    Validation documents are held out of ``train`` per corpus.
    """
    rows: list[tuple[str, str, str]] = []
    for split, path in paths.items():
        with open(path, encoding="utf-8", errors="ignore") as fh:
            for lineno, line in enumerate(fh):
                label, _, text = line.rstrip("\n").partition("\t")
                if split == "train":
                    key = f"{path}:{lineno}"
                    s = "validation" if hash_split(key, (1 - val_share, val_share, 0.0), seed) == "validation" else "train"
                else:
                    s = split
                rows.append((label, s, text))
    if grouping is None:
        grouping = {lab: (lab,) for lab in sorted({r[0] for r in rows})}
    member_of = {m: g for g, members in grouping.items() for m in members}
    by_group: dict[str, tuple[list, list]] = {g: ([], []) for g in grouping}
    for label, split, text in rows:
        g = member_of.get(label)
        if g is not None:
            by_group[g][0].append(text)
            by_group[g][1].append(split)
    corpora = []
    for cid, (name, (docs, splits)) in enumerate(by_group.items()):
        if not docs:
            raise ValueError(f"corpus {name!r} is empty")
        docs, splits = _cap_train(docs, splits, max_train_per_corpus)
        corpora.append(RawCorpus(cid, docs, splits, name))
    return corpora


def _cap_train(docs, splits, cap):
    if cap is None:
        return docs, splits
    out_d, out_s, n = [], [], 0
    for d, s in zip(docs, splits):
        if s == "train":
            if n >= cap:
                continue
            n += 1
        out_d.append(d)
        out_s.append(s)
    return out_d, out_s


def categories_with_min_train(counts: Mapping[str, int], min_train: int = 100) -> list[str]:
    """Categories having more than ``min_train`` training documents."""
    return sorted(c for c, n in counts.items() if n > min_train)


def top_terms(weights: Mapping[int, float] | np.ndarray, vocab: Vocabulary, k: int = 10,
              drop_stop_words: bool = True) -> list[str]:
    """Highest-weight terms of a document vector, for bag-of-words displays."""
    if isinstance(weights, np.ndarray):
        items = list(enumerate(weights.tolist()))
    else:
        items = list(weights.items())
    items.sort(key=lambda kv: (-kv[1], kv[0]))
    out = []
    for j, w in items:
        if w <= 0:
            break
        t = vocab.terms[j]
        if drop_stop_words and t in _stemmed_stop_words():
            continue
        out.append(t)
        if len(out) == k:
            break
    return out
