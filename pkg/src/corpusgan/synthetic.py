"""Synthetic multi-corpus text with controllable topical separation."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .text import SPLITS, RawCorpus, tokenize

_CONSONANTS = "bdfgklmnprtvz"
_VOWELS = "aiou"


def pseudo_words(n: int, seed: int = 0) -> list[str]:
    """``n`` distinct made-up words that the stemmer leaves untouched."""
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    while len(out) < n:
        w = "".join(
            rng.choice(list(_CONSONANTS if i % 2 == 0 else _VOWELS)) for i in range(int(rng.integers(4, 7)))
        )
        if w in seen or tokenize(w) != [w]:
            continue
        seen.add(w)
        out.append(w)
    return out


def _zipf(n, rng, s=1.0):
    w = 1.0 / np.arange(1, n + 1) ** s
    w = w[rng.permutation(n)]
    return w / w.sum()


def make_topical_corpora(
    n_corpora: int = 2,
    docs_per_corpus: int = 200,
    n_topical: int = 70,
    n_shared: int = 60,
    doc_length: tuple[int, int] = (40, 80),
    topical_share: float = 0.5,
    ratios: tuple[float, float, float] = (0.78, 0.10, 0.12),
    seed: int = 0,
) -> list[RawCorpus]:
    """Corpora whose topical words are disjoint and whose filler words are shared.

    Each token comes from the corpus's own topical list with probability
    ``topical_share`` and from the shared list otherwise, both Zipf-weighted.
    Splits are assigned in a fixed shuffled proportion per corpus.
    """
    rng = np.random.default_rng(seed)
    words = pseudo_words(n_corpora * n_topical + n_shared, seed)
    shared = words[:n_shared]
    shared_p = _zipf(n_shared, rng)
    corpora = []
    for m in range(n_corpora):
        topical = words[n_shared + m * n_topical: n_shared + (m + 1) * n_topical]
        topical_p = _zipf(n_topical, rng)
        docs = []
        for _ in range(docs_per_corpus):
            length = int(rng.integers(doc_length[0], doc_length[1] + 1))
            from_topic = rng.random(length) < topical_share
            toks = np.where(
                from_topic,
                np.array(topical)[rng.choice(n_topical, size=length, p=topical_p)],
                np.array(shared)[rng.choice(n_shared, size=length, p=shared_p)],
            )
            docs.append(" ".join(toks.tolist()))
        counts = np.floor(np.array(ratios) * docs_per_corpus).astype(int)
        counts[0] = docs_per_corpus - counts[1:].sum()
        splits = np.repeat(np.array(SPLITS), counts)
        splits = splits[rng.permutation(docs_per_corpus)].tolist()
        corpora.append(RawCorpus(m, docs, splits, f"corpus{m}"))
    return corpora


def write_corpus_tree(corpora: list[RawCorpus], root, manifest: bool = True) -> Path:
    """Write ``root/<name>/<i>.txt`` files plus an optional split manifest."""
    root = Path(root)
    lines = []
    for c in corpora:
        d = root / (c.name or str(c.corpus_id))
        d.mkdir(parents=True, exist_ok=True)
        for i, (text, split) in enumerate(zip(c.documents, c.splits)):
            (d / f"{i:05d}.txt").write_text(text, encoding="utf-8")
            lines.append(f"{d.name}/{i:05d}.txt\t{split}")
    if manifest:
        (root / "manifest.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root
