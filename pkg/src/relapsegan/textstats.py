"""Tokenization and post-level word co-occurrence (phi coefficient)."""
from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus

_SPLIT = re.compile(r"[^a-z0-9']+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on runs outside ``[a-z0-9']``, trim edge apostrophes."""
    out = []
    for piece in _SPLIT.split(text.lower()):
        piece = piece.strip("'")
        if piece:
            out.append(piece)
    return out


@dataclass(frozen=True)
class ContingencyTable:
    n11: int
    n10: int
    n01: int
    n00: int

    def swapped(self) -> "ContingencyTable":
        return ContingencyTable(self.n11, self.n01, self.n10, self.n00)


@dataclass(frozen=True)
class WordPairScore:
    word_x: str
    word_y: str
    phi: float
    n11: int


def contingency(documents: Iterable[set], x: str, y: str) -> ContingencyTable:
    if x == y:
        raise ValueError("contingency needs two distinct words")
    n11 = n10 = n01 = n00 = 0
    for doc in documents:
        hx, hy = x in doc, y in doc
        if hx and hy:
            n11 += 1
        elif hx:
            n10 += 1
        elif hy:
            n01 += 1
        else:
            n00 += 1
    return ContingencyTable(n11, n10, n01, n00)


def phi(table: ContingencyTable) -> float:
    """Phi coefficient; 0 when any marginal is empty."""
    n1_ = table.n11 + table.n10
    n0_ = table.n01 + table.n00
    n_1 = table.n11 + table.n01
    n_0 = table.n10 + table.n00
    if n1_ == 0 or n0_ == 0 or n_1 == 0 or n_0 == 0:
        return 0.0
    num = table.n11 * table.n00 - table.n10 * table.n01
    # pairing each row marginal with its column twin keeps phi exactly symmetric
    value = num / math.sqrt((float(n1_) * float(n_1)) * (float(n0_) * float(n_0)))
    return min(1.0, max(-1.0, value))


def post_documents(corpus: Corpus, stopwords: Iterable[str] = ()) -> list[set[str]]:
    """One token set per post, pooling all of its comments."""
    stop = set(stopwords)
    docs = []
    for post in corpus.posts.values():
        words: set[str] = set()
        for cid in post.comment_ids:
            words.update(tokenize(corpus.comments[cid].body))
        docs.append(words - stop)
    return docs


def pair_scores(documents: Sequence[set], min_phi: float, min_count: int = 1) -> list[WordPairScore]:
    """All word pairs with ``n11 >= min_count`` and ``phi >= min_phi``.

    Counts come from a sparse document-term product, so only pairs that
    actually co-occur are ever materialised.
    """
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    vocab = sorted(set().union(*documents)) if documents else []
    if not vocab:
        return []
    col = {w: j for j, w in enumerate(vocab)}
    rows, cols = [], []
    for i, doc in enumerate(documents):
        for w in doc:
            rows.append(i)
            cols.append(col[w])
    n_docs = len(documents)
    x = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n_docs, len(vocab)))
    df = np.asarray(x.sum(axis=0)).ravel()
    co = sp.triu(x.T @ x, k=1).tocoo()
    keep = co.data >= min_count
    a, b, n11 = co.row[keep], co.col[keep], co.data[keep].astype(np.int64)
    n10 = df[a] - n11
    n01 = df[b] - n11
    n00 = n_docs - df[a] - df[b] + n11
    num = (n11 * n00 - n10 * n01).astype(np.float64)
    den = ((n11 + n10).astype(np.float64) * (n11 + n01).astype(np.float64)) * (
        (n01 + n00).astype(np.float64) * (n10 + n00).astype(np.float64)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        phis = np.where(den > 0, num / np.sqrt(den), 0.0)
    phis = np.clip(phis, -1.0, 1.0)
    out = [
        WordPairScore(vocab[i], vocab[j], float(p), int(n))
        for i, j, p, n in zip(a, b, phis, n11)
        if p >= min_phi
    ]
    out.sort(key=lambda s: (-s.phi, s.word_x, s.word_y))
    return out


def cooccurrence_graph(
    corpus: Corpus, min_phi: float = 0.2, min_count: int = 1, stopwords: Iterable[str] = ()
) -> list[WordPairScore]:
    return pair_scores(post_documents(corpus, stopwords), min_phi, min_count)


def load_stopwords(path: str | os.PathLike) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip().lower() for line in fh if line.strip()}


def write_graph_csv(scores: Iterable[WordPairScore], path_or_file) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word_x", "word_y", "phi", "n11"])
        for s in scores:
            w.writerow([s.word_x, s.word_y, f"{s.phi:.6f}", s.n11])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            _write(fh)
