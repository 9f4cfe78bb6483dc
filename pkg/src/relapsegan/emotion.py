"""Word-emotion lexicon and per-comment emotion scoring."""
from __future__ import annotations

import os
from typing import Iterable, Mapping

import numpy as np

CATEGORIES = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "trust",
    "negative",
    "positive",
)
N_EMOTIONS = len(CATEGORIES)
_CATEGORY_INDEX = {name: i for i, name in enumerate(CATEGORIES)}

# word -> frozenset of category indices
Lexicon = dict


class LexiconError(ValueError):
    pass


def load_lexicon(path: str | os.PathLike) -> Lexicon:
    """Parse ``word<TAB>category<TAB>flag`` rows (flag 0 rows are skipped)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    entries: dict[str, set[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise LexiconError(f"{path}: line {lineno}: expected word, category, flag")
            word, category, flag = parts
            if category not in _CATEGORY_INDEX:
                raise LexiconError(f"{path}: line {lineno}: unknown category {category!r}")
            if flag not in ("0", "1"):
                raise LexiconError(f"{path}: line {lineno}: flag must be 0 or 1")
            if flag == "1":
                entries.setdefault(word.lower(), set()).add(_CATEGORY_INDEX[category])
    return {w: frozenset(cats) for w, cats in entries.items() if cats}


def write_lexicon(lexicon: Mapping[str, Iterable[int]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word in sorted(lexicon):
            cats = set(lexicon[word])
            for i, name in enumerate(CATEGORIES):
                if i in cats:
                    fh.write(f"{word}\t{name}\t1\n")


def lexicon_from_pairs(pairs: Iterable[tuple[str, str]]) -> Lexicon:
    entries: dict[str, set[int]] = {}
    for word, category in pairs:
        entries.setdefault(word, set()).add(_CATEGORY_INDEX[category])
    return {w: frozenset(c) for w, c in entries.items()}


def emotion_counts(tokens: Iterable[str], lexicon: Lexicon) -> np.ndarray:
    """Per-category occurrence counts, with token multiplicity."""
    counts = np.zeros(N_EMOTIONS, dtype=np.int64)
    for tok in tokens:
        cats = lexicon.get(tok)
        if cats:
            for c in cats:
                counts[c] += 1
    return counts


def normalize_counts(counts) -> np.ndarray:
    """Divide by the largest count; all-zero input stays all-zero."""
    counts = np.asarray(counts, dtype=np.float64)
    top = counts.max() if counts.size else 0.0
    if top <= 0:
        return np.zeros(N_EMOTIONS)
    return counts / top


def emotion_vector(text: str, lexicon: Lexicon) -> np.ndarray:
    from .textstats import tokenize

    return normalize_counts(emotion_counts(tokenize(text), lexicon))


# Small English stand-in for the public word-emotion lexicon, used by the
# synthetic corpus generator and the CLI demo. Category sets follow the
# usual associations; it is not the licensed lexicon.
_DEMO = {
    "anger": "angry rage furious hate mad fight yell",
    "anticipation": "hope soon waiting plan tomorrow eager expect",
    "disgust": "gross sick vomit nasty filthy rotten hate",
    "fear": "scared afraid panic terrified worry dread anxious",
    "joy": "happy glad fun love great celebrate excited",
    "sadness": "sad cry lonely depressed grief miss lost",
    "surprise": "suddenly shock unexpected wow amazed sudden shocked",
    "trust": "trust honest faith reliable support sponsor believe",
    "negative": "bad pain awful worst terrible hurt broken",
    "positive": "good better proud strong healthy calm peace",
}
_DEMO_EXTRA = {
    "happy": ("positive",),
    "love": ("positive",),
    "celebrate": ("anticipation", "positive"),
    "hate": ("negative",),
    "sad": ("negative",),
    "cry": ("negative",),
    "pain": ("fear", "sadness"),
    "hurt": ("anger", "sadness"),
    "trust": ("positive",),
    "scared": ("negative",),
    "angry": ("negative",),
}


def demo_lexicon() -> Lexicon:
    pairs = [(w, cat) for cat, words in _DEMO.items() for w in words.split()]
    pairs += [(w, cat) for w, cats in _DEMO_EXTRA.items() for cat in cats]
    return lexicon_from_pairs(pairs)
