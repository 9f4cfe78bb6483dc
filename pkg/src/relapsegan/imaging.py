"""Two-channel 10x10 sentiment images (emotion + reply influence)."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Comment, Corpus, CorpusError, Label, UserRecord
from .emotion import CATEGORIES, N_EMOTIONS, Lexicon, emotion_vector

N_COMMENTS = 30
GROUP = 3
N_ROWS = N_COMMENTS // GROUP
IMAGE_SHAPE = (2, N_ROWS, N_EMOTIONS)


@dataclass
class SentimentImage:
    user_id: str
    label: Label
    channel_emotion: np.ndarray
    channel_influence: np.ndarray

    @property
    def array(self) -> np.ndarray:
        """Stacked ``(2, 10, 10)`` array, emotion channel first."""
        return np.stack([self.channel_emotion, self.channel_influence])

    def features(self) -> np.ndarray:
        """Channel-major flattening shared by every classifier."""
        return self.array.reshape(-1)


class _VectorCache:
    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        self._memo: dict[str, np.ndarray] = {}

    def __call__(self, comment: Comment) -> np.ndarray:
        v = self._memo.get(comment.id)
        if v is None:
            v = self._memo[comment.id] = emotion_vector(comment.body, self.lexicon)
        return v


def comment_influence(comment: Comment, corpus: Corpus, lexicon: Lexicon, _vectors=None) -> np.ndarray:
    """Mean emotion vector of the direct replies; zero when nobody replied."""
    if comment.id not in corpus.comments:
        raise CorpusError(f"comment {comment.id!r} is not in the corpus")
    vectors = _vectors or _VectorCache(lexicon)
    replies = corpus.replies_to(comment.id)
    if not replies:
        return np.zeros(N_EMOTIONS)
    return np.mean([vectors(r) for r in replies], axis=0)


def build_image(
    user: UserRecord,
    window_comments: Sequence[Comment],
    corpus: Corpus,
    lexicon: Lexicon,
    _vectors=None,
) -> SentimentImage:
    """Average emotion and influence vectors over consecutive comment triples.

    Only the 30 newest comments are used. Short histories are padded with
    empty comments at the old end, so recent activity lands in the bottom rows.
    """
    vectors = _vectors or _VectorCache(lexicon)
    recent = list(window_comments)[-N_COMMENTS:]
    emo = np.zeros((N_COMMENTS, N_EMOTIONS))
    inf = np.zeros((N_COMMENTS, N_EMOTIONS))
    offset = N_COMMENTS - len(recent)
    for k, c in enumerate(recent):
        emo[offset + k] = vectors(c)
        inf[offset + k] = comment_influence(c, corpus, lexicon, vectors)
    return SentimentImage(
        user_id=user.user_id,
        label=user.label,
        channel_emotion=emo.reshape(N_ROWS, GROUP, N_EMOTIONS).mean(axis=1),
        channel_influence=inf.reshape(N_ROWS, GROUP, N_EMOTIONS).mean(axis=1),
    )


def build_images(corpus: Corpus, lexicon: Lexicon, reference_time: int, spec=None) -> list[SentimentImage]:
    """One image per user in ``corpus.users`` order."""
    from .corpus import WindowSpec, observation_slice

    spec = spec or WindowSpec()
    vectors = _VectorCache(lexicon)
    return [
        build_image(u, observation_slice(u, reference_time, spec), corpus, lexicon, vectors)
        for u in corpus.users.values()
    ]


def to_pixels(channel: np.ndarray) -> np.ndarray:
    """Scale [0, 1] to 0..255, rounding halves up."""
    return np.floor(np.clip(channel, 0.0, 1.0) * 255.0 + 0.5).astype(np.int64)


def _write_pgm(channel: np.ndarray, path: str) -> None:
    px = to_pixels(channel)
    rows, cols = px.shape
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"P2\n{cols} {rows}\n255\n")
        for r in px:
            fh.write(" ".join(str(int(v)) for v in r) + "\n")


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM")
    cols, rows, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array([int(t) for t in tokens[4:]], dtype=np.int64).reshape(rows, cols)


def write_image_csv(array: np.ndarray, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "row", *CATEGORIES])
        for ch, name in enumerate(("emotion", "influence")):
            for r in range(array.shape[1]):
                w.writerow([name, r, *(repr(float(v)) for v in array[ch, r])])


def read_image_csv(path: str | os.PathLike) -> np.ndarray:
    out = np.zeros(IMAGE_SHAPE)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[2:] != list(CATEGORIES):
            raise ValueError(f"{path}: unexpected header")
        for row in reader:
            ch = ("emotion", "influence").index(row[0])
            out[ch, int(row[1])] = [float(v) for v in row[2:]]
    return out


def export_image(image: SentimentImage, path: str | os.PathLike) -> list[str]:
    """Write ``<path>.emotion.pgm``, ``<path>.influence.pgm`` and ``<path>.csv``."""
    base = os.fspath(path)
    paths = [f"{base}.emotion.pgm", f"{base}.influence.pgm", f"{base}.csv"]
    _write_pgm(image.channel_emotion, paths[0])
    _write_pgm(image.channel_influence, paths[1])
    write_image_csv(image.array, paths[2])
    return paths
