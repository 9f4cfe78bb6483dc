"""Comment corpus: data model, ingestion, windowing, splitting, synthesis."""
from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .seeding import rng_for

DAY = 86400


class CorpusError(ValueError):
    """Malformed or inconsistent corpus input."""


class Label(enum.Enum):
    RELAPSED = "relapsed"
    ABSTINENT = "abstinent"
    UNLABELED = "unlabeled"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise CorpusError(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class Comment:
    id: str
    author: str
    post_id: str
    timestamp: int
    body: str
    parent_id: str | None = None

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "author": self.author,
            "post_id": self.post_id,
            "timestamp": self.timestamp,
            "body": self.body,
        }
        if self.parent_id is not None:
            rec["parent_id"] = self.parent_id
        return rec


@dataclass
class Post:
    id: str
    subreddit: str
    author: str
    comment_ids: list[str] = field(default_factory=list)


@dataclass
class UserRecord:
    user_id: str
    comments: list[Comment] = field(default_factory=list)
    label: Label = Label.UNLABELED


@dataclass(frozen=True)
class WindowSpec:
    observation_days: int = 30
    label_days: int = 7

    def __post_init__(self):
        if self.observation_days <= 0 or self.label_days <= 0:
            raise ValueError("window lengths must be positive")


@dataclass
class Corpus:
    posts: dict[str, Post] = field(default_factory=dict)
    comments: dict[str, Comment] = field(default_factory=dict)
    users: dict[str, UserRecord] = field(default_factory=dict)
    _replies: dict[str, list[str]] | None = field(default=None, repr=False, compare=False)

    def replies_to(self, comment_id: str) -> list[Comment]:
        """Direct replies (``parent_id == comment_id``), oldest first."""
        if self._replies is None:
            index: dict[str, list[str]] = {}
            for c in sorted(self.comments.values(), key=_time_key):
                if c.parent_id is not None and c.parent_id in self.comments:
                    index.setdefault(c.parent_id, []).append(c.id)
            self._replies = index
        return [self.comments[i] for i in self._replies.get(comment_id, ())]

    def labeled_users(self) -> list[UserRecord]:
        return [u for u in self.users.values() if u.label is not Label.UNLABELED]


def _time_key(c: Comment):
    return (c.timestamp, c.id)


def _require_str(rec: dict, key: str, lineno: int, optional: bool = False) -> str | None:
    if key not in rec or rec[key] is None:
        if optional:
            return None
        raise CorpusError(f"line {lineno}: missing field {key!r}")
    value = rec[key]
    if not isinstance(value, str):
        raise CorpusError(f"line {lineno}: field {key!r} must be a string")
    return value


def build_corpus(
    comments: Iterable[Comment],
    posts: Iterable[Post] = (),
    labels: dict[str, Label] | None = None,
) -> Corpus:
    """Assemble a corpus and check referential integrity.

    Posts that are referenced by comments but not supplied are created with an
    empty author and subreddit ``"unknown"``. Users named only in ``labels``
    get an empty comment history.
    """
    corpus = Corpus()
    for p in posts:
        if p.id in corpus.posts:
            raise CorpusError(f"duplicate post id {p.id!r}")
        if not p.subreddit:
            raise CorpusError(f"post {p.id!r} has an empty subreddit")
        corpus.posts[p.id] = Post(p.id, p.subreddit, p.author, [])
    for c in comments:
        if not c.id:
            raise CorpusError("comment id must be non-empty")
        if c.id in corpus.comments:
            raise CorpusError(f"duplicate comment id {c.id!r}")
        if c.timestamp < 0:
            raise CorpusError(f"comment {c.id!r} has a negative timestamp")
        corpus.comments[c.id] = c

    for c in corpus.comments.values():
        if c.parent_id is not None and c.parent_id != c.post_id and c.parent_id not in corpus.comments:
            raise CorpusError(f"comment {c.id!r} has dangling parent_id {c.parent_id!r}")
        if c.parent_id is not None and c.parent_id in corpus.comments:
            if corpus.comments[c.parent_id].post_id != c.post_id:
                raise CorpusError(f"comment {c.id!r} replies across posts")

    for c in sorted(corpus.comments.values(), key=_time_key):
        post = corpus.posts.get(c.post_id)
        if post is None:
            post = corpus.posts[c.post_id] = Post(c.post_id, "unknown", "", [])
        post.comment_ids.append(c.id)
        user = corpus.users.get(c.author)
        if user is None:
            user = corpus.users[c.author] = UserRecord(c.author)
        user.comments.append(c)

    for user_id, label in (labels or {}).items():
        corpus.users.setdefault(user_id, UserRecord(user_id)).label = label
    corpus.users = dict(sorted(corpus.users.items()))
    return corpus


def load_labels(path: str | os.PathLike) -> dict[str, Label]:
    """Read ``user_id<TAB>label`` lines."""
    labels: dict[str, Label] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise CorpusError(f"{path}: line {lineno}: expected user_id<TAB>label")
            try:
                labels[parts[0]] = Label.parse(parts[1])
            except CorpusError as exc:
                raise CorpusError(f"{path}: line {lineno}: {exc}") from None
    return labels


def load_corpus(path: str | os.PathLike, labels_path: str | os.PathLike | None = None) -> Corpus:
    """Load line-delimited JSON comment records.

    Records with ``"type": "post"`` declare post metadata (id, author,
    subreddit); every other record is a comment.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    comments: list[Comment] = []
    posts: list[Post] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusError(f"line {lineno}: record must be an object")
            if rec.get("type") == "post":
                posts.append(
                    Post(
                        id=_require_str(rec, "id", lineno),
                        subreddit=_require_str(rec, "subreddit", lineno),
                        author=_require_str(rec, "author", lineno, optional=True) or "",
                    )
                )
                continue
            ts = rec.get("timestamp")
            if isinstance(ts, bool) or not isinstance(ts, int):
                raise CorpusError(f"line {lineno}: field 'timestamp' must be an integer")
            comment = Comment(
                id=_require_str(rec, "id", lineno),
                author=_require_str(rec, "author", lineno),
                post_id=_require_str(rec, "post_id", lineno),
                timestamp=ts,
                body=_require_str(rec, "body", lineno),
                parent_id=_require_str(rec, "parent_id", lineno, optional=True),
            )
            if not comment.id:
                raise CorpusError(f"line {lineno}: empty id")
            comments.append(comment)
    labels = load_labels(labels_path) if labels_path is not None else None
    try:
        return build_corpus(comments, posts, labels)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def write_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for post in corpus.posts.values():
            rec = {"type": "post", "id": post.id, "author": post.author, "subreddit": post.subreddit}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for c in sorted(corpus.comments.values(), key=_time_key):
            fh.write(json.dumps(c.to_record(), sort_keys=True) + "\n")


def write_labels(corpus: Corpus, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for user in corpus.users.values():
            fh.write(f"{user.user_id}\t{user.label.value}\n")


def observation_slice(user: UserRecord, reference_time: int, spec: WindowSpec = WindowSpec()) -> list[Comment]:
    """Comments in ``[reference_time - observation_days, reference_time)``."""
    if reference_time < 0:
        raise ValueError("reference_time must be non-negative")
    start = reference_time - spec.observation_days * DAY
    return [c for c in user.comments if start <= c.timestamp < reference_time]


def default_reference_time(corpus: Corpus, spec: WindowSpec = WindowSpec()) -> int:
    """Start of the label window, counting back from the end of the last active day."""
    if not corpus.comments:
        return spec.observation_days * DAY
    last = max(c.timestamp for c in corpus.comments.values())
    end = (last // DAY + 1) * DAY
    return max(end - spec.label_days * DAY, 0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def stratified_indices(classes: Sequence, train_fraction: float, seed: int, stream: str = "split") -> tuple[np.ndarray, np.ndarray]:
    """Index-level stratified split; per-class train size is ``round(f * n)``.

    ``stream`` names the random sub-stream, so a second split of the same
    seed (say, a validation slice) is independent of the first.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    classes = list(classes)
    groups: dict = {}
    for i, c in enumerate(classes):
        groups.setdefault(c, []).append(i)
    if len(groups) < 2:
        raise ValueError("split needs at least one member of each class")
    rng = rng_for(seed, stream)
    train, test = [], []
    for key in sorted(groups, key=str):
        idx = np.array(groups[key])
        idx = idx[rng.permutation(len(idx))]
        n_train = _round_half_up(train_fraction * len(idx))
        train.extend(idx[:n_train].tolist())
        test.extend(idx[n_train:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


def split(users: Sequence[UserRecord], train_fraction: float, seed: int) -> tuple[list[UserRecord], list[UserRecord]]:
    """Stratified, seeded train/test partition of labeled users."""
    if any(u.label is Label.UNLABELED for u in users):
        raise ValueError("split expects labeled users only")
    labels = [u.label for u in users]
    if Label.RELAPSED not in labels or Label.ABSTINENT not in labels:
        raise ValueError("split needs at least one member of each class")
    tr, te = stratified_indices([lab.value for lab in labels], train_fraction, seed)
    return [users[i] for i in tr], [users[i] for i in te]


# --- synthetic corpora -----------------------------------------------------

FILLER = (
    "i was today went to my and just got back from work the a it so really "
    "feel day week night still now again what when this that with for "
    "detox bupe suboxone methadone withdrawal doctor clinic meeting naloxone "
    "dope oxy pills clean days sober rehab program group friend family "
    "home job sleep morning call talk think know going"
).split()


@dataclass(frozen=True)
class SynthProfile:
    """Knobs for :func:`synth_corpus`.

    ``margin`` is the extra sampling weight given to joy and negative lexicon
    words in relapsed users' comments (0 means no class signal).
    """

    margin: float = 4.0
    min_comments: int = 30
    max_comments: int = 36
    observation_days: int = 30
    label_days: int = 7
    tokens_min: int = 6
    tokens_max: int = 14
    emotion_rate: float = 0.35
    reply_prob: float = 0.3
    max_replies: int = 3
    label_window_comments: int = 2
    n_subreddits: int = 3
    comments_per_post: int = 8
    start_time: int = 1_500_000_000 // DAY * DAY


def synth_corpus(
    seed: int,
    n_users: int,
    relapse_fraction: float = 0.67,
    profile: SynthProfile = SynthProfile(),
    lexicon=None,
) -> tuple[Corpus, dict]:
    """Seeded synthetic corpus with labels.

    Returns the corpus and a metadata dict (counts, reference time, and a
    ``degenerate`` flag when ``margin == 0``).
    """
    from .emotion import CATEGORIES, demo_lexicon

    if n_users < 2:
        raise ValueError("n_users must be at least 2")
    if not 0.0 < relapse_fraction < 1.0:
        raise ValueError("relapse_fraction must lie in (0, 1)")
    if profile.margin < 0:
        raise ValueError("margin must be non-negative")
    if profile.min_comments < 30 or profile.max_comments < profile.min_comments:
        raise ValueError("need at least 30 comments per user")
    lexicon = demo_lexicon() if lexicon is None else lexicon

    rng = rng_for(seed, "synth")
    by_category: list[list[str]] = [[] for _ in CATEGORIES]
    for word in sorted(lexicon):
        for cat in sorted(lexicon[word]):
            by_category[cat].append(word)
    if any(not words for words in by_category):
        raise ValueError("lexicon must cover every emotion category")

    base_w = np.ones(len(CATEGORIES))
    relapse_w = base_w.copy()
    relapse_w[CATEGORIES.index("joy")] += profile.margin
    relapse_w[CATEGORIES.index("negative")] += profile.margin

    n_relapsed = _round_half_up(relapse_fraction * n_users)
    n_relapsed = min(max(n_relapsed, 1), n_users - 1)
    width = len(str(n_users - 1))
    user_ids = [f"u{i:0{width}d}" for i in range(n_users)]
    relapsed = set(rng.choice(n_users, size=n_relapsed, replace=False).tolist())
    labels = {uid: (Label.RELAPSED if i in relapsed else Label.ABSTINENT) for i, uid in enumerate(user_ids)}

    def text(weights: np.ndarray) -> str:
        n_tok = int(rng.integers(profile.tokens_min, profile.tokens_max + 1))
        is_emotion = rng.random(n_tok) < profile.emotion_rate
        cats = rng.choice(len(CATEGORIES), size=n_tok, p=weights / weights.sum())
        picks = rng.random(n_tok)
        fillers = rng.integers(0, len(FILLER), n_tok)
        out = []
        for k in range(n_tok):
            if is_emotion[k]:
                words = by_category[cats[k]]
                out.append(words[int(picks[k] * len(words))])
            else:
                out.append(FILLER[fillers[k]])
        return " ".join(out)

    t0 = profile.start_time
    obs_span = profile.observation_days * DAY
    ref = t0 + obs_span
    subreddits = [f"sub{k}" for k in range(profile.n_subreddits)]

    # (timestamp, author, body) for every top-level comment, assigned to posts later
    drafts: list[tuple[int, str, str]] = []
    weights = {uid: (relapse_w if labels[uid] is Label.RELAPSED else base_w) for uid in user_ids}
    for uid in user_ids:
        w = weights[uid]
        n = int(rng.integers(profile.min_comments, profile.max_comments + 1))
        # one comment per synthetic day guaranteed, remainder uniform over the window
        days = np.concatenate([np.arange(profile.observation_days), rng.integers(0, profile.observation_days, n - profile.observation_days)])
        times = np.sort(t0 + days * DAY + rng.integers(0, DAY, len(days)))
        for ts in times:
            drafts.append((int(ts), uid, text(w)))
        for _ in range(profile.label_window_comments):
            ts = ref + int(rng.integers(0, profile.label_days * DAY))
            drafts.append((ts, uid, text(w)))

    drafts.sort()
    n_posts = max(1, len(drafts) // profile.comments_per_post)
    posts = [
        Post(f"p{k:06d}", subreddits[int(rng.integers(len(subreddits)))], user_ids[int(rng.integers(n_users))])
        for k in range(n_posts)
    ]
    comments: list[Comment] = []
    cid = 0
    for ts, uid, body in drafts:
        post = posts[int(rng.integers(n_posts))]
        c = Comment(f"c{cid:08d}", uid, post.id, ts, body, None)
        cid += 1
        comments.append(c)
        if ts < ref and rng.random() < profile.reply_prob:
            for _ in range(int(rng.integers(1, profile.max_replies + 1))):
                other = user_ids[int(rng.integers(n_users))]
                if other == uid:
                    continue
                rts = ts + int(rng.integers(60, 6 * 3600))
                comments.append(Comment(f"c{cid:08d}", other, post.id, rts, text(weights[other]), c.id))
                cid += 1

    corpus = build_corpus(comments, posts, labels)
    meta = {
        "seed": seed,
        "n_users": n_users,
        "n_relapsed": n_relapsed,
        "n_abstinent": n_users - n_relapsed,
        "margin": profile.margin,
        "degenerate": profile.margin == 0,
        "reference_time": ref,
        "n_comments": len(corpus.comments),
        "n_posts": len(corpus.posts),
    }
    return corpus, meta
