"""``relapsegan`` command line: synth, cooccur, images, train, predict, evaluate, export-edges.

Options can come from a ``key=value`` config file (``--config``); flags given on
the command line win. Every command validates its inputs before writing.
Exit status is 0 on success, 1 for usage or config errors and 2 for data errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- option tables -----------------------------------------------------------


@dataclass(frozen=True)
class Opt:
    name: str
    type: Callable[[str], Any]
    default: Any = None
    help: str = ""
    required: bool = False

    @property
    def dest(self):
        return self.name.replace("-", "_")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in str(text).split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).split(",") if t.strip())


COMMON = (
    Opt("seed", int, 0, "root seed for every random stream"),
    Opt("out", str, ".", "output directory"),
)

COMMANDS: dict[str, tuple[str, tuple[Opt, ...]]] = {
    "synth": (
        "write a seeded synthetic corpus, labels and lexicon",
        (
            Opt("n-users", int, 1000),
            Opt("relapse-fraction", float, 0.67),
            Opt("margin", float, 4.0, "extra joy/negative weight for relapsed users"),
        ),
    ),
    "cooccur": (
        "word co-occurrence graph as CSV",
        (
            Opt("corpus", str, required=True),
            Opt("min-phi", float, 0.2),
            Opt("min-count", int, 1),
            Opt("stoplist", str),
        ),
    ),
    "images": (
        "build per-user sentiment images and a manifest",
        (
            Opt("corpus", str, required=True),
            Opt("lexicon", str, required=True),
            Opt("labels", str),
            Opt("observation-days", int, 30),
            Opt("label-days", int, 7),
            Opt("reference-time", int, help="end of the observation window (unix seconds)"),
        ),
    ),
    "train": (
        "train the semi-supervised GAN on an image manifest",
        (
            Opt("manifest", str, required=True),
            Opt("epochs", int, 7000),
            Opt("batch-size", int, 128),
            Opt("learning-rate", float, 1e-4),
            Opt("d-steps", int, 1),
            Opt("noise-dim", int, 64),
            Opt("mode", str, "semi_supervised"),
        ),
    ),
    "predict": (
        "relapse probability for every image in a manifest",
        (
            Opt("checkpoint", str, required=True),
            Opt("manifest", str, required=True),
        ),
    ),
    "evaluate": (
        "compare LogReg, SVM, KNN and GAN over training fractions",
        (
            Opt("manifest", str, required=True),
            Opt("fractions", _floats, (0.9, 0.8, 0.7, 0.6, 0.5)),
            Opt("seeds", _ints, help="comma-separated seeds (default: --seed)"),
            Opt("epochs", int, 200),
            Opt("batch-size", int, 128),
            Opt("learning-rate", float, 1e-4),
            Opt("knn-k", _ints, (1, 3, 5, 7), "k values swept by leave-one-out"),
            Opt("gan-validation", float, 0.1, "share of each training split used to pick the GAN epoch (0: last epoch)"),
        ),
    ),
    "export-edges": (
        "reply network as user_from,user_to,count",
        (Opt("corpus", str, required=True),),
    ),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value file; flags override it")
    for opt in COMMON:
        common.add_argument(f"--{opt.name}", dest=opt.dest, type=str, default=argparse.SUPPRESS, help=opt.help)
    parser = _Parser(prog="relapsegan", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, parents=[common])
        for opt in opts:
            extra = f" (default {opt.default})" if opt.default is not None else ""
            p.add_argument(f"--{opt.name}", dest=opt.dest, type=str, default=None, help=opt.help + extra)
    return parser


def read_config(path: str) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                key, value = (s.strip() for s in line.split("=", 1))
                out[key.replace("-", "_")] = value
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return out


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, config file and flags (in rising priority) and convert types."""
    opts = COMMON + COMMANDS[args.command][1]
    path = getattr(args, "config", None)
    config = read_config(path) if path else {}
    known = {o.dest for o in opts}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
    values = {}
    for opt in opts:
        raw = getattr(args, opt.dest, None)
        if raw is None:
            raw = config.get(opt.dest)
        if raw is None:
            if opt.required:
                raise UsageError(f"--{opt.name} is required")
            values[opt.dest] = opt.default
            continue
        try:
            values[opt.dest] = opt.type(raw)
        except ValueError:
            raise UsageError(f"--{opt.name}: invalid value {raw!r}") from None
    return values


# --- validation helpers ------------------------------------------------------


def _need_file(path: str, flag: str) -> None:
    if not os.path.isfile(path):
        raise UsageError(f"--{flag}: no such file {path!r}")


def _need_out(path: str) -> None:
    if os.path.exists(path):
        if not os.path.isdir(path):
            raise UsageError(f"--out: {path!r} is not a directory")
        if not os.access(path, os.W_OK):
            raise UsageError(f"--out: {path!r} is not writable")
        return
    parent = os.path.dirname(os.path.abspath(path))
    while not os.path.exists(parent):
        parent = os.path.dirname(parent)
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise UsageError(f"--out: cannot create {path!r}")


def _positive(values: dict, *names: str) -> None:
    for n in names:
        if values[n] <= 0:
            raise UsageError(f"--{n.replace('_', '-')} must be positive")


# --- image manifests ---------------------------------------------------------

MANIFEST_COLUMNS = ("user_id", "label", "image")


def read_manifest(path: str):
    """Return ``(user_ids, labels, images)`` from a manifest written by ``images``."""
    from .corpus import Label
    from .imaging import read_image_csv

    base = os.path.dirname(os.path.abspath(path))
    ids, labels, arrays = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_COLUMNS:
            raise DataError(f"{path}: expected header {','.join(MANIFEST_COLUMNS)}")
        for lineno, row in enumerate(reader, 2):
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields")
            try:
                label = Label.parse(row[1])
                arrays.append(read_image_csv(os.path.join(base, row[2])))
            except (ValueError, OSError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            ids.append(row[0])
            labels.append(label)
    if not ids:
        raise DataError(f"{path}: manifest is empty")
    return ids, labels, np.stack(arrays)


def _labeled(labels, images):
    from .corpus import Label

    cls = np.array([0 if l is Label.RELAPSED else 1 if l is Label.ABSTINENT else -1 for l in labels])
    keep = cls >= 0
    return images[keep], cls[keep], images[~keep]


# --- commands ----------------------------------------------------------------


def cmd_synth(v: dict) -> None:
    from . import corpus as C
    from .emotion import demo_lexicon, write_lexicon

    if v["n_users"] < 2:
        raise UsageError("--n-users must be at least 2")
    if not 0.0 < v["relapse_fraction"] < 1.0:
        raise UsageError("--relapse-fraction must lie in (0, 1)")
    if v["margin"] < 0:
        raise UsageError("--margin must be non-negative")
    _need_out(v["out"])
    lexicon = demo_lexicon()
    corp, meta = C.synth_corpus(v["seed"], v["n_users"], v["relapse_fraction"], C.SynthProfile(margin=v["margin"]), lexicon)
    out = v["out"]
    os.makedirs(out, exist_ok=True)
    C.write_corpus(corp, os.path.join(out, "corpus.jsonl"))
    C.write_labels(corp, os.path.join(out, "labels.tsv"))
    write_lexicon(lexicon, os.path.join(out, "lexicon.tsv"))
    with open(os.path.join(out, "synth_meta.txt"), "w", encoding="utf-8") as fh:
        meta = dict(meta, seed=v["seed"], margin=v["margin"])
        for key in sorted(meta):
            fh.write(f"{key}={meta[key]}\n")
    if meta.get("degenerate"):
        print("warning: margin 0 gives classes with identical text distributions", file=sys.stderr)


def cmd_cooccur(v: dict) -> None:
    from .corpus import load_corpus
    from .textstats import cooccurrence_graph, load_stopwords, write_graph_csv

    _need_file(v["corpus"], "corpus")
    if v["stoplist"]:
        _need_file(v["stoplist"], "stoplist")
    if v["min_count"] < 1:
        raise UsageError("--min-count must be at least 1")
    _need_out(v["out"])
    corp = load_corpus(v["corpus"])
    stop = load_stopwords(v["stoplist"]) if v["stoplist"] else ()
    scores = cooccurrence_graph(corp, v["min_phi"], v["min_count"], stop)
    os.makedirs(v["out"], exist_ok=True)
    write_graph_csv(scores, os.path.join(v["out"], "cooccurrence.csv"))


def cmd_images(v: dict) -> None:
    from .corpus import WindowSpec, default_reference_time, load_corpus
    from .emotion import load_lexicon
    from .imaging import build_images, export_image

    _need_file(v["corpus"], "corpus")
    _need_file(v["lexicon"], "lexicon")
    if v["labels"]:
        _need_file(v["labels"], "labels")
    try:
        spec = WindowSpec(v["observation_days"], v["label_days"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _need_out(v["out"])
    lexicon = load_lexicon(v["lexicon"])
    corp = load_corpus(v["corpus"], v["labels"])
    ref = v["reference_time"]
    if ref is None:
        ref = default_reference_time(corp, spec)
    images = build_images(corp, lexicon, ref, spec)
    img_dir = os.path.join(v["out"], "images")
    os.makedirs(img_dir, exist_ok=True)
    with open(os.path.join(v["out"], "manifest.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for i, im in enumerate(images):
            # file names avoid user ids, which may hold any character
            stem = f"user{i:06d}"
            export_image(im, os.path.join(img_dir, stem))
            w.writerow([im.user_id, im.label.value, f"images/{stem}.csv"])


def _train_config(v: dict):
    from .gan import MODES, TrainConfig

    _positive(v, "epochs", "batch_size", "learning_rate", "d_steps", "noise_dim")
    if v["mode"] not in MODES:
        raise UsageError(f"--mode must be one of {', '.join(MODES)}")
    return TrainConfig(
        epochs=v["epochs"],
        batch_size=v["batch_size"],
        learning_rate=v["learning_rate"],
        d_steps=v["d_steps"],
        noise_dim=v["noise_dim"],
        seed=v["seed"],
        mode=v["mode"],
    )


def cmd_train(v: dict) -> None:
    from ._accel import tune_allocator
    from .gan import save_model, train, write_loss_csv

    _need_file(v["manifest"], "manifest")
    config = _train_config(v)
    _need_out(v["out"])
    _, labels, images = read_manifest(v["manifest"])
    X, y, unlabeled = _labeled(labels, images)
    if len(X) < config.batch_size:
        raise DataError(f"{len(X)} labeled images, fewer than --batch-size {config.batch_size}")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("training needs both relapsed and abstinent users")
    tune_allocator()
    model, reports = train(X, y, config, unlabeled if len(unlabeled) else None)
    os.makedirs(v["out"], exist_ok=True)
    save_model(model, os.path.join(v["out"], "model.ckpt"), {"seed": config.seed, "epochs": config.epochs, "mode": config.mode})
    write_loss_csv(reports, os.path.join(v["out"], "losses.csv"))


def cmd_predict(v: dict) -> None:
    from .gan import load_model, predict_relapse

    _need_file(v["checkpoint"], "checkpoint")
    _need_file(v["manifest"], "manifest")
    _need_out(v["out"])
    model, _ = load_model(v["checkpoint"])
    ids, _, images = read_manifest(v["manifest"])
    p = predict_relapse(model, images)
    os.makedirs(v["out"], exist_ok=True)
    with open(os.path.join(v["out"], "predictions.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "relapse_probability"])
        for uid, prob in zip(ids, p):
            w.writerow([uid, repr(float(prob))])


def cmd_evaluate(v: dict) -> None:
    from ._accel import tune_allocator
    from .baselines import HarnessConfig, compare_harness, write_harness_csv, write_table_csv

    _need_file(v["manifest"], "manifest")
    if not v["fractions"] or not all(0.0 < f < 1.0 for f in v["fractions"]):
        raise UsageError("--fractions must be values in (0, 1)")
    _positive(v, "epochs", "batch_size", "learning_rate")
    if not v["knn_k"] or min(v["knn_k"]) < 1:
        raise UsageError("--knn-k values must be positive")
    if not 0.0 <= v["gan_validation"] < 1.0:
        raise UsageError("--gan-validation must lie in [0, 1)")
    seeds = v["seeds"] or (v["seed"],)
    _need_out(v["out"])
    _, labels, images = read_manifest(v["manifest"])
    X, y, _ = _labeled(labels, images)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("evaluation needs both relapsed and abstinent users")
    default_k = 5 if 5 in v["knn_k"] else v["knn_k"][0]
    config = HarnessConfig(
        gan_epochs=v["epochs"],
        batch_size=v["batch_size"],
        learning_rate=v["learning_rate"],
        knn_ks=v["knn_k"],
        knn_default_k=default_k,
        gan_validation=v["gan_validation"],
    )
    tune_allocator()
    rows = compare_harness(X, y, v["fractions"], seeds, config, log=lambda s: print(s, file=sys.stderr))
    os.makedirs(v["out"], exist_ok=True)
    write_harness_csv(rows, os.path.join(v["out"], "harness.csv"))
    write_table_csv(rows, os.path.join(v["out"], "table.csv"))


def reply_edges(corp) -> Counter:
    """Count replies between distinct users.

    A reply to a comment points at that comment's author; a top-level comment
    points at the post author when one is known.
    """
    edges: Counter = Counter()
    for c in corp.comments.values():
        if c.parent_id is not None and c.parent_id in corp.comments:
            target = corp.comments[c.parent_id].author
        else:
            post = corp.posts.get(c.post_id)
            target = post.author if post is not None else ""
        if target and target != c.author:
            edges[(c.author, target)] += 1
    return edges


def cmd_export_edges(v: dict) -> None:
    from .corpus import load_corpus

    _need_file(v["corpus"], "corpus")
    _need_out(v["out"])
    edges = reply_edges(load_corpus(v["corpus"]))
    os.makedirs(v["out"], exist_ok=True)
    with open(os.path.join(v["out"], "edges.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_from", "user_to", "count"])
        for (a, b), n in sorted(edges.items()):
            w.writerow([a, b, n])


HANDLERS = {
    "synth": cmd_synth,
    "cooccur": cmd_cooccur,
    "images": cmd_images,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "export-edges": cmd_export_edges,
}


def main(argv=None) -> int:
    from .corpus import CorpusError
    from .emotion import LexiconError
    from .gan import DegenerateModelError
    from .tensornet.checkpoint import CheckpointError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        values = resolve(args)
        HANDLERS[args.command](values)
    except UsageError as exc:
        print(f"relapsegan {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CorpusError, LexiconError, CheckpointError, DegenerateModelError) as exc:
        print(f"relapsegan {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"relapsegan {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
