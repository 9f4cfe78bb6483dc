import numpy as np
import pytest

import _oracles
from relapsegan.corpus import DAY, Comment, CorpusError, Label, UserRecord, WindowSpec, build_corpus, synth_corpus
from relapsegan.emotion import CATEGORIES, demo_lexicon, lexicon_from_pairs
from relapsegan.imaging import (
    IMAGE_SHAPE,
    build_image,
    build_images,
    comment_influence,
    export_image,
    read_image_csv,
    read_pgm,
    to_pixels,
)

PAIRS = [("happy", "joy"), ("happy", "positive"), ("sad", "sadness"), ("sad", "negative"), ("hate", "anger")]
LEX = lexicon_from_pairs(PAIRS)


def _records(comments):
    return [{"id": c.id, "parent": c.parent_id, "time": c.timestamp, "body": c.body} for c in comments]


def test_zero_history_gives_zero_image():
    corp = build_corpus([], labels={"u": Label.ABSTINENT})
    im = build_image(corp.users["u"], [], corp, LEX)
    assert im.array.shape == IMAGE_SHAPE and not im.array.any()
    assert im.label is Label.ABSTINENT


def test_short_history_pads_the_old_end():
    comments = [Comment(f"c{i}", "u", "p", 100 + i, "happy happy sad") for i in range(4)]
    corp = build_corpus(comments)
    im = build_image(corp.users["u"], comments, corp, LEX)
    joy, sad = CATEGORIES.index("joy"), CATEGORIES.index("sadness")
    # four comments fill rows 8 (one slot) and 9 (three slots)
    assert not im.channel_emotion[:8].any()
    assert im.channel_emotion[8, joy] == pytest.approx(1 / 3)
    assert im.channel_emotion[9, joy] == 1.0
    assert im.channel_emotion[9, sad] == 0.5


def test_only_newest_thirty_are_used():
    comments = [Comment(f"c{i:02d}", "u", "p", i, "sad" if i < 5 else "happy") for i in range(35)]
    corp = build_corpus(comments)
    im = build_image(corp.users["u"], comments, corp, LEX)
    assert im.channel_emotion[:, CATEGORIES.index("sadness")].sum() == 0


def test_influence_is_mean_of_direct_replies():
    comments = [
        Comment("root", "u", "p", 1, "hello"),
        Comment("r1", "v", "p", 2, "happy", "root"),
        Comment("r2", "w", "p", 3, "sad", "root"),
        Comment("rr", "x", "p", 4, "hate", "r1"),
    ]
    corp = build_corpus(comments)
    inf = comment_influence(corp.comments["root"], corp, LEX)
    want = np.zeros(10)
    for cat in ("joy", "positive", "sadness", "negative"):
        want[CATEGORIES.index(cat)] = 0.5
    assert np.array_equal(inf, want)
    assert not comment_influence(corp.comments["rr"], corp, LEX).any()
    with pytest.raises(CorpusError):
        comment_influence(Comment("zz", "u", "p", 0, ""), corp, LEX)


def test_images_match_reference_on_synthetic_users():
    corp, meta = synth_corpus(4, 25)
    ref = meta["reference_time"]
    lex = demo_lexicon()
    pairs = [(w, CATEGORIES[c]) for w, cats in lex.items() for c in cats]
    everything = _records(corp.comments.values())
    for im in build_images(corp, lex, ref):
        user = corp.users[im.user_id]
        want = _oracles.image(_records(user.comments), everything, pairs, ref - 30 * DAY, ref)
        np.testing.assert_allclose(im.array, want, rtol=0, atol=1e-12)


def test_build_images_keeps_user_order_and_window():
    corp, meta = synth_corpus(1, 6)
    ims = build_images(corp, demo_lexicon(), meta["reference_time"], WindowSpec(30, 7))
    assert [im.user_id for im in ims] == list(corp.users)


def test_features_are_channel_major():
    corp = build_corpus([Comment("c", "u", "p", 1, "happy")])
    im = build_image(corp.users["u"], list(corp.comments.values()), corp, LEX)
    f = im.features()
    assert f.shape == (200,)
    assert np.array_equal(f[:100], im.channel_emotion.ravel())
    assert np.array_equal(f[100:], im.channel_influence.ravel())


def test_pixels_round_half_up():
    assert to_pixels(np.array([0.0, 0.5, 1.0, 0.2])).tolist() == [0, 128, 255, 51]


def test_export_roundtrip(tmp_path):
    corp, meta = synth_corpus(2, 3)
    im = build_images(corp, demo_lexicon(), meta["reference_time"])[0]
    paths = export_image(im, tmp_path / "u0")
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["u0.emotion.pgm", "u0.influence.pgm", "u0.csv"]
    assert np.array_equal(read_image_csv(paths[2]), im.array)
    assert np.array_equal(read_pgm(paths[0]), to_pixels(im.channel_emotion))
    assert np.array_equal(read_pgm(paths[1]), to_pixels(im.channel_influence))


def test_user_record_label_propagates():
    user = UserRecord("u", [], Label.RELAPSED)
    corp = build_corpus([], labels={"u": Label.RELAPSED})
    assert build_image(user, [], corp, LEX).label is Label.RELAPSED
