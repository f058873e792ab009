"""InfoNCE closed forms and the three-way alignment trainer."""
import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from intentlab.errors import ConfigError, DimensionError
from intentlab.models.contrastive import (
    CONTRAST_PAIRS,
    MODALITIES,
    ContrastiveAligner,
    info_nce,
    retrieval_accuracy,
    total_contrastive_loss,
)
from intentlab.models.layers import ProjectionHead
from intentlab.numerics import Tensor
from intentlab.numerics.rng import make_rng

from synth import make_triplets


def test_single_pair_loss_is_zero():
    a = Tensor(np.array([[1.0, 2.0, 3.0]], dtype=np.float32))
    loss = info_nce(a, a)
    assert abs(loss.item()) < 1e-9


def test_all_equal_similarities_give_ln_n():
    for n in (2, 4, 8):
        row = np.array([0.3, -0.7, 0.2], dtype=np.float32)
        anchors = Tensor(np.tile(row, (n, 1)))
        candidates = Tensor(np.tile(row * 2.0, (n, 1)))  # cosine 1 everywhere
        loss = info_nce(anchors, candidates)
        assert abs(loss.item() - math.log(n)) < 1e-6


def test_orthogonal_pair_matches_direct_formula():
    # identity similarity matrix at temperature 0.07: each anchor's loss is
    # log(1 + exp(-1/tau)), computed here by scalar arithmetic
    anchors = Tensor(np.eye(2, dtype=np.float32))
    loss = info_nce(anchors, Tensor(np.eye(2, dtype=np.float32)), temperature=0.07)
    want = math.log(1.0 + math.exp(-1.0 / 0.07))
    assert want < 1e-6  # the saturated regime the formula predicts
    assert abs(loss.item() - want) < 1e-6


def test_loss_decreases_as_matches_strengthen():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(6, 8)).astype(np.float32)
    noisy = (base + 0.8 * rng.normal(size=(6, 8))).astype(np.float32)
    tight = (base + 0.01 * rng.normal(size=(6, 8))).astype(np.float32)
    assert (
        info_nce(Tensor(base), Tensor(tight)).item()
        < info_nce(Tensor(base), Tensor(noisy)).item()
    )


def head_trio(seed=0, d_in=10, hidden=12, d_out=8):
    return {
        m: ProjectionHead(d_in, hidden, d_out, make_rng(seed, f"h-{m}"), name=m)
        for m in MODALITIES
    }


def batch_of(views):
    return {m: Tensor(views[m]) for m in MODALITIES}


def test_total_is_sum_of_three_pairwise_terms():
    views = make_triplets(8, feature_dim=10, seed=1)
    heads = head_trio()
    total, terms = total_contrastive_loss(batch_of(views), heads)
    assert set(terms) == {"text_video", "video_audio", "audio_text"}
    assert abs(total.item() - sum(terms.values())) < 1e-6
    # each term equals an independent info_nce call on projected views
    proj = {m: heads[m](Tensor(views[m])) for m in MODALITIES}
    for anchor, candidate in CONTRAST_PAIRS:
        single = info_nce(proj[anchor], proj[candidate]).item()
        assert abs(terms[f"{anchor}_{candidate}"] - single) < 1e-6


def test_total_loss_permutation_invariant():
    views = make_triplets(8, feature_dim=10, seed=2)
    heads = head_trio(seed=4)
    total, _ = total_contrastive_loss(batch_of(views), heads)
    perm = np.random.default_rng(5).permutation(8)
    shuffled = {m: views[m][perm] for m in MODALITIES}
    total_p, _ = total_contrastive_loss(batch_of(shuffled), heads)
    assert abs(total.item() - total_p.item()) < 1e-6


def test_symmetric_averages_both_directions():
    views = make_triplets(6, feature_dim=10, seed=3)
    heads = head_trio(seed=9)
    plain, _ = total_contrastive_loss(batch_of(views), heads, symmetric=False)
    sym, terms = total_contrastive_loss(batch_of(views), heads, symmetric=True)
    proj = {m: heads[m](Tensor(views[m])) for m in MODALITIES}
    want = 0.0
    for anchor, candidate in CONTRAST_PAIRS:
        fwd = info_nce(proj[anchor], proj[candidate]).item()
        rev = info_nce(proj[candidate], proj[anchor]).item()
        want += 0.5 * (fwd + rev)
    assert abs(sym.item() - want) < 1e-6 * max(1.0, abs(want))
    assert np.isfinite(plain.item())


def test_retrieval_accuracy_definition():
    q = np.eye(3, dtype=np.float32)
    assert retrieval_accuracy(q, q) == 1.0
    rolled = np.roll(q, 1, axis=0)
    assert retrieval_accuracy(q, rolled) == 0.0


def test_aligner_learns_synthetic_alignment():
    views = make_triplets(264, noise=0.1, seed=0)
    train = {m: views[m][:200] for m in MODALITIES}
    held = {m: views[m][200:232] for m in MODALITIES}
    aligner = ContrastiveAligner(
        embed_dim=64, n_epochs=10, batch_size=64, lr=5e-3, seed=0
    )
    aligner.fit(train)
    z = aligner.transform(held)
    assert retrieval_accuracy(z["text"], z["video"]) >= 0.8
    losses = [row["loss"] for row in aligner.history_]
    assert losses[-1] < losses[0]
    assert len(losses) == 10
    assert set(aligner.history_[0]) >= {"epoch", "loss", "text_video",
                                        "video_audio", "audio_text"}


def test_aligner_deterministic():
    views = make_triplets(40, seed=6)
    a = ContrastiveAligner(embed_dim=16, n_epochs=3, batch_size=16, seed=11).fit(views)
    b = ContrastiveAligner(embed_dim=16, n_epochs=3, batch_size=16, seed=11).fit(views)
    assert a.history_ == b.history_
    za, zb = a.transform(views), b.transform(views)
    for m in MODALITIES:
        assert np.array_equal(za[m], zb[m])


def test_learnable_temperature_moves():
    views = make_triplets(48, seed=7)
    fixed = ContrastiveAligner(embed_dim=16, n_epochs=2, batch_size=16,
                               seed=0).fit(views)
    assert fixed.log_inv_temperature_ is None
    learned = ContrastiveAligner(embed_dim=16, n_epochs=4, batch_size=16,
                                 learnable_temperature=True, seed=0).fit(views)
    assert learned.log_inv_temperature_ is not None
    assert learned.log_inv_temperature_ != pytest.approx(math.log(1 / 0.07), abs=1e-7)
    assert "temperature" in learned.history_[0]


def test_aligner_validation_errors():
    views = make_triplets(8, seed=8)
    aligner = ContrastiveAligner(embed_dim=8, n_epochs=1)
    with pytest.raises(ConfigError):
        aligner.fit({"video": views["video"], "audio": views["audio"]})
    bad = dict(views)
    bad["text"] = views["text"][:4]
    with pytest.raises(DimensionError):
        aligner.fit(bad)
    with pytest.raises(ConfigError):
        ContrastiveAligner(temperature=0.0).fit(views)


def test_aligner_not_fitted():
    aligner = ContrastiveAligner()
    with pytest.raises(NotFittedError):
        aligner.transform(make_triplets(4))
    with pytest.raises(NotFittedError):
        aligner.encode("video", np.ones((2, 24), dtype=np.float32))


def test_encode_checks_shape():
    views = make_triplets(16, seed=9)
    aligner = ContrastiveAligner(embed_dim=8, n_epochs=1, batch_size=8).fit(views)
    out = aligner.encode("video", views["video"])
    assert out.shape == (16, 8)
    with pytest.raises(DimensionError):
        aligner.encode("video", np.ones((2, 5), dtype=np.float32))
    with pytest.raises(ConfigError):
        aligner.encode("depth", views["video"])


def test_get_params_round_trip():
    aligner = ContrastiveAligner(embed_dim=32, lr=1e-3)
    params = aligner.get_params()
    assert params["embed_dim"] == 32
    clone = ContrastiveAligner(**params)
    assert clone.get_params() == params
