"""Model-level behavior: distribution-distance math, the three few-shot
scoring rules with hand-computable cases, the adaptation loss contract,
backbone sharing, and checkpoint round-trips."""

from __future__ import annotations

import json

import numpy as np
import pytest

from sonarfit.data.sampler import Episode
from sonarfit.models import (
    BaselineBiLstm,
    DomainAdaptationNet,
    LocalNet,
    ProtoNet,
    SiameseNet,
    class_prototypes_np,
    da_loss,
    image_to_class_logits,
    image_to_class_logits_np,
    mask_target_labels,
    mmd,
    normalize_descriptors_np,
    prototype_logits,
    prototype_logits_np,
    siamese_scores_np,
)
from sonarfit.models.common import batched_embed, load_model_arrays, topology_hash
from sonarfit.models.mmd import median_pairwise_distance, pairwise_sq_dists
from sonarfit.models.siamese import class_mean_embeddings
from sonarfit.nn import Tensor, sum_

IN_FRAMES, IN_BINS = 32, 48  # small enough for quick forward passes


def rng_of(seed):
    return np.random.default_rng(seed)


# -- distribution distance -------------------------------------------------------


def test_mmd_closed_form_for_two_points():
    r, sigma = 1.5, 1.0
    a = Tensor(np.array([[0.0]]))
    b = Tensor(np.array([[r]]))
    got = mmd(a, b, bandwidths=[sigma]).item()
    expected = 2.0 * (1.0 - np.exp(-(r**2) / (2.0 * sigma**2)))
    assert got == pytest.approx(expected, abs=1e-12)


def test_mmd_identity_and_symmetry():
    rng = rng_of(0)
    a = rng.standard_normal((12, 5))
    b = rng.standard_normal((9, 5)) + 0.7
    assert abs(mmd(Tensor(a), Tensor(a)).item()) <= 1e-10
    ab = mmd(Tensor(a), Tensor(b)).item()
    ba = mmd(Tensor(b), Tensor(a)).item()
    assert abs(ab - ba) <= 1e-12
    assert ab > 0.0


def test_mmd_grows_with_separation():
    rng = rng_of(1)
    a = rng.standard_normal((20, 4))
    near = mmd(Tensor(a), Tensor(a + 0.1), bandwidths=[1.0]).item()
    far = mmd(Tensor(a), Tensor(a + 2.0), bandwidths=[1.0]).item()
    assert far > near


def test_mmd_input_validation():
    a = Tensor(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        mmd(a, Tensor(np.zeros((3, 5))))
    with pytest.raises(ValueError):
        mmd(a, Tensor(np.zeros(3)))
    with pytest.raises(ValueError):
        mmd(a, Tensor(np.zeros((0, 2))))
    with pytest.raises(ValueError):
        mmd(a, Tensor(np.zeros((3, 2))), bandwidths=[])


def test_mmd_backpropagates():
    rng = rng_of(2)
    a = Tensor(rng.standard_normal((6, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal((5, 3)) + 1.0)
    sum_(mmd(a, b)).backward()
    assert a.grad is not None and np.all(np.isfinite(a.grad))
    assert np.any(a.grad != 0)


def test_pairwise_sq_dists_matches_direct():
    rng = rng_of(3)
    a, b = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    got = pairwise_sq_dists(Tensor(a), Tensor(b)).data
    ref = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_median_pairwise_distance_exact_small_case():
    pts = Tensor(np.array([[0.0], [1.0], [3.0]]))
    d2 = pairwise_sq_dists(pts, pts)
    # off-diagonal distances: 1, 2, 3 each twice -> median 2
    assert median_pairwise_distance(d2).item() == pytest.approx(2.0, abs=1e-9)


# -- siamese scoring --------------------------------------------------------------


def test_siamese_score_is_bias_only_for_identical_pair():
    model = SiameseNet(IN_FRAMES, IN_BINS, seed=0)
    d = model.phi.w.data.shape[0]
    emb = np.ones((1, d), dtype=np.float32)
    scores = model.scores(Tensor(emb), Tensor(emb.copy())).data
    bias_only = 1.0 / (1.0 + np.exp(-float(model.phi.b.data[0])))
    assert scores[0, 0] == pytest.approx(bias_only, abs=1e-6)


def test_siamese_numpy_twin_matches_tensor_path():
    model = SiameseNet(IN_FRAMES, IN_BINS, seed=1)
    rng = rng_of(4)
    d = model.phi.w.data.shape[0]
    q = rng.standard_normal((7, d)).astype(np.float32)
    means = rng.standard_normal((5, d)).astype(np.float32)
    ref = model.scores(Tensor(q), Tensor(means)).data
    got = siamese_scores_np(q, means, model.phi.w.data, model.phi.b.data)
    np.testing.assert_allclose(got, ref, rtol=1e-5, atol=1e-6)


def test_class_mean_embeddings_layout():
    emb = Tensor(np.arange(12, dtype=np.float64).reshape(6, 2))
    means = class_mean_embeddings(emb, n_way=3, k_shot=2).data
    np.testing.assert_allclose(means, [[1.0, 2.0], [5.0, 6.0], [9.0, 10.0]])


# -- prototype scoring -------------------------------------------------------------


def test_prototype_logits_are_negative_squared_distances():
    protos = Tensor(np.array([[1.0, 1.0], [0.0, 0.0]]))
    query = Tensor(np.array([[0.9, 0.0]]))
    logits = prototype_logits(query, protos).data
    np.testing.assert_allclose(logits, [[-(0.1**2 + 1.0), -(0.9**2)]], atol=1e-12)
    assert np.argmax(logits) == 1  # nearer the origin prototype
    np.testing.assert_allclose(
        prototype_logits_np(query.data, protos.data), logits, atol=1e-12
    )


def test_class_prototypes_np_is_permutation_invariant():
    rng = rng_of(5)
    emb = rng.standard_normal((12, 6)).astype(np.float32)
    labels = np.repeat([4, 7, 2], 4)
    protos, classes = class_prototypes_np(emb, labels)
    assert classes.tolist() == [2, 4, 7]
    perm = rng.permutation(12)
    protos_p, classes_p = class_prototypes_np(emb[perm], labels[perm])
    assert np.array_equal(protos, protos_p)  # bit-identical, not just close
    assert np.array_equal(classes, classes_p)
    np.testing.assert_allclose(protos[1], emb[labels == 4].mean(axis=0), atol=1e-6)


# -- local descriptor scoring -------------------------------------------------------


def test_local_logits_self_similarity_equals_patch_count():
    p, d, k = 6, 12, 3
    eye = np.eye(d, dtype=np.float64)
    q_desc = eye[:p][None, :, :]  # one query image, p orthonormal descriptors
    pools = [q_desc[0], eye[p:]]  # own pool vs a pool orthogonal to every query
    logits = image_to_class_logits_np(q_desc, pools, k)
    assert logits[0, 0] == pytest.approx(p, abs=1e-9)  # each descriptor matches itself once
    assert logits[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_local_tensor_and_numpy_paths_agree():
    rng = rng_of(6)
    n_way, k_shot, p, d, k = 3, 2, 4, 5, 3
    q = rng.standard_normal((5, p, d))
    q /= np.linalg.norm(q, axis=2, keepdims=True)
    s = rng.standard_normal((n_way * k_shot, p, d))
    s /= np.linalg.norm(s, axis=2, keepdims=True)
    ref = image_to_class_logits(Tensor(q), Tensor(s), n_way, k_shot, k).data
    pools = [s[c * k_shot : (c + 1) * k_shot].reshape(k_shot * p, d) for c in range(n_way)]
    got = image_to_class_logits_np(q, pools, k)
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_descriptor_normalization_is_scale_invariant():
    rng = rng_of(7)
    fmap = rng.standard_normal((2, 5, 3, 4))
    a = normalize_descriptors_np(fmap)
    b = normalize_descriptors_np(fmap * 7.5)
    np.testing.assert_allclose(a, b, atol=1e-10)
    assert a.shape == (2, 12, 5)
    np.testing.assert_allclose(np.linalg.norm(a, axis=2), 1.0, atol=1e-6)


def test_local_pool_smaller_than_k_is_rejected():
    with pytest.raises(ValueError):
        image_to_class_logits_np(np.zeros((1, 2, 3)), [np.zeros((2, 3))], k=3)


# -- adaptation loss ---------------------------------------------------------------


def test_mask_target_labels_exact_counts_and_balance():
    rng = rng_of(8)
    yt = np.repeat(np.arange(9), 15)  # 135 windows
    for ratio, expected in ((0.0, 0), (0.5, 68), (1.0, 135)):
        masked = mask_target_labels(yt, ratio, rng_of(0))
        kept = masked != -1
        assert kept.sum() == expected
        assert np.array_equal(masked[kept], yt[kept])  # kept labels unchanged
        if expected:
            counts = np.bincount(yt[kept], minlength=9)
            assert counts.max() - counts.min() <= 1
    # uneven batch sizes still hit round(ratio * m) exactly
    yt_odd = np.repeat(np.arange(9), 3)
    assert (mask_target_labels(yt_odd, 0.5, rng_of(1)) != -1).sum() == round(0.5 * 27)


def test_da_loss_validates_ratio_and_mask_consistency():
    model = DomainAdaptationNet(IN_FRAMES, IN_BINS, seed=0)
    rng = rng_of(9)
    xs = rng.standard_normal((6, IN_FRAMES, IN_BINS)).astype(np.float32)
    ys = rng.integers(0, 9, size=6)
    xt = rng.standard_normal((6, IN_FRAMES, IN_BINS)).astype(np.float32)
    yt = rng.integers(0, 9, size=6)
    with pytest.raises(ValueError):
        da_loss(model, xs, ys, xt, yt, label_ratio=0.7)
    with pytest.raises(ValueError):  # 6 labeled windows but ratio says 3
        da_loss(model, xs, ys, xt, yt, label_ratio=0.5)
    masked = mask_target_labels(yt, 0.5, rng_of(2))
    loss, parts = da_loss(model, xs, ys, xt, masked, label_ratio=0.5)
    assert set(parts) == {"ce_source", "ce_target", "mmd"}
    assert np.isfinite(loss.item())


def test_da_loss_is_linear_in_the_alignment_weight():
    model = DomainAdaptationNet(IN_FRAMES, IN_BINS, seed=1)
    rng = rng_of(10)
    xs = rng.standard_normal((5, IN_FRAMES, IN_BINS)).astype(np.float32)
    ys = rng.integers(0, 9, size=5)
    xt = rng.standard_normal((5, IN_FRAMES, IN_BINS)).astype(np.float32)
    yt = np.full(5, -1)
    l0, parts0 = da_loss(model, xs, ys, xt, yt, label_ratio=0.0, mmd_weight=0.0, train=False)
    l2, parts2 = da_loss(model, xs, ys, xt, yt, label_ratio=0.0, mmd_weight=2.0, train=False)
    assert parts2["mmd"] == pytest.approx(parts0["mmd"], rel=1e-6)
    assert l2.item() - l0.item() == pytest.approx(2.0 * parts0["mmd"], rel=1e-4)
    assert parts0["ce_target"] == 0.0  # no labeled target windows


# -- shared backbone and persistence ------------------------------------------------


def test_conv_models_share_one_backbone_topology():
    # heads differ, so compare backbone parameter names/shapes only
    def backbone_sig(model):
        return tuple(
            (n, model.params[n].data.shape)
            for n in model.params.names()
            if n.startswith("backbone.")
        )

    sigs = {
        backbone_sig(m)
        for m in (
            DomainAdaptationNet(IN_FRAMES, IN_BINS, seed=0),
            SiameseNet(IN_FRAMES, IN_BINS, seed=1),
            ProtoNet(IN_FRAMES, IN_BINS, seed=2),
            LocalNet(IN_FRAMES, IN_BINS, seed=3),
        )
    }
    assert len(sigs) == 1


def test_batched_embed_is_chunk_invariant():
    model = ProtoNet(IN_FRAMES, IN_BINS, seed=4)
    rng = rng_of(11)
    x = rng.standard_normal((7, 1, IN_FRAMES, IN_BINS)).astype(np.float32)

    def embed(t):
        return model.embed(t, train=False)

    full = batched_embed(embed, x, chunk=64)
    small = batched_embed(embed, x, chunk=2)
    np.testing.assert_allclose(full, small, atol=1e-6)
    assert full.shape[0] == 7


def test_da_checkpoint_roundtrip_preserves_predictions(tmp_path):
    model = DomainAdaptationNet(IN_FRAMES, IN_BINS, seed=5)
    rng = rng_of(12)
    x = rng.standard_normal((6, IN_FRAMES, IN_BINS)).astype(np.float32)
    path = tmp_path / "da.ckpt"
    model.save(path, train_config={"note": "roundtrip"})
    card = json.loads((tmp_path / "da.json").read_text())
    assert card["method"] == "domain_adaptation"
    assert card["backbone_hash"] == topology_hash(model.params)

    arrays, buffers, meta = load_model_arrays(path)
    twin = DomainAdaptationNet(IN_FRAMES, IN_BINS, seed=99)
    twin.load_arrays(arrays, buffers)
    np.testing.assert_array_equal(model.predict(x), twin.predict(x))
    emb_a = model.embed(Tensor(x[:, None, :, :]), train=False).data
    emb_b = twin.embed(Tensor(x[:, None, :, :]), train=False).data
    np.testing.assert_array_equal(emb_a, emb_b)


def test_baseline_checkpoint_roundtrip_and_input_validation(tmp_path):
    model = BaselineBiLstm(n_bins=24, seed=6)
    rng = rng_of(13)
    x = rng.standard_normal((5, 10, 24)).astype(np.float32)
    preds = model.predict(x)
    assert preds.shape == (5,)
    assert np.all((preds >= 0) & (preds < 9))
    with pytest.raises(ValueError):
        model.loss(rng.standard_normal((2, 10, 7)).astype(np.float32), np.zeros(2, np.int64))

    path = tmp_path / "b.ckpt"
    model.save(path)
    arrays, buffers, meta = load_model_arrays(path)
    assert meta["method"] == "baseline_bilstm"
    twin = BaselineBiLstm(n_bins=24, seed=123)
    twin.load_arrays(arrays)
    np.testing.assert_array_equal(preds, twin.predict(x))


def test_episodic_losses_decrease_on_one_overfit_batch():
    """A few optimizer steps on one fixed episode must reduce each
    episodic training loss (smoke check that gradients are wired)."""
    from sonarfit.nn import AdamState, adam_step

    rng = rng_of(14)
    ep = Episode(
        support_x=rng.standard_normal((6, IN_FRAMES, IN_BINS)).astype(np.float32),
        support_y=np.repeat(np.arange(3), 2),
        query_x=rng.standard_normal((6, IN_FRAMES, IN_BINS)).astype(np.float32),
        query_y=np.repeat(np.arange(3), 2),
        class_ids=np.array([2, 5, 7]),
    )
    for cls in (SiameseNet, ProtoNet, LocalNet):
        model = cls(IN_FRAMES, IN_BINS, seed=7)
        state = AdamState(lr=3e-3)
        first = last = None
        for _ in range(4):
            model.params.zero_grads()
            loss = model.episode_loss(ep, train=True)
            loss.backward()
            adam_step(model.params, state)
            first = loss.item() if first is None else first
            last = loss.item()
        assert last < first, f"{cls.__name__}: loss {first:.4f} -> {last:.4f}"
