import json
import math

import numpy as np
import pytest

import ctnet


def test_softmax_rows_sum_and_argmax():
    rng = np.random.default_rng(1)
    s = rng.uniform(-1, 1, (4, 6))
    p = ctnet.softmax_rows(s, 2.0)
    z = np.exp(2.0 * (s - s.max(axis=1, keepdims=True)))
    np.testing.assert_allclose(p, z / z.sum(axis=1, keepdims=True), rtol=1e-12)
    assert (p.argmax(axis=1) == s.argmax(axis=1)).all()


def test_bilinear_sample():
    img = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1)
    out = ctnet.bilinear_sample(img, np.array([[[0.5, 0.5], [-5.0, -5.0]]]))
    np.testing.assert_allclose(out.ravel(), [2.5, 0.0])


def test_dense_warp_permutes_with_saturated_rows():
    rng = np.random.default_rng(2)
    perm = rng.permutation(9)
    scores = np.zeros((9, 9))
    scores[np.arange(9), perm] = 1.0
    x = rng.uniform(0, 1, (3, 3, 2))
    out = ctnet.dense_warp_scores(scores, x, 3, 3, 100.0)
    np.testing.assert_allclose(out.reshape(9, 2), x.reshape(9, 2)[perm], atol=1e-9)


def test_tps_identity_and_degenerate():
    g = np.linspace(4, 59, 5)
    src = np.array([[x, y] for y in g for x in g])
    t = ctnet.tps_fit(src, src, 5)
    img = np.random.default_rng(3).uniform(0, 1, (64, 64, 3))
    np.testing.assert_allclose(t.apply(img), img, atol=1e-5)
    assert ctnet.second_order_constraint(src, src, 5) == pytest.approx(0.0, abs=1e-6)
    bad = src.copy()
    bad[1] = bad[0]
    with pytest.raises(ctnet.FitError):
        ctnet.tps_fit(bad, bad, 5)


def test_fusion_and_regularizer():
    rng = np.random.default_rng(4)
    a, b = rng.uniform(0, 1, (2, 5, 4, 3))
    assert np.array_equal(ctnet.fuse_attention(a, b, np.ones((5, 4))), a)
    assert np.array_equal(ctnet.fuse_attention(a, b, np.zeros((5, 4))), b)
    assert ctnet.attention_regularizer(np.ones((5, 4))) == 0.0
    assert ctnet.attention_regularizer(np.zeros((5, 4))) == 1.0


def test_losses():
    assert ctnet.total_loss([1.0] * 8) == 53.0
    rng = np.random.default_rng(5)
    a, b = rng.uniform(-1, 1, (2, 4, 5))
    assert ctnet.l1_loss(a, b) == pytest.approx(np.abs(a - b).mean(), rel=1e-12)
    f = rng.uniform(-1, 1, (3, 4, 2))
    flat = f.reshape(-1, 2)
    np.testing.assert_allclose(ctnet.gram_matrix(f), flat.T @ flat / 12, rtol=1e-12)
    assert ctnet.style_loss([f], [f]) == 0.0


def test_metrics():
    x = np.random.default_rng(6).uniform(0, 1, (16, 16))
    assert ctnet.ssim(x, x) == pytest.approx(1.0, abs=1e-9)
    assert ctnet.inception_score(np.full((4, 5), 0.2)) == pytest.approx(1.0, abs=1e-9)
    assert ctnet.inception_score(np.eye(4)) == pytest.approx(4.0, abs=1e-9)
    want = math.exp(0.8 * math.log(1.6) + 0.2 * math.log(0.4))
    assert ctnet.inception_score(np.array([[0.8, 0.2], [0.2, 0.8]])) == pytest.approx(want, rel=1e-12)


def test_errors_map_to_classes():
    with pytest.raises(ctnet.ShapeError):
        ctnet.l1_loss(np.zeros((2, 2)), np.zeros((3, 2)))
    assert issubclass(ctnet.ShapeError, ctnet.ValidationError)
    with pytest.raises(ctnet.NumericalError):
        ctnet.l1_loss(np.array([np.nan]), np.array([0.0]))


def test_pipeline_on_fixtures(tmp_path):
    ctnet.write_fixture("identity", tmp_path / "id")
    report, manifest = ctnet.run_pipeline(tmp_path / "id", tmp_path / "out1")
    assert report["warp_ssim"] >= 0.99
    _, again = ctnet.run_pipeline(tmp_path / "id", tmp_path / "out2")
    assert json.dumps(manifest, sort_keys=True) == json.dumps(again, sort_keys=True)

    ctnet.write_fixture("smoke", tmp_path / "smoke")
    fields = json.loads((tmp_path / "smoke" / "model_keypoints.json").read_text())
    field, present = ctnet.distance_fields(json.dumps(fields))
    assert field.shape == (64, 64, 18)
    assert field.min() >= 0.0 and field.max() <= 1.0
    assert any(present)
