import math

import numpy as np
import pytest

import mastoid


@pytest.fixture(scope="module")
def phantom():
    return mastoid.generate_phantom(dims=(32, 32, 16), seed=3)


def test_phantom_shapes_and_ranges(phantom):
    pre, post, gt = phantom
    assert pre.shape == post.shape == gt.shape == (16, 32, 32)
    assert pre.dtype == np.float32
    assert 0.0 <= post.min() and post.max() <= 1.0
    assert set(np.unique(gt)) <= {0.0, 1.0}
    assert gt.sum() > 0


def test_scc_identities():
    rng = np.random.default_rng(0)
    a = rng.random((8, 8, 8), dtype=np.float32)
    b = rng.random((8, 8, 8), dtype=np.float32)
    assert mastoid.scc(a, a) == pytest.approx(1.0, abs=1e-9)
    assert mastoid.scc(a, -3 * a + 1) == pytest.approx(1.0, abs=1e-6)
    assert mastoid.scc(a, b) == pytest.approx(mastoid.scc(b, a), abs=1e-12)
    with pytest.raises(mastoid.NumericalError):
        mastoid.scc(a, np.zeros_like(a))


def test_loss_identity_value():
    rng = np.random.default_rng(1)
    v = rng.random((32, 64, 64), dtype=np.float32)
    delta = np.full_like(v, 1e-12)
    report = mastoid.loss(v, v, delta, lambda_smooth=0.0)
    beta = 0.0448 + 0.2856 + 0.3001 + 0.2363 + 0.1333
    assert report["msssim_cscc"] == pytest.approx(1 - 2 ** beta, abs=1e-6)
    assert len(report["per_scale"]) == 5


def test_gradient_shape_and_finiteness(phantom):
    pre, post, _ = phantom
    rng = np.random.default_rng(2)
    delta = 1 / (1 + np.exp(-(2 * rng.standard_normal(pre.shape) - 1)))
    delta = delta.astype(np.float32)
    report, grad = mastoid.loss_and_gradient(pre, post, delta)
    assert grad.shape == pre.shape
    assert math.isfinite(report["total"])
    assert np.all(np.isfinite(grad))


def test_unknown_variant_raises(phantom):
    pre, post, _ = phantom
    with pytest.raises(mastoid.ConfigError):
        mastoid.loss(pre, post, np.full_like(pre, 0.1), variant="ssim")


def test_short_optimization_and_metrics(phantom):
    pre, post, gt = phantom
    delta, trace, _ = mastoid.optimize(pre, post, max_iters=15)
    assert delta.shape == pre.shape
    assert trace[-1] < trace[0]
    metrics = mastoid.evaluate((delta >= 0.5).astype(np.float32), gt)
    assert set(metrics) == {"dice", "iou", "acc", "pre", "sen", "spe", "hd95", "asd"}
    if metrics["dice"] is not None and metrics["iou"] is not None:
        assert metrics["dice"] == pytest.approx(2 * metrics["iou"] / (1 + metrics["iou"]))


def test_evaluate_perfect_and_empty(phantom):
    _, _, gt = phantom
    perfect = mastoid.evaluate(gt, gt)
    assert perfect["dice"] == 1.0 and perfect["hd95"] == 0.0
    empty = mastoid.evaluate(np.zeros_like(gt), gt)
    assert empty["pre"] is None and empty["hd95"] is None


def test_registration_identity(phantom):
    pre, _, _ = phantom
    r = mastoid.register_rigid(pre, pre, levels=2)
    assert np.allclose(r["trans_mm"], 0.0, atol=0.2)
    assert r["registered"].shape == pre.shape


def test_marching_cubes_single_voxel():
    v = np.zeros((3, 3, 3), dtype=np.float32)
    v[1, 1, 1] = 1.0
    verts, tris, area, volume = mastoid.marching_cubes(v, 0.5)
    assert verts.shape == (6, 3)
    assert tris.shape == (8, 3)
    assert area > 0 and volume > 0
