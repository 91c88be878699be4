import math

import numpy as np
import pytest

import prestomae as pm


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    ds = pm.synthesize(n_samples=48, n_classes=4, seed=11)
    cfg = pm.ModelConfig(depth=1, width=32, n_heads=4)
    ckpt, losses = pm.pretrain(ds, cfg, epochs=2, batch_size=32, seed=1)
    return ds, cfg, ckpt, losses


def test_synthesize_is_deterministic():
    a = pm.synthesize(n_samples=10, seed=3)
    b = pm.synthesize(n_samples=10, seed=3)
    assert len(a) == 10
    assert a.labels == b.labels


def test_pts_round_trip(tmp_path):
    ds = pm.synthesize(n_samples=6, dropout=0.2, seed=4)
    path = str(tmp_path / "data.pts")
    pm.write_pts(path, ds)
    loaded = pm.read_pts(path)
    assert loaded.labels == ds.labels


def test_pts_bad_magic(tmp_path):
    path = tmp_path / "bad.pts"
    path.write_bytes(b"NOTMAGICxxxxxxxxxxxxxxxx")
    with pytest.raises(pm.IoError):
        pm.read_pts(str(path))


def test_pretrain_reports_finite_losses(small_run):
    _, _, ckpt, losses = small_run
    assert len(losses) == 2
    assert all(math.isfinite(x) for x in losses)
    assert ckpt.n_params > 0


def test_checkpoint_round_trip(small_run, tmp_path):
    _, _, ckpt, _ = small_run
    path = str(tmp_path / "model.ckpt")
    pm.write_checkpoint(path, ckpt)
    loaded = pm.read_checkpoint(path)
    assert loaded.n_params == ckpt.n_params
    assert loaded.config.width == 32


def test_embed_shape_and_months(small_run):
    ds, cfg, ckpt, _ = small_run
    emb = pm.embed(ckpt, ds)
    assert emb.shape == (len(ds), cfg.width)
    assert np.isfinite(emb).all()
    partial = pm.embed(ckpt, ds, months=6)
    assert partial.shape == emb.shape
    assert not np.allclose(partial, emb)


def test_probe_and_aggregate(small_run):
    ds, cfg, ckpt, _ = small_run
    f1 = pm.validate_probe(ckpt, ds)
    assert 0.0 <= f1 <= 1.0
    desc = pm.aggregate_image(ckpt, ds)
    assert len(desc) == 2 * cfg.width


def test_param_and_flop_accounting():
    total, encoder = pm.count_params(pm.ModelConfig())
    assert abs(total / 1e6 - 0.81) < 0.081
    assert abs(encoder / 1e6 - 0.40) < 0.040
    full = pm.count_flops(pm.ModelConfig(), "full", with_decoder=True)
    assert abs(full / 1e6 - 88.94) < 0.15 * 88.94
    assert pm.count_flops(pm.ModelConfig(), "rgb") < pm.count_flops(pm.ModelConfig(), "ms")
