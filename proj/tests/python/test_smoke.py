import json

import numpy as np
import pytest

import vibxai

SMALL = {
    "signal": {"window_len": 512, "windows_per_class": 6, "sample_rate_hz": 2048},
    "model": {"conv_blocks": [{"filters": 4, "kernel_size": 5, "pool_size": 4}], "dense_hidden": 8},
    "train": {"epochs": 3, "lr": 0.001, "batch_size": 4},
    "lime": {"segment_counts": [4], "feature_counts": [2], "perturbations_per_config": 40},
}


def test_dataset_shapes():
    cfg = vibxai.SignalConfig()
    cfg.window_len = 256
    cfg.sample_rate_hz = 2048
    cfg.windows_per_class = 5
    train, test = vibxai.build_dataset(cfg)
    assert train["samples"].shape == (10, 256)
    assert sorted(set(train["labels"].tolist())) == [0, 1]
    assert np.all(np.diff(test["rpm"]) >= 0)


def test_unit_sine_spectrum():
    n, fs = 1024, 1024.0
    x = np.sin(2 * np.pi * 100 * np.arange(n) / fs)
    amp, df = vibxai.amplitude_spectrum(x, fs, "rect")
    assert df == pytest.approx(1.0)
    assert amp[100] == pytest.approx(1.0, abs=1e-12)
    amp_h, _ = vibxai.amplitude_spectrum(x, fs)
    assert amp_h[100] == pytest.approx(1.0, abs=1e-12)


def test_order_map_tracks_rpm():
    fs, n = 4096.0, 4096
    rpm = np.arange(600.0, 2401.0, 300.0)
    t = np.arange(n) / fs
    samples = np.stack([np.sin(2 * np.pi * 2 * r / 60 * t) for r in rpm])
    o_max = vibxai.default_order_max(fs, rpm.max())
    m = vibxai.order_rpm_map(samples, rpm, fs, o_max, 2048)
    peaks = m["values"].argmax(axis=1)
    assert np.all(np.abs(peaks - round(2 / m["bin_width"])) <= 1)


def test_render_viridis_ends():
    img = vibxai.render(np.array([[0.0, 1.0]]), cell_width=2, cell_height=3)
    assert img.shape == (3, 4, 3)
    assert img.dtype == np.uint8
    assert tuple(img[0, 0]) == (68, 1, 84)
    assert tuple(img[0, 3]) == (253, 231, 37)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        vibxai.Config.from_json('{"train": {"epoch": 3}}')
    cfg = vibxai.Config.from_json(json.dumps(SMALL))
    assert json.loads(cfg.to_json())["train"]["epochs"] == 3


def test_pipeline_round_trip(tmp_path):
    cfg = vibxai.Config.from_json(json.dumps(SMALL), str(tmp_path))
    vibxai.cmd_generate(cfg)
    maps, _ = vibxai.cmd_transform(cfg, "frequency")
    (ckpt_path,), log = vibxai.cmd_train(cfg, "frequency")
    assert "test accuracy" in log
    ck = vibxai.load_checkpoint(ckpt_path)
    assert ck.input_len == 256

    rows = np.abs(np.random.default_rng(0).normal(size=(3, 256)))
    probs = ck.predict(rows)
    assert probs.shape == (3, 2)
    assert np.allclose(probs.sum(axis=1), 1.0)

    for method in ["gradcam", "gradcam_pp", "scorecam"]:
        sal = vibxai.explain(ck, rows[0], method)
        assert sal.shape == (256,)
        assert np.all(sal >= 0)
    lrp = vibxai.explain(ck, rows[0], "lrp_z")
    assert np.isfinite(lrp).all()

    (sal_path,), _ = vibxai.cmd_explain(cfg, "gradcam", "cutoff", "frequency")
    (ppm,), _ = vibxai.cmd_render(cfg, sal_path)
    with open(ppm, "rb") as f:
        assert f.read(2) == b"P6"
