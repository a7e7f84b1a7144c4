import numpy as np
import pytest

import ad1d


def test_downsample_keeps_minimum():
    x = np.array([5, 3, 9, 1, 7, 8, 2, 6], dtype=np.float32)
    y = ad1d.binning_min_downsample(x, 4)
    assert y.shape == (4,)
    assert y.min() == x.min()
    assert set(y.tolist()) <= set(x.tolist())


def test_prepare_input_length_and_range():
    x = np.linspace(20, 45, 1900, dtype=np.float32)
    y = ad1d.prepare_input(x, 416)
    assert y.shape == (416,)
    assert 0.0 <= y.min() and y.max() <= 1.0


def test_iou_1d():
    assert ad1d.iou_1d(0.5, 0.2, 0.5, 0.2) == pytest.approx(1.0)
    assert ad1d.iou_1d(0.2, 0.1, 0.8, 0.1) == 0.0
    assert ad1d.iou_1d(0.5, 0.2, 0.55, 0.2) == pytest.approx(0.15 / 0.25)


def test_synthetic_is_seeded():
    a = ad1d.generate_synthetic(7, 5)
    b = ad1d.generate_synthetic(7, 5)
    assert len(a) == 5
    for s, t in zip(a, b):
        assert np.array_equal(s.values, t.values)
        assert [(x.cls, x.center, x.width) for x in s.annotations] == [
            (x.cls, x.center, x.width) for x in t.annotations
        ]


def test_dataset_round_trip(tmp_path):
    data = ad1d.generate_synthetic(3, 4)
    path = str(tmp_path / "d.json")
    ad1d.save_dataset(path, data)
    back = ad1d.load_dataset(path)
    assert len(back) == 4
    assert np.allclose(back[0].values, data[0].values)


def test_model_shapes_and_weights_round_trip(tmp_path):
    model = ad1d.Model.create(seed=4)
    assert model.parameter_count <= 100_000
    assert model.input_size == 416
    assert list(model.class_names) == list(ad1d.CLASS_NAMES)
    path = str(tmp_path / "m.ad1d")
    model.save(path)
    back = ad1d.Model.load(path)
    x = ad1d.generate_synthetic(1, 1)[0].values
    cfg = ad1d.DetectorConfig()
    cfg.conf_threshold = 0.01
    a = model.detect(x, cfg)
    b = back.detect(x, cfg)
    assert [(d.cls, d.confidence, d.center) for d in a] == [(d.cls, d.confidence, d.center) for d in b]


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        ad1d.Model.load(str(tmp_path / "missing.ad1d"))
    with pytest.raises(ValueError):
        ad1d.binning_min_downsample(np.zeros((2, 2), dtype=np.float32), 1)


def test_short_training_run():
    data = ad1d.generate_synthetic(11, 8)
    model = ad1d.Model.create(anchors=ad1d.compute_anchors(data), seed=2)
    best, batches = ad1d.train(data, [], model, "max_batches 5\nbatch_size 4\nburn_in 2\naugment false")
    assert batches == 5
    report = best.evaluate(data)
    assert 0.0 <= report["map50"] <= 1.0
    assert set(report["classes"]) == set(ad1d.CLASS_NAMES)
