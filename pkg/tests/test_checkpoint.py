import numpy as np
import pytest

from sskit.checkpoint import load_checkpoint, save_checkpoint


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    desc = {"type": "test", "nested": {"a": [1, 2]}, "alphabet": ["_", "a"]}
    tensors = {
        "w": rng.normal(size=(3, 4)),
        "b": rng.normal(size=7),
        "cube": rng.normal(size=(2, 3, 4)),
        "scalar": np.array(3.5),
    }
    path = tmp_path / "m.sskm"
    save_checkpoint(path, desc, tensors)
    desc2, tensors2 = load_checkpoint(path)
    assert desc2 == desc
    assert set(tensors2) == set(tensors)
    for name in tensors:
        assert tensors2[name].shape == np.asarray(tensors[name]).shape
        assert np.array_equal(tensors2[name], tensors[name])


def test_rejects_foreign_files(tmp_path):
    bad = tmp_path / "bad.sskm"
    bad.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(bad)


def test_float64_precision_preserved(tmp_path):
    value = np.array([1.0 / 3.0, np.pi, 1e-300])
    path = tmp_path / "p.sskm"
    save_checkpoint(path, {}, {"v": value})
    _, tensors = load_checkpoint(path)
    assert np.array_equal(tensors["v"], value)  # bit-exact
