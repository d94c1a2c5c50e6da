"""Dataset schema: round trips, canonical serialization, error reporting."""

import json
from dataclasses import replace

import numpy as np
import pytest

from scashape.dataset import (SchemaError, camera_from_dict,
                              camera_to_dict, dumps_canonical, read_dataset,
                              write_dataset)
from scashape.experiments import (PressureGrid, SyntheticScenario,
                                  generate_grid)


def small_dataset(**overrides):
    sc = SyntheticScenario(pressures=PressureGrid(
        bend_pressures=(0.0, 12.0, 25.0), twist_pressures=(0.0, 20.0)),
        pixel_noise_sigma=0.0)
    return generate_grid(replace(sc, **overrides))


def test_write_then_read_round_trip(tmp_path):
    ds = small_dataset(seed=8)
    path = tmp_path / "ds.json"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert dumps_canonical(back.raw) == dumps_canonical(ds.raw)
    assert back.arm_length == ds.arm_length
    assert len(back.configs) == len(ds.configs)


def test_canonical_serialization_is_stable():
    ds = small_dataset(seed=8)
    a = dumps_canonical(ds.raw)
    # key order must not matter
    shuffled = json.loads(a)
    b = dumps_canonical(dict(reversed(list(shuffled.items()))))
    assert a == b


def test_missing_required_key_names_the_key(tmp_path):
    ds = small_dataset(seed=8)
    raw = json.loads(dumps_canonical(ds.raw))
    del raw["configs"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaError, match="configs"):
        read_dataset(path)


def test_missing_scenario_key_names_the_key(tmp_path):
    ds = small_dataset(seed=8)
    raw = json.loads(dumps_canonical(ds.raw))
    del raw["scenario"]["camera"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaError, match="camera"):
        read_dataset(path)


def test_missing_config_key_names_the_key(tmp_path):
    ds = small_dataset(seed=8)
    raw = json.loads(dumps_canonical(ds.raw))
    del raw["configs"][0]["observations"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaError, match="observations"):
        read_dataset(path)


def test_unknown_extra_keys_are_preserved(tmp_path):
    ds = small_dataset(seed=8)
    raw = json.loads(dumps_canonical(ds.raw))
    raw["x_custom_annotation"] = {"origin": "unit test"}
    raw["configs"][0]["x_flag"] = True
    path = tmp_path / "extra.json"
    path.write_text(json.dumps(raw))
    back = read_dataset(path)
    assert back.raw["x_custom_annotation"] == {"origin": "unit test"}
    assert back.raw["configs"][0]["x_flag"] is True
    out = tmp_path / "extra2.json"
    write_dataset(back, out)
    assert json.loads(out.read_text())["x_custom_annotation"] == \
        {"origin": "unit test"}


def test_ground_truth_is_optional(tmp_path):
    ds = small_dataset(seed=8)
    raw = json.loads(dumps_canonical(ds.raw))
    for cfg in raw["configs"]:
        del cfg["true_tip"]
        del cfg["true_coeffs"]
    path = tmp_path / "no_truth.json"
    path.write_text(json.dumps(raw))
    back = read_dataset(path)
    assert not back.has_ground_truth()
    assert back.configs[0].true_tip is None


def test_camera_dict_round_trip(default_camera):
    back = camera_from_dict(camera_to_dict(default_camera))
    assert np.allclose(back.poly, default_camera.poly)
    assert np.allclose(back.affine, default_camera.affine)
    assert np.allclose(back.center, default_camera.center)
    assert tuple(back.image_size) == tuple(default_camera.image_size)
    assert back.fov == default_camera.fov


def test_observation_set_accessor(noiseless_dataset):
    _, ds = noiseless_dataset
    rec = ds.configs[0]
    obs = ds.observation_set(rec)
    assert len(obs.samples) == len(ds.marker_s)
    assert obs.radius == ds.arm_radius
    for sample in obs.samples:
        assert abs(np.linalg.norm(sample.y_r) - 1.0) < 1e-12
        assert abs(np.linalg.norm(sample.y_l) - 1.0) < 1e-12
