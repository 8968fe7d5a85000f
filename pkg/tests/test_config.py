"""Config defaults, presets, validation and the JSON round trip."""

import json

import pytest

from sfsynth.config import (
    ExperimentConfig,
    desk_config,
    full_config,
    load_config,
)


def test_full_circular_defaults():
    cfg = full_config("circular")
    assert cfg.n_loudspeakers == 64
    assert cfg.array_radius == 1.0
    assert cfg.freq_count == 63
    assert cfg.freq_grid().frequencies[-1] == pytest.approx(1472.0)
    assert cfg.lam == 1e-2
    assert cfg.lambda_abs == 25.0 and cfg.lambda_phase == 1.0
    assert cfg.learning_rate == 1e-4
    assert cfg.max_epochs == 5000 and cfg.patience == 100
    cfg.validate()


def test_full_linear_defaults():
    cfg = full_config("linear")
    assert cfg.array_spacing == 0.0625
    assert cfg.control_target == 660
    assert cfg.test_shift == 0.08
    area = cfg.listening_area()
    assert area.kind == "rectangle"
    assert area.xmax - area.xmin == pytest.approx(2.0)
    assert area.ymax - area.ymin == pytest.approx(2.0)
    assert area.xmax == pytest.approx(cfg.array_x0 - 0.2)
    cfg.validate()


def test_desk_presets_validate():
    for family in ("circular", "linear"):
        cfg = desk_config(family)
        cfg.validate()
        assert cfg.n_loudspeakers == 16
        assert cfg.n_remove == 8
        assert cfg.freq_count == 15
        assert cfg.freq_grid().frequencies[-1] == pytest.approx(368.0)
        assert cfg.max_epochs <= 300


def test_desk_circular_split_sizes():
    cfg = desk_config("circular")
    split = cfg.source_split()
    assert len(split.train) == 256
    assert len(split.val) == 64
    assert len(split.test) == 64


def test_config_roundtrip():
    cfg = desk_config("circular")
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


def test_config_hash_changes_with_content():
    a = desk_config("circular")
    from dataclasses import replace
    b = replace(a, lam=2e-2)
    assert a.config_hash() != b.config_hash()


def test_partial_override_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"n_remove": 8, "n_loudspeakers": 16,
                             "freq_count": 15}))
    cfg = load_config(p, scale="desk")
    assert cfg.n_loudspeakers == 16
    assert cfg.listening_radius == 0.8   # desk preset retained


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"no_such_option": 1}))
    with pytest.raises(ValueError):
        load_config(p, scale="desk")


def test_validation_failures():
    from dataclasses import replace
    cfg = desk_config("circular")
    with pytest.raises(ValueError):
        replace(cfg, n_remove=16).validate()
    with pytest.raises(ValueError):
        replace(cfg, methods=("mr", "nope")).validate()
    # an active count too small for the network is diagnosed up front
    with pytest.raises(ValueError):
        replace(cfg, n_remove=10).validate()
    # dropping cnn lifts the network constraint
    replace(cfg, n_remove=10, methods=("mr", "pm")).validate()
    with pytest.raises(ValueError):
        replace(cfg, source_radius_min=0.5).validate()


def test_mr_listening_radius():
    circ = desk_config("circular")
    assert circ.mr_listening_radius() == pytest.approx(0.8)
    lin = desk_config("linear")
    # bounding radius of the rectangle's corners from the origin
    assert lin.mr_listening_radius() == pytest.approx((1.2 ** 2 + 1) ** 0.5)
