"""Source-set protocols and dataset construction."""

import numpy as np
import pytest

from sfsynth.acoustics import FrequencyGrid, Source
from sfsynth.datasets import (
    build_dataset,
    control_pressures,
    gen_sources_circular,
    gen_sources_linear,
)
from sfsynth.geometry import (
    ListeningArea,
    decimate_array,
    make_circular_array,
    sample_control_points,
)
from sfsynth.renderers import synthesize


def test_circular_full_scale_counts():
    split = gen_sources_circular(20, 128, (1.5, 3.5), 0.05, seed=0,
                                 val_count=512)
    assert len(split.train) == 2048
    assert len(split.val) == 512
    assert len(split.test) == 2560


def test_circular_degenerate_range():
    split = gen_sources_circular(1, 4, (2.0, 2.0), 0.1, seed=1, val_count=1)
    pool = split.train + split.val
    assert len(pool) == 4
    for s in pool:
        assert s.rho == pytest.approx(2.0)
    for s in split.test:
        assert s.rho == pytest.approx(2.1)


def test_circular_deterministic():
    a = gen_sources_circular(3, 8, (1.5, 3.5), 0.05, seed=7)
    b = gen_sources_circular(3, 8, (1.5, 3.5), 0.05, seed=7)
    for sa, sb in zip(a.all_sources, b.all_sources):
        assert np.array_equal(sa.position, sb.position)


def test_circular_test_subsample():
    split = gen_sources_circular(4, 8, (1.5, 3.5), 0.05, seed=2,
                                 val_count=8, n_test=10)
    assert len(split.test) == 10


def test_circular_shift_is_radial():
    split = gen_sources_circular(2, 4, (2.0, 3.0), 0.05, seed=3, val_count=2)
    pool = {round(s.theta, 12) for s in split.train + split.val}
    for t in split.test:
        assert round(t.theta, 12) in pool


def test_split_disjointness():
    split = gen_sources_circular(5, 16, (1.5, 3.5), 0.05, seed=4)
    seen = set()
    for s in split.all_sources:
        key = (float(s.position[0]), float(s.position[1]))
        assert key not in seen
        seen.add(key)


def test_linear_counts_and_region():
    region = (1.2, 3.2, -2.0, 2.0)
    split = gen_sources_linear(20, 5, 25, region, 0.08, seed=5, x0=1.0)
    assert (len(split.train), len(split.val), len(split.test)) == (20, 5, 25)
    for s in split.train + split.val:
        assert region[0] <= s.position[0] <= region[1]
        assert region[2] <= s.position[1] <= region[3]
    # test sources are +x shifts
    pool_y = sorted(round(float(s.position[1]), 12)
                    for s in split.train + split.val)
    for t in split.test:
        assert round(float(t.position[1]), 12) in pool_y


def test_linear_tiny_counts():
    split = gen_sources_linear(1, 1, 2, (1.2, 3.2, -2, 2), 0.08, seed=6)
    assert len(split.all_sources) == 4
    keys = {tuple(s.position) for s in split.all_sources}
    assert len(keys) == 4


def test_linear_region_validation():
    with pytest.raises(ValueError):
        gen_sources_linear(2, 1, 1, (0.5, 3.0, -2, 2), 0.08, seed=0, x0=1.0)
    with pytest.raises(ValueError):
        gen_sources_linear(2, 1, 5, (1.2, 3.2, -2, 2), 0.08, seed=0)


@pytest.fixture(scope="module")
def small_dataset():
    arr = decimate_array(make_circular_array(16, 1.0), 8, seed=97)
    cp = sample_control_points(ListeningArea.disk((0, 0), 0.8, 0.04), 20,
                               clearance_from=arr)
    fg = FrequencyGrid.uniform(46.0, 23.0, 15)
    split = gen_sources_circular(2, 3, (1.6, 2.4), 0.05, seed=8, val_count=2)
    ds = build_dataset(arr, split, cp, fg, lam=1e-2, listening_radius=0.8)
    return arr, cp, fg, split, ds


def test_dataset_shapes(small_dataset):
    arr, cp, fg, split, ds = small_dataset
    rec = ds.train[0]
    assert rec.tensor.shape == (2 * arr.active_count, fg.k)
    assert rec.pressures.shape == (len(cp), fg.k)
    assert len(ds.all_records) == len(split.all_sources)
    ids = [r.source_id for r in ds.all_records]
    assert ids == sorted(ids)


def test_dataset_pressures_match_unit_monopole(small_dataset):
    # the stored ground truth equals synthesizing a unit source placed at
    # the record's position
    arr, cp, fg, split, ds = small_dataset
    rec = ds.val[0]
    from sfsynth.geometry import ArrayGeometry
    mono = ArrayGeometry(family="circular",
                         positions=rec.source.position[None, :],
                         active_mask=np.ones(1, dtype=bool),
                         radius=rec.source.rho,
                         angles=np.array([rec.source.theta]))
    for ki, omega in enumerate(fg.angular):
        ref = synthesize(mono, [1.0], cp, omega, fg.c)
        assert np.allclose(rec.pressures[:, ki], ref, rtol=1e-12)


def test_dataset_rebuild_identical(small_dataset):
    arr, cp, fg, split, ds = small_dataset
    ds2 = build_dataset(arr, split, cp, fg, lam=1e-2, listening_radius=0.8)
    for a, b in zip(ds.all_records, ds2.all_records):
        assert np.array_equal(a.tensor, b.tensor)
        assert np.array_equal(a.pressures, b.pressures)


def test_control_pressures_spectrum_applied():
    cp = sample_control_points(ListeningArea.disk((0, 0), 0.5, 0.04), 5)
    fg = FrequencyGrid.uniform(100.0, 100.0, 2)
    pos = np.array([2.0, 0.0])
    spec = np.array([2.0 + 0j, 1j])
    plain = control_pressures(Source(position=pos), cp, fg)
    scaled = control_pressures(Source(position=pos, spectrum=spec), cp, fg)
    assert np.allclose(scaled[:, 0], 2.0 * plain[:, 0])
    assert np.allclose(scaled[:, 1], 1j * plain[:, 1])
