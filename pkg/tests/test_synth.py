import numpy as np
import pytest

from gridpulse import GridSpec, SynthConfig, acf, generate, hourly, pearson
from gridpulse.synth import generate_cube_values, radial_level

from conftest import build_synth_cube

HOUR = 3_600_000


def test_bitwise_reproducible():
    cfg = SynthConfig(grid=GridSpec(4, 4), days=2, seed=3)
    assert generate(cfg) == generate(cfg)
    other = generate(SynthConfig(grid=GridSpec(4, 4), days=2, seed=4))
    assert other != generate(cfg)


def test_flat_config_identical_cells():
    cfg = SynthConfig(grid=GridSpec(3, 3), days=2, noise_sigma=0.0, gap_rate=0.0, center_boost=0.0)
    values, dropped = generate_cube_values(cfg)
    assert not dropped.any()
    flat = values.reshape(9, -1)
    assert (flat == flat[0]).all()
    assert pearson(flat[0], flat[5]) == 1.0


def test_gap_rate():
    cfg = SynthConfig(grid=GridSpec(5, 5), days=10, bin_width_ms=HOUR, gap_rate=0.1, seed=21)
    n_expected = 25 * 10 * 24
    missing = 1 - len(generate(cfg)) / n_expected
    assert abs(missing - 0.1) <= 0.02


def test_center_brighter_than_corners():
    cfg = SynthConfig(center_boost=3.0, seed=1)
    values, _ = generate_cube_values(cfg)
    totals = values.sum(axis=2)
    center = totals[5, 5]
    for r, c in [(0, 0), (0, 9), (9, 0), (9, 9)]:
        assert center > totals[r, c]


def test_non_negative():
    values, _ = generate_cube_values(SynthConfig(base_amplitude=0.1, center_boost=0.0, noise_sigma=5.0, days=1))
    assert (values >= 0).all() and (values == 0).any()


def test_three_bands_layout():
    level = radial_level(GridSpec(10, 10), bands=3)
    assert sorted(np.unique(level).tolist()) == [0.0, 0.5, 1.0]
    assert np.bincount((level * 2).astype(int).ravel()).tolist() == [16, 52, 32]


def test_noise_free_acf_peak():
    cfg = SynthConfig(grid=GridSpec(3, 3), days=8, noise_sigma=0.0, gap_rate=0.0)
    cube = hourly(build_synth_cube(cfg))
    for r in range(3):
        for c in range(3):
            res = acf(cube.series(r, c), 168)
            assert res.argmax(1, 168) == 24
            assert res.peaks()[0] == 24


def test_two_peak_profile():
    cfg = SynthConfig(grid=GridSpec(2, 2), days=1, profile="two_peak", noise_sigma=0.0, gap_rate=0.0)
    values, _ = generate_cube_values(cfg)
    assert (values > 0).all()


@pytest.mark.parametrize("kwargs", [dict(days=0), dict(gap_rate=1.0), dict(bands=1), dict(noise_sigma=-1),
                                    dict(bin_width_ms=7 * 60_000 * 1000), dict(profile="square")])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)
