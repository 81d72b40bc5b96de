import numpy as np
import pytest

from uvforge.color import LabStats, gamut_clamp_count, lab_to_rgb, lab_to_rgb_unclipped, rgb_to_lab, transfer_stats
from uvforge.exceptions import ShapeError
from uvforge.runlog import EventLog


def skin_like(seed: int, size: int = 16, base=(0.7, 0.5, 0.4), spread: float = 0.05) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.clip(np.array(base) + rng.normal(0.0, spread, (size, size, 3)), 0.0, 1.0)


def disk(size: int = 16) -> np.ndarray:
    yy, xx = np.mgrid[:size, :size]
    return (yy - size / 2) ** 2 + (xx - size / 2) ** 2 < (size / 2.5) ** 2


@pytest.mark.parametrize("grey", [0.0, 0.18, 0.5, 1.0])
def test_greys_have_no_chroma(grey):
    lab = rgb_to_lab(np.full(3, grey))
    assert abs(lab[1]) < 1e-6
    assert abs(lab[2]) < 1e-6


def test_white_and_black_lightness():
    assert rgb_to_lab(np.ones(3))[0] == pytest.approx(100.0, abs=1e-6)
    assert rgb_to_lab(np.zeros(3))[0] == pytest.approx(0.0, abs=1e-6)


def test_lab_inverts_rgb():
    rgb = np.random.default_rng(3).uniform(size=(64, 3))
    np.testing.assert_allclose(lab_to_rgb(rgb_to_lab(rgb)), rgb, atol=1e-9)


def test_out_of_gamut_lab_is_clipped():
    lab = np.array([[50.0, 120.0, -120.0]])
    assert gamut_clamp_count(lab_to_rgb_unclipped(lab)) > 0
    clipped = lab_to_rgb(lab)
    assert clipped.min() >= 0.0 and clipped.max() <= 1.0


def test_transfer_matches_reference_statistics():
    source = skin_like(0, base=(0.55, 0.45, 0.4), spread=0.08)
    reference = skin_like(1, base=(0.75, 0.55, 0.45), spread=0.03)
    mask = disk()
    result = transfer_stats(source, mask, reference, mask)
    matched = LabStats.of(result.lab, mask)
    expected = LabStats.of(rgb_to_lab(reference), mask)
    np.testing.assert_allclose(matched.mean, expected.mean, atol=1e-4)
    np.testing.assert_allclose(matched.std, expected.std, atol=1e-4)
    np.testing.assert_array_equal(result.texture[~mask], source[~mask])


def test_transfer_onto_itself_is_identity():
    source = skin_like(2)
    mask = disk()
    result = transfer_stats(source, mask, source, mask)
    assert result.clamped == 0
    np.testing.assert_allclose(result.scale, np.ones(3), atol=1e-12)
    np.testing.assert_allclose(result.texture, source, atol=1e-6)


def test_transfer_is_idempotent():
    source = skin_like(4, base=(0.6, 0.5, 0.45))
    reference = skin_like(5, base=(0.7, 0.52, 0.42), spread=0.04)
    mask = disk()
    once = transfer_stats(source, mask, reference, mask)
    assert once.clamped == 0
    twice = transfer_stats(once.texture, mask, reference, mask)
    np.testing.assert_allclose(twice.texture, once.texture, atol=1e-6)


def test_flat_source_maps_to_reference_mean():
    source = np.full((8, 8, 3), 0.5)
    mask = np.ones((8, 8), dtype=bool)
    reference = skin_like(6, size=8)
    log = EventLog()
    result = transfer_stats(source, mask, reference, mask, log=log)
    np.testing.assert_array_equal(result.scale, np.ones(3))
    assert log.of("color_flat_source")[0]["channels"] == [0, 1, 2]
    np.testing.assert_allclose(result.lab[mask], np.broadcast_to(result.reference.mean, (64, 3)), atol=1e-9)


def test_clamped_values_are_counted():
    source = skin_like(7, size=8, spread=0.2)
    reference = np.zeros((8, 8, 3))
    reference[::2] = [1.0, 0.0, 0.0]
    reference[1::2] = [0.0, 0.0, 1.0]
    mask = np.ones((8, 8), dtype=bool)
    log = EventLog()
    result = transfer_stats(source, mask, reference, mask, log=log)
    assert result.clamped > 0
    assert log.of("color_clamped")[0]["count"] == result.clamped
    assert result.texture.min() >= 0.0 and result.texture.max() <= 1.0


def test_transfer_rejects_bad_masks():
    source = skin_like(8)
    with pytest.raises(ValueError):
        transfer_stats(source, np.zeros((16, 16), dtype=bool), source, disk())
    with pytest.raises(ShapeError):
        transfer_stats(source, np.ones((8, 8), dtype=bool), source, disk())
