import math

import pytest

from stirapsim import DecayParams, FieldToScheme, LevelScheme, Variant, scheme_from_field


def test_scheme_from_field_zero():
    scheme, raman = scheme_from_field(0.0)
    assert scheme.ground_splitting == 0.0
    assert scheme.excited_splitting == 0.0
    assert raman == 0.0
    assert scheme.variant is Variant.FOUR_LEVEL_META


def test_scheme_from_field_02_tesla():
    scheme, raman = scheme_from_field(0.2)
    assert scheme.ground_splitting == pytest.approx(8.2, abs=1e-12)
    assert scheme.excited_splitting == pytest.approx(3.2, abs=1e-12)
    assert raman == pytest.approx(0.08, abs=1e-12)


def test_scheme_from_field_05_tesla():
    scheme, raman = scheme_from_field(0.5)
    assert scheme.ground_splitting == pytest.approx(20.5, abs=1e-12)
    assert scheme.excited_splitting == pytest.approx(8.0, abs=1e-12)
    assert raman == pytest.approx(0.2, abs=1e-12)


def test_scheme_from_field_negative_rejected():
    with pytest.raises(ValueError):
        scheme_from_field(-0.1)


def test_field_ratio_exact_16_41():
    for b in (0.05, 0.2, 0.35, 0.5, 1.0):
        scheme, _ = scheme_from_field(b)
        assert scheme.excited_splitting / scheme.ground_splitting == pytest.approx(
            16.0 / 41.0, rel=1e-15
        )
        # rounded 2.5 ratio within 2.5 percent
        assert scheme.ground_splitting / scheme.excited_splitting == pytest.approx(2.5, rel=0.025)


def test_from_ground_splitting_exact_25():
    scheme = LevelScheme.from_ground_splitting(7.1)
    assert scheme.excited_splitting == pytest.approx(7.1 / 2.5, rel=1e-12)
    assert scheme.n_levels == 5


def test_level_counts():
    assert LevelScheme(Variant.THREE_LEVEL).n_levels == 3
    assert LevelScheme(Variant.THREE_LEVEL).labels == ("1", "2", "3")
    s = LevelScheme(Variant.FOUR_LEVEL_META, 7.1, 2.84)
    assert s.n_levels == 5
    assert s.labels == ("1", "2", "3", "4", "m")


def test_scheme_validation():
    with pytest.raises(ValueError):
        LevelScheme(Variant.FOUR_LEVEL_META, ground_splitting=-1.0)
    with pytest.raises(ValueError):
        LevelScheme(Variant.FOUR_LEVEL_META, 7.1, excited_splitting=-0.1)
    with pytest.raises(ValueError):
        LevelScheme(Variant.THREE_LEVEL, dipole_weak_ratio=0.0)
    with pytest.raises(ValueError):
        LevelScheme(Variant.THREE_LEVEL, dipole_weak_ratio=1.2)
    LevelScheme(Variant.THREE_LEVEL, dipole_weak_ratio=1.0)  # boundary allowed


def test_decay_validation():
    with pytest.raises(ValueError):
        DecayParams(excited_lifetime=0.0)
    with pytest.raises(ValueError):
        DecayParams(meta_lifetime=-5.0)
    with pytest.raises(ValueError):
        DecayParams(meta_branch=1.5)
    with pytest.raises(ValueError):
        DecayParams(optical_dephasing=-1e-3)
    d = DecayParams.disabled()
    assert math.isinf(d.excited_lifetime)
    assert d.optical_dephasing == 0.0
    assert d.spin_dephasing == 0.0


def test_field_conversion_validation():
    with pytest.raises(ValueError):
        FieldToScheme(ground_per_tesla=0.0)
    conv = FieldToScheme(ground_per_tesla=40.0, excited_per_tesla=20.0, raman_fwhm_per_tesla=0.3)
    scheme, raman = scheme_from_field(0.1, conv)
    assert scheme.ground_splitting == pytest.approx(4.0)
    assert raman == pytest.approx(0.03)
