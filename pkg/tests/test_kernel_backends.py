import numpy as np
import pytest

from stirapsim import DecayParams, DriveConfig, LevelScheme, PulsePair, Variant, evolve
from stirapsim.kernel import available_backends, get_backend

HAVE_COMPILED = "compiled" in available_backends()

pytestmark = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel not built")


def _cfg(variant):
    if variant is Variant.THREE_LEVEL:
        scheme = LevelScheme(Variant.THREE_LEVEL)
    else:
        scheme = LevelScheme(Variant.FOUR_LEVEL_META, ground_splitting=4.55, excited_splitting=1.82)
    pair = PulsePair(peak_rabi_strong=0.8, intensity_fwhm=6.0, delay=-5.0)
    return DriveConfig(scheme=scheme, pair=pair, decay=DecayParams(),
                       optical_detuning=0.3, two_photon_detuning=-0.1)


@pytest.mark.parametrize("variant", [Variant.THREE_LEVEL, Variant.FOUR_LEVEL_META])
def test_backend_parity(variant):
    cfg = _cfg(variant)
    win = (-45.0, 35.0)
    ts = np.linspace(win[0], win[1], 9)
    tc = evolve(cfg, window=win, t_samples=ts, backend="compiled")
    tp = evolve(cfg, window=win, t_samples=ts, backend="python")
    assert np.max(np.abs(tc.rhos - tp.rhos)) < 1e-10


def test_backend_selection():
    assert get_backend("compiled").BACKEND_NAME == "compiled"
    assert get_backend("python").BACKEND_NAME == "python"
    with pytest.raises(ValueError):
        get_backend("fortran")
