import numpy as np
import pytest
from hypothesis import settings

from eatr import dsp, sim

# wall-clock deadlines are meaningless on a contended 2-core box
settings.register_profile("no_deadline", deadline=None)
settings.load_profile("no_deadline")


@pytest.fixture(scope="session")
def radar():
    return dsp.RadarConfig()


def point_script(d_m: float, v_mps: float, duration_s: float = 0.2,
                 amplitude: float = 1.0, noise_snr_db: float = float("inf"),
                 phase0: float = 0.0) -> sim.MealScript:
    """Bare scene with one constant-kinematics scatterer; no torso, no clutter."""
    scat = sim.Scatterer(amplitude, lambda t: (d_m, v_mps), phase0)
    return sim.MealScript(duration_s=duration_s, clutter=(), torso_amplitude=0.0,
                          noise_snr_db=noise_snr_db, extra_scatterers=(scat,))


def empty_script(duration_s: float, noise_snr_db: float) -> sim.MealScript:
    return sim.MealScript(duration_s=duration_s, clutter=(), torso_amplitude=0.0,
                          noise_snr_db=noise_snr_db)


def rd_argmax(frame: np.ndarray) -> tuple[int, int]:
    d, r = np.unravel_index(np.argmax(frame), frame.shape)
    return int(d), int(r)
