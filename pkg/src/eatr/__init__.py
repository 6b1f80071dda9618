"""FMCW radar eating/drinking gesture toolkit.

Pipeline: raw beat-signal cubes -> range-Doppler cubes -> 3D temporal
convolutional network -> frame-wise labels -> frame/segment metrics.
A point-scatterer meal simulator provides ground truth for all stages.
"""

__version__ = "0.1.0"

from . import dsp, io, metrics, sim, tcn, train  # noqa: F401
