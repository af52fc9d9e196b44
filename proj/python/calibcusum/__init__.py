"""Calibration CUSUM monitoring of probability predictions."""

from ._calibcusum import *  # noqa: F401,F403
from ._calibcusum import __version__  # noqa: F401
