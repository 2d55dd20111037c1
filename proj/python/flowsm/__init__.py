"""Contextual-frequency NetFlow encoding, state-machine learning and anomaly detection."""

from flowsm._core import *  # noqa: F401,F403
from flowsm._core import __version__  # noqa: F401
