"""Qubit-field lattice simulations: sine-Gordon field coupled to two-level systems."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
