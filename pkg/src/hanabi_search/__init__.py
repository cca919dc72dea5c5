"""Exact-belief Monte Carlo search for cooperative Hanabi.

Subpackages by role: :mod:`core` is the game engine, :mod:`blueprints`
the fixed policies search improves on, :mod:`beliefs` exact Bayesian hand
tracking, :mod:`search` single- and multi-agent search, :mod:`oracle`
brute-force ground truth on tiny games and :mod:`harness` the experiment
runner.
"""

from .core import GameConfig, mini_config, new_game
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["GameConfig", "mini_config", "new_game", "BACKEND", "__version__"]
