"""Resonance near border-collision bifurcations of piecewise-smooth continuous maps."""

__version__ = "0.1.0"
