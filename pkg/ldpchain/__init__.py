"""Empirical-measure large deviations for Markov chains on R^d: maps, metrics, classes, estimators."""

__version__ = "0.4.0"
