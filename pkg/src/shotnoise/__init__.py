"""Ruin probabilities for a risk model with Markovian shot-noise claim intensity."""

__version__ = "0.1.0"
