"""Stretched Brownian chain, its spectral solutions and the stochastic heat equation limit."""

__version__ = "0.1.0"
