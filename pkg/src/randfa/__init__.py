"""Automaton certificates for property (FA) of random groups in the density model."""

__version__ = "0.1.0"
