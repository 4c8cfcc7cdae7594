"""Decentralized Bayesian learning over weighted digraphs."""

__version__ = "0.1.0"
