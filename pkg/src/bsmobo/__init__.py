"""Batched multi-objective Bayesian optimization with MC-dropout network surrogates."""

__version__ = "0.1.0"
