"""Metadata-informed Bayesian relational models fitted by Gibbs sampling."""

__version__ = "0.1.0"
