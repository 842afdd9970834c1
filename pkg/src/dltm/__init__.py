"""Dynamic linear topic model with Polya-Gamma Gibbs sampling."""

__version__ = "0.1.0"
