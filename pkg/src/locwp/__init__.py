"""Wasserstein-p CLT certificates for sums of locally dependent variables."""

__version__ = "0.1.0"
