"""Trustworthy PM2.5 evaluation: spatial CV, split conformal intervals,
KS covariate-shift diagnostics, reliability flags and monitor ranking."""

__version__ = "0.1.0"
