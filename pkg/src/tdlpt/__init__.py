"""Time-dependent logarithmic perturbation theory."""

__version__ = "0.1.0"
