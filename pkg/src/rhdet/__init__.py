"""High-precision numerics for the beta-minor and kernel sign-regularity checks."""

__version__ = "0.1.0"
